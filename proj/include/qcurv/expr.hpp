#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qcurv/rational.hpp"

// Closed-form scalar expressions: immutable DAG nodes, exact symbolic
// differentiation, semantics-preserving simplification, and a compiled
// tape evaluator for bulk pointwise evaluation.  Constants are exact
// rationals unless a float literal poisons them; exponents are always
// rational constants.

namespace qcurv {

enum class ExprKind : uint8_t {
  RationalConst,
  FloatConst,
  Coord,
  Param,
  Sum,
  Product,
  Quotient,
  IntPow,
  RatPow,
  Neg,
  Sin,
  Cos,
  Tan,
  Exp,
  Log,
  Sqrt,
};

class Expr;

struct ExprNode {
  ExprKind kind;
  Rational rat;                  // RationalConst
  double fval = 0.0;             // FloatConst
  int coord = -1;                // Coord
  std::string param;             // Param
  std::vector<Expr> kids;        // composite nodes
  long long pnum = 0;            // IntPow exponent / RatPow numerator
  long long pden = 1;            // RatPow denominator (> 1)
  size_t hash = 0;
};

// Value-semantic handle to a shared immutable node.  Child handles are
// reused on rewrites, so repeated subexpressions stay shared and all the
// algorithms below run on the DAG, not the unfolded tree.
class Expr {
 public:
  Expr();  // rational zero
  explicit Expr(std::shared_ptr<const ExprNode> p) : p_(std::move(p)) {}

  const ExprNode& node() const { return *p_; }
  const ExprNode* raw() const { return p_.get(); }
  ExprKind kind() const { return p_->kind; }
  size_t hash() const { return p_->hash; }
  bool same(const Expr& o) const { return p_.get() == o.p_.get(); }

 private:
  std::shared_ptr<const ExprNode> p_;
};

using ParamMap = std::map<std::string, double>;

struct ExprError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ExprError {
  size_t offset;
  ParseError(const std::string& what, size_t off)
      : ExprError(what + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// Domain failure during evaluation; carries the offending subexpression.
struct EvalError : ExprError {
  std::string subexpr;
  EvalError(const std::string& what, std::string sub)
      : ExprError(what + " in subexpression: " + sub), subexpr(std::move(sub)) {}
};

// Constructors.  Each applies cheap local rewrites eagerly: exact constant
// folding, 0/1 absorption, flattening of nested sums and products, and
// integer-power merging, so trees stay small as they are built.
Expr rational_const(const Rational& r);
Expr integer(long long v);
Expr float_const(double v);
Expr coordinate(int index);
Expr parameter(const std::string& name);
Expr sum_of(std::vector<Expr> terms);
Expr product_of(std::vector<Expr> factors);
Expr quotient(Expr a, Expr b);
Expr int_pow(Expr base, long long k);
Expr rat_pow(Expr base, long long num, long long den);
Expr negate(Expr e);
Expr sin_of(Expr e);
Expr cos_of(Expr e);
Expr tan_of(Expr e);
Expr exp_of(Expr e);
Expr log_of(Expr e);
Expr sqrt_of(Expr e);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& e);

bool is_zero_literal(const Expr& e);
bool is_one_literal(const Expr& e);

// Structural equality on the DAG (hash fast-reject, pointer fast-accept).
bool structurally_equal(const Expr& a, const Expr& b);

// Number of unique nodes reachable from e.
size_t node_count(const Expr& e);

// Precedence-aware printing; output parses back to the same value.
// coord_names supplies display names for coordinate indices (default x1..xn).
std::string to_string(const Expr& e,
                      const std::vector<std::string>* coord_names = nullptr);

// One-off evaluation (memoized over the DAG).  Throws EvalError on domain
// failures: division by zero, log of a non-positive value, sqrt or a
// fractional power of a negative value.
double eval(const Expr& e, std::span<const double> point,
            const ParamMap* params = nullptr);

// Exact partial derivative with respect to coordinate `coord`.
Expr diff(const Expr& e, int coord);

// Shares derivative and simplification memos across many calls against the
// same family of expressions (one instance per chart).  Not thread-safe.
class DiffCache {
 public:
  Expr d(const Expr& e, int coord);
  Expr simplified(const Expr& e);

 private:
  std::map<std::pair<const ExprNode*, int>, std::pair<Expr, Expr>> dmemo_;
  std::map<const ExprNode*, std::pair<Expr, Expr>> smemo_;
};

// Fixpoint of constant folding, 0/1 absorption, like-term collection and
// power merging, guarded so a pass that grows the node count is discarded.
// Semantics-preserving on in-domain points.
Expr simplify(const Expr& e);

// Parses the documented expression grammar (docs/expression-grammar.md).
// Identifiers resolve against coord_names first, then param_names; unknown
// names, malformed syntax and non-constant exponents raise ParseError with
// a byte offset.
Expr parse_expression(std::string_view text,
                      const std::vector<std::string>& coord_names,
                      const std::vector<std::string>& param_names = {});

// Compiled tape over the shared DAG of several roots, with structural
// deduplication (common subexpressions evaluate once).  Evaluation order
// matches the recursive evaluator exactly, so both produce identical
// floats.  A compiled program is immutable; concurrent eval calls need
// only distinct scratch buffers.
class Program {
 public:
  static Program compile(const std::vector<Expr>& roots);

  size_t num_outputs() const { return outputs_.size(); }
  size_t num_slots() const { return instrs_.size(); }
  const std::vector<std::string>& param_names() const { return param_names_; }

  // Resolves parameter values in slot order; missing names throw ExprError.
  std::vector<double> bind(const ParamMap& params) const;

  void eval(std::span<const double> point, std::span<const double> bound_params,
            std::vector<double>& scratch, std::span<double> out) const;

  std::vector<double> eval_all(std::span<const double> point,
                               const ParamMap& params = {}) const;

 private:
  struct Instr {
    ExprKind op;
    double c0 = 0.0;       // constant value
    int coord = -1;        // Coord: point index; Param: bound slot
    int a = -1;            // unary operand / quotient numerator / pow base
    int b = -1;            // quotient denominator
    long long pnum = 0;    // IntPow / RatPow exponent
    long long pden = 1;
    int argpos = 0;        // Sum/Product: range into args_
    int argcnt = 0;
  };

  std::vector<Instr> instrs_;
  std::vector<int> args_;
  std::vector<int> outputs_;
  std::vector<std::string> param_names_;
  std::vector<Expr> srcs_;  // per-slot source node, for domain error reports
};

}  // namespace qcurv
