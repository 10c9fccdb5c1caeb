#include "qcurv/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace qcurv {

namespace {

size_t hash_mix(size_t h, size_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

size_t hash_bits(double v) {
  uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return std::hash<uint64_t>{}(b);
}

size_t node_hash(const ExprNode& n) {
  size_t h = std::hash<int>{}(static_cast<int>(n.kind));
  switch (n.kind) {
    case ExprKind::RationalConst:
      h = hash_mix(h, std::hash<long long>{}(n.rat.num()));
      h = hash_mix(h, std::hash<long long>{}(n.rat.den()));
      break;
    case ExprKind::FloatConst:
      h = hash_mix(h, hash_bits(n.fval));
      break;
    case ExprKind::Coord:
      h = hash_mix(h, std::hash<int>{}(n.coord));
      break;
    case ExprKind::Param:
      h = hash_mix(h, std::hash<std::string>{}(n.param));
      break;
    default:
      break;
  }
  h = hash_mix(h, std::hash<long long>{}(n.pnum));
  h = hash_mix(h, std::hash<long long>{}(n.pden));
  for (const Expr& k : n.kids) h = hash_mix(h, k.hash());
  return h;
}

}  // namespace

// -- node construction helpers ------------------------------------------------

static Expr make_node(ExprNode&& n) {
  n.hash = node_hash(n);
  return Expr(std::make_shared<const ExprNode>(std::move(n)));
}

static const Expr& expr_zero() {
  static const Expr z = [] {
    ExprNode n;
    n.kind = ExprKind::RationalConst;
    n.rat = Rational(0);
    return make_node(std::move(n));
  }();
  return z;
}

static const Expr& expr_one() {
  static const Expr o = [] {
    ExprNode n;
    n.kind = ExprKind::RationalConst;
    n.rat = Rational(1);
    return make_node(std::move(n));
  }();
  return o;
}

Expr::Expr() { *this = expr_zero(); }

Expr rational_const(const Rational& r) {
  if (r.is_zero()) return expr_zero();
  if (r.is_one()) return expr_one();
  ExprNode n;
  n.kind = ExprKind::RationalConst;
  n.rat = r;
  return make_node(std::move(n));
}

Expr integer(long long v) { return rational_const(Rational(v)); }

Expr float_const(double v) {
  ExprNode n;
  n.kind = ExprKind::FloatConst;
  n.fval = v;
  return make_node(std::move(n));
}

Expr coordinate(int index) {
  if (index < 0) throw ExprError("negative coordinate index");
  ExprNode n;
  n.kind = ExprKind::Coord;
  n.coord = index;
  return make_node(std::move(n));
}

Expr parameter(const std::string& name) {
  if (name.empty()) throw ExprError("empty parameter name");
  ExprNode n;
  n.kind = ExprKind::Param;
  n.param = name;
  return make_node(std::move(n));
}

bool is_zero_literal(const Expr& e) {
  const ExprNode& n = e.node();
  if (n.kind == ExprKind::RationalConst) return n.rat.is_zero();
  if (n.kind == ExprKind::FloatConst) return n.fval == 0.0;
  return false;
}

bool is_one_literal(const Expr& e) {
  const ExprNode& n = e.node();
  if (n.kind == ExprKind::RationalConst) return n.rat.is_one();
  if (n.kind == ExprKind::FloatConst) return n.fval == 1.0;
  return false;
}

static bool is_const(const Expr& e) {
  return e.kind() == ExprKind::RationalConst || e.kind() == ExprKind::FloatConst;
}

static double const_value(const Expr& e) {
  return e.kind() == ExprKind::RationalConst ? e.node().rat.to_double()
                                             : e.node().fval;
}

// Accumulates a run of constants exactly while they stay rational.
struct ConstAcc {
  bool any = false;
  bool isf = false;
  Rational r;
  double f = 0.0;

  explicit ConstAcc(const Rational& init) : r(init) {}

  double value() const { return isf ? f : r.to_double(); }

  void to_float() {
    if (!isf) {
      f = r.to_double();
      isf = true;
    }
  }

  void add(const Expr& c) {
    any = true;
    if (c.kind() == ExprKind::FloatConst) {
      to_float();
      f += c.node().fval;
      return;
    }
    if (isf) {
      f += c.node().rat.to_double();
      return;
    }
    if (auto s = Rational::try_add(r, c.node().rat)) {
      r = *s;
    } else {
      to_float();
      f += c.node().rat.to_double();
    }
  }

  void mul(const Expr& c) {
    any = true;
    if (c.kind() == ExprKind::FloatConst) {
      to_float();
      f *= c.node().fval;
      return;
    }
    if (isf) {
      f *= c.node().rat.to_double();
      return;
    }
    if (auto p = Rational::try_mul(r, c.node().rat)) {
      r = *p;
    } else {
      to_float();
      f *= c.node().rat.to_double();
    }
  }

  bool is_exact_zero() const { return isf ? f == 0.0 : r.is_zero(); }
  bool is_exact_one() const { return isf ? f == 1.0 : r.is_one(); }

  Expr to_expr() const { return isf ? float_const(f) : rational_const(r); }
};

Expr sum_of(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  ConstAcc acc{Rational(0)};
  for (Expr& t : terms) {
    if (t.kind() == ExprKind::Sum) {
      for (const Expr& k : t.node().kids) {
        if (is_const(k))
          acc.add(k);
        else
          flat.push_back(k);
      }
    } else if (is_const(t)) {
      acc.add(t);
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (acc.any && !acc.is_exact_zero()) flat.push_back(acc.to_expr());
  if (flat.empty()) return expr_zero();
  if (flat.size() == 1) return flat[0];
  ExprNode n;
  n.kind = ExprKind::Sum;
  n.kids = std::move(flat);
  return make_node(std::move(n));
}

Expr product_of(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  ConstAcc acc{Rational(1)};
  for (Expr& t : factors) {
    if (t.kind() == ExprKind::Product) {
      for (const Expr& k : t.node().kids) {
        if (is_const(k))
          acc.mul(k);
        else
          flat.push_back(k);
      }
    } else if (is_const(t)) {
      acc.mul(t);
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (acc.any && acc.is_exact_zero()) return expr_zero();
  bool keep_const = acc.any && !acc.is_exact_one();
  if (flat.empty()) return keep_const ? acc.to_expr() : expr_one();
  if (keep_const) flat.insert(flat.begin(), acc.to_expr());
  if (flat.size() == 1) return flat[0];
  ExprNode n;
  n.kind = ExprKind::Product;
  n.kids = std::move(flat);
  return make_node(std::move(n));
}

Expr quotient(Expr a, Expr b) {
  if (is_one_literal(b)) return a;
  if (is_zero_literal(a)) return expr_zero();
  if (a.kind() == ExprKind::RationalConst && b.kind() == ExprKind::RationalConst &&
      !b.node().rat.is_zero()) {
    if (auto q = Rational::try_div(a.node().rat, b.node().rat))
      return rational_const(*q);
  }
  ExprNode n;
  n.kind = ExprKind::Quotient;
  n.kids = {std::move(a), std::move(b)};
  return make_node(std::move(n));
}

static bool mul_fits(long long a, long long b, long long* out) {
  __int128 p = static_cast<__int128>(a) * b;
  if (p > INT64_MAX || p < INT64_MIN) return false;
  *out = static_cast<long long>(p);
  return true;
}

Expr int_pow(Expr base, long long k) {
  if (k == 0) return expr_one();  // 0^0 = 1 by convention
  if (k == 1) return base;
  if (base.kind() == ExprKind::RationalConst) {
    const Rational& r = base.node().rat;
    if (k > 0) {
      if (auto p = Rational::try_pow(r, k)) return rational_const(*p);
    } else if (!r.is_zero()) {
      if (auto p = Rational::try_pow(r, -k)) {
        if (auto q = Rational::try_div(Rational(1), *p)) return rational_const(*q);
      }
    }
  }
  if (base.kind() == ExprKind::FloatConst) {
    double x = base.node().fval;
    if (!(x == 0.0 && k < 0)) {
      double acc = 1.0, b = x;
      long long e = k < 0 ? -k : k;
      while (e > 0) {
        if (e & 1) acc *= b;
        e >>= 1;
        if (e) b *= b;
      }
      return float_const(k < 0 ? 1.0 / acc : acc);
    }
  }
  if (base.kind() == ExprKind::IntPow) {
    long long kk;
    if (mul_fits(base.node().pnum, k, &kk)) return int_pow(base.node().kids[0], kk);
  }
  if (base.kind() == ExprKind::RatPow) {
    long long pn;
    if (mul_fits(base.node().pnum, k, &pn))
      return rat_pow(base.node().kids[0], pn, base.node().pden);
  }
  ExprNode n;
  n.kind = ExprKind::IntPow;
  n.kids = {std::move(base)};
  n.pnum = k;
  return make_node(std::move(n));
}

Expr rat_pow(Expr base, long long num, long long den) {
  if (den == 0) throw ExprError("rational power with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long long g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (den == 1) return int_pow(std::move(base), num);
  if (is_zero_literal(base) && num > 0) return expr_zero();
  if (is_one_literal(base)) return expr_one();
  if (base.kind() == ExprKind::RatPow) {
    long long pn, pd;
    if (mul_fits(base.node().pnum, num, &pn) && mul_fits(base.node().pden, den, &pd))
      return rat_pow(base.node().kids[0], pn, pd);
  }
  if (base.kind() == ExprKind::IntPow && (base.node().pnum & 1)) {
    long long pn;
    if (mul_fits(base.node().pnum, num, &pn))
      return rat_pow(base.node().kids[0], pn, den);
  }
  ExprNode n;
  n.kind = ExprKind::RatPow;
  n.kids = {std::move(base)};
  n.pnum = num;
  n.pden = den;
  return make_node(std::move(n));
}

Expr negate(Expr e) {
  if (e.kind() == ExprKind::RationalConst) return rational_const(-e.node().rat);
  if (e.kind() == ExprKind::FloatConst) return float_const(-e.node().fval);
  if (e.kind() == ExprKind::Neg) return e.node().kids[0];
  ExprNode n;
  n.kind = ExprKind::Neg;
  n.kids = {std::move(e)};
  return make_node(std::move(n));
}

static Expr unary_node(ExprKind k, Expr e) {
  ExprNode n;
  n.kind = k;
  n.kids = {std::move(e)};
  return make_node(std::move(n));
}

Expr sin_of(Expr e) {
  if (is_zero_literal(e)) return expr_zero();
  return unary_node(ExprKind::Sin, std::move(e));
}

Expr cos_of(Expr e) {
  if (is_zero_literal(e)) return expr_one();
  return unary_node(ExprKind::Cos, std::move(e));
}

Expr tan_of(Expr e) {
  if (is_zero_literal(e)) return expr_zero();
  return unary_node(ExprKind::Tan, std::move(e));
}

Expr exp_of(Expr e) {
  if (is_zero_literal(e)) return expr_one();
  return unary_node(ExprKind::Exp, std::move(e));
}

Expr log_of(Expr e) {
  if (is_one_literal(e)) return expr_zero();
  return unary_node(ExprKind::Log, std::move(e));
}

Expr sqrt_of(Expr e) {
  if (is_zero_literal(e) || is_one_literal(e)) return e;
  if (e.kind() == ExprKind::RationalConst && !e.node().rat.is_negative()) {
    auto perfect_root = [](long long v, long long* root) {
      if (v < 0) return false;
      long long r = std::llround(std::sqrt(static_cast<double>(v)));
      for (long long c = std::max(0LL, r - 2); c <= r + 2; ++c)
        if (c * c == v) {
          *root = c;
          return true;
        }
      return false;
    };
    long long rn, rd;
    if (perfect_root(e.node().rat.num(), &rn) && perfect_root(e.node().rat.den(), &rd))
      return rational_const(Rational(rn, rd));
  }
  return unary_node(ExprKind::Sqrt, std::move(e));
}

Expr operator+(const Expr& a, const Expr& b) { return sum_of({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return sum_of({a, negate(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return product_of({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return quotient(a, b); }
Expr operator-(const Expr& e) { return negate(e); }

// -- structural equality ------------------------------------------------------

static bool equal_rec(const ExprNode* a, const ExprNode* b,
                      std::set<std::pair<const ExprNode*, const ExprNode*>>* seen) {
  if (a == b) return true;
  if (a->hash != b->hash || a->kind != b->kind) return false;
  auto key = std::make_pair(a, b);
  if (seen->count(key)) return true;  // pair already verified on this walk
  switch (a->kind) {
    case ExprKind::RationalConst:
      return a->rat == b->rat;
    case ExprKind::FloatConst:
      return a->fval == b->fval;
    case ExprKind::Coord:
      return a->coord == b->coord;
    case ExprKind::Param:
      return a->param == b->param;
    default:
      break;
  }
  if (a->pnum != b->pnum || a->pden != b->pden) return false;
  if (a->kids.size() != b->kids.size()) return false;
  seen->insert(key);
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!equal_rec(a->kids[i].raw(), b->kids[i].raw(), seen)) return false;
  return true;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  std::set<std::pair<const ExprNode*, const ExprNode*>> seen;
  return equal_rec(a.raw(), b.raw(), &seen);
}

size_t node_count(const Expr& e) {
  std::unordered_set<const ExprNode*> seen;
  std::vector<const ExprNode*> stack{e.raw()};
  while (!stack.empty()) {
    const ExprNode* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const Expr& k : n->kids) stack.push_back(k.raw());
  }
  return seen.size();
}

// -- printing -----------------------------------------------------------------

namespace {

// Precedence levels: sum < product/quotient < unary minus < power < atom.
enum Prec { kSum = 0, kProd = 1, kUnary = 2, kPow = 3, kAtom = 4 };

struct Printer {
  const std::vector<std::string>* coords;
  size_t limit;
  std::string out;
  bool truncated = false;

  void put(const std::string& s) {
    if (truncated) return;
    if (out.size() + s.size() > limit) {
      out += s.substr(0, limit - out.size());
      out += "...";
      truncated = true;
      return;
    }
    out += s;
  }

  std::string coord_name(int i) const {
    if (coords && i < static_cast<int>(coords->size())) return (*coords)[i];
    return "x" + std::to_string(i + 1);
  }

  static std::string float_repr(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  void print(const ExprNode* n, int parent_prec) {
    if (truncated) return;
    switch (n->kind) {
      case ExprKind::RationalConst: {
        bool wrap = (n->rat.is_negative() && parent_prec > kSum) ||
                    (!n->rat.is_integer() && parent_prec >= kPow);
        if (wrap) put("(");
        put(n->rat.to_string());
        if (wrap) put(")");
        return;
      }
      case ExprKind::FloatConst: {
        bool wrap = n->fval < 0 && parent_prec > kSum;
        if (wrap) put("(");
        put(float_repr(n->fval));
        if (wrap) put(")");
        return;
      }
      case ExprKind::Coord:
        put(coord_name(n->coord));
        return;
      case ExprKind::Param:
        put(n->param);
        return;
      case ExprKind::Sum: {
        bool wrap = parent_prec > kSum;
        if (wrap) put("(");
        for (size_t i = 0; i < n->kids.size(); ++i) {
          const ExprNode* k = n->kids[i].raw();
          bool minus = false;
          const ExprNode* body = k;
          if (k->kind == ExprKind::Neg) {
            minus = true;
            body = k->kids[0].raw();
          } else if (k->kind == ExprKind::RationalConst && k->rat.is_negative()) {
            put(i ? " - " : "-");
            put((-k->rat).to_string());
            continue;
          } else if (k->kind == ExprKind::FloatConst && k->fval < 0) {
            put(i ? " - " : "-");
            put(float_repr(-k->fval));
            continue;
          } else if (k->kind == ExprKind::Product && !k->kids.empty() &&
                     ((k->kids[0].kind() == ExprKind::RationalConst &&
                       k->kids[0].node().rat.is_negative()) ||
                      (k->kids[0].kind() == ExprKind::FloatConst &&
                       k->kids[0].node().fval < 0))) {
            put(i ? " - " : "-");
            std::vector<Expr> kk = k->kids;
            if (kk[0].kind() == ExprKind::RationalConst)
              kk[0] = rational_const(-kk[0].node().rat);
            else
              kk[0] = float_const(-kk[0].node().fval);
            Expr pos = product_of(std::move(kk));
            print(pos.raw(), kSum + 1);
            continue;
          }
          if (i && !minus) put(" + ");
          if (minus) put(i ? " - " : "-");
          print(body, kSum + 1);
        }
        if (wrap) put(")");
        return;
      }
      case ExprKind::Product: {
        const ExprNode* lead = n->kids[0].raw();
        bool lead_neg = (lead->kind == ExprKind::RationalConst &&
                         lead->rat.is_negative()) ||
                        (lead->kind == ExprKind::FloatConst && lead->fval < 0);
        if (lead_neg) {
          std::vector<Expr> kk = n->kids;
          if (kk[0].kind() == ExprKind::RationalConst)
            kk[0] = rational_const(-kk[0].node().rat);
          else
            kk[0] = float_const(-kk[0].node().fval);
          Expr pos = product_of(std::move(kk));
          bool wrap = parent_prec > kUnary;
          if (wrap) put("(");
          put("-");
          print(pos.raw(), kUnary + 1);
          if (wrap) put(")");
          return;
        }
        bool wrap = parent_prec > kProd;
        if (wrap) put("(");
        for (size_t i = 0; i < n->kids.size(); ++i) {
          if (i) put("*");
          print(n->kids[i].raw(), kProd + 1);
        }
        if (wrap) put(")");
        return;
      }
      case ExprKind::Quotient: {
        bool wrap = parent_prec > kProd;
        if (wrap) put("(");
        print(n->kids[0].raw(), kProd + 1);
        put("/");
        print(n->kids[1].raw(), kProd + 1);
        if (wrap) put(")");
        return;
      }
      case ExprKind::Neg: {
        bool wrap = parent_prec > kUnary;
        if (wrap) put("(");
        put("-");
        print(n->kids[0].raw(), kUnary + 1);
        if (wrap) put(")");
        return;
      }
      case ExprKind::IntPow: {
        bool wrap = parent_prec > kPow;
        if (wrap) put("(");
        print(n->kids[0].raw(), kPow + 1);
        put("^");
        if (n->pnum < 0) {
          put("(" + std::to_string(n->pnum) + ")");
        } else {
          put(std::to_string(n->pnum));
        }
        if (wrap) put(")");
        return;
      }
      case ExprKind::RatPow: {
        bool wrap = parent_prec > kPow;
        if (wrap) put("(");
        print(n->kids[0].raw(), kPow + 1);
        put("^(" + std::to_string(n->pnum) + "/" + std::to_string(n->pden) + ")");
        if (wrap) put(")");
        return;
      }
      case ExprKind::Sin:
      case ExprKind::Cos:
      case ExprKind::Tan:
      case ExprKind::Exp:
      case ExprKind::Log:
      case ExprKind::Sqrt: {
        static const char* names[] = {"sin", "cos", "tan", "exp", "log", "sqrt"};
        put(names[static_cast<int>(n->kind) - static_cast<int>(ExprKind::Sin)]);
        put("(");
        print(n->kids[0].raw(), kSum);
        put(")");
        return;
      }
    }
  }
};

std::string print_limited(const ExprNode* n,
                          const std::vector<std::string>* coords, size_t limit) {
  Printer p{coords, limit, {}, false};
  p.print(n, kSum);
  return p.out;
}

}  // namespace

std::string to_string(const Expr& e, const std::vector<std::string>* coord_names) {
  return print_limited(e.raw(), coord_names, 1u << 20);
}

// -- evaluation ---------------------------------------------------------------

namespace {

double pow_by_squares(double x, long long k) {
  double acc = 1.0, b = x;
  long long e = k < 0 ? -k : k;
  while (e > 0) {
    if (e & 1) acc *= b;
    e >>= 1;
    if (e) b *= b;
  }
  return k < 0 ? 1.0 / acc : acc;
}

[[noreturn]] void domain_error(const char* what, const ExprNode* n) {
  throw EvalError(what, print_limited(n, nullptr, 200));
}

double eval_primitive(const ExprNode* n, std::span<const double> kid_vals,
                      std::span<const double> point, const ParamMap* params) {
  switch (n->kind) {
    case ExprKind::RationalConst:
      return n->rat.to_double();
    case ExprKind::FloatConst:
      return n->fval;
    case ExprKind::Coord:
      if (n->coord >= static_cast<int>(point.size()))
        throw ExprError("coordinate index out of range for evaluation point");
      return point[n->coord];
    case ExprKind::Param: {
      if (!params) throw ExprError("missing parameter: " + n->param);
      auto it = params->find(n->param);
      if (it == params->end()) throw ExprError("missing parameter: " + n->param);
      return it->second;
    }
    case ExprKind::Sum: {
      double acc = 0.0;
      for (double v : kid_vals) acc += v;
      return acc;
    }
    case ExprKind::Product: {
      double acc = 1.0;
      for (double v : kid_vals) acc *= v;
      return acc;
    }
    case ExprKind::Quotient:
      if (kid_vals[1] == 0.0) domain_error("division by zero", n);
      return kid_vals[0] / kid_vals[1];
    case ExprKind::IntPow:
      if (kid_vals[0] == 0.0 && n->pnum < 0)
        domain_error("zero raised to a negative power", n);
      return pow_by_squares(kid_vals[0], n->pnum);
    case ExprKind::RatPow: {
      double x = kid_vals[0];
      if (x < 0.0) domain_error("fractional power of a negative value", n);
      if (x == 0.0) {
        if (n->pnum < 0) domain_error("zero raised to a negative power", n);
        return 0.0;
      }
      return std::pow(x, static_cast<double>(n->pnum) / static_cast<double>(n->pden));
    }
    case ExprKind::Neg:
      return -kid_vals[0];
    case ExprKind::Sin:
      return std::sin(kid_vals[0]);
    case ExprKind::Cos:
      return std::cos(kid_vals[0]);
    case ExprKind::Tan:
      return std::tan(kid_vals[0]);
    case ExprKind::Exp:
      return std::exp(kid_vals[0]);
    case ExprKind::Log:
      if (kid_vals[0] <= 0.0) domain_error("log of a non-positive value", n);
      return std::log(kid_vals[0]);
    case ExprKind::Sqrt:
      if (kid_vals[0] < 0.0) domain_error("sqrt of a negative value", n);
      return std::sqrt(kid_vals[0]);
  }
  throw ExprError("unreachable expression kind");
}

}  // namespace

double eval(const Expr& e, std::span<const double> point, const ParamMap* params) {
  std::unordered_map<const ExprNode*, double> memo;
  std::vector<double> kid_vals;

  // Explicit stack: second visit computes from memoized children.
  std::vector<std::pair<const ExprNode*, bool>> stack{{e.raw(), false}};
  while (!stack.empty()) {
    auto [n, ready] = stack.back();
    stack.pop_back();
    if (memo.count(n)) continue;
    if (!ready) {
      stack.push_back({n, true});
      for (const Expr& k : n->kids)
        if (!memo.count(k.raw())) stack.push_back({k.raw(), false});
      continue;
    }
    kid_vals.clear();
    for (const Expr& k : n->kids) kid_vals.push_back(memo.at(k.raw()));
    memo[n] = eval_primitive(n, kid_vals, point, params);
  }
  return memo.at(e.raw());
}

// -- differentiation ----------------------------------------------------------

namespace {

Expr diff_rec(const Expr& e, int coord,
              std::map<std::pair<const ExprNode*, int>, std::pair<Expr, Expr>>* memo);

Expr diff_node(const Expr& e, int coord,
               std::map<std::pair<const ExprNode*, int>, std::pair<Expr, Expr>>* memo) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case ExprKind::RationalConst:
    case ExprKind::FloatConst:
    case ExprKind::Param:
      return expr_zero();
    case ExprKind::Coord:
      return n.coord == coord ? expr_one() : expr_zero();
    case ExprKind::Sum: {
      std::vector<Expr> parts;
      parts.reserve(n.kids.size());
      for (const Expr& k : n.kids) parts.push_back(diff_rec(k, coord, memo));
      return sum_of(std::move(parts));
    }
    case ExprKind::Product: {
      std::vector<Expr> terms;
      for (size_t i = 0; i < n.kids.size(); ++i) {
        Expr di = diff_rec(n.kids[i], coord, memo);
        if (is_zero_literal(di)) continue;
        std::vector<Expr> fac;
        fac.reserve(n.kids.size());
        for (size_t j = 0; j < n.kids.size(); ++j)
          fac.push_back(j == i ? di : n.kids[j]);
        terms.push_back(product_of(std::move(fac)));
      }
      return sum_of(std::move(terms));
    }
    case ExprKind::Quotient: {
      const Expr& a = n.kids[0];
      const Expr& b = n.kids[1];
      Expr da = diff_rec(a, coord, memo);
      Expr db = diff_rec(b, coord, memo);
      if (is_zero_literal(db)) return quotient(da, b);
      return quotient(da * b - a * db, int_pow(b, 2));
    }
    case ExprKind::IntPow: {
      Expr db = diff_rec(n.kids[0], coord, memo);
      return integer(n.pnum) * int_pow(n.kids[0], n.pnum - 1) * db;
    }
    case ExprKind::RatPow: {
      Expr db = diff_rec(n.kids[0], coord, memo);
      return rational_const(Rational(n.pnum, n.pden)) *
             rat_pow(n.kids[0], n.pnum - n.pden, n.pden) * db;
    }
    case ExprKind::Neg:
      return negate(diff_rec(n.kids[0], coord, memo));
    case ExprKind::Sin:
      return cos_of(n.kids[0]) * diff_rec(n.kids[0], coord, memo);
    case ExprKind::Cos:
      return negate(sin_of(n.kids[0])) * diff_rec(n.kids[0], coord, memo);
    case ExprKind::Tan:
      return (expr_one() + int_pow(tan_of(n.kids[0]), 2)) *
             diff_rec(n.kids[0], coord, memo);
    case ExprKind::Exp:
      return e * diff_rec(n.kids[0], coord, memo);
    case ExprKind::Log:
      return quotient(diff_rec(n.kids[0], coord, memo), n.kids[0]);
    case ExprKind::Sqrt:
      return quotient(diff_rec(n.kids[0], coord, memo), integer(2) * e);
  }
  throw ExprError("unreachable expression kind in diff");
}

Expr diff_rec(const Expr& e, int coord,
              std::map<std::pair<const ExprNode*, int>, std::pair<Expr, Expr>>* memo) {
  auto key = std::make_pair(e.raw(), coord);
  auto it = memo->find(key);
  if (it != memo->end()) return it->second.second;
  Expr d = diff_node(e, coord, memo);
  memo->emplace(key, std::make_pair(e, d));
  return d;
}

}  // namespace

Expr diff(const Expr& e, int coord) {
  std::map<std::pair<const ExprNode*, int>, std::pair<Expr, Expr>> memo;
  return diff_rec(e, coord, &memo);
}

Expr DiffCache::d(const Expr& e, int coord) { return diff_rec(e, coord, &dmemo_); }

Expr DiffCache::simplified(const Expr& e) {
  auto it = smemo_.find(e.raw());
  if (it != smemo_.end()) return it->second.second;
  Expr s = simplify(e);
  smemo_.emplace(e.raw(), std::make_pair(e, s));
  return s;
}

// -- simplification -----------------------------------------------------------

namespace {

struct Coeff {
  bool isf = false;
  Rational r{1};
  double f = 1.0;

  static Coeff rational(const Rational& v) { return Coeff{false, v, 0.0}; }
  static Coeff flt(double v) { return Coeff{true, Rational(0), v}; }

  void negate_in_place() {
    if (isf)
      f = -f;
    else
      r = -r;
  }

  void add(const Coeff& o) {
    if (!isf && !o.isf) {
      if (auto s = Rational::try_add(r, o.r)) {
        r = *s;
        return;
      }
    }
    double mine = isf ? f : r.to_double();
    f = mine + (o.isf ? o.f : o.r.to_double());
    isf = true;
  }

  void mul_expr_const(const Expr& c) {
    if (c.kind() == ExprKind::RationalConst && !isf) {
      if (auto p = Rational::try_mul(r, c.node().rat)) {
        r = *p;
        return;
      }
    }
    double mine = isf ? f : r.to_double();
    f = mine * const_value(c);
    isf = true;
  }

  bool is_zero() const { return isf ? f == 0.0 : r.is_zero(); }
  bool is_one() const { return isf ? f == 1.0 : r.is_one(); }
  bool is_minus_one() const { return isf ? f == -1.0 : r == Rational(-1); }

  Expr to_expr() const { return isf ? float_const(f) : rational_const(r); }
};

struct SimplifyCtx {
  std::map<const ExprNode*, std::pair<Expr, Expr>> memo;

  Expr run(const Expr& e);
  Expr rebuild(const Expr& e);
  Expr collect_sum(const std::vector<Expr>& kids);
  Expr collect_product(const std::vector<Expr>& kids);
};

// term -> (coefficient, core); core is 1 for pure constants
std::pair<Coeff, Expr> decompose_term(const Expr& e) {
  const ExprNode& n = e.node();
  if (n.kind == ExprKind::RationalConst) return {Coeff::rational(n.rat), expr_one()};
  if (n.kind == ExprKind::FloatConst) return {Coeff::flt(n.fval), expr_one()};
  if (n.kind == ExprKind::Neg) {
    auto [c, core] = decompose_term(n.kids[0]);
    c.negate_in_place();
    return {c, core};
  }
  if (n.kind == ExprKind::Product && is_const(n.kids[0])) {
    Coeff c = Coeff::rational(Rational(1));
    c.mul_expr_const(n.kids[0]);
    std::vector<Expr> rest(n.kids.begin() + 1, n.kids.end());
    return {c, product_of(std::move(rest))};
  }
  return {Coeff::rational(Rational(1)), e};
}

Expr SimplifyCtx::collect_sum(const std::vector<Expr>& kids) {
  struct Group {
    Expr core;
    Coeff coeff;
  };
  std::vector<Group> groups;
  std::unordered_map<size_t, std::vector<size_t>> buckets;
  for (const Expr& t : kids) {
    auto [c, core] = decompose_term(t);
    size_t h = core.hash();
    bool merged = false;
    for (size_t gi : buckets[h]) {
      if (structurally_equal(groups[gi].core, core)) {
        groups[gi].coeff.add(c);
        merged = true;
        break;
      }
    }
    if (!merged) {
      buckets[h].push_back(groups.size());
      groups.push_back({core, c});
    }
  }
  std::vector<Expr> out;
  for (const Group& g : groups) {
    if (g.coeff.is_zero()) continue;
    if (is_one_literal(g.core)) {
      out.push_back(g.coeff.to_expr());
    } else if (g.coeff.is_one()) {
      out.push_back(g.core);
    } else {
      out.push_back(product_of({g.coeff.to_expr(), g.core}));
    }
  }
  return sum_of(std::move(out));
}

Expr SimplifyCtx::collect_product(const std::vector<Expr>& kids) {
  struct Group {
    Expr base;
    Rational exp;
    bool bad = false;  // exponent arithmetic overflowed; emit factors verbatim
    std::vector<Expr> verbatim;
  };
  std::vector<Group> groups;
  std::unordered_map<size_t, std::vector<size_t>> buckets;
  auto factor_parts = [](const Expr& f) -> std::pair<Expr, Rational> {
    const ExprNode& n = f.node();
    if (n.kind == ExprKind::IntPow) return {n.kids[0], Rational(n.pnum)};
    if (n.kind == ExprKind::RatPow) return {n.kids[0], Rational(n.pnum, n.pden)};
    return {f, Rational(1)};
  };
  std::vector<Expr> consts;
  for (const Expr& f : kids) {
    if (is_const(f)) {
      consts.push_back(f);
      continue;
    }
    auto [base, exp] = factor_parts(f);
    size_t h = base.hash();
    bool merged = false;
    for (size_t gi : buckets[h]) {
      Group& g = groups[gi];
      if (g.bad || !structurally_equal(g.base, base)) continue;
      if (auto s = Rational::try_add(g.exp, exp)) {
        g.exp = *s;
      } else {
        g.bad = true;
        g.verbatim.push_back(rat_pow(g.base, g.exp.num(), g.exp.den()));
        g.verbatim.push_back(f);
      }
      merged = true;
      break;
    }
    if (!merged) {
      buckets[h].push_back(groups.size());
      groups.push_back({base, exp, false, {}});
    }
  }
  std::vector<Expr> out = std::move(consts);
  for (Group& g : groups) {
    if (g.bad) {
      for (Expr& v : g.verbatim) out.push_back(std::move(v));
      continue;
    }
    if (g.exp.is_zero()) continue;
    out.push_back(rat_pow(g.base, g.exp.num(), g.exp.den()));
  }
  return product_of(std::move(out));
}

Expr SimplifyCtx::rebuild(const Expr& e) {
  const ExprNode& n = e.node();
  std::vector<Expr> kids;
  kids.reserve(n.kids.size());
  bool changed = false;
  for (const Expr& k : n.kids) {
    Expr s = run(k);
    changed = changed || !s.same(k);
    kids.push_back(std::move(s));
  }
  switch (n.kind) {
    case ExprKind::RationalConst:
    case ExprKind::FloatConst:
    case ExprKind::Coord:
    case ExprKind::Param:
      return e;
    case ExprKind::Sum: {
      Expr flat = sum_of(std::move(kids));
      if (flat.kind() != ExprKind::Sum) return run(flat);
      return collect_sum(flat.node().kids);
    }
    case ExprKind::Product: {
      Expr flat = product_of(std::move(kids));
      if (flat.kind() != ExprKind::Product) return flat;
      return collect_product(flat.node().kids);
    }
    case ExprKind::Quotient: {
      const Expr& a = kids[0];
      const Expr& b = kids[1];
      if (b.kind() == ExprKind::RationalConst && !b.node().rat.is_zero()) {
        if (auto inv = Rational::try_div(Rational(1), b.node().rat))
          return run(product_of({rational_const(*inv), a}));
      }
      if (a.kind() == ExprKind::Quotient)
        return run(quotient(a.node().kids[0], product_of({a.node().kids[1], b})));
      if (b.kind() == ExprKind::Quotient)
        return run(quotient(product_of({a, b.node().kids[1]}), b.node().kids[0]));
      return quotient(a, b);
    }
    case ExprKind::IntPow: {
      const Expr& base = kids[0];
      if (base.kind() == ExprKind::Product) {
        std::vector<Expr> parts;
        for (const Expr& k : base.node().kids) parts.push_back(int_pow(k, n.pnum));
        return run(product_of(std::move(parts)));
      }
      if (base.kind() == ExprKind::Quotient) {
        const Expr& x = base.node().kids[0];
        const Expr& y = base.node().kids[1];
        if (n.pnum > 0) return run(quotient(int_pow(x, n.pnum), int_pow(y, n.pnum)));
        return run(quotient(int_pow(y, -n.pnum), int_pow(x, -n.pnum)));
      }
      return int_pow(base, n.pnum);
    }
    case ExprKind::RatPow:
      return rat_pow(kids[0], n.pnum, n.pden);
    case ExprKind::Neg:
      return run(product_of({integer(-1), kids[0]}));
    case ExprKind::Sin:
      return sin_of(kids[0]);
    case ExprKind::Cos:
      return cos_of(kids[0]);
    case ExprKind::Tan:
      return tan_of(kids[0]);
    case ExprKind::Exp:
      return exp_of(kids[0]);
    case ExprKind::Log:
      return log_of(kids[0]);
    case ExprKind::Sqrt:
      return sqrt_of(kids[0]);
  }
  return e;
}

Expr SimplifyCtx::run(const Expr& e) {
  auto it = memo.find(e.raw());
  if (it != memo.end()) return it->second.second;
  Expr s = rebuild(e);
  memo.emplace(e.raw(), std::make_pair(e, s));
  return s;
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr cur = e;
  size_t cur_count = node_count(cur);
  for (int pass = 0; pass < 3; ++pass) {
    SimplifyCtx ctx;
    Expr next = ctx.run(cur);
    if (next.same(cur) || structurally_equal(next, cur)) break;
    size_t next_count = node_count(next);
    // Guard against swell: collections may add a few coefficient nodes, but a
    // pass that doubles the DAG is discarded.
    if (next_count > 2 * cur_count + 16) return cur;
    cur = next;
    cur_count = next_count;
  }
  return cur;
}

// -- parser -------------------------------------------------------------------

namespace {

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  size_t offset;
  std::string text;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      bool isfloat = false;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i < s.size() && s[i] == '.') {
        isfloat = true;
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      }
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        size_t j = i + 1;
        if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
          isfloat = true;
          i = j;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      out.push_back({Tok::Num, start, std::string(s.substr(start, i - start))});
      (void)isfloat;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
        ++i;
      out.push_back({Tok::Ident, start, std::string(s.substr(start, i - start))});
      continue;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({k, i, std::string(1, c)});
    ++i;
  }
  out.push_back({Tok::End, s.size(), ""});
  return out;
}

struct Parser {
  const std::vector<Token>& toks;
  size_t pos = 0;
  const std::vector<std::string>& coords;
  const std::vector<std::string>& params;

  static bool is_function_name(const std::string& s) {
    return s == "sin" || s == "cos" || s == "tan" || s == "exp" || s == "log" ||
           s == "sqrt";
  }

  const Token& peek() const { return toks[pos]; }
  Token take() { return toks[pos++]; }

  void expect(Tok k, const char* what) {
    if (peek().kind != k) throw ParseError(std::string("expected ") + what, peek().offset);
    ++pos;
  }

  Expr number(const Token& t) {
    if (t.text.find('.') == std::string::npos &&
        t.text.find('e') == std::string::npos &&
        t.text.find('E') == std::string::npos) {
      errno = 0;
      char* end = nullptr;
      long long v = std::strtoll(t.text.c_str(), &end, 10);
      if (errno == ERANGE)
        throw ParseError("integer literal out of range", t.offset);
      return integer(v);
    }
    try {
      return float_const(std::stod(t.text));
    } catch (const std::out_of_range&) {
      throw ParseError("numeric literal out of range", t.offset);
    }
  }

  Expr atom() {
    Token t = take();
    switch (t.kind) {
      case Tok::Num:
        return number(t);
      case Tok::LParen: {
        Expr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        if (is_function_name(t.text)) {
          expect(Tok::LParen, "'(' after function name");
          Expr arg = expr();
          expect(Tok::RParen, "')'");
          if (t.text == "sin") return sin_of(arg);
          if (t.text == "cos") return cos_of(arg);
          if (t.text == "tan") return tan_of(arg);
          if (t.text == "exp") return exp_of(arg);
          if (t.text == "log") return log_of(arg);
          return sqrt_of(arg);
        }
        for (size_t i = 0; i < coords.size(); ++i)
          if (coords[i] == t.text) return coordinate(static_cast<int>(i));
        for (const std::string& p : params)
          if (p == t.text) return parameter(t.text);
        throw ParseError("unknown identifier '" + t.text + "'", t.offset);
      }
      default:
        throw ParseError("expected a number, name or '('", t.offset);
    }
  }

  Expr power() {
    Expr base = atom();
    if (peek().kind != Tok::Caret) return base;
    size_t caret_off = take().offset;
    bool neg = false;
    if (peek().kind == Tok::Minus) {
      neg = true;
      ++pos;
    }
    Expr ex;
    if (peek().kind == Tok::Num) {
      ex = number(take());
    } else if (peek().kind == Tok::LParen) {
      ++pos;
      ex = expr();
      expect(Tok::RParen, "')'");
    } else {
      throw ParseError("expected an exponent", peek().offset);
    }
    if (ex.kind() != ExprKind::RationalConst)
      throw ParseError("exponent must be a rational constant", caret_off);
    Rational r = ex.node().rat;
    if (neg) r = -r;
    return rat_pow(base, r.num(), r.den());
  }

  Expr unary() {
    if (peek().kind == Tok::Minus) {
      ++pos;
      return negate(unary());
    }
    return power();
  }

  Expr term() {
    Expr acc = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      Tok op = take().kind;
      Expr rhs = unary();
      acc = op == Tok::Star ? acc * rhs : quotient(acc, rhs);
    }
    return acc;
  }

  Expr expr() {
    Expr acc = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      Tok op = take().kind;
      Expr rhs = term();
      acc = op == Tok::Plus ? acc + rhs : acc - rhs;
    }
    return acc;
  }
};

}  // namespace

Expr parse_expression(std::string_view text,
                      const std::vector<std::string>& coord_names,
                      const std::vector<std::string>& param_names) {
  for (const std::string& n : coord_names)
    if (Parser::is_function_name(n))
      throw ParseError("coordinate name collides with function name '" + n + "'", 0);
  for (const std::string& n : param_names)
    if (Parser::is_function_name(n))
      throw ParseError("parameter name collides with function name '" + n + "'", 0);
  std::vector<Token> toks = lex(text);
  Parser p{toks, 0, coord_names, param_names};
  Expr e = p.expr();
  if (p.peek().kind != Tok::End)
    throw ParseError("unexpected trailing input", p.peek().offset);
  return e;
}

// -- compiled programs ----------------------------------------------------------

Program Program::compile(const std::vector<Expr>& roots) {
  Program prog;
  std::unordered_map<const ExprNode*, int> by_ptr;
  std::unordered_map<std::string, int> by_key;
  std::unordered_map<std::string, int> param_slot;

  auto key_of = [&](const ExprNode* n, const std::vector<int>& kid_slots) {
    std::string k;
    k.push_back(static_cast<char>(n->kind));
    auto push64 = [&k](uint64_t v) {
      for (int i = 0; i < 8; ++i) k.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    switch (n->kind) {
      case ExprKind::RationalConst:
        push64(static_cast<uint64_t>(n->rat.num()));
        push64(static_cast<uint64_t>(n->rat.den()));
        break;
      case ExprKind::FloatConst: {
        uint64_t b;
        std::memcpy(&b, &n->fval, sizeof b);
        push64(b);
        break;
      }
      case ExprKind::Coord:
        push64(static_cast<uint64_t>(n->coord));
        break;
      case ExprKind::Param:
        k += n->param;
        break;
      default:
        push64(static_cast<uint64_t>(n->pnum));
        push64(static_cast<uint64_t>(n->pden));
        for (int s : kid_slots) push64(static_cast<uint64_t>(s));
        break;
    }
    return k;
  };

  std::vector<int> kid_slots;
  std::vector<std::pair<const ExprNode*, size_t>> stack;
  std::unordered_map<const ExprNode*, Expr> pin;  // visited node -> owning handle

  for (const Expr& root : roots) {
    if (by_ptr.count(root.raw())) {
      prog.outputs_.push_back(by_ptr.at(root.raw()));
      continue;
    }
    stack.push_back({root.raw(), 0});
    pin.emplace(root.raw(), root);
    while (!stack.empty()) {
      auto& [n, next_kid] = stack.back();
      if (by_ptr.count(n)) {
        stack.pop_back();
        continue;
      }
      if (next_kid < n->kids.size()) {
        const ExprNode* k = n->kids[next_kid].raw();
        Expr kexpr = n->kids[next_kid];
        ++next_kid;
        if (!by_ptr.count(k)) {
          pin.emplace(k, kexpr);
          stack.push_back({k, 0});
        }
        continue;
      }
      kid_slots.clear();
      for (const Expr& k : n->kids) kid_slots.push_back(by_ptr.at(k.raw()));
      std::string key = key_of(n, kid_slots);
      auto found = by_key.find(key);
      if (found != by_key.end()) {
        by_ptr[n] = found->second;
        stack.pop_back();
        continue;
      }
      Instr ins;
      ins.op = n->kind;
      switch (n->kind) {
        case ExprKind::RationalConst:
          ins.c0 = n->rat.to_double();
          break;
        case ExprKind::FloatConst:
          ins.c0 = n->fval;
          break;
        case ExprKind::Coord:
          ins.coord = n->coord;
          break;
        case ExprKind::Param: {
          auto it = param_slot.find(n->param);
          if (it == param_slot.end()) {
            it = param_slot.emplace(n->param, static_cast<int>(prog.param_names_.size()))
                     .first;
            prog.param_names_.push_back(n->param);
          }
          ins.coord = it->second;
          break;
        }
        case ExprKind::Sum:
        case ExprKind::Product:
          ins.argpos = static_cast<int>(prog.args_.size());
          ins.argcnt = static_cast<int>(kid_slots.size());
          for (int s : kid_slots) prog.args_.push_back(s);
          break;
        case ExprKind::Quotient:
          ins.a = kid_slots[0];
          ins.b = kid_slots[1];
          break;
        case ExprKind::IntPow:
        case ExprKind::RatPow:
          ins.a = kid_slots[0];
          ins.pnum = n->pnum;
          ins.pden = n->pden;
          break;
        default:  // unary
          ins.a = kid_slots[0];
          break;
      }
      int slot = static_cast<int>(prog.instrs_.size());
      prog.instrs_.push_back(ins);
      prog.srcs_.push_back(pin.at(n));
      by_key.emplace(std::move(key), slot);
      by_ptr[n] = slot;
      stack.pop_back();
    }
    prog.outputs_.push_back(by_ptr.at(root.raw()));
  }
  return prog;
}

std::vector<double> Program::bind(const ParamMap& params) const {
  std::vector<double> out;
  out.reserve(param_names_.size());
  for (const std::string& name : param_names_) {
    auto it = params.find(name);
    if (it == params.end()) throw ExprError("missing parameter: " + name);
    out.push_back(it->second);
  }
  return out;
}

void Program::eval(std::span<const double> point, std::span<const double> bound_params,
                   std::vector<double>& scratch, std::span<double> out) const {
  scratch.resize(instrs_.size());
  double* v = scratch.data();
  for (size_t i = 0; i < instrs_.size(); ++i) {
    const Instr& ins = instrs_[i];
    switch (ins.op) {
      case ExprKind::RationalConst:
      case ExprKind::FloatConst:
        v[i] = ins.c0;
        break;
      case ExprKind::Coord:
        if (ins.coord >= static_cast<int>(point.size()))
          throw ExprError("coordinate index out of range for evaluation point");
        v[i] = point[ins.coord];
        break;
      case ExprKind::Param:
        v[i] = bound_params[ins.coord];
        break;
      case ExprKind::Sum: {
        double acc = 0.0;
        for (int a = 0; a < ins.argcnt; ++a) acc += v[args_[ins.argpos + a]];
        v[i] = acc;
        break;
      }
      case ExprKind::Product: {
        double acc = 1.0;
        for (int a = 0; a < ins.argcnt; ++a) acc *= v[args_[ins.argpos + a]];
        v[i] = acc;
        break;
      }
      case ExprKind::Quotient:
        if (v[ins.b] == 0.0)
          throw EvalError("division by zero",
                          print_limited(srcs_[i].raw(), nullptr, 200));
        v[i] = v[ins.a] / v[ins.b];
        break;
      case ExprKind::IntPow:
        if (v[ins.a] == 0.0 && ins.pnum < 0)
          throw EvalError("zero raised to a negative power",
                          print_limited(srcs_[i].raw(), nullptr, 200));
        v[i] = pow_by_squares(v[ins.a], ins.pnum);
        break;
      case ExprKind::RatPow: {
        double x = v[ins.a];
        if (x < 0.0)
          throw EvalError("fractional power of a negative value",
                          print_limited(srcs_[i].raw(), nullptr, 200));
        if (x == 0.0) {
          if (ins.pnum < 0)
            throw EvalError("zero raised to a negative power",
                            print_limited(srcs_[i].raw(), nullptr, 200));
          v[i] = 0.0;
        } else {
          v[i] = std::pow(x, static_cast<double>(ins.pnum) /
                                 static_cast<double>(ins.pden));
        }
        break;
      }
      case ExprKind::Neg:
        v[i] = -v[ins.a];
        break;
      case ExprKind::Sin:
        v[i] = std::sin(v[ins.a]);
        break;
      case ExprKind::Cos:
        v[i] = std::cos(v[ins.a]);
        break;
      case ExprKind::Tan:
        v[i] = std::tan(v[ins.a]);
        break;
      case ExprKind::Exp:
        v[i] = std::exp(v[ins.a]);
        break;
      case ExprKind::Log:
        if (v[ins.a] <= 0.0)
          throw EvalError("log of a non-positive value",
                          print_limited(srcs_[i].raw(), nullptr, 200));
        v[i] = std::log(v[ins.a]);
        break;
      case ExprKind::Sqrt:
        if (v[ins.a] < 0.0)
          throw EvalError("sqrt of a negative value",
                          print_limited(srcs_[i].raw(), nullptr, 200));
        v[i] = std::sqrt(v[ins.a]);
        break;
    }
  }
  for (size_t o = 0; o < outputs_.size(); ++o) out[o] = v[outputs_[o]];
}

std::vector<double> Program::eval_all(std::span<const double> point,
                                      const ParamMap& params) const {
  std::vector<double> bound = bind(params);
  std::vector<double> scratch;
  std::vector<double> out(outputs_.size());
  eval(point, bound, scratch, out);
  return out;
}

}  // namespace qcurv
