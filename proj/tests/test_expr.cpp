#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "qcurv/expr.hpp"

using namespace qcurv;

namespace {

std::optional<double> try_eval(const Expr& e, std::span<const double> pt,
                               const ParamMap* params = nullptr) {
  try {
    double v = eval(e, pt, params);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

// 4th-order central difference, step scaled by coordinate magnitude.
std::optional<double> fd_partial(const Expr& e, std::vector<double> pt, int coord,
                                 double h0 = 1e-4) {
  double h = h0 * std::max(1.0, std::fabs(pt[coord]));
  double x = pt[coord];
  auto at = [&](double xi) -> std::optional<double> {
    pt[coord] = xi;
    return try_eval(e, pt);
  };
  auto p2 = at(x + 2 * h), p1 = at(x + h), m1 = at(x - h), m2 = at(x - 2 * h);
  pt[coord] = x;
  if (!p2 || !p1 || !m1 || !m2) return std::nullopt;
  return (-*p2 + 8 * *p1 - 8 * *m1 + *m2) / (12 * h);
}

// Random well-formed expressions over `dim` coordinates.  fd_safe keeps the
// expression smooth and moderately scaled so finite differences are a usable
// oracle (no tan poles, no bare quotients with vanishing denominators).
struct ExprGen {
  std::mt19937_64 rng;
  int dim;
  bool fd_safe;

  ExprGen(uint64_t seed, int dim, bool fd_safe)
      : rng(seed), dim(dim), fd_safe(fd_safe) {}

  int pick(int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }

  double uniform(double a, double b) {
    return a + (b - a) * std::uniform_real_distribution<double>(0, 1)(rng);
  }

  Expr leaf() {
    switch (pick(4)) {
      case 0:
      case 1:
        return coordinate(pick(dim));
      case 2: {
        long long num = pick(9) - 4;
        long long den = 1 + pick(4);
        return rational_const(Rational(num, den));
      }
      default:
        return float_const(uniform(-2.0, 2.0));
    }
  }

  Expr gen(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(fd_safe ? 9 : 11)) {
      case 0: {
        std::vector<Expr> t;
        int k = 2 + pick(2);
        for (int i = 0; i < k; ++i) t.push_back(gen(depth - 1));
        return sum_of(std::move(t));
      }
      case 1: {
        std::vector<Expr> t;
        int k = 2 + pick(2);
        for (int i = 0; i < k; ++i) t.push_back(gen(depth - 1));
        return product_of(std::move(t));
      }
      case 2:
        return sin_of(gen(depth - 1));
      case 3:
        return cos_of(gen(depth - 1));
      case 4:  // exp of a damped argument to avoid overflow
        return exp_of(product_of({rational_const(Rational(1, 4)), gen(depth - 1)}));
      case 5:  // log of a manifestly positive argument
        return log_of(integer(2) + int_pow(gen(depth - 1), 2));
      case 6:  // sqrt of a manifestly nonnegative argument
        return sqrt_of(integer(1) + int_pow(gen(depth - 1), 2));
      case 7: {
        long long k = pick(5) - 2;
        return int_pow(gen(depth - 1), k == 0 ? 2 : k);
      }
      case 8: {  // rational power of a positive base
        static const long long nums[] = {1, 3, -1, 2};
        static const long long dens[] = {2, 2, 3, 3};
        int i = pick(4);
        return rat_pow(integer(1) + int_pow(gen(depth - 1), 2), nums[i], dens[i]);
      }
      case 9:
        return quotient(gen(depth - 1), gen(depth - 1));
      default:
        return tan_of(gen(depth - 1));
    }
  }

  std::vector<double> point() {
    std::vector<double> p(dim);
    for (double& v : p) v = uniform(-2.0, 2.0);
    return p;
  }
};

const std::vector<std::string> kXY{"x", "y"};
const std::vector<std::string> kX{"x"};

}  // namespace

TEST_CASE("parsing and evaluating the documented examples") {
  Expr e1 = parse_expression("4/(1+x1^2+x2^2)^2", {"x1", "x2"});
  CHECK(eval(e1, std::vector<double>{0.0, 0.0}) == doctest::Approx(4.0).epsilon(1e-15));

  Expr e2 = parse_expression("sin(t)^2", {"t"});
  CHECK(eval(e2, std::vector<double>{0.0}) == 0.0);

  Expr e3 = parse_expression("r^2*sin(th)^2", {"th", "ph"}, {"r"});
  ParamMap pm{{"r", 2.0}};
  std::vector<double> pt{M_PI / 2, 0.3};
  CHECK(eval(e3, pt, &pm) == doctest::Approx(4.0).epsilon(1e-14));

  CHECK(eval(integer(7), std::vector<double>{1.5}) == 7.0);
  CHECK(eval(exp_of(integer(0)), std::vector<double>{0.0}) == 1.0);
}

TEST_CASE("derivatives match the frozen examples") {
  Expr x2 = parse_expression("x^2", kX);
  Expr d1 = simplify(diff(x2, 0));
  CHECK(structurally_equal(d1, integer(2) * coordinate(0)));

  Expr e = parse_expression("4/(1+x^2)^2", kX);
  Expr de = diff(e, 0);
  std::vector<double> at1{1.0};
  double exact = eval(de, at1);
  CHECK(exact == doctest::Approx(-2.0).epsilon(1e-12));

  // plain central stencil, h = 1e-5, agreement to 1e-8
  double h = 1e-5;
  double fd = (eval(e, std::vector<double>{1.0 + h}) -
               eval(e, std::vector<double>{1.0 - h})) /
              (2 * h);
  CHECK(std::fabs(fd - exact) <= 1e-8 * std::max(1.0, std::fabs(exact)));

  Expr s = parse_expression("sin(t)", {"t"});
  CHECK(eval(diff(s, 0), std::vector<double>{0.0}) == 1.0);
}

TEST_CASE("domain errors report the offending subexpression") {
  Expr inv = parse_expression("1/x", kX);
  CHECK_THROWS_AS(eval(inv, std::vector<double>{0.0}), EvalError);
  try {
    eval(inv, std::vector<double>{0.0});
  } catch (const EvalError& err) {
    CHECK(err.subexpr == "1/x1");  // diagnostics print default coordinate names
    CHECK(std::string(err.what()).find("division by zero") != std::string::npos);
  }

  Expr lg = parse_expression("log(x)", kX);
  try {
    eval(lg, std::vector<double>{-1.0});
    CHECK(false);
  } catch (const EvalError& err) {
    CHECK(err.subexpr == "log(x1)");
  }

  Expr rt = parse_expression("sqrt(x)", kX);
  CHECK_THROWS_AS(eval(rt, std::vector<double>{-2.0}), EvalError);

  Expr half = parse_expression("x^(1/2)", kX);
  CHECK_THROWS_AS(eval(half, std::vector<double>{-1.0}), EvalError);

  Expr neg = parse_expression("x^(-1)", kX);
  CHECK_THROWS_AS(eval(neg, std::vector<double>{0.0}), EvalError);
}

TEST_CASE("simplify performs folding, absorption and power merging") {
  Expr x = coordinate(0), y = coordinate(1);

  // 0*x + 1*y -> y (already at construction)
  Expr a = parse_expression("0*x + 1*y", kXY);
  CHECK(structurally_equal(a, y));

  // x^2 * x^3 -> x^5
  Expr b = simplify(parse_expression("x^2 * x^3", kXY));
  CHECK(structurally_equal(b, int_pow(x, 5)));

  // (1+0)^2 -> 1
  Expr c = parse_expression("(1+0)^2", kXY);
  CHECK(is_one_literal(c));

  CHECK(is_zero_literal(simplify(x - x)));
  CHECK(structurally_equal(simplify(x + x), integer(2) * x));
  CHECK(structurally_equal(simplify(integer(2) * x + integer(3) * x),
                           integer(5) * x));
  CHECK(structurally_equal(simplify(x * x), int_pow(x, 2)));

  Expr q = simplify(quotient(x, integer(4)));
  CHECK(structurally_equal(q, rational_const(Rational(1, 4)) * x));

  // sqrt of a perfect rational square folds
  CHECK(structurally_equal(sqrt_of(rational_const(Rational(9, 4))),
                           rational_const(Rational(3, 2))));
}

TEST_CASE("parser reports errors with byte offsets") {
  CHECK_THROWS_AS(parse_expression("x +* y", kXY), ParseError);
  try {
    parse_expression("x + z", kXY);
    CHECK(false);
  } catch (const ParseError& err) {
    CHECK(err.offset == 4);
    CHECK(std::string(err.what()).find("unknown identifier") != std::string::npos);
  }
  try {
    parse_expression("x ? y", kXY);
    CHECK(false);
  } catch (const ParseError& err) {
    CHECK(err.offset == 2);
  }
  CHECK_THROWS_AS(parse_expression("x/", kXY), ParseError);
  CHECK_THROWS_AS(parse_expression("x y", kXY), ParseError);  // trailing input
  CHECK_THROWS_AS(parse_expression("sin x", kXY), ParseError);
  CHECK_THROWS_AS(parse_expression("(x", kXY), ParseError);

  // exponents must be rational constants
  CHECK_THROWS_AS(parse_expression("x^y", kXY), ParseError);
  CHECK_THROWS_AS(parse_expression("2^x", kXY), ParseError);
  CHECK_THROWS_AS(parse_expression("x^1.5", kXY), ParseError);
  CHECK_NOTHROW(parse_expression("x^(1/2 + 1/3)", kXY));

  // names may not shadow the function vocabulary
  CHECK_THROWS_AS(parse_expression("sin", {"sin"}), ParseError);
  CHECK_THROWS_AS(parse_expression("x", kX, {"sqrt"}), ParseError);
}

TEST_CASE("grammar precedence: power > unary minus > product > sum") {
  // -x^2 == -(x^2)
  Expr e = parse_expression("-x^2", kX);
  CHECK(eval(e, std::vector<double>{3.0}) == -9.0);

  // 2*x^3 + 1 at x=2 -> 17
  CHECK(eval(parse_expression("2*x^3 + 1", kX), std::vector<double>{2.0}) == 17.0);

  // a/b/c is left-associative
  CHECK(eval(parse_expression("8/4/2", kX), std::vector<double>{0.0}) == 1.0);

  // x^(3/2) parses as a rational power, not (x^3)/2
  Expr r = parse_expression("x^(3/2)", kX);
  CHECK(r.kind() == ExprKind::RatPow);
  CHECK(eval(r, std::vector<double>{4.0}) == 8.0);
}

TEST_CASE("print-parse round trip is structure-preserving on parsed forms") {
  const char* sources[] = {
      "4/(x1^2 + x2^2 + 1)^2", "sin(x1)^2",      "x1^(1/2)",
      "-x1 + 2*x2",            "exp(x1)*log(1 + x2^2)",
      "x1/x2/ (1 + x1^2)",     "(x1 + x2)^3",    "2.5*x1",
      "x1^(-3/2)",             "sqrt(1 + x1^2)", "tan(x1*x2)",
  };
  for (const char* src : sources) {
    Expr e = parse_expression(src, {"x1", "x2"});
    Expr back = parse_expression(to_string(e), {"x1", "x2"});
    CHECK_MESSAGE(structurally_equal(e, back), src, " -> ", to_string(e));
  }
}

TEST_CASE("random expressions: simplify preserves evaluation") {
  ExprGen gen(20260816, 3, false);
  int tested = 0;
  for (int i = 0; i < 1000; ++i) {
    Expr e = gen.gen(4);
    Expr s = simplify(e);
    for (int j = 0; j < 3; ++j) {
      std::vector<double> pt = gen.point();
      auto v = try_eval(e, pt);
      if (!v) continue;
      double sv;
      try {
        sv = eval(s, pt);
      } catch (const EvalError&) {
        // simplification may only widen the domain, never shrink it
        CHECK_MESSAGE(false, "simplified form lost domain: ", to_string(e));
        continue;
      }
      ++tested;
      double tol = 1e-12 * std::max({1.0, std::fabs(*v), std::fabs(sv)});
      CHECK_MESSAGE(std::fabs(*v - sv) <= tol, to_string(e), " vs ", to_string(s));
    }
  }
  CHECK(tested > 1500);  // the generator must produce mostly evaluable samples
}

TEST_CASE("random expressions: symbolic derivative matches finite differences") {
  ExprGen gen(977101, 2, true);
  int tested = 0;
  for (int i = 0; i < 300; ++i) {
    Expr e = gen.gen(3);
    for (int coord = 0; coord < 2; ++coord) {
      Expr de = diff(e, coord);
      std::vector<double> pt = gen.point();
      auto ex = try_eval(de, pt);
      auto fd = fd_partial(e, pt, coord);
      if (!ex || !fd) continue;
      // scale the tolerance by the local magnitude of f and f'
      double scale = std::max({1.0, std::fabs(*ex), std::fabs(*fd)});
      auto f0 = try_eval(e, pt);
      if (f0) scale = std::max(scale, std::fabs(*f0));
      if (scale > 1e3) continue;  // steep samples drown the stencil in roundoff
      ++tested;
      CHECK_MESSAGE(std::fabs(*ex - *fd) <= 1e-7 * scale, to_string(e),
                    " coord ", coord, " exact ", *ex, " fd ", *fd);
    }
  }
  CHECK(tested > 300);
}

TEST_CASE("mixed partials commute") {
  ExprGen gen(55105, 2, true);
  int tested = 0;
  for (int i = 0; i < 200; ++i) {
    Expr e = gen.gen(3);
    Expr dxy = diff(diff(e, 0), 1);
    Expr dyx = diff(diff(e, 1), 0);
    std::vector<double> pt = gen.point();
    auto a = try_eval(dxy, pt);
    auto b = try_eval(dyx, pt);
    if (!a || !b) continue;
    ++tested;
    double tol = 1e-10 * std::max({1.0, std::fabs(*a), std::fabs(*b)});
    CHECK_MESSAGE(std::fabs(*a - *b) <= tol, to_string(e));
  }
  CHECK(tested > 100);
}

TEST_CASE("compiled programs match the recursive evaluator exactly") {
  ExprGen gen(424243, 3, false);
  for (int i = 0; i < 200; ++i) {
    Expr e = gen.gen(4);
    Expr de = diff(e, 0);
    Program prog = Program::compile({e, de});
    std::vector<double> pt = gen.point();
    std::optional<double> v0, v1;
    try {
      v0 = eval(e, pt);
      v1 = eval(de, pt);
    } catch (const EvalError&) {
      CHECK_THROWS_AS(prog.eval_all(pt), EvalError);
      continue;
    }
    std::vector<double> out = prog.eval_all(pt);
    REQUIRE(out.size() == 2);
    // bit-identical: same operations in the same order
    CHECK(out[0] == *v0);
    CHECK(out[1] == *v1);
  }
}

TEST_CASE("compiled programs deduplicate structurally equal subtrees") {
  // two independently parsed copies share slots
  Expr e = parse_expression("sin(x1) + sin(x1)", {"x1"});
  Program p = Program::compile({e});
  CHECK(p.num_slots() == 3);  // coord, sin, sum

  Expr s = coordinate(0) + coordinate(1);
  Program p2 = Program::compile({s, s * s});
  CHECK(p2.num_slots() == 4);  // x, y, sum, product
  std::vector<double> out = p2.eval_all(std::vector<double>{2.0, 3.0});
  CHECK(out[0] == 5.0);
  CHECK(out[1] == 25.0);
}

TEST_CASE("programs bind named parameters by slot") {
  Expr e = parse_expression("a*x + b", kX, {"a", "b"});
  Program p = Program::compile({e});
  REQUIRE(p.param_names().size() == 2);
  ParamMap pm{{"a", 3.0}, {"b", -1.0}};
  std::vector<double> out = p.eval_all(std::vector<double>{2.0}, pm);
  CHECK(out[0] == 5.0);

  ParamMap missing{{"a", 3.0}};
  CHECK_THROWS_AS(p.bind(missing), ExprError);
  CHECK_THROWS_AS(eval(e, std::vector<double>{1.0}, &missing), ExprError);
}

TEST_CASE("rational constant folding is exact and overflow falls back") {
  Expr e = parse_expression("1/3 + 1/6", kX);
  CHECK(e.kind() == ExprKind::RationalConst);
  CHECK(e.node().rat == Rational(1, 2));

  // folding powers: (2/3)^3 = 8/27
  Expr p = int_pow(rational_const(Rational(2, 3)), 3);
  CHECK(p.node().rat == Rational(8, 27));

  // an overflowing power keeps the node instead of folding
  Expr big = int_pow(integer(10), 40);
  CHECK(big.kind() == ExprKind::IntPow);
  CHECK(eval(big, std::vector<double>{}) == doctest::Approx(1e40).epsilon(1e-12));

  // nested integer powers merge exponents
  Expr m = int_pow(int_pow(coordinate(0), 3), 4);
  CHECK(m.kind() == ExprKind::IntPow);
  CHECK(m.node().pnum == 12);
}

TEST_CASE("node sharing keeps counts small") {
  Expr x = coordinate(0);
  Expr s = sin_of(x);
  Expr e = s * s + s;  // sin(x) shared
  CHECK(node_count(e) <= 5);
  CHECK(structurally_equal(s * s, int_pow(s, 2)) == false);  // distinct shapes
  CHECK(structurally_equal(simplify(s * s), int_pow(s, 2)));
}
