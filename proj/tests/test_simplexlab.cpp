#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/simplexlab.hpp"
#include "qcurv/tensor.hpp"

using namespace qcurv;

namespace {

SimplexPoint make_point(std::vector<double> x) {
  SimplexPoint p;
  p.n = static_cast<int>(x.size());
  p.x = std::move(x);
  return p;
}

SimplexPoint uniform_point(int n) {
  return make_point(std::vector<double>(n, 1.0 / n));
}

SimplexPoint boundary_point(int n) {
  std::vector<double> x(n, 1.0 / (n - 1));
  x.back() = 0.0;
  return make_point(std::move(x));
}

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TEST_CASE("dimension constants: exact values at n = 6") {
  const DimensionConstants dc = dimension_constants(6);
  CHECK(dc.a_n == Rational(1, 10));
  CHECK(dc.b_n == Rational(1, 8));
  CHECK(dc.c_n == Rational(19, 400));
  CHECK(dc.d_n == Rational(11, 300));
  CHECK(dc.l_n == Rational(11, 300));
  CHECK(dc.beta_n == Rational(11, 45));
  CHECK(dimension_constants(3).beta_n == Rational(5, 9));
  CHECK_THROWS_AS(dimension_constants(2), std::invalid_argument);
}

TEST_CASE("dimension constants: exact consistency identities") {
  for (int n = 3; n <= 20; ++n) {
    const DimensionConstants dc = dimension_constants(n);
    const Rational combo =
        (Rational(n + 2, 2LL * (n - 1)) - Rational(2, n)) * dc.b_n -
        Rational(2) * dc.c_n;
    CHECK(combo == -dc.l_n);
    CHECK(dc.l_n > Rational(0));

    const Rational mix = Rational(n - 2, n - 1) * dc.b_n -
                         Rational(n, n - 1) * dc.a_n;
    const Rational closed(-1LL * n * n + 6 * n - 4,
                          2LL * (n - 1) * (n - 1) * (n - 2));
    CHECK(mix == closed);
    if (n >= 6) CHECK(mix < Rational(0));
    if (n <= 5) CHECK(mix > Rational(0));
  }
}

TEST_CASE("f_n on equality families and the 4/9 critical point") {
  for (int n = 3; n <= 10; ++n) {
    CHECK(std::abs(f_n_eval(uniform_point(n))) < 1e-15);
    CHECK(std::abs(f_n_eval(boundary_point(n))) < 1e-15);
  }
  const SimplexPoint p = make_point({4.0 / 9, 4.0 / 9, 1.0 / 9});
  CHECK(f_n_eval(p) == doctest::Approx(1.0 / 81).epsilon(1e-13));

  CHECK(valid_simplex_point(p));
  CHECK_FALSE(valid_simplex_point(make_point({0.5, 0.6})));
  CHECK_FALSE(valid_simplex_point(make_point({1.5, -0.5})));
}

TEST_CASE("equality family classification") {
  CHECK(classify_equality_family(uniform_point(6), 1e-9) ==
        SimplexFamily::uniform);
  CHECK(classify_equality_family(boundary_point(6), 1e-9) ==
        SimplexFamily::boundary);
  // Permutation independence.
  SimplexPoint shuffled = make_point({1.0 / 5, 0.0, 1.0 / 5, 1.0 / 5, 1.0 / 5, 1.0 / 5});
  CHECK(classify_equality_family(shuffled, 1e-9) == SimplexFamily::boundary);
  CHECK(classify_equality_family(make_point({0.4, 0.3, 0.3}), 1e-2) ==
        SimplexFamily::none);
}

TEST_CASE("lattice search n = 3, depth 60: both equality families") {
  const SimplexMinResult res = simplex_min_search(3, 60);
  CHECK(res.min_is_zero);
  CHECK(res.min_value == 0.0);
  REQUIRE(res.zero_lattice.size() == 2);
  const std::vector<int> uniform{20, 20, 20}, boundary{30, 30, 0};
  CHECK(std::find(res.zero_lattice.begin(), res.zero_lattice.end(), uniform) !=
        res.zero_lattice.end());
  CHECK(std::find(res.zero_lattice.begin(), res.zero_lattice.end(), boundary) !=
        res.zero_lattice.end());
  CHECK(res.refined_value >= -1e-12);
  CHECK(res.refined_value <= 1e-12);
}

TEST_CASE("lattice search n = 6, depth 30: both equality families") {
  const SimplexMinResult res = simplex_min_search(6, 30);
  CHECK(res.min_is_zero);
  REQUIRE(res.zero_lattice.size() == 2);
  const std::vector<int> uniform{5, 5, 5, 5, 5, 5}, boundary{6, 6, 6, 6, 6, 0};
  CHECK(std::find(res.zero_lattice.begin(), res.zero_lattice.end(), uniform) !=
        res.zero_lattice.end());
  CHECK(std::find(res.zero_lattice.begin(), res.zero_lattice.end(), boundary) !=
        res.zero_lattice.end());
}

TEST_CASE("lattice search depth 40: zeros are exactly the representable families") {
  for (int n = 3; n <= 10; ++n) {
    CAPTURE(n);
    const int depth = 40;
    const SimplexMinResult res = simplex_min_search(n, depth);
    CHECK(res.min_value >= -1e-12);

    std::vector<std::vector<int>> expected;
    if (depth % n == 0) expected.emplace_back(n, depth / n);
    if (depth % (n - 1) == 0) {
      std::vector<int> b(n, depth / (n - 1));
      b.back() = 0;
      expected.push_back(std::move(b));
    }
    REQUIRE(res.zero_lattice.size() == expected.size());
    for (const auto& z : expected)
      CHECK(std::find(res.zero_lattice.begin(), res.zero_lattice.end(), z) !=
            res.zero_lattice.end());
    CHECK(res.min_is_zero == !expected.empty());

    // Every lattice zero sits on an equality family.
    for (const auto& z : res.zero_lattice) {
      SimplexPoint p;
      p.n = n;
      for (int k : z) p.x.push_back(static_cast<double>(k) / depth);
      CHECK(classify_equality_family(p, 2.0 / depth) != SimplexFamily::none);
    }

    // Refinement never climbs, stays on the simplex, never goes negative.
    CHECK(res.refined_value <= res.min_value + 1e-15);
    CHECK(res.refined_value >= -1e-12);
    CHECK(valid_simplex_point(res.argmin));
  }
}

TEST_CASE("lattice search n = 7, depth 40: strict positivity off the families") {
  // Neither 1/7 nor 1/6 is representable with spacing 1/40, so the lattice
  // minimum is strictly positive while refinement recovers a near-zero.
  const SimplexMinResult res = simplex_min_search(7, 40);
  CHECK_FALSE(res.min_is_zero);
  CHECK(res.min_value > 0.0);
  CHECK(res.zero_lattice.empty());
  CHECK(res.refined_value < res.min_value);
  CHECK(res.refined_value >= -1e-12);
  CHECK(classify_equality_family(res.argmin, 1e-4) != SimplexFamily::none);
}

TEST_CASE("lattice search argument guards") {
  CHECK_THROWS_AS(simplex_min_search(2, 40), std::invalid_argument);
  CHECK_THROWS_AS(simplex_min_search(13, 40), std::invalid_argument);
  CHECK_THROWS_AS(simplex_min_search(5, 19), std::invalid_argument);
}

TEST_CASE("critical points n = 3") {
  const auto cps = critical_points(3);
  REQUIRE(cps.size() == 3);  // m = 0, 1, 2 all survive
  for (const auto& cp : cps) {
    double sum = 0.0;
    for (double v : cp.point) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f_n_eval(make_point(cp.point)) ==
          doctest::Approx(cp.value).epsilon(1e-12));
  }
  CHECK(cps[0].m == 0);
  CHECK(cps[0].alpha == doctest::Approx(1.0 / 9).epsilon(1e-15));
  CHECK(cps[0].value == doctest::Approx(1.0 / 81).epsilon(1e-15));
  CHECK(cps[0].classification == CriticalKind::interior_other);
  CHECK(cps[1].m == 1);
  CHECK(cps[1].alpha == doctest::Approx(4.0 / 9).epsilon(1e-15));
  CHECK(cps[1].value == doctest::Approx(1.0 / 81).epsilon(1e-15));
  CHECK(cps[2].m == 2);
  CHECK(cps[2].alpha == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(cps[2].value == 0.0);
  CHECK(cps[2].classification == CriticalKind::interior_min);
}

TEST_CASE("critical points n = 6: infeasible branches are dropped") {
  const auto cps = critical_points(6);
  REQUIRE(cps.size() == 3);  // m = 1, 3 leave the simplex; m = 2 is skipped
  CHECK(cps[0].m == 0);
  CHECK(cps[0].alpha == doctest::Approx(1.0 / 18).epsilon(1e-15));
  CHECK(cps[0].point[1] == doctest::Approx(17.0 / 90).epsilon(1e-15));
  CHECK(cps[0].value == doctest::Approx(8.0 / 2025).epsilon(1e-15));
  CHECK(cps[0].classification == CriticalKind::interior_other);
  CHECK(cps[1].m == 4);
  CHECK(cps[1].alpha == doctest::Approx(17.0 / 90).epsilon(1e-15));
  CHECK(cps[1].value == doctest::Approx(8.0 / 2025).epsilon(1e-15));
  CHECK(cps[2].m == 5);
  CHECK(cps[2].alpha == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(cps[2].value == 0.0);
  CHECK(cps[2].classification == CriticalKind::interior_min);
}

TEST_CASE("critical points: uniform branch for every n") {
  for (int n = 3; n <= 12; ++n) {
    const auto cps = critical_points(n);
    bool found_uniform = false;
    for (const auto& cp : cps) {
      if (cp.m == n - 1) {
        found_uniform = true;
        CHECK(cp.alpha == doctest::Approx(1.0 / n).epsilon(1e-15));
        CHECK(cp.value == 0.0);
        CHECK(cp.classification == CriticalKind::interior_min);
      }
      for (double v : cp.point) CHECK(v >= 0.0);
      double sum = 0.0;
      for (double v : cp.point) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }
    CHECK(found_uniform);
  }
}

TEST_CASE("I on eigenvalue spectra: frozen values") {
  CHECK(std::abs(I_from_eigenvalues(4, {2, 2, 2, 2})) < 1e-10);
  CHECK(std::abs(I_from_eigenvalues(6, {0, 4, 4, 4, 4, 4})) < 1e-10);
  CHECK(I_from_eigenvalues(3, {1, 2, 3}) == doctest::Approx(6.0).epsilon(1e-13));
  CHECK_THROWS_AS(I_from_eigenvalues(2, {1, 1}), std::invalid_argument);
}

TEST_CASE("I is cubically homogeneous and nonnegative on nonnegative spectra") {
  std::mt19937_64 rng(0x51137EB5ULL);
  for (int n = 3; n <= 8; ++n) {
    CAPTURE(n);
    double min_seen = 1.0;
    for (int trial = 0; trial < 100000; ++trial) {
      std::vector<double> lam(n);
      double sum = 0.0;
      for (double& v : lam) {
        v = unit_double(rng);
        sum += v;
      }
      for (double& v : lam) v /= sum;  // scale to a simplex point
      const double val = I_from_eigenvalues(n, lam);
      min_seen = std::min(min_seen, val);
      if (val < 1e-14) {
        SimplexPoint p;
        p.n = n;
        p.x = lam;
        CHECK(classify_equality_family(p, 1e-5) != SimplexFamily::none);
      }
    }
    CHECK(min_seen >= -1e-12);

    // Homogeneity I(c lambda) = c^3 I(lambda).
    std::vector<double> lam(n);
    for (double& v : lam) v = 0.1 + unit_double(rng);
    std::vector<double> scaled(lam);
    for (double& v : scaled) v *= 1.7;
    const double lhs = I_from_eigenvalues(n, scaled);
    const double rhs = 1.7 * 1.7 * 1.7 * I_from_eigenvalues(n, lam);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("I vanishes on the Ricci spectrum of the product line chart") {
  // R x S^5 has Ricci eigenvalues (0, 4, 4, 4, 4, 4) relative to the metric:
  // the degenerate equality family scaled by 4.
  const int n = 6;
  std::vector<Axis> axes;
  axes.push_back({"t", -1.0, 1.0, AxisKind::Open});
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  g[0][0] = integer(1);
  Expr s{};
  for (int i = 1; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i), -0.9, 0.9, AxisKind::Open});
    s = s + int_pow(coordinate(i), 2);
  }
  const Expr conf = quotient(integer(4), int_pow(integer(1) + s, 2));
  for (int i = 1; i < n; ++i) g[i][i] = conf;
  ChartGeometry geo(MetricChart("cyl", axes, g));
  const std::vector<double> pt{0.2, 0.1, -0.2, 0.15, 0.05, -0.1};
  const CurvatureBundle b = geo.bundle(pt);
  const EigenData eig = sym_eigen_rel(b.ricci, b.metric);
  CHECK(std::abs(I_from_eigenvalues(n, eig.eigenvalues)) < 1e-8);
}
