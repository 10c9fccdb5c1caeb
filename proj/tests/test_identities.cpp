#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/identities.hpp"

using namespace qcurv;

namespace {

const double kPi = 3.14159265358979323846;

MetricChart euclidean_chart(int n) {
  std::vector<Axis> axes;
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i + 1), -2.0, 2.0, AxisKind::Open});
    g[i][i] = integer(1);
  }
  return MetricChart("euclidean", axes, g);
}

// Round unit sphere, stereographic: 4/(1+|x|^2)^2 delta.
MetricChart sphere_chart(int n) {
  std::vector<Axis> axes;
  Expr r2{};
  for (int i = 0; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i + 1), -0.8, 0.8, AxisKind::Open});
    r2 = r2 + int_pow(coordinate(i), 2);
  }
  const Expr conf = quotient(integer(4), int_pow(integer(1) + r2, 2));
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) g[i][i] = conf;
  return MetricChart("sphere", axes, g);
}

// Conformally flat periodic chart e^{2f} delta with a two-mode f per axis.
MetricChart lcf_chart(int n, uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Expr> modes;
  for (int a = 0; a < n; ++a) {
    modes.push_back(product_of(
        {float_const(amplitude * (2.0 * unit() - 1.0)), sin_of(coordinate(a))}));
    modes.push_back(product_of(
        {float_const(amplitude * (2.0 * unit() - 1.0)), cos_of(coordinate(a))}));
  }
  const Expr f = sum_of(std::move(modes));
  const Expr conf = exp_of(product_of({integer(2), f}));
  std::vector<Axis> axes;
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i + 1), 0.0, 2.0 * kPi, AxisKind::Periodic});
    g[i][i] = conf;
  }
  return MetricChart("lcf", axes, g);
}

// Distinct conformal factor per axis: generic Weyl, nonzero div-Weyl.
MetricChart bumpy_chart(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-0.2, 0.2);
  std::vector<Axis> axes;
  for (int i = 0; i < n; ++i)
    axes.push_back({"x" + std::to_string(i + 1), 0.0, 2.0 * kPi, AxisKind::Periodic});
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < n; ++j) {
      terms.push_back(product_of({float_const(amp(rng)), sin_of(coordinate(j))}));
      terms.push_back(product_of({float_const(amp(rng)), cos_of(coordinate(j))}));
    }
    g[i][i] = exp_of(product_of({integer(2), sum_of(std::move(terms))}));
  }
  return MetricChart("bumpy", axes, g);
}

// S^2(1) x S^4(sqrt 3): Einstein, parallel curvature, nonzero Weyl.
MetricChart product_spheres_chart() {
  Expr r2a{}, r2b{};
  std::vector<Axis> axes;
  for (int i = 0; i < 6; ++i)
    axes.push_back({"x" + std::to_string(i + 1), -0.6, 0.6, AxisKind::Open});
  for (int i = 0; i < 2; ++i) r2a = r2a + int_pow(coordinate(i), 2);
  for (int i = 2; i < 6; ++i) r2b = r2b + int_pow(coordinate(i), 2);
  const Expr s2 = quotient(integer(4), int_pow(integer(1) + r2a, 2));
  const Expr s4 = quotient(integer(36), int_pow(integer(3) + r2b, 2));
  std::vector<std::vector<Expr>> g(6, std::vector<Expr>(6));
  for (int i = 0; i < 2; ++i) g[i][i] = s2;
  for (int i = 2; i < 6; ++i) g[i][i] = s4;
  return MetricChart("s2xs4", axes, g);
}

MetricChart cylinder_chart(int n) {
  std::vector<Axis> axes;
  axes.push_back({"t", -1.0, 1.0, AxisKind::Open});
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  g[0][0] = integer(1);
  Expr r2{};
  for (int i = 1; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i), -0.9, 0.9, AxisKind::Open});
    r2 = r2 + int_pow(coordinate(i), 2);
  }
  const Expr conf = quotient(integer(4), int_pow(integer(1) + r2, 2));
  for (int i = 1; i < n; ++i) g[i][i] = conf;
  return MetricChart("cylinder", axes, g);
}

// Small conformal perturbation of the round sphere: stays Ric > 0 and
// conformally flat.
MetricChart perturbed_sphere_chart(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Expr r2{};
  std::vector<Axis> axes;
  for (int i = 0; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i + 1), -0.8, 0.8, AxisKind::Open});
    r2 = r2 + int_pow(coordinate(i), 2);
  }
  std::vector<Expr> modes;
  for (int a = 0; a < n; ++a)
    modes.push_back(product_of(
        {float_const(0.05 * (2.0 * unit() - 1.0)), sin_of(coordinate(a))}));
  const Expr conf = product_of(
      {quotient(integer(4), int_pow(integer(1) + r2, 2)),
       exp_of(product_of({integer(2), sum_of(std::move(modes))}))});
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) g[i][i] = conf;
  return MetricChart("perturbed_sphere", axes, g);
}

MetricChart hyperbolic_chart(int n) {
  const double half = 0.5 / std::sqrt(static_cast<double>(n));
  Expr r2{};
  std::vector<Axis> axes;
  for (int i = 0; i < n; ++i) {
    axes.push_back({"x" + std::to_string(i + 1), -half, half, AxisKind::Open});
    r2 = r2 + int_pow(coordinate(i), 2);
  }
  const Expr conf = quotient(integer(4), int_pow(integer(1) - r2, 2));
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) g[i][i] = conf;
  return MetricChart("hyperbolic", axes, g);
}

}  // namespace

TEST_CASE("point sampling is deterministic and stays in the central band") {
  const MetricChart chart = lcf_chart(4, 7, 0.1);
  const auto a = sample_chart_points(chart, 12, 42);
  const auto b = sample_chart_points(chart, 12, 42);
  const auto c = sample_chart_points(chart, 12, 43);
  CHECK(a == b);
  CHECK(a != c);
  REQUIRE(a.size() == 12);
  for (const auto& p : a) {
    REQUIRE(p.size() == 4);
    for (double x : p) {
      CHECK(x >= 0.1 * 2.0 * kPi - 1e-12);
      CHECK(x <= 0.9 * 2.0 * kPi + 1e-12);
    }
  }
}

TEST_CASE("schouten divergence identity") {
  ChartGeometry flat(euclidean_chart(3));
  const auto pts_flat = sample_chart_points(flat.chart(), 5, 1);
  const IdentityReport r0 = verify_schouten_div(flat, pts_flat);
  CHECK(r0.pass);
  CHECK(r0.points_tested == 5);
  CHECK(r0.scale < 1e-8);
  CHECK(r0.max_rel == 0.0);

  ChartGeometry sph(sphere_chart(6));
  const auto pts_s = sample_chart_points(sph.chart(), 5, 2);
  CHECK(verify_schouten_div(sph, pts_s).pass);

  ChartGeometry lcf(lcf_chart(6, 11, 0.1));
  const auto pts = sample_chart_points(lcf.chart(), 10, 3);
  const IdentityReport r = verify_schouten_div(lcf, pts, 1e-7);
  CHECK(r.pass);
  CHECK(r.scale > 1e-4);  // genuinely nonzero sides
  CHECK(r.max_rel <= 1e-7);

  // The pass flag follows the tolerance argument.
  const IdentityReport strict = verify_schouten_div(lcf, pts, 1e-18);
  CHECK_FALSE(strict.pass);
}

TEST_CASE("weyl divergence identity") {
  ChartGeometry flat(euclidean_chart(4));
  const auto pts_flat = sample_chart_points(flat.chart(), 4, 1);
  CHECK(verify_div_weyl(flat, pts_flat).pass);

  ChartGeometry lcf(lcf_chart(6, 5, 0.1));
  const auto pts_lcf = sample_chart_points(lcf.chart(), 8, 2);
  CHECK(verify_div_weyl(lcf, pts_lcf).pass);

  // Parallel curvature: both sides vanish but the Weyl tensor does not.
  ChartGeometry prod(product_spheres_chart());
  const auto pts_p = sample_chart_points(prod.chart(), 6, 3);
  const IdentityReport rp = verify_div_weyl(prod, pts_p, 1e-7);
  CHECK(rp.pass);

  // Generic chart: both sides are large, so the check discriminates.
  ChartGeometry bump(bumpy_chart(4, 17));
  const auto pts_b = sample_chart_points(bump.chart(), 6, 4);
  const IdentityReport rb = verify_div_weyl(bump, pts_b, 1e-7);
  CHECK(rb.pass);
  CHECK(rb.scale > 1e-2);

  ChartGeometry three(euclidean_chart(3));
  const auto pts3 = sample_chart_points(three.chart(), 2, 5);
  CHECK_THROWS_AS(verify_div_weyl(three, pts3), std::invalid_argument);
}

TEST_CASE("second-derivative commutation identity") {
  ChartGeometry flat(euclidean_chart(3));
  const auto pts_flat = sample_chart_points(flat.chart(), 3, 1);
  CHECK(verify_commutation(flat, pts_flat).pass);

  ChartGeometry bump(bumpy_chart(4, 23));
  const auto pts_b = sample_chart_points(bump.chart(), 6, 2);
  const IdentityReport rb = verify_commutation(bump, pts_b);
  CHECK(rb.pass);
  CHECK(rb.scale > 1e-2);

  // Parallel Schouten tensor: derivative sides vanish while the two
  // curvature terms are each nonzero and must cancel exactly.
  ChartGeometry prod(product_spheres_chart());
  const auto pts_p = sample_chart_points(prod.chart(), 4, 3);
  const IdentityReport rp = verify_commutation(prod, pts_p);
  CHECK(rp.pass);
  CHECK(rp.scale > 1e-2);
}

TEST_CASE("laplacian of |Ric|^2: general variant") {
  ChartGeometry bump(bumpy_chart(4, 31));
  const auto pts = sample_chart_points(bump.chart(), 6, 4);
  const IdentityReport r = verify_lemma21(bump, pts, Lemma21Variant::general);
  CHECK(r.pass);
  CHECK(r.scale > 0.1);
  CHECK(r.points_tested == 6);

  // Constant-curvature-factor product: every derivative term vanishes and
  // the Weyl contraction against an Einstein Ricci dies by trace-freeness.
  ChartGeometry prod(product_spheres_chart());
  const auto pts_p = sample_chart_points(prod.chart(), 4, 5);
  CHECK(verify_lemma21(prod, pts_p, Lemma21Variant::general, 1e-8).pass);

  ChartGeometry cyl(cylinder_chart(6));
  const auto pts_c = sample_chart_points(cyl.chart(), 4, 6);
  CHECK(verify_lemma21(cyl, pts_c, Lemma21Variant::general, 1e-8).pass);

  ChartGeometry three(euclidean_chart(3));
  const auto pts3 = sample_chart_points(three.chart(), 2, 7);
  CHECK_THROWS_AS(verify_lemma21(three, pts3, Lemma21Variant::general),
                  std::invalid_argument);
}

TEST_CASE("laplacian of |Ric|^2: conformally flat variant") {
  for (uint64_t seed : {101ULL, 202ULL}) {
    ChartGeometry lcf(lcf_chart(6, seed, 0.1));
    const auto pts = sample_chart_points(lcf.chart(), 10, seed);
    const IdentityReport r = verify_lemma21(lcf, pts, Lemma21Variant::lcf);
    CHECK(r.pass);
    CHECK(r.scale > 1e-3);
  }

  // Round sphere: parallel Ricci, everything vanishes.
  ChartGeometry sph(sphere_chart(5));
  const auto pts_s = sample_chart_points(sph.chart(), 4, 8);
  CHECK(verify_lemma21(sph, pts_s, Lemma21Variant::lcf).pass);

  // Nonzero Weyl tensor violates the variant precondition.
  ChartGeometry bump(bumpy_chart(4, 31));
  const auto pts_b = sample_chart_points(bump.chart(), 2, 9);
  CHECK_THROWS_AS(verify_lemma21(bump, pts_b, Lemma21Variant::lcf),
                  std::invalid_argument);
}

TEST_CASE("laplacian of |Ric|^2: divergence-free-Weyl variant") {
  // Parallel curvature gives delta^2 W = 0 with W != 0.
  ChartGeometry prod(product_spheres_chart());
  const auto pts_p = sample_chart_points(prod.chart(), 4, 10);
  CHECK(verify_lemma21(prod, pts_p, Lemma21Variant::div_weyl_free).pass);

  // Conformally flat charts satisfy the precondition trivially (W = 0) and
  // the Riemann form must agree with the I-form.
  ChartGeometry lcf(lcf_chart(6, 77, 0.1));
  const auto pts_l = sample_chart_points(lcf.chart(), 8, 11);
  const IdentityReport r =
      verify_lemma21(lcf, pts_l, Lemma21Variant::div_weyl_free);
  CHECK(r.pass);
  CHECK(r.scale > 1e-3);

  // A generic chart has delta^2 W != 0.
  ChartGeometry bump(bumpy_chart(4, 31));
  const auto pts_b = sample_chart_points(bump.chart(), 2, 12);
  CHECK_THROWS_AS(verify_lemma21(bump, pts_b, Lemma21Variant::div_weyl_free),
                  std::invalid_argument);
}

TEST_CASE("bochner formula on the scalar curvature") {
  ChartGeometry sph(sphere_chart(4));
  const auto pts_s = sample_chart_points(sph.chart(), 4, 13);
  const IdentityReport rs = verify_bochner(sph, pts_s);
  CHECK(rs.pass);
  CHECK(rs.scale < 1e-6);  // R constant: everything vanishes

  ChartGeometry bump(bumpy_chart(3, 41));
  const auto pts_b = sample_chart_points(bump.chart(), 6, 14);
  const IdentityReport rb = verify_bochner(bump, pts_b);
  CHECK(rb.pass);
  CHECK(rb.scale > 1e-2);

  ChartGeometry lcf(lcf_chart(6, 303, 0.1));
  const auto pts_l = sample_chart_points(lcf.chart(), 6, 15);
  CHECK(verify_bochner(lcf, pts_l).pass);
}

TEST_CASE("bochner formula on a test scalar over euclidean space") {
  ChartGeometry flat(euclidean_chart(3));
  const Expr u = sin_of(coordinate(0));
  const auto pts = sample_chart_points(flat.chart(), 8, 16);
  const IdentityReport r = verify_bochner_scalar(flat, u, pts);
  CHECK(r.pass);
  CHECK(r.scale > 0.1);

  // Hand value: both sides equal -cos(2 x1) for u = sin(x1) on flat space.
  ChartGeometry flat2(euclidean_chart(2));
  ExprField uf(2, 0);
  uf.comp[0] = u;
  const ExprField du = flat2.covariant_derivative(uf);
  std::vector<Expr> norm;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      norm.push_back(product_of({flat2.inverse_metric()(i, j), du(i), du(j)}));
  const Expr lhs2 = flat2.laplacian_expr(simplify(sum_of(std::move(norm))));
  Program prog = flat2.compile({lhs2});
  const std::vector<double> bound = flat2.bound_params(prog);
  std::vector<double> scratch, out(1);
  const std::vector<double> pt{kPi / 3.0, 0.2};
  prog.eval(pt, bound, scratch, out);
  CHECK(0.5 * out[0] == doctest::Approx(-std::cos(2.0 * kPi / 3.0)).epsilon(1e-12));
}

TEST_CASE("ricci eigenvalue identity") {
  ChartGeometry sph(sphere_chart(4));
  const auto pts_s = sample_chart_points(sph.chart(), 4, 17);
  CHECK(verify_eigen_identity(sph, pts_s).pass);

  // Product line x sphere: both sides vanish through large intermediates.
  ChartGeometry cyl(cylinder_chart(6));
  const auto pts_c = sample_chart_points(cyl.chart(), 4, 18);
  const IdentityReport rc = verify_eigen_identity(cyl, pts_c, 1e-9);
  CHECK(rc.pass);
  CHECK(rc.scale > 100.0);

  ChartGeometry lcf(lcf_chart(6, 55, 0.1));
  const auto pts_l = sample_chart_points(lcf.chart(), 8, 19);
  const IdentityReport rl = verify_eigen_identity(lcf, pts_l, 1e-7);
  CHECK(rl.pass);

  ChartGeometry bump(bumpy_chart(4, 61));
  const auto pts_b = sample_chart_points(bump.chart(), 6, 20);
  const IdentityReport rb = verify_eigen_identity(bump, pts_b, 1e-9);
  CHECK(rb.pass);
  CHECK(rb.scale > 1e-3);

  // n = 2 runs without the full bundle; eigenvalues coincide, both sides 0.
  ChartGeometry s2(sphere_chart(2));
  const auto pts_2 = sample_chart_points(s2.chart(), 4, 21);
  const IdentityReport r2 = verify_eigen_identity(s2, pts_2);
  CHECK(r2.pass);
  CHECK(r2.scale > 0.1);  // tr(Ric^3) = 2 on the unit two-sphere
}

TEST_CASE("pointwise lower bounds") {
  ChartGeometry bump(bumpy_chart(4, 71));
  const auto pts_b = sample_chart_points(bump.chart(), 8, 22);
  const PointwiseBoundsReport rb = verify_pointwise_bounds(bump, pts_b);
  CHECK(rb.grad_ricci.pass);
  CHECK(rb.grad_min_slack >= -1e-10);

  ChartGeometry sph(sphere_chart(5));
  const auto pts_s = sample_chart_points(sph.chart(), 4, 23);
  const PointwiseBoundsReport rs = verify_pointwise_bounds(sph, pts_s);
  CHECK(rs.grad_ricci.pass);
  CHECK(rs.laplacian.pass);
  CHECK(rs.laplacian_skipped == 0);
  CHECK(std::abs(rs.grad_min_slack) < 1e-10);
  CHECK(std::abs(rs.laplacian_min_slack) < 1e-8);

  // Conformal perturbation of the sphere: Ricci stays positive, the
  // Laplacian bound keeps an honest nonnegative slack.
  ChartGeometry pert(perturbed_sphere_chart(5, 83));
  const auto pts_p = sample_chart_points(pert.chart(), 8, 24);
  const PointwiseBoundsReport rp = verify_pointwise_bounds(pert, pts_p);
  CHECK(rp.grad_ricci.pass);
  CHECK(rp.laplacian.pass);
  CHECK(rp.laplacian_skipped == 0);
  CHECK(rp.laplacian_min_slack >= -1e-8);
  CHECK(rp.laplacian.points_tested == 8);

  // Negative Ricci: every point is skipped and reported as such.
  ChartGeometry hyp(hyperbolic_chart(4));
  const auto pts_h = sample_chart_points(hyp.chart(), 5, 25);
  const PointwiseBoundsReport rh = verify_pointwise_bounds(hyp, pts_h);
  CHECK(rh.laplacian_skipped == 5);
  CHECK(rh.laplacian.points_tested == 0);
  CHECK(rh.grad_ricci.points_tested == 5);
}
