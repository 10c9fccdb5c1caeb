#include "qcurv/identities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "qcurv/tensor.hpp"

namespace qcurv {

namespace {

using Accum = detail::ResidualAccum;

// Ricci with both slots raised, as a flat n*n array.
std::vector<double> ricci_up(const CurvatureBundle& b, int n) {
  std::vector<double> up(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c)
          s += b.inverse_metric(i, a) * b.inverse_metric(j, c) * b.ricci(a, c);
      up[i * n + j] = s;
    }
  return up;
}

double trace_ric3(const CurvatureBundle& b, int n) {
  std::vector<double> mixed(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += b.inverse_metric(i, a) * b.ricci(a, j);
      mixed[i * n + j] = s;
    }
  double t = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        t += mixed[i * n + j] * mixed[j * n + k] * mixed[k * n + i];
  return t;
}

double max_abs_tensor(const TensorValue& t) {
  double m = 0.0;
  for (size_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(t.flat(i)));
  return m;
}

void check_inside(ChartGeometry& geo, PointBatch points) {
  for (const auto& p : points)
    if (!geo.chart().inside(p))
      throw GeometryError("identity point outside the chart domain");
}

}  // namespace

std::vector<std::vector<double>> sample_chart_points(const MetricChart& chart,
                                                     int count,
                                                     unsigned long long seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<std::vector<double>> pts(count);
  for (auto& p : pts) {
    p.resize(chart.dim());
    for (int a = 0; a < chart.dim(); ++a) {
      const Axis& ax = chart.axes()[a];
      p[a] = ax.lo + (0.1 + 0.8 * unit()) * (ax.hi - ax.lo);
    }
  }
  return pts;
}

IdentityReport verify_lemma21(ChartGeometry& geo, PointBatch points,
                              Lemma21Variant variant, double tol) {
  const int n = geo.dim();
  if (n <= 3)
    throw std::invalid_argument("verify_lemma21: needs n > 3");
  check_inside(geo, points);

  Program lhs_prog = geo.compile({geo.laplacian_expr(geo.ricci_norm_sq_expr())});
  const std::vector<double> bound = geo.bound_params(lhs_prog);
  std::vector<double> scratch;

  Accum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);

    if (variant == Lemma21Variant::lcf && max_abs_tensor(b.weyl) > 1e-8)
      throw std::invalid_argument(
          "verify_lemma21: lcf variant on a chart with nonzero Weyl tensor");
    if (variant == Lemma21Variant::div_weyl_free &&
        max_abs_tensor(*b.div2_weyl) > 1e-8)
      throw std::invalid_argument(
          "verify_lemma21: div_weyl_free variant needs delta^2 W = 0");

    double lhs = 0.0;
    std::vector<double> out(1);
    lhs_prog.eval(pt, bound, scratch, out);
    lhs = out[0];

    const std::vector<double> rup = ricci_up(b, n);
    const double nric2 =
        tensor_norm_sq(b.nabla_ricci, b.metric, b.inverse_metric);
    double ric_hess = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ric_hess += rup[i * n + j] * b.hess_R(i, j);

    const double tr3 = trace_ric3(b, n);
    const double R = b.scalar;
    const double i_term =
        (n * tr3 - (2.0 * n - 1.0) / (n - 1.0) * R * b.ric_norm_sq +
         R * R * R / (n - 1.0)) /
        (n - 2.0);

    double rhs = 2.0 * nric2 + (n - 2.0) / (n - 1.0) * ric_hess +
                 R * b.lap_R / (n - 1.0);
    double extra_scale = 0.0;
    switch (variant) {
      case Lemma21Variant::general: {
        double wrr = 0.0, brr = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
              for (int l = 0; l < n; ++l)
                wrr += b.weyl(i, k, j, l) * rup[k * n + l] * rup[i * n + j];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            brr += (*b.bach)(i, j) * rup[i * n + j];
        rhs += 2.0 * i_term - 4.0 * wrr + 2.0 * (n - 2.0) * brr;
        extra_scale = std::max({std::abs(2.0 * i_term), std::abs(4.0 * wrr),
                                std::abs(2.0 * (n - 2.0) * brr)});
        break;
      }
      case Lemma21Variant::lcf:
        rhs += 2.0 * i_term;
        extra_scale = std::abs(2.0 * i_term);
        break;
      case Lemma21Variant::div_weyl_free: {
        double riem_rr = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                riem_rr +=
                    b.riemann(i, j, k, l) * rup[i * n + k] * rup[j * n + l];
        rhs += 2.0 * tr3 - 2.0 * riem_rr;
        extra_scale = std::max(std::abs(2.0 * tr3), std::abs(2.0 * riem_rr));
        break;
      }
    }

    const double point_scale = std::max(
        {std::abs(lhs), std::abs(2.0 * nric2),
         std::abs((n - 2.0) / (n - 1.0) * ric_hess),
         std::abs(R * b.lap_R / (n - 1.0)), extra_scale});
    acc.add(std::abs(lhs - rhs), point_scale);
  }

  const char* name = variant == Lemma21Variant::general ? "laplacian-ricci-norm-general"
                     : variant == Lemma21Variant::lcf   ? "laplacian-ricci-norm-conformally-flat"
                                                        : "laplacian-ricci-norm-harmonic-weyl";
  return acc.report(name, tol);
}

IdentityReport verify_schouten_div(ChartGeometry& geo, PointBatch points,
                                   double tol) {
  const int n = geo.dim();
  if (n <= 2)
    throw std::invalid_argument("verify_schouten_div: needs n > 2");
  check_inside(geo, points);

  const ExprField dA = geo.covariant_derivative(geo.schouten());
  std::vector<Expr> roots;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a) roots.push_back(dA(i, k, a));
  Program prog = geo.compile(roots);
  const std::vector<double> bound = geo.bound_params(prog);
  std::vector<double> scratch, out(roots.size());

  Accum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);
    prog.eval(pt, bound, scratch, out);
    auto da = [&](int i, int k, int a) { return out[(i * n + k) * n + a]; };

    double worst = 0.0, point_scale = 0.0;
    for (int i = 0; i < n; ++i) {
      double lhs = 0.0;
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a) lhs += b.inverse_metric(k, a) * da(i, k, a);
      const double rhs = b.grad_R(i) / (2.0 * (n - 1.0));
      worst = std::max(worst, std::abs(lhs - rhs));
      point_scale = std::max({point_scale, std::abs(lhs), std::abs(rhs)});
    }
    acc.add(worst, point_scale);
  }
  return acc.report("schouten-divergence", tol);
}

IdentityReport verify_div_weyl(ChartGeometry& geo, PointBatch points,
                               double tol) {
  const int n = geo.dim();
  if (n <= 3)
    throw std::invalid_argument("verify_div_weyl: needs n > 3");
  check_inside(geo, points);

  const ExprField dA = geo.covariant_derivative(geo.schouten());
  std::vector<Expr> roots;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a) roots.push_back(dA(i, k, a));
  Program prog = geo.compile(roots);
  const std::vector<double> bound = geo.bound_params(prog);
  std::vector<double> scratch, out(roots.size());

  Accum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);
    prog.eval(pt, bound, scratch, out);
    auto da = [&](int i, int k, int a) { return out[(i * n + k) * n + a]; };

    double worst = 0.0, point_scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double lhs = b.div_weyl(i, j, k);
          const double rhs = (n - 3.0) * (da(k, i, j) - da(k, j, i));
          worst = std::max(worst, std::abs(lhs - rhs));
          point_scale = std::max({point_scale, std::abs(lhs), std::abs(rhs)});
        }
    acc.add(worst, point_scale);
  }
  return acc.report("weyl-divergence", tol);
}

IdentityReport verify_commutation(ChartGeometry& geo, PointBatch points,
                                  double tol) {
  const int n = geo.dim();
  if (n <= 2)
    throw std::invalid_argument("verify_commutation: needs n > 2");
  check_inside(geo, points);

  const ExprField dA = geo.covariant_derivative(geo.schouten());
  const ExprField ddA = geo.covariant_derivative(dA);
  std::vector<Expr> roots;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) roots.push_back(ddA(j, k, c, d));
  Program prog = geo.compile(roots);
  const std::vector<double> bound = geo.bound_params(prog);
  std::vector<double> scratch, out(roots.size());

  Accum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);
    prog.eval(pt, bound, scratch, out);
    auto dd = [&](int j, int k, int c, int d) {
      return out[((j * n + k) * n + c) * n + d];
    };
    std::vector<double> aup(n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < n; ++c)
            s += b.inverse_metric(i, a) * b.inverse_metric(j, c) *
                 b.schouten(a, c);
        aup[i * n + j] = s;
      }

    double worst = 0.0, point_scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double lhs = 0.0, first = 0.0, curv = 0.0, ric_term = 0.0;
        for (int k = 0; k < n; ++k)
          for (int a = 0; a < n; ++a) {
            lhs += b.inverse_metric(k, a) * dd(j, k, i, a);
            first += b.inverse_metric(k, a) * dd(j, k, a, i);
          }
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            curv += b.riemann(i, k, j, l) * aup[k * n + l];
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m)
            ric_term += b.ricci(i, l) * b.inverse_metric(l, m) * b.schouten(j, m);
        const double res = lhs - first + curv - ric_term;
        worst = std::max(worst, std::abs(res));
        point_scale = std::max({point_scale, std::abs(lhs), std::abs(first),
                                std::abs(curv), std::abs(ric_term)});
      }
    acc.add(worst, point_scale);
  }
  return acc.report("schouten-commutation", tol);
}

namespace {

IdentityReport bochner_impl(ChartGeometry& geo, const Expr& u,
                            PointBatch points, double tol, const char* id) {
  const int n = geo.dim();
  check_inside(geo, points);

  ExprField u_field(n, 0);
  u_field.comp[0] = u;  // rank-0 field holds the scalar in its only slot
  const ExprField du = geo.covariant_derivative(u_field);
  const ExprField hess_u = geo.covariant_derivative(du);
  const Expr lap_u = geo.laplacian_expr(u);

  const ExprField& ginv = geo.inverse_metric();
  std::vector<Expr> norm_terms;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      norm_terms.push_back(product_of({ginv(i, j), du(i), du(j)}));
  const Expr grad_u_sq = simplify(sum_of(std::move(norm_terms)));

  std::vector<Expr> roots;
  roots.push_back(geo.laplacian_expr(grad_u_sq));
  for (int i = 0; i < n; ++i) roots.push_back(du(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) roots.push_back(hess_u(i, j));
  for (int i = 0; i < n; ++i) roots.push_back(diff(lap_u, i));
  Program prog = geo.compile(roots);
  const std::vector<double> bound = geo.bound_params(prog);
  std::vector<double> scratch, out(roots.size());

  Accum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);
    prog.eval(pt, bound, scratch, out);
    const double lap_grad_sq = out[0];
    auto du_v = [&](int i) { return out[1 + i]; };
    auto hess_v = [&](int i, int j) { return out[1 + n + i * n + j]; };
    auto dlap_v = [&](int i) { return out[1 + n + n * n + i]; };

    double hess2 = 0.0, cross = 0.0, ric_gg = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        cross += b.inverse_metric(i, j) * du_v(i) * dlap_v(j);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < n; ++a)
          for (int c = 0; c < n; ++c)
            hess2 += b.inverse_metric(i, a) * b.inverse_metric(j, c) *
                     hess_v(i, j) * hess_v(a, c);
    std::vector<double> rup = ricci_up(b, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ric_gg += rup[i * n + j] * du_v(i) * du_v(j);

    const double lhs = 0.5 * lap_grad_sq;
    const double rhs = hess2 + cross + ric_gg;
    const double point_scale = std::max(
        {std::abs(lhs), std::abs(hess2), std::abs(cross), std::abs(ric_gg)});
    acc.add(std::abs(lhs - rhs), point_scale);
  }
  return acc.report(id, tol);
}

}  // namespace

IdentityReport verify_bochner(ChartGeometry& geo, PointBatch points,
                              double tol) {
  return bochner_impl(geo, geo.scalar_curvature(), points, tol,
                      "bochner-scalar-curvature");
}

IdentityReport verify_bochner_scalar(ChartGeometry& geo, const Expr& u,
                                     PointBatch points, double tol) {
  return bochner_impl(geo, u, points, tol, "bochner-test-scalar");
}

IdentityReport verify_eigen_identity(ChartGeometry& geo, PointBatch points,
                                     double tol) {
  const int n = geo.dim();
  check_inside(geo, points);

  // Assembled from compiled fields so the op also covers n = 2, where the
  // full bundle (Schouten, Weyl) is undefined.
  std::vector<Expr> roots;
  const ExprField& g = geo.metric_field();
  const ExprField& ginv = geo.inverse_metric();
  const ExprField& ric = geo.ricci();
  const ExprField& riem = geo.riemann();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) roots.push_back(g(i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) roots.push_back(ginv(i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) roots.push_back(ric(i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) roots.push_back(riem(i, j, k, l));
  Program prog = geo.compile(roots);
  const std::vector<double> bound = geo.bound_params(prog);
  std::vector<double> scratch, out(roots.size());

  Accum acc;
  for (const auto& pt : points) {
    prog.eval(pt, bound, scratch, out);
    const int n2 = n * n;
    TensorValue gv(n, {Variance::Co, Variance::Co});
    TensorValue giv(n, {Variance::Contra, Variance::Contra});
    TensorValue rv(n, {Variance::Co, Variance::Co});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        gv(i, j) = out[i * n + j];
        giv(i, j) = out[n2 + i * n + j];
        rv(i, j) = out[2 * n2 + i * n + j];
      }
    auto riem_v = [&](int i, int j, int k, int l) {
      return out[3 * n2 + ((i * n + j) * n + k) * n + l];
    };

    // LHS through raised components.
    std::vector<double> mixed(n2, 0.0), rup(n2, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += giv(i, a) * rv(a, j);
        mixed[i * n + j] = s;
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += mixed[i * n + a] * giv(a, j);
        rup[i * n + j] = s;
      }
    double tr3 = 0.0, riem_rr = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          tr3 += mixed[i * n + j] * mixed[j * n + k] * mixed[k * n + i];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            riem_rr += riem_v(i, j, k, l) * rup[i * n + k] * rup[j * n + l];

    // RHS in the g-orthonormal Ricci eigenframe.
    const EigenData eig = sym_eigen_rel(rv, gv);
    double rhs = 0.0;
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) {
        double sec = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l)
                sec += riem_v(i, j, k, l) * eig.vec(i, a) * eig.vec(j, c) *
                       eig.vec(k, a) * eig.vec(l, c);
        const double dl = eig.eigenvalues[a] - eig.eigenvalues[c];
        rhs += 0.5 * sec * dl * dl;
      }

    const double lhs = tr3 - riem_rr;
    acc.add(std::abs(lhs - rhs),
            std::max({std::abs(tr3), std::abs(riem_rr), std::abs(rhs)}));
  }
  return acc.report("ricci-eigenvalue-identity", tol);
}

PointwiseBoundsReport verify_pointwise_bounds(ChartGeometry& geo,
                                              PointBatch points, double tol) {
  const int n = geo.dim();
  check_inside(geo, points);

  Program lhs_prog = geo.compile({geo.laplacian_expr(geo.ricci_norm_sq_expr())});
  const std::vector<double> bound = geo.bound_params(lhs_prog);
  std::vector<double> scratch, out(1);

  Accum grad_acc, lap_acc;
  PointwiseBoundsReport rep;
  rep.grad_min_slack = std::numeric_limits<double>::infinity();
  rep.laplacian_min_slack = std::numeric_limits<double>::infinity();

  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);

    const double nric2 =
        tensor_norm_sq(b.nabla_ricci, b.metric, b.inverse_metric);
    double grad_r_sq = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        grad_r_sq += b.inverse_metric(i, j) * b.grad_R(i) * b.grad_R(j);
    const double slack1 = nric2 - grad_r_sq / n;
    rep.grad_min_slack = std::min(rep.grad_min_slack, slack1);
    grad_acc.add(std::max(0.0, -slack1),
                 std::max(nric2, grad_r_sq / n));

    const EigenData eig = sym_eigen_rel(b.ricci, b.metric);
    if (eig.eigenvalues.front() < -1e-10) {
      ++rep.laplacian_skipped;
      continue;
    }
    lhs_prog.eval(pt, bound, scratch, out);
    const double lhs = out[0];
    const std::vector<double> rup = ricci_up(b, n);
    double ric_hess = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ric_hess += rup[i * n + j] * b.hess_R(i, j);
    const double rhs = 2.0 * nric2 + (n - 2.0) / (n - 1.0) * ric_hess +
                       b.scalar * b.lap_R / (n - 1.0);
    const double slack2 = lhs - rhs;
    rep.laplacian_min_slack = std::min(rep.laplacian_min_slack, slack2);
    lap_acc.add(std::max(0.0, -slack2),
                std::max({std::abs(lhs), std::abs(2.0 * nric2),
                          std::abs((n - 2.0) / (n - 1.0) * ric_hess),
                          std::abs(b.scalar * b.lap_R / (n - 1.0))}));
  }

  if (!std::isfinite(rep.grad_min_slack)) rep.grad_min_slack = 0.0;
  if (!std::isfinite(rep.laplacian_min_slack)) rep.laplacian_min_slack = 0.0;
  rep.grad_ricci = grad_acc.report("gradient-ricci-lower-bound", tol);
  rep.laplacian = lap_acc.report("laplacian-ricci-lower-bound", tol);
  return rep;
}

}  // namespace qcurv
