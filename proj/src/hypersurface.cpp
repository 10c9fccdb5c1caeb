#include "qcurv/hypersurface.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qcurv {

namespace {

// Ambient inner product: Euclidean, except Minkowski (-, +, ..., +) when the
// ambient is the hyperbolic quadric.
double inner(int c, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  if (c == -1) s -= 2.0 * a[0] * b[0];
  return s;
}

std::vector<std::vector<double>> interior_probes(const std::vector<Axis>& axes,
                                                 int per_axis) {
  const int n = static_cast<int>(axes.size());
  size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<size_t>(per_axis);
  std::vector<std::vector<double>> pts;
  pts.reserve(total);
  for (size_t o = 0; o < total; ++o) {
    size_t rem = o;
    std::vector<double> p(n);
    for (int i = n - 1; i >= 0; --i) {
      const int k = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      const double frac = static_cast<double>(k + 1) / (per_axis + 1);
      p[i] = axes[i].lo + frac * (axes[i].hi - axes[i].lo);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

void check_shape(const Immersion& im) {
  const int N = im.ambient_dim();
  if (im.n < 2) throw GeometryError("immersion dimension must be at least 2");
  if (static_cast<int>(im.axes.size()) != im.n)
    throw GeometryError("immersion axis count does not match its dimension");
  if (static_cast<int>(im.position.size()) != N ||
      static_cast<int>(im.normal.size()) != N)
    throw GeometryError("immersion position/normal have wrong ambient size");
  if (im.ambient_c < -1 || im.ambient_c > 1)
    throw GeometryError("ambient curvature must be -1, 0 or +1");
}

}  // namespace

void validate_immersion(const Immersion& im, double tol) {
  check_shape(im);
  const int n = im.n, N = im.ambient_dim(), c = im.ambient_c;

  std::vector<Expr> roots;
  roots.insert(roots.end(), im.position.begin(), im.position.end());
  roots.insert(roots.end(), im.normal.begin(), im.normal.end());
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < N; ++k) roots.push_back(diff(im.position[k], a));
  Program prog = Program::compile(roots);
  const std::vector<double> bound = prog.bind(im.params);
  std::vector<double> scratch, out(roots.size());

  for (const auto& pt : interior_probes(im.axes, 3)) {
    prog.eval(pt, bound, scratch, out);
    std::span<const double> X(out.data(), N);
    std::span<const double> nor(out.data() + N, N);
    if (c != 0 && std::abs(inner(c, X, X) - c) > tol)
      throw GeometryError("immersion '" + im.name +
                          "' leaves the ambient quadric");
    if (std::abs(inner(c, nor, nor) - 1.0) > tol)
      throw GeometryError("immersion '" + im.name + "' normal is not unit");
    if (c != 0 && std::abs(inner(c, nor, X)) > tol)
      throw GeometryError("immersion '" + im.name +
                          "' normal is not tangent to the quadric");
    for (int a = 0; a < n; ++a) {
      std::span<const double> T(out.data() + 2 * N + a * N, N);
      if (std::abs(inner(c, nor, T)) > tol)
        throw GeometryError("immersion '" + im.name +
                            "' normal is not orthogonal to the tangents");
    }
  }
}

ShapeData fundamental_forms(const Immersion& im, std::span<const double> point) {
  check_shape(im);
  const int n = im.n, N = im.ambient_dim(), c = im.ambient_c;
  if (static_cast<int>(point.size()) != n)
    throw GeometryError("parameter point has wrong dimension");

  // Roots: tangents (n blocks of N), second derivatives (n^2 blocks), normal.
  std::vector<Expr> tangents(n * N);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < N; ++k) tangents[a * N + k] = diff(im.position[k], a);
  std::vector<Expr> roots = tangents;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < N; ++k) roots.push_back(diff(tangents[a * N + k], b));
  roots.insert(roots.end(), im.normal.begin(), im.normal.end());

  Program prog = Program::compile(roots);
  const std::vector<double> out = prog.eval_all(point, im.params);
  const double* T = out.data();
  const double* S = out.data() + n * N;
  std::span<const double> nor(out.data() + n * N + n * n * N, N);

  ShapeData sd;
  sd.n = n;
  sd.ambient_c = c;
  sd.first = TensorValue(n, std::vector<Variance>(2, Variance::Co));
  sd.second = TensorValue(n, std::vector<Variance>(2, Variance::Co));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::span<const double> Ta(T + a * N, N), Tb(T + b * N, N);
      std::span<const double> Sab(S + (a * n + b) * N, N);
      sd.first(a, b) = inner(c, Ta, Tb);
      sd.second(a, b) = inner(c, Sab, nor);
    }

  const EigenData ge = sym_eigen(sd.first);
  if (!(ge.eigenvalues.front() > 1e-12))
    throw GeometryError("induced metric is degenerate at the point");

  const EigenData ke = sym_eigen_rel(sd.second, sd.first);
  sd.kappa = ke.eigenvalues;
  sd.H = 0.0;
  sd.h_norm_sq = 0.0;
  for (double k : sd.kappa) {
    sd.H += k;
    sd.h_norm_sq += k * k;
  }
  sd.lambda.resize(n);
  sd.mu.resize(n);
  for (int i = 0; i < n; ++i) {
    sd.lambda[i] = (n - 1) * c + sd.H * sd.kappa[i] - sd.kappa[i] * sd.kappa[i];
    sd.mu[i] = sd.kappa[i] - sd.H / n;
  }
  sd.z_norm_sq = sd.h_norm_sq - sd.H * sd.H / n;
  return sd;
}

MetricChart induced_chart(const Immersion& im) {
  check_shape(im);
  const int n = im.n, N = im.ambient_dim(), c = im.ambient_c;
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  std::vector<Expr> tangents(n * N);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < N; ++k) tangents[a * N + k] = diff(im.position[k], a);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      std::vector<Expr> terms;
      for (int k = 0; k < N; ++k) {
        Expr prod = product_of({tangents[a * N + k], tangents[b * N + k]});
        if (c == -1 && k == 0) prod = product_of({integer(-1), prod});
        terms.push_back(std::move(prod));
      }
      g[a][b] = simplify(sum_of(std::move(terms)));
      g[b][a] = g[a][b];
    }

  // Orthogonal parametrizations produce off-diagonal entries that are
  // identically zero but not recognizably so (the cancellation needs
  // sin^2 + cos^2 = 1).  A dense symbolic 6x6 metric defeats downstream
  // curvature assembly, so entries that vanish at every probe are pinned to
  // an exact zero; gauss_residuals re-checks the pinned metric against
  // ambient data pointwise.
  const auto probes = interior_probes(im.axes, 3);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      double offmax = 0.0, diagmax = 0.0;
      bool evaluable = true;
      for (const auto& pt : probes) {
        try {
          offmax = std::max(offmax, std::abs(eval(g[a][b], pt, &im.params)));
          diagmax = std::max({diagmax, std::abs(eval(g[a][a], pt, &im.params)),
                              std::abs(eval(g[b][b], pt, &im.params))});
        } catch (const EvalError&) {
          evaluable = false;
          break;
        }
      }
      if (evaluable && offmax <= 1e-12 * std::max(1.0, diagmax)) {
        g[a][b] = Expr{};
        g[b][a] = g[a][b];
      }
    }
  return MetricChart(im.name + "-induced", im.axes, std::move(g), im.params);
}

IdentityReport gauss_residuals(const Immersion& im, PointBatch points,
                               double tol) {
  const int n = im.n, c = im.ambient_c;
  ChartGeometry geo(induced_chart(im));

  detail::ResidualAccum acc;
  for (const auto& pt : points) {
    const CurvatureBundle b = geo.bundle(pt);
    const ShapeData sd = fundamental_forms(im, pt);
    double res = 0.0, scale = 0.0;

    // Guards the pinned zeros of induced_chart as well as the chart itself.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        res = std::max(res, std::abs(b.metric(i, j) - sd.first(i, j)));
        scale = std::max(scale, std::abs(sd.first(i, j)));
      }

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const double cterm = c * (sd.first(i, k) * sd.first(j, l) -
                                      sd.first(i, l) * sd.first(j, k));
            const double hterm = sd.second(i, k) * sd.second(j, l) -
                                 sd.second(i, l) * sd.second(j, k);
            res = std::max(res,
                           std::abs(b.riemann(i, j, k, l) - cterm - hterm));
            scale = std::max({scale, std::abs(b.riemann(i, j, k, l)),
                              std::abs(cterm), std::abs(hterm)});
          }

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double hgh = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            hgh += sd.second(i, k) * b.inverse_metric(k, l) * sd.second(l, j);
        const double rhs =
            c * (n - 1) * sd.first(i, j) + sd.H * sd.second(i, j) - hgh;
        res = std::max(res, std::abs(b.ricci(i, j) - rhs));
        scale = std::max({scale, std::abs(b.ricci(i, j)), std::abs(rhs)});
      }

    const double rhs_scalar = n * (n - 1) * c + sd.H * sd.H - sd.h_norm_sq;
    res = std::max(res, std::abs(b.scalar - rhs_scalar));
    scale = std::max({scale, std::abs(b.scalar), std::abs(rhs_scalar)});
    acc.add(res, scale);
  }
  return acc.report("gauss-equations", tol);
}

IdentityReport gauss_residuals(const Immersion& im,
                               std::span<const double> point, double tol) {
  const std::vector<double> pt(point.begin(), point.end());
  const std::vector<std::vector<double>> batch{pt};
  return gauss_residuals(im, batch, tol);
}

LambdaReport lambda_quantities(const ShapeData& sd, int c) {
  const int n = sd.n;
  LambdaReport rep;
  rep.lambda.resize(n);
  double kl = 0.0, kl2 = 0.0;
  for (int i = 0; i < n; ++i) {
    rep.lambda[i] =
        (n - 1) * c + sd.H * sd.kappa[i] - sd.kappa[i] * sd.kappa[i];
    kl += sd.kappa[i] * rep.lambda[i];
    kl2 += sd.kappa[i] * rep.lambda[i] * rep.lambda[i];
  }
  rep.value = kl * kl - sd.H * kl2;
  rep.scale = std::max(kl * kl, std::abs(sd.H * kl2));

  const double kmax = std::max(std::abs(sd.kappa.front()),
                               std::abs(sd.kappa.back()));
  const double ktol = 1e-8 * std::max(1.0, kmax);
  rep.umbilic = sd.kappa.back() - sd.kappa.front() <= ktol;

  int clusters = sd.n > 0 ? 1 : 0;
  for (int i = 1; i < n; ++i)
    if (sd.kappa[i] - sd.kappa[i - 1] > ktol) ++clusters;
  rep.two_valued = clusters == 2;

  // Pairs with distinct principal curvature; distinct-lambda pairs are a
  // subset (lambda is a function of kappa), and the minimal two-curvature
  // case has all lambda equal while the relation still holds.
  bool any_pair = false, all_hold = true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(sd.kappa[i] - sd.kappa[j]) <= ktol) continue;
      any_pair = true;
      const double prod = sd.kappa[i] * sd.kappa[j];
      if (std::abs(c + prod) > 1e-8 * std::max(1.0, std::abs(prod)))
        all_hold = false;
    }
  rep.cartan = any_pair && all_hold;

  double lmin = rep.lambda[0];
  for (double l : rep.lambda) lmin = std::min(lmin, l);
  rep.sign_hypotheses = c == 0 && sd.H > 0.0 && lmin >= -1e-10;
  return rep;
}

PinchingReport pinching_check(const ShapeData& sd) {
  const int n = sd.n;
  PinchingReport rep;
  rep.H = sd.H;
  rep.h_norm_sq = sd.h_norm_sq;
  rep.z_norm_sq = sd.z_norm_sq;
  const double H2 = sd.H * sd.H;
  const double slack = 1e-10 * std::max(1.0, H2);
  rep.window =
      H2 / n - slack <= sd.h_norm_sq && sd.h_norm_sq <= H2 / (n - 1) + slack;
  rep.z_bound = sd.z_norm_sq <= H2 / (n * (n - 1.0)) + slack;
  rep.mu_bounds = true;
  const double mu_slack = 1e-10 * std::max(1.0, std::abs(sd.H));
  for (double m : sd.mu)
    if (std::abs(m) > std::abs(sd.H) / n + mu_slack) rep.mu_bounds = false;
  rep.all_nonneg = sd.kappa.front() >= -1e-10;
  rep.all_nonpos = sd.kappa.back() <= 1e-10;
  rep.all_zero = rep.all_nonneg && rep.all_nonpos;
  return rep;
}

IsoparametricData isoparametric_clifford_data(int n, int m) {
  if (m < 2 || m > n - 2)
    throw std::invalid_argument(
        "isoparametric split requires 2 <= m <= n - 2");
  IsoparametricData d;
  d.n = n;
  d.m = m;
  d.lambda = Rational(n - 2);
  d.kappa_sq = Rational(n - m - 1, m - 1);
  d.t_sq = Rational(m - 1, n - m - 1);
  d.kappa_t = Rational(-1);
  d.kappa = std::sqrt(static_cast<double>(n - m - 1) / (m - 1));
  d.t = -std::sqrt(static_cast<double>(m - 1) / (n - m - 1));
  return d;
}

}  // namespace qcurv
