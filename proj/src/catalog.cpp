#include "qcurv/catalog.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "qcurv/simplexlab.hpp"

namespace qcurv {

namespace {

const double kPi = 3.14159265358979323846;

double param_or(const ParamMap& params, const std::string& key, double dflt) {
  auto it = params.find(key);
  return it == params.end() ? dflt : it->second;
}

double require_positive(const ParamMap& params, const std::string& key,
                        double dflt) {
  const double v = param_or(params, key, dflt);
  if (!(v > 0.0))
    throw std::invalid_argument("parameter '" + key + "' must be positive");
  return v;
}

// Stereographic round metric of radius r: r^2 * 4/(1+|x|^2)^2 on each of the
// `count` axes starting at coordinate `base`.
Expr stereographic_factor(int count, int base, const Expr& rad_sq) {
  std::vector<Expr> sq;
  for (int i = 0; i < count; ++i) sq.push_back(int_pow(coordinate(base + i), 2));
  const Expr r2 = sum_of(std::move(sq));
  return simplify(product_of(
      {rad_sq, quotient(integer(4), int_pow(integer(1) + r2, 2))}));
}

void append_open_axes(std::vector<Axis>& axes, int count, double half,
                      const std::string& prefix) {
  for (int i = 0; i < count; ++i)
    axes.push_back(
        {prefix + std::to_string(i + 1), -half, half, AxisKind::Open});
}

// Hyperspherical angle axes for a k-sphere: k-1 polar angles on [0, pi] and
// one periodic azimuth on [0, 2pi).
void append_angle_axes(std::vector<Axis>& axes, int k,
                       const std::string& prefix) {
  for (int i = 0; i < k; ++i) {
    const bool last = i == k - 1;
    axes.push_back({prefix + std::to_string(i + 1), 0.0,
                    last ? 2.0 * kPi : kPi,
                    last ? AxisKind::Periodic : AxisKind::ClosedRange});
  }
}

// Diagonal angle-metric entries rad_sq * prod_{j<i} sin^2(theta_j).
void append_angle_metric(std::vector<Expr>& diag, int k, int base,
                         const Expr& rad_sq) {
  for (int i = 0; i < k; ++i) {
    std::vector<Expr> factors{rad_sq};
    for (int j = 0; j < i; ++j)
      factors.push_back(int_pow(sin_of(coordinate(base + j)), 2));
    diag.push_back(simplify(product_of(std::move(factors))));
  }
}

MetricChart diagonal_chart(std::string name, std::vector<Axis> axes,
                           const std::vector<Expr>& diag, ParamMap params) {
  const int n = static_cast<int>(axes.size());
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) g[i][i] = diag[i];
  return MetricChart(std::move(name), std::move(axes), std::move(g),
                     std::move(params));
}

// Closed forms for a space of constant sectional curvature kappa = s/r^2
// (s = +1, 0, -1): R = n(n-1) kappa, |Ric|^2 = n(n-1)^2 kappa^2,
// Q = n(n^2-4)/8 * kappa^2.
void fill_constant_curvature(CatalogEntry& e, int n, double kappa) {
  e.expected["R"] = n * (n - 1.0) * kappa;
  e.expected["ric_norm_sq"] = n * (n - 1.0) * (n - 1.0) * kappa * kappa;
  e.notes["R"] = "n(n-1)kappa for constant sectional curvature kappa";
  e.notes["ric_norm_sq"] = "Einstein: Ric = (n-1)kappa g";
  if (n >= 3) {
    e.expected["Q"] = n * (n * n - 4.0) / 8.0 * kappa * kappa;
    e.notes["Q"] = "n(n^2-4)/8 kappa^2 for constant sectional curvature";
  }
  e.weyl_zero = true;
  e.einstein = true;
}

// R x S^{n-1}(r) and S^1(T) x S^{n-1}(r) share all local invariants.
void fill_cylinder_values(CatalogEntry& e, int n, double r) {
  const double r2 = r * r;
  e.expected["R"] = (n - 1.0) * (n - 2.0) / r2;
  e.expected["ric_norm_sq"] = (n - 1.0) * (n - 2.0) * (n - 2.0) / (r2 * r2);
  e.expected["Q"] = (n * n * n - 4.0 * n * n) / 8.0 / (r2 * r2);
  e.notes["R"] = "(n-1)(n-2)/r^2: flat line factor plus round S^{n-1}(r)";
  e.notes["ric_norm_sq"] = "Ricci spectrum (0, (n-2)/r^2 x (n-1))";
  e.notes["Q"] = "(n^3-4n^2)/8 r^{-4} from the scalar/Ricci closed forms";
  e.weyl_zero = true;   // conformally flat product
  e.einstein = false;   // one flat direction
}

}  // namespace

const std::vector<std::string>& builtin_metric_names() {
  static const std::vector<std::string> names{
      "euclidean",     "sphere",          "hyperbolic",          "cylinder",
      "flat_torus",    "product_spheres", "circle_times_sphere"};
  return names;
}

CatalogEntry builtin_metric(const std::string& name, int n,
                            const ParamMap& params) {
  if (n < 2) throw std::invalid_argument("catalog metrics require n >= 2");

  if (name == "euclidean") {
    std::vector<Axis> axes;
    append_open_axes(axes, n, 2.0, "x");
    std::vector<Expr> diag(n, integer(1));
    CatalogEntry e{diagonal_chart("euclidean", std::move(axes), diag, {}),
                   std::nullopt, {}, {}, {}, {}};
    fill_constant_curvature(e, n, 0.0);
    return e;
  }

  if (name == "sphere") {
    const double r = require_positive(params, "r", 1.0);
    const Expr rad_sq = int_pow(parameter("r"), 2);
    std::vector<Axis> axes;
    append_open_axes(axes, n, 1.0, "x");
    std::vector<Expr> diag(n, stereographic_factor(n, 0, rad_sq));
    CatalogEntry e{diagonal_chart("sphere", std::move(axes), diag, {{"r", r}}),
                   std::nullopt, {}, {}, {}, {}};
    std::vector<Axis> qaxes;
    append_angle_axes(qaxes, n, "theta");
    std::vector<Expr> qdiag;
    append_angle_metric(qdiag, n, 0, rad_sq);
    e.quad_chart =
        diagonal_chart("sphere-angles", std::move(qaxes), qdiag, {{"r", r}});
    fill_constant_curvature(e, n, 1.0 / (r * r));
    return e;
  }

  if (name == "hyperbolic") {
    const double half = 0.5 / std::sqrt(static_cast<double>(n));
    Expr r2{};
    for (int i = 0; i < n; ++i) r2 = r2 + int_pow(coordinate(i), 2);
    const Expr conf = quotient(integer(4), int_pow(integer(1) - r2, 2));
    std::vector<Axis> axes;
    append_open_axes(axes, n, half, "x");
    std::vector<Expr> diag(n, simplify(conf));
    CatalogEntry e{diagonal_chart("hyperbolic", std::move(axes), diag, {}),
                   std::nullopt, {}, {}, {}, {}};
    fill_constant_curvature(e, n, -1.0);
    return e;
  }

  if (name == "cylinder") {
    const double r = require_positive(params, "r", 1.0);
    const Expr rad_sq = int_pow(parameter("r"), 2);
    std::vector<Axis> axes{{"t", -2.0, 2.0, AxisKind::Open}};
    append_open_axes(axes, n - 1, 0.9, "x");
    std::vector<Expr> diag{integer(1)};
    const Expr factor = stereographic_factor(n - 1, 1, rad_sq);
    for (int i = 1; i < n; ++i) diag.push_back(factor);
    CatalogEntry e{
        diagonal_chart("cylinder", std::move(axes), diag, {{"r", r}}),
        std::nullopt, {}, {}, {}, {}};
    fill_cylinder_values(e, n, r);
    return e;
  }

  if (name == "flat_torus") {
    std::vector<Axis> axes;
    for (int i = 0; i < n; ++i)
      axes.push_back(
          {"x" + std::to_string(i + 1), 0.0, 2.0 * kPi, AxisKind::Periodic});
    std::vector<Expr> diag(n, integer(1));
    CatalogEntry e{diagonal_chart("flat_torus", axes, diag, {}), std::nullopt,
                   {}, {}, {}, {}};
    e.quad_chart = diagonal_chart("flat_torus", std::move(axes), diag, {});
    fill_constant_curvature(e, n, 0.0);
    return e;
  }

  if (name == "product_spheres") {
    const double kf = param_or(params, "k", 2.0);
    const int k = static_cast<int>(kf);
    if (k != kf || k < 2 || k > n - 2)
      throw std::invalid_argument(
          "product_spheres requires an integer split 2 <= k <= n-2");
    const double r1 = require_positive(params, "r1", 1.0);
    const double r2 = require_positive(params, "r2", 1.0);
    const ParamMap bound{{"r1", r1}, {"r2", r2}};
    const Expr rs1 = int_pow(parameter("r1"), 2);
    const Expr rs2 = int_pow(parameter("r2"), 2);

    std::vector<Axis> axes;
    append_open_axes(axes, k, 0.8, "u");
    append_open_axes(axes, n - k, 0.8, "v");
    std::vector<Expr> diag;
    const Expr f1 = stereographic_factor(k, 0, rs1);
    const Expr f2 = stereographic_factor(n - k, k, rs2);
    for (int i = 0; i < k; ++i) diag.push_back(f1);
    for (int i = k; i < n; ++i) diag.push_back(f2);
    CatalogEntry e{
        diagonal_chart("product_spheres", std::move(axes), diag, bound),
        std::nullopt, {}, {}, {}, {}};

    std::vector<Axis> qaxes;
    append_angle_axes(qaxes, k, "theta");
    append_angle_axes(qaxes, n - k, "psi");
    std::vector<Expr> qdiag;
    append_angle_metric(qdiag, k, 0, rs1);
    append_angle_metric(qdiag, n - k, k, rs2);
    e.quad_chart = diagonal_chart("product_spheres-angles", std::move(qaxes),
                                  qdiag, bound);

    const double ra = 1.0 / (r1 * r1), rb = 1.0 / (r2 * r2);
    const double R = k * (k - 1.0) * ra + (n - k) * (n - k - 1.0) * rb;
    const double ric2 = k * (k - 1.0) * (k - 1.0) * ra * ra +
                        (n - k) * (n - k - 1.0) * (n - k - 1.0) * rb * rb;
    e.expected["R"] = R;
    e.expected["ric_norm_sq"] = ric2;
    e.notes["R"] = "sum of factor scalars k(k-1)/r1^2 + (n-k)(n-k-1)/r2^2";
    e.notes["ric_norm_sq"] = "factor Ricci eigenvalues (k-1)/r1^2, (n-k-1)/r2^2";
    const DimensionConstants dc = dimension_constants(n);
    e.expected["Q"] = -dc.b_n.to_double() * ric2 + dc.c_n.to_double() * R * R;
    e.notes["Q"] = "constant R: Q = -b_n |Ric|^2 + c_n R^2";
    e.weyl_zero = false;
    const double einstein_gap = (k - 1.0) * ra - (n - k - 1.0) * rb;
    e.einstein =
        std::abs(einstein_gap) <= 1e-12 * std::max({1.0, ra, rb});
    return e;
  }

  if (name == "circle_times_sphere") {
    const double T = require_positive(params, "T", 2.0 * kPi);
    const double r = require_positive(params, "r", 1.0);
    const Expr rad_sq = int_pow(parameter("r"), 2);
    std::vector<Axis> axes{{"t", 0.0, T, AxisKind::Periodic}};
    append_open_axes(axes, n - 1, 0.9, "x");
    std::vector<Expr> diag{integer(1)};
    const Expr factor = stereographic_factor(n - 1, 1, rad_sq);
    for (int i = 1; i < n; ++i) diag.push_back(factor);
    CatalogEntry e{diagonal_chart("circle_times_sphere", std::move(axes), diag,
                                  {{"r", r}, {"T", T}}),
                   std::nullopt, {}, {}, {}, {}};

    std::vector<Axis> qaxes{{"t", 0.0, T, AxisKind::Periodic}};
    append_angle_axes(qaxes, n - 1, "theta");
    std::vector<Expr> qdiag{integer(1)};
    append_angle_metric(qdiag, n - 1, 1, rad_sq);
    e.quad_chart = diagonal_chart("circle_times_sphere-angles",
                                  std::move(qaxes), qdiag, {{"r", r}, {"T", T}});
    fill_cylinder_values(e, n, r);
    return e;
  }

  throw std::invalid_argument("unknown catalog metric '" + name + "'");
}

MetricChart random_lcf_metric(int n, unsigned long long seed,
                              double amplitude) {
  if (n < 3)
    throw std::invalid_argument("random_lcf_metric requires n >= 3");
  if (!(amplitude >= 0.0 && amplitude <= 0.3))
    throw std::invalid_argument("amplitude must lie in [0, 0.3]");

  std::mt19937_64 rng(seed);
  auto draw = [&rng, amplitude](double weight) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return amplitude * weight * (2.0 * u - 1.0);
  };

  std::vector<Expr> terms;
  for (int a = 0; a < n; ++a)
    for (int mode = 1; mode <= 2; ++mode) {
      const double weight = mode == 1 ? 1.0 : 0.5;
      const Expr arg = mode == 1 ? coordinate(a)
                                 : product_of({integer(mode), coordinate(a)});
      terms.push_back(product_of({float_const(draw(weight)), sin_of(arg)}));
      terms.push_back(product_of({float_const(draw(weight)), cos_of(arg)}));
    }
  const Expr conf =
      simplify(exp_of(product_of({integer(2), sum_of(std::move(terms))})));

  std::vector<Axis> axes;
  std::vector<std::vector<Expr>> g(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i) {
    axes.push_back(
        {"x" + std::to_string(i + 1), 0.0, 2.0 * kPi, AxisKind::Periodic});
    g[i][i] = conf;
  }
  return MetricChart("lcf-torus-" + std::to_string(seed), std::move(axes),
                     std::move(g));
}

namespace {

// Unit k-sphere embedding into k+1 ambient coordinates from hyperspherical
// angles starting at chart axis `base`.
std::vector<Expr> sphere_embedding(int k, int base) {
  std::vector<Expr> X(k + 1);
  for (int i = 0; i <= k; ++i) {
    std::vector<Expr> f;
    for (int j = 0; j < std::min(i, k); ++j)
      f.push_back(sin_of(coordinate(base + j)));
    if (i < k) f.push_back(cos_of(coordinate(base + i)));
    X[i] = f.empty() ? integer(1) : simplify(product_of(std::move(f)));
  }
  return X;
}

std::vector<Expr> scaled(const std::vector<Expr>& v, double s) {
  std::vector<Expr> out;
  out.reserve(v.size());
  for (const Expr& e : v) out.push_back(simplify(product_of({float_const(s), e})));
  return out;
}

}  // namespace

const std::vector<std::string>& builtin_immersion_names() {
  static const std::vector<std::string> names{
      "round_sphere_in_rn1", "clifford_in_sn1", "geodesic_sphere_in_hn1"};
  return names;
}

Immersion builtin_immersion(const std::string& name, int n,
                            const ParamMap& params) {
  if (n < 2) throw std::invalid_argument("immersions require n >= 2");

  if (name == "round_sphere_in_rn1") {
    const double r = require_positive(params, "r", 1.0);
    Immersion im;
    im.name = name;
    im.ambient_c = 0;
    im.n = n;
    append_angle_axes(im.axes, n, "theta");
    const std::vector<Expr> phi = sphere_embedding(n, 0);
    im.position = scaled(phi, r);
    im.normal = scaled(phi, -1.0);
    im.params = {{"r", r}};
    return im;
  }

  if (name == "clifford_in_sn1") {
    const double mf = param_or(params, "m", static_cast<double>(n / 2));
    const int m = static_cast<int>(mf);
    if (m != mf || m < 1 || m > n - 1)
      throw std::invalid_argument(
          "clifford split requires an integer 1 <= m <= n-1");
    const double r =
        require_positive(params, "r", std::sqrt(static_cast<double>(m) / n));
    const double s = require_positive(
        params, "s", std::sqrt(static_cast<double>(n - m) / n));
    if (std::abs(r * r + s * s - 1.0) > 1e-12)
      throw std::invalid_argument("clifford radii must satisfy r^2 + s^2 = 1");
    Immersion im;
    im.name = name;
    im.ambient_c = 1;
    im.n = n;
    append_angle_axes(im.axes, m, "u");
    append_angle_axes(im.axes, n - m, "v");
    const std::vector<Expr> phi_u = sphere_embedding(m, 0);
    const std::vector<Expr> phi_v = sphere_embedding(n - m, m);
    im.position = scaled(phi_u, r);
    const std::vector<Expr> pos_v = scaled(phi_v, s);
    im.position.insert(im.position.end(), pos_v.begin(), pos_v.end());
    im.normal = scaled(phi_u, -s);
    const std::vector<Expr> nor_v = scaled(phi_v, r);
    im.normal.insert(im.normal.end(), nor_v.begin(), nor_v.end());
    im.params = {{"m", static_cast<double>(m)}, {"r", r}, {"s", s}};
    return im;
  }

  if (name == "geodesic_sphere_in_hn1") {
    const double rho = require_positive(params, "rho", 1.0);
    Immersion im;
    im.name = name;
    im.ambient_c = -1;
    im.n = n;
    append_angle_axes(im.axes, n, "theta");
    const std::vector<Expr> phi = sphere_embedding(n, 0);
    im.position.push_back(float_const(std::cosh(rho)));
    const std::vector<Expr> pos = scaled(phi, std::sinh(rho));
    im.position.insert(im.position.end(), pos.begin(), pos.end());
    im.normal.push_back(float_const(-std::sinh(rho)));
    const std::vector<Expr> nor = scaled(phi, -std::cosh(rho));
    im.normal.insert(im.normal.end(), nor.begin(), nor.end());
    im.params = {{"rho", rho}};
    return im;
  }

  throw std::invalid_argument("unknown catalog immersion '" + name + "'");
}

}  // namespace qcurv
