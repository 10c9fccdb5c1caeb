#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/hypersurface.hpp"

namespace qcurv {

// A named model space.  `chart` is the probe chart used for curvature
// evaluation (stereographic for spheres, so the metric entries stay smooth);
// `quad_chart`, when present, is a closed angle-coordinate chart covering the
// same manifold up to measure zero, suitable for integration.  `expected`
// holds exact invariant values where closed forms exist (keys "R", "Q",
// "ric_norm_sq"), with a short derivation note per key in `notes`.
struct CatalogEntry {
  MetricChart chart;
  std::optional<MetricChart> quad_chart;
  std::map<std::string, double> expected;
  std::optional<bool> weyl_zero;
  std::optional<bool> einstein;
  std::map<std::string, std::string> notes;
};

// Model spaces: euclidean, sphere, hyperbolic, cylinder, flat_torus,
// product_spheres, circle_times_sphere.  Parameter keys (all optional):
//   r        radius (sphere, cylinder, circle_times_sphere sphere factor)
//   r1, r2   factor radii (product_spheres)
//   k        first-factor dimension (product_spheres, 2 <= k <= n-2)
//   T        circle length (circle_times_sphere)
// Throws std::invalid_argument on an unknown name or invalid parameters.
CatalogEntry builtin_metric(const std::string& name, int n,
                            const ParamMap& params = {});
const std::vector<std::string>& builtin_metric_names();

// Random conformally flat torus metric e^{2f} delta on [0, 2pi)^n, with f a
// trigonometric polynomial of at most two modes per axis and coefficients
// bounded by `amplitude`.  Deterministic in `seed`.  n >= 3,
// 0 <= amplitude <= 0.3.
MetricChart random_lcf_metric(int n, unsigned long long seed,
                              double amplitude);

// Hypersurfaces: round_sphere_in_rn1 (params: r), clifford_in_sn1
// (params: m, r, s with r^2 + s^2 = 1; default minimal r = sqrt(m/n)),
// geodesic_sphere_in_hn1 (params: rho).  Throws std::invalid_argument on an
// unknown name or invalid parameters.
Immersion builtin_immersion(const std::string& name, int n,
                            const ParamMap& params = {});
const std::vector<std::string>& builtin_immersion_names();

}  // namespace qcurv
