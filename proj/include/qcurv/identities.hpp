#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "qcurv/geometry.hpp"

namespace qcurv {

// Aggregated residuals of one identity over a batch of points.  Each point
// contributes its worst component residual and the magnitude of its largest
// participating term; `pass` is max_rel <= tolerance, where a point with
// scale below 1e-8 counts as rel 0 when its absolute residual is <= 1e-12
// and rel 1 otherwise.
struct IdentityReport {
  std::string id;
  int points_tested = 0;
  double max_abs = 0.0;
  double max_rel = 0.0;
  double scale = 0.0;  // largest |term| across points
  bool pass = false;
};

using PointBatch = std::span<const std::vector<double>>;

namespace detail {

// Shared builder for IdentityReport: feed per-point worst residual and
// largest term magnitude, then snapshot against a tolerance.
struct ResidualAccum {
  int points = 0;
  double max_abs = 0.0, max_rel = 0.0, scale = 0.0;

  void add(double abs_res, double point_scale) {
    ++points;
    max_abs = std::max(max_abs, abs_res);
    scale = std::max(scale, point_scale);
    const double rel = point_scale >= 1e-8 ? abs_res / point_scale
                       : abs_res <= 1e-12  ? 0.0
                                           : 1.0;
    max_rel = std::max(max_rel, rel);
  }

  IdentityReport report(std::string id, double tol) const {
    IdentityReport r;
    r.id = std::move(id);
    r.points_tested = points;
    r.max_abs = max_abs;
    r.max_rel = max_rel;
    r.scale = scale;
    r.pass = max_rel <= tol;
    return r;
  }
};

}  // namespace detail

// Laplacian-of-|Ric|^2 identity.  `lcf` drops the Weyl and Bach terms and
// requires a conformally flat chart; `div_weyl_free` trades them for
// 2 tr(Ric^3) - 2 Riem.Ric.Ric and requires delta^2 W = 0.
enum class Lemma21Variant { general, lcf, div_weyl_free };

// LHS is the symbolic Laplacian of the |Ric|^2 scalar field; RHS is
// assembled from pointwise bundle tensors.  Throws std::invalid_argument
// for n <= 3 or when a variant precondition fails at a tested point.
IdentityReport verify_lemma21(ChartGeometry& geo, PointBatch points,
                              Lemma21Variant variant, double tol = 1e-6);

// A_{ik,k} = R_{,i} / (2(n-1)).  n > 2.
IdentityReport verify_schouten_div(ChartGeometry& geo, PointBatch points,
                                   double tol = 1e-6);

// W_{ikjl,l} = (n-3)(A_{ij,k} - A_{jk,i}) in orthonormal labels; in chart
// components the stored divergence (dW)_{ijk} = g^{lm} W_{ijkl;m} satisfies
// (dW)_{ijk} = (n-3)(A_{ki;j} - A_{kj;i}).  n > 3.
IdentityReport verify_div_weyl(ChartGeometry& geo, PointBatch points,
                               double tol = 1e-6);

// A_{jk,ik} = A_{jk,ki} - (R_{ikjl}A_{lk} - R_{il}A_{jl}).  n > 2.
IdentityReport verify_commutation(ChartGeometry& geo, PointBatch points,
                                  double tol = 1e-6);

// (1/2) Lap|grad R|^2 = |Hess R|^2 + <grad R, grad Lap R> + Ric(grad R, grad R).
IdentityReport verify_bochner(ChartGeometry& geo, PointBatch points,
                              double tol = 1e-6);

// Same formula applied to an arbitrary scalar u instead of R.
IdentityReport verify_bochner_scalar(ChartGeometry& geo, const Expr& u,
                                     PointBatch points, double tol = 1e-6);

// tr(Ric^3) - Riem.Ric.Ric = (1/2) sum_{a,b} R'_{abab} (lambda_a - lambda_b)^2
// with primes in a g-orthonormal Ricci eigenframe.  n >= 2.
IdentityReport verify_eigen_identity(ChartGeometry& geo, PointBatch points,
                                     double tol = 1e-6);

struct PointwiseBoundsReport {
  IdentityReport grad_ricci;  // |grad Ric|^2 >= |grad R|^2 / n
  // Lap|Ric|^2 >= 2|grad Ric|^2 + (n-2)/(n-1)<Ric,Hess R> + R LapR/(n-1),
  // evaluated only where the Ricci spectrum is nonnegative.
  IdentityReport laplacian;
  double grad_min_slack = 0.0;
  double laplacian_min_slack = 0.0;
  int laplacian_skipped = 0;  // points with a Ricci eigenvalue < -1e-10
};

// Inequalities report violations (max(0, rhs - lhs)) instead of residuals.
PointwiseBoundsReport verify_pointwise_bounds(ChartGeometry& geo,
                                              PointBatch points,
                                              double tol = 1e-6);

// Deterministic uniform draws from the central 80% of every axis range.
std::vector<std::vector<double>> sample_chart_points(const MetricChart& chart,
                                                     int count,
                                                     unsigned long long seed);

}  // namespace qcurv
