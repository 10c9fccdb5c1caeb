#pragma once

#include <span>
#include <string>
#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/identities.hpp"
#include "qcurv/rational.hpp"
#include "qcurv/tensor.hpp"

namespace qcurv {

// Analytic hypersurface of a space form N^{n+1}(c).  The ambient is flat
// R^{n+1} for c = 0 and the unit quadric in R^{n+2} otherwise: x.x = 1 for
// c = +1, Minkowski <x,x> = -1 (x0 > 0) for c = -1.  `position` and `normal`
// are expressions in the chart coordinates; the normal is unit and, for
// c != 0, tangent to the quadric.
struct Immersion {
  std::string name;
  int ambient_c = 0;  // -1, 0, +1
  int n = 0;          // hypersurface dimension
  std::vector<Axis> axes;
  std::vector<Expr> position;
  std::vector<Expr> normal;
  ParamMap params;  // record of the numeric parameters baked into the exprs

  int ambient_dim() const { return ambient_c == 0 ? n + 1 : n + 2; }
};

// Throws GeometryError if the quadric constraint, normal orthogonality, or
// unit-normal condition fails by more than `tol` at interior probe points.
void validate_immersion(const Immersion& im, double tol = 1e-10);

// Chart carrying the symbolic first fundamental form <dX, dX> over the
// immersion's parameter domain.
MetricChart induced_chart(const Immersion& im);

// Pointwise first/second fundamental form data.
struct ShapeData {
  int n = 0;
  int ambient_c = 0;
  TensorValue first;            // induced metric g_ab
  TensorValue second;           // second form h_ab = <d2X, N>
  std::vector<double> kappa;    // principal curvatures, ascending
  std::vector<double> lambda;   // (n-1)c + H kappa_i - kappa_i^2
  std::vector<double> mu;       // kappa_i - H/n
  double H = 0.0;               // unnormalized mean curvature, sum of kappa
  double h_norm_sq = 0.0;       // |h|^2 = sum kappa_i^2
  double z_norm_sq = 0.0;       // |h|^2 - H^2/n
};

// Evaluates both fundamental forms at a parameter point and solves the
// g-relative eigenproblem h v = kappa g v.  Throws GeometryError when the
// induced metric is degenerate at the point.
ShapeData fundamental_forms(const Immersion& im, std::span<const double> point);

// Residuals of the curvature relations tying the intrinsic Riemann, Ricci
// and scalar curvature of the induced metric to ambient data:
//   Riem_abcd = c (g_ac g_bd - g_ad g_bc) + h_ac h_bd - h_ad h_bc
// together with its Ricci trace and the scalar contraction
//   R = n(n-1) c + H^2 - |h|^2.
// The batch form compiles the induced geometry once for all points.
IdentityReport gauss_residuals(const Immersion& im, PointBatch points,
                               double tol = 1e-7);
IdentityReport gauss_residuals(const Immersion& im,
                               std::span<const double> point,
                               double tol = 1e-7);

// lambda spectrum diagnostics and the sign quantity
//   (sum_i kappa_i lambda_i)^2 - H sum_i kappa_i lambda_i^2,
// which is <= 0 whenever c = 0, H > 0 and all lambda_i >= 0 (Cauchy).
struct LambdaReport {
  std::vector<double> lambda;
  double value = 0.0;        // the combination above
  double scale = 0.0;        // magnitude of its largest constituent
  bool umbilic = false;      // all kappa equal (1e-8 relative)
  bool two_valued = false;   // exactly two distinct kappa clusters
  bool cartan = false;       // c + kappa_i kappa_j = 0 over distinct-lambda pairs
  bool sign_hypotheses = false;  // c = 0, H > 0, all lambda_i >= -1e-10
};
LambdaReport lambda_quantities(const ShapeData& sd, int c);

// Membership in the pinching window H^2/n <= |h|^2 <= H^2/(n-1) and the
// bounds that follow from it for the traceless part Z = h - (H/n) g.
struct PinchingReport {
  double H = 0.0;
  double h_norm_sq = 0.0;
  double z_norm_sq = 0.0;
  bool window = false;     // H^2/n <= |h|^2 <= H^2/(n-1)  (1e-10 slack)
  bool z_bound = false;    // |Z|^2 <= H^2/(n(n-1))
  bool mu_bounds = false;  // |mu_i| <= |H|/n for every i
  bool all_nonneg = false;
  bool all_nonpos = false;
  bool all_zero = false;
};
PinchingReport pinching_check(const ShapeData& sd);

// Closed-form data of the isoparametric two-curvature family in S^{n+1}
// with lambda spectrum forced to the constant n-2:
//   kappa = +sqrt((n-m-1)/(m-1)), t = -sqrt((m-1)/(n-m-1)),
// so kappa t = -1 and (m-1) kappa + (n-m-1) t = 0 exactly.
struct IsoparametricData {
  int n = 0, m = 0;
  Rational lambda;    // n - 2
  Rational kappa_sq;  // (n-m-1)/(m-1)
  Rational t_sq;      // (m-1)/(n-m-1)
  Rational kappa_t;   // -1
  double kappa = 0.0;
  double t = 0.0;
};
IsoparametricData isoparametric_clifford_data(int n, int m);

}  // namespace qcurv
