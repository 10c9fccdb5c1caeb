#pragma once

#include <vector>

#include "qcurv/rational.hpp"

namespace qcurv {

// Dimension-dependent coefficients of the curvature functionals, exact.
// Sign facts: l_n > 0 for n >= 3; (n-2)b_n - n*a_n < 0 iff n >= 6.
struct DimensionConstants {
  int n = 0;
  Rational a_n;     // 1/(2(n-1))
  Rational b_n;     // 2/(n-2)^2
  Rational c_n;     // (n^3-4n^2+16n-16)/(8(n-1)^2(n-2)^2)
  Rational d_n;     // (n-2)(n^3-6n^2+16n-8)/(64n(n-1)^2)
  Rational l_n;     // (n^3-6n^2+16n-8)/(4n(n-1)^2(n-2))
  Rational beta_n;  // 2(2n-1)/(3n(n-1))
};

// Throws std::invalid_argument for n < 3.
DimensionConstants dimension_constants(int n);

struct SimplexPoint {
  int n = 0;
  std::vector<double> x;  // nonnegative, sums to 1
};

// x.size() == n, every coordinate >= 0, |sum - 1| <= 1e-12.
bool valid_simplex_point(const SimplexPoint& p);

// f_n(x) = n*sum x_i^3 + 1/(n-1) - (2n-1)/(n-1) * sum x_i^2.
// Nonnegative on the simplex; zero exactly on the two equality families.
double f_n_eval(const SimplexPoint& p);

enum class SimplexFamily { none, uniform, boundary };

// Matches p, up to permutation, against (1/n,...,1/n) or
// (1/(n-1),...,1/(n-1),0) in L-infinity distance tol.
SimplexFamily classify_equality_family(const SimplexPoint& p, double tol);

struct SimplexMinResult {
  double min_value = 0.0;  // lattice minimum, exact arithmetic
  bool min_is_zero = false;
  std::vector<int> lattice_argmin;  // non-increasing, sums to grid_depth
  // Every lattice point with f exactly zero, as sorted representatives.
  std::vector<std::vector<int>> zero_lattice;
  SimplexPoint argmin;  // refined by coordinate descent
  double refined_value = 0.0;
};

// Exhaustive lattice scan with spacing 1/grid_depth, then float coordinate
// descent from the best cell (step floor 1e-10).  f_n is symmetric under
// permutation, so the scan runs over non-increasing tuples; lattice values
// use the cleared-denominator integer (n-1)*depth^3*f, so the certificate
// carries no float noise.  Requires 3 <= n <= 12 and grid_depth >= 20.
SimplexMinResult simplex_min_search(int n, int grid_depth);

enum class CriticalKind { interior_min, interior_other, boundary };

struct CriticalPointData {
  // Number of alpha-entries among the first n-1 reduced coordinates; the
  // full representative carries m+1 of them.
  int m = 0;
  double alpha = 0.0;
  double value = 0.0;
  CriticalKind classification = CriticalKind::interior_other;
  // (m+1) copies of alpha, then (n-1-m) copies of beta_n - alpha.
  std::vector<double> point;
};

// Interior critical points of f_n restricted to the simplex, indexed by
// m in {0,...,n-1} with 2m != n-2:
//   alpha = beta_n/2 + (n-2)/(3(n-1)(2m-(n-2)))
//   value = (n - n^2 beta_n/2)(alpha^2 - beta_n alpha) + 1/(n-1) - n beta_n^2/2
// Candidates with a negative coordinate are dropped.
std::vector<CriticalPointData> critical_points(int n);

// I(lambda) = (n*S3 - (2n-1)/(n-1)*R*S2 + R^3/(n-1)) / (n-2)
// with R = sum, S2 = sum of squares, S3 = sum of cubes.  Homogeneous of
// degree 3; nonnegative when every lambda_i >= 0.
double I_from_eigenvalues(int n, const std::vector<double>& lambdas);

}  // namespace qcurv
