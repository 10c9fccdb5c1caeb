#include "qcurv/simplexlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace qcurv {

DimensionConstants dimension_constants(int n) {
  if (n < 3) throw std::invalid_argument("dimension_constants: need n >= 3");
  const long long N = n;
  const long long poly = N * N * N - 6 * N * N + 16 * N - 8;
  DimensionConstants dc;
  dc.n = n;
  dc.a_n = Rational(1, 2 * (N - 1));
  dc.b_n = Rational(2, (N - 2) * (N - 2));
  dc.c_n = Rational(N * N * N - 4 * N * N + 16 * N - 16,
                    8 * (N - 1) * (N - 1) * (N - 2) * (N - 2));
  dc.d_n = Rational((N - 2) * poly, 64 * N * (N - 1) * (N - 1));
  dc.l_n = Rational(poly, 4 * N * (N - 1) * (N - 1) * (N - 2));
  dc.beta_n = Rational(2 * (2 * N - 1), 3 * N * (N - 1));
  return dc;
}

bool valid_simplex_point(const SimplexPoint& p) {
  if (p.n < 1 || static_cast<int>(p.x.size()) != p.n) return false;
  double sum = 0.0;
  for (double v : p.x) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-12;
}

double f_n_eval(const SimplexPoint& p) {
  double s2 = 0.0, s3 = 0.0;
  for (double v : p.x) {
    s2 += v * v;
    s3 += v * v * v;
  }
  const double nm1 = p.n - 1.0;
  return p.n * s3 + 1.0 / nm1 - (2.0 * p.n - 1.0) / nm1 * s2;
}

SimplexFamily classify_equality_family(const SimplexPoint& p, double tol) {
  std::vector<double> s = p.x;
  std::sort(s.begin(), s.end(), std::greater<double>());
  const int n = p.n;
  double d_uniform = 0.0;
  for (double v : s) d_uniform = std::max(d_uniform, std::abs(v - 1.0 / n));
  double d_boundary = std::abs(s.back());
  for (int i = 0; i + 1 < n; ++i)
    d_boundary = std::max(d_boundary, std::abs(s[i] - 1.0 / (n - 1)));
  if (d_uniform <= tol && d_uniform <= d_boundary) return SimplexFamily::uniform;
  if (d_boundary <= tol) return SimplexFamily::boundary;
  return SimplexFamily::none;
}

namespace {

// Scans non-increasing integer tuples k_1 >= ... >= k_n >= 0 summing to
// depth.  F(k) = n(n-1) sum k^3 + depth^3 - (2n-1) depth sum k^2 equals
// (n-1) depth^3 f(k/depth), so sign, zeros and argmin transfer exactly.
struct LatticeScan {
  int n;
  long long depth;
  long long cube_coef;   // n(n-1)
  long long square_coef; // (2n-1) depth
  long long shift;       // depth^3
  long long best = std::numeric_limits<long long>::max();
  std::vector<int> cur, best_k;
  std::vector<std::vector<int>> zeros;

  LatticeScan(int n_, int depth_)
      : n(n_),
        depth(depth_),
        cube_coef(1LL * n_ * (n_ - 1)),
        square_coef((2LL * n_ - 1) * depth_),
        shift(1LL * depth_ * depth_ * depth_) {
    cur.resize(n);
  }

  void run() { descend(0, depth, static_cast<int>(depth), 0, 0); }

  void descend(int idx, long long rem, int cap, long long s2, long long s3) {
    if (idx == n - 1) {
      const long long k = rem;  // k <= cap by the parent's lower bound
      const long long f = cube_coef * (s3 + k * k * k) + shift -
                          square_coef * (s2 + k * k);
      cur[idx] = static_cast<int>(k);
      if (f < best) {
        best = f;
        best_k = cur;
      }
      if (f == 0) zeros.push_back(cur);
      return;
    }
    const int remaining = n - idx;
    const int lo = static_cast<int>((rem + remaining - 1) / remaining);
    const int hi = static_cast<int>(std::min<long long>(cap, rem));
    for (int k = hi; k >= lo; --k) {
      cur[idx] = k;
      descend(idx + 1, rem - k, k, s2 + 1LL * k * k, s3 + 1LL * k * k * k);
    }
  }
};

void coordinate_descent(SimplexPoint& p, double& fx, double start_step) {
  const int n = p.n;
  for (double step = start_step; step >= 1e-10; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j || p.x[j] < step) continue;
          const double xi = p.x[i], xj = p.x[j];
          p.x[i] = xi + step;
          p.x[j] = xj - step;
          const double f2 = f_n_eval(p);
          if (f2 < fx) {
            fx = f2;
            improved = true;
          } else {
            p.x[i] = xi;
            p.x[j] = xj;
          }
        }
      }
    }
  }
}

}  // namespace

SimplexMinResult simplex_min_search(int n, int grid_depth) {
  if (n < 3 || n > 12)
    throw std::invalid_argument("simplex_min_search: need 3 <= n <= 12");
  if (grid_depth < 20)
    throw std::invalid_argument("simplex_min_search: need grid_depth >= 20");

  LatticeScan scan(n, grid_depth);
  scan.run();

  SimplexMinResult res;
  const double norm = (n - 1.0) * std::pow(static_cast<double>(grid_depth), 3);
  res.min_value = static_cast<double>(scan.best) / norm;
  res.min_is_zero = scan.best == 0;
  res.lattice_argmin = scan.best_k;
  res.zero_lattice = std::move(scan.zeros);

  res.argmin.n = n;
  res.argmin.x.resize(n);
  for (int i = 0; i < n; ++i)
    res.argmin.x[i] = static_cast<double>(scan.best_k[i]) / grid_depth;
  res.refined_value = f_n_eval(res.argmin);
  coordinate_descent(res.argmin, res.refined_value, 1.0 / grid_depth);
  return res;
}

std::vector<CriticalPointData> critical_points(int n) {
  if (n < 3) throw std::invalid_argument("critical_points: need n >= 3");
  const DimensionConstants dc = dimension_constants(n);
  std::vector<CriticalPointData> out;
  for (int m = 0; m <= n - 1; ++m) {
    if (2 * m == n - 2) continue;  // the branch forcing n = 2
    const Rational alpha =
        dc.beta_n / Rational(2) +
        Rational(n - 2, 3LL * (n - 1) * (2LL * m - (n - 2)));
    const Rational other = dc.beta_n - alpha;
    const bool other_used = m + 1 < n;
    if (alpha.is_negative() || (other_used && other.is_negative())) continue;

    const Rational coeff =
        Rational(n) - Rational(1LL * n * n) * dc.beta_n / Rational(2);
    const Rational value = coeff * (alpha * alpha - dc.beta_n * alpha) +
                           Rational(1, n - 1) -
                           Rational(n) * dc.beta_n * dc.beta_n / Rational(2);

    CriticalPointData cp;
    cp.m = m;
    cp.alpha = alpha.to_double();
    cp.value = value.to_double();
    cp.point.assign(m + 1, alpha.to_double());
    cp.point.insert(cp.point.end(), n - 1 - m, other.to_double());
    if (alpha.is_zero() || (other_used && other.is_zero()))
      cp.classification = CriticalKind::boundary;
    else if (value.is_zero())
      cp.classification = CriticalKind::interior_min;
    else
      cp.classification = CriticalKind::interior_other;
    out.push_back(cp);
  }
  return out;
}

double I_from_eigenvalues(int n, const std::vector<double>& lambdas) {
  if (n <= 2) throw std::invalid_argument("I_from_eigenvalues: need n > 2");
  double r = 0.0, s2 = 0.0, s3 = 0.0;
  for (double l : lambdas) {
    r += l;
    s2 += l * l;
    s3 += l * l * l;
  }
  const double nm1 = n - 1.0;
  return (n * s3 - (2.0 * n - 1.0) / nm1 * r * s2 + r * r * r / nm1) / (n - 2.0);
}

}  // namespace qcurv
