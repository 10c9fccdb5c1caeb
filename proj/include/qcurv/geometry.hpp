#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcurv/expr.hpp"
#include "qcurv/tensor.hpp"

// Curvature engine: charts carry a symbolic metric; ChartGeometry builds the
// symbolic Christoffel/curvature fields once per chart and evaluates them at
// points through compiled programs.

namespace qcurv {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AxisKind : uint8_t {
  Open,         // open box axis; probe/sample points stay strictly inside
  Periodic,     // identifies lo with hi; period = hi - lo
  ClosedRange,  // closed interval whose endpoints are valid (e.g. polar angle)
};

struct Axis {
  std::string name;
  double lo = -1.0;
  double hi = 1.0;
  AxisKind kind = AxisKind::Open;

  double period() const { return hi - lo; }
};

class MetricChart {
 public:
  // Validates: n >= 2, square symmetric Expr matrix (g_ij and g_ji identical
  // trees after simplify), and positive definiteness on a 3^n probe grid.
  MetricChart(std::string name, std::vector<Axis> axes,
              std::vector<std::vector<Expr>> metric, ParamMap params = {});

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<Axis>& axes() const { return axes_; }
  const std::vector<std::string>& coord_names() const { return coord_names_; }
  const std::vector<std::vector<Expr>>& metric() const { return metric_; }
  const ParamMap& params() const { return params_; }

  // Strict interior for Open/ClosedRange axes; periodic axes accept any value.
  bool inside(std::span<const double> pt) const;

  // Points spread over the domain interior (fractions of each axis span).
  std::vector<std::vector<double>> probe_points(int per_axis) const;

 private:
  std::string name_;
  std::vector<Axis> axes_;
  std::vector<std::string> coord_names_;
  std::vector<std::vector<Expr>> metric_;
  ParamMap params_;
};

// Dense all-covariant symbolic tensor field over a chart.
struct ExprField {
  int dim = 0;
  int rank = 0;
  std::vector<Expr> comp;  // dim^rank, row-major

  ExprField() = default;
  ExprField(int dim, int rank);

  size_t offset(std::span<const int> idx) const {
    size_t o = 0;
    for (int i : idx) o = o * dim + i;
    return o;
  }
  const Expr& at(std::span<const int> idx) const { return comp[offset(idx)]; }
  Expr& at(std::span<const int> idx) { return comp[offset(idx)]; }

  template <class... I>
  const Expr& operator()(I... i) const {
    size_t o = 0;
    ((o = o * dim + static_cast<size_t>(i)), ...);
    return comp[o];
  }
  template <class... I>
  Expr& operator()(I... i) {
    size_t o = 0;
    ((o = o * dim + static_cast<size_t>(i)), ...);
    return comp[o];
  }
};

// Pointwise curvature data.  All tensors are in chart components; rank-4
// tensors are all-covariant.  div2_weyl/bach are absent when n == 3 (the
// Bach assembly divides by n-3); `bach_absent_reason` says why.
struct CurvatureBundle {
  std::vector<double> point;
  TensorValue metric;          // g_ij
  TensorValue inverse_metric;  // g^ij
  TensorValue gamma;           // Gamma^k_ij, slot order (k,i,j)
  TensorValue riemann;         // R_ijkl
  TensorValue ricci;           // R_ij
  double scalar = 0.0;         // R
  TensorValue schouten;        // A_ij
  TensorValue weyl;            // W_ijkl
  TensorValue traceless_ricci;
  TensorValue div_weyl;        // (dW)_ijk = g^{lm} (grad W)_{ijkl;m}
  std::optional<TensorValue> div2_weyl;  // (d2W)_ij
  std::optional<TensorValue> bach;
  std::string bach_absent_reason;
  double q = 0.0;
  double ric_norm_sq = 0.0;  // |Ric|^2, the exact value used to assemble q
  TensorValue grad_R;        // R_{,i}
  TensorValue grad_Q;        // Q_{,i}
  double lap_R = 0.0;
  TensorValue hess_R;      // R_{;ij}
  TensorValue nabla_ricci;  // R_{ij;k}, derivative slot last
};

// Per-chart symbolic cache plus compiled evaluators.  Symbolic fields are
// built lazily, once; bundle evaluation afterwards is pure.
class ChartGeometry {
 public:
  explicit ChartGeometry(MetricChart chart);
  ~ChartGeometry();
  ChartGeometry(ChartGeometry&&) noexcept;
  ChartGeometry& operator=(ChartGeometry&&) noexcept;

  const MetricChart& chart() const;
  int dim() const;

  // symbolic fields (lazy; references valid for the object's lifetime)
  const ExprField& metric_field();       // rank 2
  const ExprField& inverse_metric();     // rank 2
  const Expr& det_metric();
  const ExprField& christoffel();        // rank 3, slot order (k,i,j)
  const ExprField& riemann();            // rank 4
  const ExprField& ricci();              // rank 2
  const Expr& scalar_curvature();
  const ExprField& schouten();           // rank 2 (n >= 3)
  const ExprField& weyl();               // rank 4 (n >= 3; identically 0 for n = 3)
  const ExprField& grad_scalar();        // rank 1
  const ExprField& hess_scalar();        // rank 2
  const Expr& lap_scalar();
  const ExprField& nabla_ricci();        // rank 3, derivative last
  const Expr& ricci_norm_sq_expr();      // |Ric|^2
  const Expr& q_expr();                  // symbolic Q (n >= 3), feeds grad_Q
  const ExprField& grad_q();             // rank 1
  const ExprField& div_weyl();           // rank 3 (n >= 4 meaningful)
  const ExprField& div2_weyl();          // rank 2

  // Covariant derivative of an all-covariant symbolic field; appends the
  // derivative slot last.  Rank 0 = scalar gradient.
  ExprField covariant_derivative(const ExprField& f);

  // Laplace-Beltrami of a scalar: g^{ij}(d_i d_j f - Gamma^k_ij d_k f).
  Expr laplacian_expr(const Expr& f);
  double laplacian_scalar(const Expr& f, std::span<const double> point);

  // Full pointwise bundle (requires n >= 3 and the point inside the domain).
  CurvatureBundle bundle(std::span<const double> point);

  // Q alone, through a lighter compiled program (n >= 3).
  double q_curvature(std::span<const double> point);

  // Compile arbitrary expressions over this chart with its parameters bound;
  // used by integration and report code.  Output order follows `roots`.
  Program compile(const std::vector<Expr>& roots) const;
  std::vector<double> bound_params(const Program& p) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qcurv
