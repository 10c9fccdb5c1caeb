#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Dense pointwise tensor values and index algebra: contraction, raising and
// lowering, Kulkarni-Nomizu products, norms, and symmetric eigensolvers.
// Dimensions are small (n <= 10), so everything is dense and simple.

namespace qcurv {

enum class Variance : uint8_t { Co, Contra };

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TensorValue {
 public:
  TensorValue() = default;

  // Zero-filled tensor with one variance entry per slot; rank = var.size().
  TensorValue(int dim, std::vector<Variance> var);

  // Kronecker delta as a rank-2 tensor with the given variances.
  static TensorValue delta(int dim, Variance v0, Variance v1);

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(var_.size()); }
  size_t size() const { return comp_.size(); }
  const std::vector<Variance>& variances() const { return var_; }
  Variance variance(int slot) const { return var_[slot]; }

  double* data() { return comp_.data(); }
  const double* data() const { return comp_.data(); }
  double flat(size_t i) const { return comp_[i]; }
  double& flat(size_t i) { return comp_[i]; }

  size_t offset(std::span<const int> idx) const {
    size_t o = 0;
    for (int i : idx) o = o * dim_ + i;
    return o;
  }

  double at(std::span<const int> idx) const { return comp_[offset(idx)]; }
  double& at(std::span<const int> idx) { return comp_[offset(idx)]; }

  template <class... I>
  double operator()(I... i) const {
    return comp_[flatten(i...)];
  }
  template <class... I>
  double& operator()(I... i) {
    return comp_[flatten(i...)];
  }

 private:
  template <class... I>
  size_t flatten(I... i) const {
    size_t o = 0;
    ((o = o * dim_ + static_cast<size_t>(i)), ...);
    return o;
  }

  int dim_ = 0;
  std::vector<Variance> var_;
  std::vector<double> comp_;
};

// Contracts slot_a with slot_b (0-based).  Opposite variances trace directly;
// two covariant slots need the inverse metric, two contravariant slots the
// metric.  Result rank drops by two; summation order is fixed (row-major)
// so results are deterministic.
TensorValue contract(const TensorValue& t, int slot_a, int slot_b,
                     const TensorValue* metric = nullptr,
                     const TensorValue* inverse_metric = nullptr);

// Raise/lower one slot with the inverse metric / metric.
TensorValue raise_slot(const TensorValue& t, int slot, const TensorValue& ginv);
TensorValue lower_slot(const TensorValue& t, int slot, const TensorValue& g);

// (a @ b)_{ijkl} = a_ik b_jl + a_jl b_ik - a_il b_jk - a_jk b_il for
// symmetric rank-2 inputs; output carries the full Riemann symmetries.
TensorValue kulkarni_nomizu(const TensorValue& a, const TensorValue& b);

// Squared norm |t|^2 of an all-covariant tensor: every slot raised with
// ginv, then fully traced against t.  Nonnegative up to roundoff.
double tensor_norm_sq(const TensorValue& t, const TensorValue& g,
                      const TensorValue& ginv);

// Symmetry probes, relative to the largest component magnitude.
bool is_symmetric_pair(const TensorValue& t, int a, int b, double tol);
bool is_antisymmetric_pair(const TensorValue& t, int a, int b, double tol);
// Antisymmetry in (0,1) and (2,3) plus pair interchange (ij)<->(kl).
bool has_riemann_symmetries(const TensorValue& t, double tol);

struct EigenData {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> vectors;      // dim x dim row-major; column j pairs with eigenvalue j
  int dim = 0;

  double vec(int row, int col) const { return vectors[row * dim + col]; }
};

// Cyclic Jacobi for a symmetric matrix (off-diagonal threshold 1e-12 of the
// Frobenius norm, at most 50 sweeps).  Columns of `vectors` are orthonormal.
EigenData sym_eigen(const TensorValue& s);

// Eigenvalues of s relative to an SPD metric g (solutions of s v = lambda g v).
// Columns of `vectors` are g-orthonormal.  This matches eigenvalues of s as
// measured in any g-orthonormal frame, which is chart-independent.
EigenData sym_eigen_rel(const TensorValue& s, const TensorValue& g);

}  // namespace qcurv
