#include "qcurv/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace qcurv {

namespace {

size_t pow_size(int dim, size_t rank) {
  size_t s = 1;
  for (size_t i = 0; i < rank; ++i) s *= static_cast<size_t>(dim);
  return s;
}

double max_abs(const TensorValue& t) {
  double m = 0.0;
  for (size_t i = 0; i < t.size(); ++i) m = std::max(m, std::fabs(t.flat(i)));
  return m;
}

void check_rank2_symmetric(const TensorValue& t, const char* what) {
  if (t.rank() != 2) throw TensorError(std::string(what) + ": rank-2 tensor required");
  double scale = std::max(max_abs(t), 1e-300);
  for (int i = 0; i < t.dim(); ++i)
    for (int j = i + 1; j < t.dim(); ++j)
      if (std::fabs(t(i, j) - t(j, i)) > 1e-8 * scale)
        throw TensorError(std::string(what) + ": input is not symmetric");
}

}  // namespace

TensorValue::TensorValue(int dim, std::vector<Variance> var)
    : dim_(dim), var_(std::move(var)), comp_(pow_size(dim, var_.size()), 0.0) {
  if (dim < 1) throw TensorError("tensor dimension must be positive");
}

TensorValue TensorValue::delta(int dim, Variance v0, Variance v1) {
  TensorValue t(dim, {v0, v1});
  for (int i = 0; i < dim; ++i) t(i, i) = 1.0;
  return t;
}

TensorValue contract(const TensorValue& t, int slot_a, int slot_b,
                     const TensorValue* metric, const TensorValue* inverse_metric) {
  int r = t.rank();
  if (slot_a < 0 || slot_b < 0 || slot_a >= r || slot_b >= r)
    throw TensorError("contract: slot out of range");
  if (slot_a == slot_b) throw TensorError("contract: slots must be distinct");
  if (slot_a > slot_b) std::swap(slot_a, slot_b);

  Variance va = t.variance(slot_a), vb = t.variance(slot_b);
  const TensorValue* pair_metric = nullptr;
  if (va != vb) {
    pair_metric = nullptr;  // direct trace
  } else if (va == Variance::Co) {
    if (!inverse_metric)
      throw TensorError("contract: two covariant slots need the inverse metric");
    pair_metric = inverse_metric;
  } else {
    if (!metric)
      throw TensorError("contract: two contravariant slots need the metric");
    pair_metric = metric;
  }

  int n = t.dim();
  std::vector<Variance> out_var;
  for (int s = 0; s < r; ++s)
    if (s != slot_a && s != slot_b) out_var.push_back(t.variance(s));
  TensorValue out(n, std::move(out_var));

  std::vector<int> src(r, 0);
  std::vector<int> dst(r - 2, 0);
  size_t out_size = out.size();
  for (size_t o = 0; o < out_size; ++o) {
    size_t rem = o;
    for (int s = r - 3; s >= 0; --s) {
      dst[s] = static_cast<int>(rem % n);
      rem /= n;
    }
    int di = 0;
    for (int s = 0; s < r; ++s)
      if (s != slot_a && s != slot_b) src[s] = dst[di++];
    double acc = 0.0;
    if (!pair_metric) {
      for (int k = 0; k < n; ++k) {
        src[slot_a] = k;
        src[slot_b] = k;
        acc += t.at(src);
      }
    } else {
      for (int k = 0; k < n; ++k) {
        src[slot_a] = k;
        for (int l = 0; l < n; ++l) {
          src[slot_b] = l;
          acc += (*pair_metric)(k, l) * t.at(src);
        }
      }
    }
    out.flat(o) = acc;
  }
  return out;
}

namespace {

TensorValue convert_slot(const TensorValue& t, int slot, const TensorValue& m,
                         Variance target) {
  if (slot < 0 || slot >= t.rank()) throw TensorError("slot out of range");
  if (m.dim() != t.dim()) throw TensorError("metric dimension mismatch");
  int n = t.dim();
  std::vector<Variance> var = t.variances();
  var[slot] = target;
  TensorValue out(n, std::move(var));

  // strides: stride of `slot` in the flat layout
  size_t stride = 1;
  for (int s = t.rank() - 1; s > slot; --s) stride *= static_cast<size_t>(n);
  size_t total = t.size();
  std::vector<double> col(n);
  for (size_t base = 0; base < total; ++base) {
    size_t idx_at_slot = (base / stride) % n;
    if (idx_at_slot != 0) continue;  // visit each fiber once
    for (int k = 0; k < n; ++k) col[k] = t.flat(base + k * stride);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += m(i, k) * col[k];
      out.flat(base + i * stride) = acc;
    }
  }
  return out;
}

}  // namespace

TensorValue raise_slot(const TensorValue& t, int slot, const TensorValue& ginv) {
  if (t.variance(slot) != Variance::Co)
    throw TensorError("raise_slot: slot is already contravariant");
  return convert_slot(t, slot, ginv, Variance::Contra);
}

TensorValue lower_slot(const TensorValue& t, int slot, const TensorValue& g) {
  if (t.variance(slot) != Variance::Contra)
    throw TensorError("lower_slot: slot is already covariant");
  return convert_slot(t, slot, g, Variance::Co);
}

TensorValue kulkarni_nomizu(const TensorValue& a, const TensorValue& b) {
  if (a.dim() != b.dim()) throw TensorError("kulkarni_nomizu: dimension mismatch");
  check_rank2_symmetric(a, "kulkarni_nomizu");
  check_rank2_symmetric(b, "kulkarni_nomizu");
  int n = a.dim();
  TensorValue out(n, std::vector<Variance>(4, Variance::Co));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          out(i, j, k, l) = a(i, k) * b(j, l) + a(j, l) * b(i, k) -
                            a(i, l) * b(j, k) - a(j, k) * b(i, l);
  return out;
}

double tensor_norm_sq(const TensorValue& t, const TensorValue& g,
                      const TensorValue& ginv) {
  if (g.dim() != t.dim() || ginv.dim() != t.dim())
    throw TensorError("tensor_norm_sq: dimension mismatch");
  for (int s = 0; s < t.rank(); ++s)
    if (t.variance(s) != Variance::Co)
      throw TensorError("tensor_norm_sq: all slots must be covariant");
  (void)g;
  TensorValue up = t;
  for (int s = 0; s < t.rank(); ++s) up = raise_slot(up, s, ginv);
  double acc = 0.0;
  for (size_t i = 0; i < t.size(); ++i) acc += t.flat(i) * up.flat(i);
  return acc;
}

bool is_symmetric_pair(const TensorValue& t, int a, int b, double tol) {
  if (a > b) std::swap(a, b);
  double scale = std::max(max_abs(t), 1e-300);
  int r = t.rank(), n = t.dim();
  std::vector<int> idx(r, 0);
  size_t total = t.size();
  for (size_t o = 0; o < total; ++o) {
    size_t rem = o;
    for (int s = r - 1; s >= 0; --s) {
      idx[s] = static_cast<int>(rem % n);
      rem /= n;
    }
    std::vector<int> sw = idx;
    std::swap(sw[a], sw[b]);
    if (std::fabs(t.at(idx) - t.at(sw)) > tol * scale) return false;
  }
  return true;
}

bool is_antisymmetric_pair(const TensorValue& t, int a, int b, double tol) {
  if (a > b) std::swap(a, b);
  double scale = std::max(max_abs(t), 1e-300);
  int r = t.rank(), n = t.dim();
  std::vector<int> idx(r, 0);
  size_t total = t.size();
  for (size_t o = 0; o < total; ++o) {
    size_t rem = o;
    for (int s = r - 1; s >= 0; --s) {
      idx[s] = static_cast<int>(rem % n);
      rem /= n;
    }
    std::vector<int> sw = idx;
    std::swap(sw[a], sw[b]);
    if (std::fabs(t.at(idx) + t.at(sw)) > tol * scale) return false;
  }
  return true;
}

bool has_riemann_symmetries(const TensorValue& t, double tol) {
  if (t.rank() != 4) return false;
  if (!is_antisymmetric_pair(t, 0, 1, tol)) return false;
  if (!is_antisymmetric_pair(t, 2, 3, tol)) return false;
  double scale = std::max(max_abs(t), 1e-300);
  int n = t.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          if (std::fabs(t(i, j, k, l) - t(k, l, i, j)) > tol * scale) return false;
  return true;
}

// -- eigensolvers ---------------------------------------------------------------

namespace {

// Cyclic Jacobi on a dense symmetric matrix; V accumulates rotations.
void jacobi_eigen(std::vector<double>& a, std::vector<double>& v, int n) {
  v.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;
  double frob = 0.0;
  for (double x : a) frob += x * x;
  frob = std::sqrt(frob);
  if (frob == 0.0) return;

  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += 2 * a[p * n + q] * a[p * n + q];
    if (std::sqrt(off) <= 1e-12 * frob) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a[p * n + q];
        if (std::fabs(apq) <= 1e-300) continue;
        double theta = (a[q * n + q] - a[p * n + p]) / (2 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
}

EigenData sorted_eigen(std::vector<double> a, std::vector<double> v, int n) {
  EigenData out;
  out.dim = n;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return a[x * n + x] < a[y * n + y]; });
  out.eigenvalues.resize(n);
  out.vectors.assign(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    out.eigenvalues[j] = a[order[j] * n + order[j]];
    for (int i = 0; i < n; ++i) out.vectors[i * n + j] = v[i * n + order[j]];
  }
  return out;
}

// Lower-triangular Cholesky factor of an SPD matrix.
std::vector<double> cholesky(const TensorValue& g) {
  int n = g.dim();
  std::vector<double> L(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = g(i, j);
      for (int k = 0; k < j; ++k) acc -= L[i * n + k] * L[j * n + k];
      if (i == j) {
        if (acc <= 0.0)
          throw TensorError("sym_eigen_rel: metric is not positive definite");
        L[i * n + i] = std::sqrt(acc);
      } else {
        L[i * n + j] = acc / L[j * n + j];
      }
    }
  }
  return L;
}

}  // namespace

EigenData sym_eigen(const TensorValue& s) {
  check_rank2_symmetric(s, "sym_eigen");
  int n = s.dim();
  std::vector<double> a(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i * n + j] = 0.5 * (s(i, j) + s(j, i));
  std::vector<double> v;
  jacobi_eigen(a, v, n);
  return sorted_eigen(std::move(a), std::move(v), n);
}

EigenData sym_eigen_rel(const TensorValue& s, const TensorValue& g) {
  check_rank2_symmetric(s, "sym_eigen_rel");
  check_rank2_symmetric(g, "sym_eigen_rel");
  if (s.dim() != g.dim()) throw TensorError("sym_eigen_rel: dimension mismatch");
  int n = s.dim();
  std::vector<double> L = cholesky(g);

  // M = L^{-1} S L^{-T}, built by two triangular solves.
  std::vector<double> m(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i * n + j] = 0.5 * (s(i, j) + s(j, i));
  // solve L X = M column-wise (forward substitution across rows)
  for (int col = 0; col < n; ++col) {
    for (int i = 0; i < n; ++i) {
      double acc = m[i * n + col];
      for (int k = 0; k < i; ++k) acc -= L[i * n + k] * m[k * n + col];
      m[i * n + col] = acc / L[i * n + i];
    }
  }
  // solve (X') L^T = X row-wise, i.e. L y = row^T per row
  for (int row = 0; row < n; ++row) {
    for (int j = 0; j < n; ++j) {
      double acc = m[row * n + j];
      for (int k = 0; k < j; ++k) acc -= L[j * n + k] * m[row * n + k];
      m[row * n + j] = acc / L[j * n + j];
    }
  }

  std::vector<double> v;
  jacobi_eigen(m, v, n);
  EigenData e = sorted_eigen(std::move(m), std::move(v), n);

  // back-substitute: x = L^{-T} y, so columns are g-orthonormal
  for (int col = 0; col < n; ++col) {
    for (int i = n - 1; i >= 0; --i) {
      double acc = e.vectors[i * n + col];
      for (int k = i + 1; k < n; ++k) acc -= L[k * n + i] * e.vectors[k * n + col];
      e.vectors[i * n + col] = acc / L[i * n + i];
    }
  }
  return e;
}

}  // namespace qcurv
