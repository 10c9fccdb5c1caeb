#include "qcurv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace qcurv {

// -- MetricChart ----------------------------------------------------------------

MetricChart::MetricChart(std::string name, std::vector<Axis> axes,
                         std::vector<std::vector<Expr>> metric, ParamMap params)
    : name_(std::move(name)), axes_(std::move(axes)), params_(std::move(params)) {
  int n = static_cast<int>(axes_.size());
  if (n < 2) throw GeometryError("chart dimension must be at least 2");
  for (const Axis& a : axes_) {
    if (!(a.lo < a.hi))
      throw GeometryError("axis '" + a.name + "' has an empty domain");
    coord_names_.push_back(a.name);
  }
  if (static_cast<int>(metric.size()) != n)
    throw GeometryError("metric must be an n x n matrix");
  for (const auto& row : metric)
    if (static_cast<int>(row.size()) != n)
      throw GeometryError("metric must be an n x n matrix");

  metric_.assign(n, std::vector<Expr>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) metric_[i][j] = simplify(metric[i][j]);

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!structurally_equal(metric_[i][j], metric_[j][i]))
        throw GeometryError("metric entries (" + std::to_string(i) + "," +
                            std::to_string(j) +
                            ") and transpose are not the same expression");

  // positive definiteness on a probe grid
  std::vector<Expr> roots;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) roots.push_back(metric_[i][j]);
  Program prog = Program::compile(roots);
  std::vector<double> bound = prog.bind(params_);
  std::vector<double> scratch, out(roots.size());
  for (const std::vector<double>& pt : probe_points(3)) {
    prog.eval(pt, bound, scratch, out);
    TensorValue g(n, std::vector<Variance>(2, Variance::Co));
    for (size_t i = 0; i < out.size(); ++i) g.flat(i) = out[i];
    EigenData e = sym_eigen(g);
    if (!(e.eigenvalues.front() > 0.0))
      throw GeometryError("metric is not positive definite inside the domain of '" +
                          name_ + "'");
  }
}

bool MetricChart::inside(std::span<const double> pt) const {
  if (pt.size() != axes_.size()) return false;
  for (size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].kind == AxisKind::Periodic) continue;
    if (!(axes_[i].lo < pt[i] && pt[i] < axes_[i].hi)) return false;
  }
  return true;
}

std::vector<std::vector<double>> MetricChart::probe_points(int per_axis) const {
  int n = dim();
  std::vector<std::vector<double>> pts;
  std::vector<int> idx(n, 0);
  size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<size_t>(per_axis);
  pts.reserve(total);
  for (size_t o = 0; o < total; ++o) {
    size_t rem = o;
    std::vector<double> p(n);
    for (int i = n - 1; i >= 0; --i) {
      int k = static_cast<int>(rem % per_axis);
      rem /= per_axis;
      double frac = static_cast<double>(k + 1) / (per_axis + 1);
      p[i] = axes_[i].lo + frac * (axes_[i].hi - axes_[i].lo);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

ExprField::ExprField(int dim_, int rank_) : dim(dim_), rank(rank_) {
  size_t total = 1;
  for (int i = 0; i < rank_; ++i) total *= static_cast<size_t>(dim_);
  comp.assign(total, Expr());
}

// -- symbolic cache ---------------------------------------------------------------

struct ChartGeometry::Impl {
  MetricChart chart;
  int n;
  DiffCache dc;

  // lazily built symbolic fields
  std::optional<ExprField> g, ginv, gamma, riem, ric, schouten_f, weyl_f;
  std::optional<Expr> det, scalar, lapR, ric2, qe;
  std::optional<ExprField> gradR, hessR, nablaRic, gradQ, divW, div2W;

  // compiled evaluators
  std::optional<Program> bundle_prog;
  std::vector<double> bundle_bound;
  std::optional<Program> q_prog;
  std::vector<double> q_bound;

  explicit Impl(MetricChart c) : chart(std::move(c)), n(chart.dim()) {}

  Expr d(const Expr& e, int i) { return dc.d(e, i); }

  const ExprField& metric_field() {
    if (!g) {
      g.emplace(n, 2);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) (*g)(i, j) = chart.metric()[i][j];
    }
    return *g;
  }

  bool metric_is_diagonal() {
    const ExprField& m = metric_field();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && !is_zero_literal(m(i, j))) return false;
    return true;
  }

  // determinant of the submatrix taken from `rows` x `cols` (index lists)
  Expr det_sub(const std::vector<int>& rows, const std::vector<int>& cols,
               std::map<std::pair<size_t, uint32_t>, Expr>& memo, size_t rpos,
               uint32_t colmask) {
    if (rpos == rows.size()) return integer(1);
    auto key = std::make_pair(rpos, colmask);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const ExprField& m = metric_field();
    std::vector<Expr> terms;
    int sign = 1;
    for (size_t cpos = 0; cpos < cols.size(); ++cpos) {
      if (!(colmask & (1u << cpos))) continue;
      Expr entry = m(rows[rpos], cols[cpos]);
      if (!is_zero_literal(entry)) {
        Expr sub = det_sub(rows, cols, memo, rpos + 1, colmask & ~(1u << cpos));
        Expr term = product_of({entry, sub});
        terms.push_back(sign > 0 ? term : negate(term));
      }
      sign = -sign;
    }
    Expr r = sum_of(std::move(terms));
    memo.emplace(key, r);
    return r;
  }

  Expr det_of(const std::vector<int>& rows, const std::vector<int>& cols) {
    std::map<std::pair<size_t, uint32_t>, Expr> memo;
    return det_sub(rows, cols, memo, 0, (1u << cols.size()) - 1);
  }

  const Expr& det_metric() {
    if (!det) {
      if (metric_is_diagonal()) {
        std::vector<Expr> diag;
        for (int i = 0; i < n; ++i) diag.push_back(metric_field()(i, i));
        det = simplify(product_of(std::move(diag)));
      } else {
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        det = simplify(det_of(all, all));
      }
      if (is_zero_literal(*det))
        throw GeometryError("metric determinant is identically zero");
    }
    return *det;
  }

  const ExprField& inverse_metric() {
    if (!ginv) {
      ginv.emplace(n, 2);
      const ExprField& m = metric_field();
      if (metric_is_diagonal()) {
        for (int i = 0; i < n; ++i) (*ginv)(i, i) = simplify(quotient(integer(1), m(i, i)));
      } else {
        const Expr& dt = det_metric();
        for (int i = 0; i < n; ++i) {
          for (int j = i; j < n; ++j) {
            std::vector<int> rows, cols;
            for (int r = 0; r < n; ++r)
              if (r != i) rows.push_back(r);
            for (int c = 0; c < n; ++c)
              if (c != j) cols.push_back(c);
            Expr minor = det_of(rows, cols);
            Expr cof = ((i + j) % 2 == 0) ? minor : negate(minor);
            Expr entry = simplify(quotient(cof, dt));
            (*ginv)(i, j) = entry;
            (*ginv)(j, i) = entry;
          }
        }
      }
      (void)det_metric();
    }
    return *ginv;
  }

  const ExprField& christoffel() {
    if (!gamma) {
      gamma.emplace(n, 3);  // (k, i, j)
      const ExprField& m = metric_field();
      const ExprField& gi = inverse_metric();
      Expr half = rational_const(Rational(1, 2));
      for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
          for (int j = i; j < n; ++j) {
            std::vector<Expr> terms;
            for (int l = 0; l < n; ++l) {
              if (is_zero_literal(gi(k, l))) continue;
              Expr inner =
                  sum_of({d(m(j, l), i), d(m(i, l), j), negate(d(m(i, j), l))});
              terms.push_back(product_of({gi(k, l), inner}));
            }
            Expr e = simplify(product_of({half, sum_of(std::move(terms))}));
            (*gamma)(k, i, j) = e;
            (*gamma)(k, j, i) = e;
          }
        }
      }
    }
    return *gamma;
  }

  // R_ijkl, sign fixed so the unit round sphere has sectional curvature +1.
  Expr riemann_formula(int i, int j, int k, int l) {
    const ExprField& m = metric_field();
    const ExprField& ga = christoffel();
    Expr half = rational_const(Rational(1, 2));
    Expr dd = sum_of({d(d(m(j, k), i), l), d(d(m(i, l), j), k),
                      negate(d(d(m(j, l), i), k)), negate(d(d(m(i, k), j), l))});
    std::vector<Expr> quad;
    for (int mm = 0; mm < n; ++mm) {
      for (int p = 0; p < n; ++p) {
        if (is_zero_literal(m(mm, p))) continue;
        quad.push_back(product_of({m(mm, p), ga(mm, i, l), ga(p, j, k)}));
        quad.push_back(negate(product_of({m(mm, p), ga(mm, i, k), ga(p, j, l)})));
      }
    }
    return simplify(sum_of({product_of({half, dd}), sum_of(std::move(quad))}));
  }

  // Fill a rank-4 field with the Riemann symmetry group from canonical
  // representatives (i<j, k<l, (i,j) <= (k,l)); remaining slots share nodes.
  template <class F>
  void fill_riemann_symmetric(ExprField& out, F&& formula) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          for (int l = k + 1; l < n; ++l) {
            if (std::make_pair(i, j) > std::make_pair(k, l)) continue;
            Expr e = formula(i, j, k, l);
            Expr ne = negate(e);
            out(i, j, k, l) = e;
            out(j, i, k, l) = ne;
            out(i, j, l, k) = ne;
            out(j, i, l, k) = e;
            out(k, l, i, j) = e;
            out(l, k, i, j) = ne;
            out(k, l, j, i) = ne;
            out(l, k, j, i) = e;
          }
        }
      }
    }
  }

  const ExprField& riemann() {
    if (!riem) {
      riem.emplace(n, 4);
      fill_riemann_symmetric(*riem,
                             [&](int i, int j, int k, int l) {
                               return riemann_formula(i, j, k, l);
                             });
    }
    return *riem;
  }

  const ExprField& ricci() {
    if (!ric) {
      ric.emplace(n, 2);
      const ExprField& r4 = riemann();
      const ExprField& gi = inverse_metric();
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
          std::vector<Expr> terms;
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              if (is_zero_literal(gi(k, l)) || is_zero_literal(r4(i, k, j, l)))
                continue;
              terms.push_back(product_of({gi(k, l), r4(i, k, j, l)}));
            }
          Expr e = simplify(sum_of(std::move(terms)));
          (*ric)(i, j) = e;
          (*ric)(j, i) = e;
        }
      }
    }
    return *ric;
  }

  const Expr& scalar_curvature() {
    if (!scalar) {
      const ExprField& r2 = ricci();
      const ExprField& gi = inverse_metric();
      std::vector<Expr> terms;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (is_zero_literal(gi(i, j))) continue;
          terms.push_back(product_of({gi(i, j), r2(i, j)}));
        }
      scalar = simplify(sum_of(std::move(terms)));
    }
    return *scalar;
  }

  const ExprField& schouten() {
    if (!schouten_f) {
      if (n < 3) throw GeometryError("Schouten tensor requires n >= 3");
      schouten_f.emplace(n, 2);
      const ExprField& r2 = ricci();
      const ExprField& m = metric_field();
      const Expr& R = scalar_curvature();
      Expr coef = rational_const(Rational(1, 2LL * (n - 1)));
      Expr inv = rational_const(Rational(1, n - 2));
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          Expr e = simplify(product_of(
              {inv, sum_of({r2(i, j), negate(product_of({coef, R, m(i, j)}))})}));
          (*schouten_f)(i, j) = e;
          (*schouten_f)(j, i) = e;
        }
    }
    return *schouten_f;
  }

  const ExprField& weyl() {
    if (!weyl_f) {
      if (n < 3) throw GeometryError("Weyl tensor requires n >= 3");
      weyl_f.emplace(n, 4);
      if (n == 3) return *weyl_f;  // identically zero
      const ExprField& r4 = riemann();
      const ExprField& a = schouten();
      const ExprField& m = metric_field();
      fill_riemann_symmetric(*weyl_f, [&](int i, int j, int k, int l) {
        Expr kn = sum_of({product_of({a(i, k), m(j, l)}), product_of({a(j, l), m(i, k)}),
                          negate(product_of({a(i, l), m(j, k)})),
                          negate(product_of({a(j, k), m(i, l)}))});
        return simplify(sum_of({r4(i, j, k, l), negate(kn)}));
      });
    }
    return *weyl_f;
  }

  ExprField covariant_derivative(const ExprField& f) {
    const ExprField& ga = christoffel();
    ExprField out(n, f.rank + 1);
    size_t total = f.comp.size();
    std::vector<int> idx(f.rank, 0);
    for (size_t o = 0; o < total; ++o) {
      size_t rem = o;
      for (int s = f.rank - 1; s >= 0; --s) {
        idx[s] = static_cast<int>(rem % n);
        rem /= n;
      }
      for (int mcoord = 0; mcoord < n; ++mcoord) {
        std::vector<Expr> terms{d(f.comp[o], mcoord)};
        for (int s = 0; s < f.rank; ++s) {
          int orig = idx[s];
          for (int p = 0; p < n; ++p) {
            const Expr& gkm = ga(p, mcoord, orig);
            if (is_zero_literal(gkm)) continue;
            std::vector<int> sub = idx;
            sub[s] = p;
            const Expr& fv = f.at(sub);
            if (is_zero_literal(fv)) continue;
            terms.push_back(negate(product_of({gkm, fv})));
          }
        }
        out.comp[o * n + mcoord] = sum_of(std::move(terms));
      }
    }
    return out;
  }

  const ExprField& grad_scalar() {
    if (!gradR) {
      gradR.emplace(n, 1);
      const Expr& R = scalar_curvature();
      for (int i = 0; i < n; ++i) (*gradR)(i) = d(R, i);
    }
    return *gradR;
  }

  const ExprField& hess_scalar() {
    if (!hessR) {
      hessR.emplace(n, 2);
      const ExprField& ga = christoffel();
      const ExprField& gr = grad_scalar();
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          std::vector<Expr> terms{d(gr(i), j)};
          for (int k = 0; k < n; ++k) {
            if (is_zero_literal(ga(k, i, j)) || is_zero_literal(gr(k))) continue;
            terms.push_back(negate(product_of({ga(k, i, j), gr(k)})));
          }
          Expr e = sum_of(std::move(terms));
          (*hessR)(i, j) = e;
          (*hessR)(j, i) = e;
        }
    }
    return *hessR;
  }

  const Expr& lap_scalar() {
    if (!lapR) {
      const ExprField& gi = inverse_metric();
      const ExprField& h = hess_scalar();
      std::vector<Expr> terms;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (is_zero_literal(gi(i, j)) || is_zero_literal(h(i, j))) continue;
          terms.push_back(product_of({gi(i, j), h(i, j)}));
        }
      lapR = sum_of(std::move(terms));
    }
    return *lapR;
  }

  const ExprField& nabla_ricci() {
    if (!nablaRic) nablaRic = covariant_derivative(ricci());
    return *nablaRic;
  }

  const Expr& ricci_norm_sq_expr() {
    if (!ric2) {
      const ExprField& gi = inverse_metric();
      const ExprField& r2 = ricci();
      std::vector<Expr> terms;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              if (is_zero_literal(gi(i, k)) || is_zero_literal(gi(j, l)) ||
                  is_zero_literal(r2(i, j)) || is_zero_literal(r2(k, l)))
                continue;
              terms.push_back(product_of({gi(i, k), gi(j, l), r2(i, j), r2(k, l)}));
            }
      ric2 = sum_of(std::move(terms));
    }
    return *ric2;
  }

  const Expr& q_expr() {
    if (!qe) {
      if (n < 3) throw GeometryError("Q-curvature requires n >= 3");
      Expr a = rational_const(Rational(1, 2LL * (n - 1)));
      Expr b = rational_const(Rational(2, static_cast<long long>(n - 2) * (n - 2)));
      long long num = static_cast<long long>(n) * n * n - 4LL * n * n + 16LL * n - 16;
      long long den = 8LL * (n - 1) * (n - 1) * (n - 2) * (n - 2);
      Expr c = rational_const(Rational(num, den));
      qe = sum_of({negate(product_of({a, lap_scalar()})),
                   negate(product_of({b, ricci_norm_sq_expr()})),
                   product_of({c, int_pow(scalar_curvature(), 2)})});
    }
    return *qe;
  }

  const ExprField& grad_q() {
    if (!gradQ) {
      gradQ.emplace(n, 1);
      const Expr& q = q_expr();
      for (int i = 0; i < n; ++i) (*gradQ)(i) = d(q, i);
    }
    return *gradQ;
  }

  const ExprField& div_weyl() {
    if (!divW) {
      ExprField nablaW = covariant_derivative(weyl());
      divW.emplace(n, 3);
      const ExprField& gi = inverse_metric();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            std::vector<Expr> terms;
            for (int l = 0; l < n; ++l)
              for (int mm = 0; mm < n; ++mm) {
                if (is_zero_literal(gi(l, mm))) continue;
                const Expr& w5 = nablaW(i, j, k, l, mm);
                if (is_zero_literal(w5)) continue;
                terms.push_back(product_of({gi(l, mm), w5}));
              }
            (*divW)(i, j, k) = sum_of(std::move(terms));
          }
    }
    return *divW;
  }

  const ExprField& div2_weyl() {
    if (!div2W) {
      ExprField nablaV = covariant_derivative(div_weyl());
      div2W.emplace(n, 2);
      const ExprField& gi = inverse_metric();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          std::vector<Expr> terms;
          for (int k = 0; k < n; ++k)
            for (int a = 0; a < n; ++a) {
              if (is_zero_literal(gi(k, a))) continue;
              const Expr& v4 = nablaV(i, k, j, a);
              if (is_zero_literal(v4)) continue;
              terms.push_back(product_of({gi(k, a), v4}));
            }
          (*div2W)(i, j) = sum_of(std::move(terms));
        }
    }
    return *div2W;
  }

  Expr laplacian_expr(const Expr& f) {
    const ExprField& gi = inverse_metric();
    const ExprField& ga = christoffel();
    std::vector<Expr> terms;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (is_zero_literal(gi(i, j))) continue;
        std::vector<Expr> inner{d(d(f, i), j)};
        for (int k = 0; k < n; ++k) {
          if (is_zero_literal(ga(k, i, j))) continue;
          inner.push_back(negate(product_of({ga(k, i, j), d(f, k)})));
        }
        terms.push_back(product_of({gi(i, j), sum_of(std::move(inner))}));
      }
    return sum_of(std::move(terms));
  }

  // rational Q-constants as doubles (shared with the q assembly recipe)
  void q_constants(double* a, double* b, double* c) const {
    *a = Rational(1, 2LL * (n - 1)).to_double();
    *b = Rational(2, static_cast<long long>(n - 2) * (n - 2)).to_double();
    long long num = static_cast<long long>(n) * n * n - 4LL * n * n + 16LL * n - 16;
    long long den = 8LL * (n - 1) * (n - 1) * (n - 2) * (n - 2);
    *c = Rational(num, den).to_double();
  }
};

// -- ChartGeometry public API -----------------------------------------------------

ChartGeometry::ChartGeometry(MetricChart chart)
    : impl_(std::make_unique<Impl>(std::move(chart))) {}
ChartGeometry::~ChartGeometry() = default;
ChartGeometry::ChartGeometry(ChartGeometry&&) noexcept = default;
ChartGeometry& ChartGeometry::operator=(ChartGeometry&&) noexcept = default;

const MetricChart& ChartGeometry::chart() const { return impl_->chart; }
int ChartGeometry::dim() const { return impl_->n; }

const ExprField& ChartGeometry::metric_field() { return impl_->metric_field(); }
const ExprField& ChartGeometry::inverse_metric() { return impl_->inverse_metric(); }
const Expr& ChartGeometry::det_metric() { return impl_->det_metric(); }
const ExprField& ChartGeometry::christoffel() { return impl_->christoffel(); }
const ExprField& ChartGeometry::riemann() { return impl_->riemann(); }
const ExprField& ChartGeometry::ricci() { return impl_->ricci(); }
const Expr& ChartGeometry::scalar_curvature() { return impl_->scalar_curvature(); }
const ExprField& ChartGeometry::schouten() { return impl_->schouten(); }
const ExprField& ChartGeometry::weyl() { return impl_->weyl(); }
const ExprField& ChartGeometry::grad_scalar() { return impl_->grad_scalar(); }
const ExprField& ChartGeometry::hess_scalar() { return impl_->hess_scalar(); }
const Expr& ChartGeometry::lap_scalar() { return impl_->lap_scalar(); }
const ExprField& ChartGeometry::nabla_ricci() { return impl_->nabla_ricci(); }
const Expr& ChartGeometry::ricci_norm_sq_expr() { return impl_->ricci_norm_sq_expr(); }
const Expr& ChartGeometry::q_expr() { return impl_->q_expr(); }
const ExprField& ChartGeometry::grad_q() { return impl_->grad_q(); }
const ExprField& ChartGeometry::div_weyl() { return impl_->div_weyl(); }
const ExprField& ChartGeometry::div2_weyl() { return impl_->div2_weyl(); }

ExprField ChartGeometry::covariant_derivative(const ExprField& f) {
  return impl_->covariant_derivative(f);
}

Expr ChartGeometry::laplacian_expr(const Expr& f) { return impl_->laplacian_expr(f); }

double ChartGeometry::laplacian_scalar(const Expr& f, std::span<const double> point) {
  if (!impl_->chart.inside(point))
    throw GeometryError("point is outside the chart domain");
  return eval(impl_->laplacian_expr(f), point, &impl_->chart.params());
}

Program ChartGeometry::compile(const std::vector<Expr>& roots) const {
  return Program::compile(roots);
}

std::vector<double> ChartGeometry::bound_params(const Program& p) const {
  return p.bind(impl_->chart.params());
}

namespace {

TensorValue make_tensor(int n, int rank, const double* vals) {
  TensorValue t(n, std::vector<Variance>(rank, Variance::Co));
  for (size_t i = 0; i < t.size(); ++i) t.flat(i) = vals[i];
  return t;
}

}  // namespace

CurvatureBundle ChartGeometry::bundle(std::span<const double> point) {
  Impl& im = *impl_;
  int n = im.n;
  if (n < 3) throw GeometryError("curvature bundle requires n >= 3");
  if (!im.chart.inside(point))
    throw GeometryError("point is outside the chart domain");

  if (!im.bundle_prog) {
    std::vector<Expr> roots;
    auto push_field = [&roots](const ExprField& f) {
      roots.insert(roots.end(), f.comp.begin(), f.comp.end());
    };
    push_field(im.metric_field());     // n^2
    push_field(im.inverse_metric());   // n^2
    push_field(im.christoffel());      // n^3
    push_field(im.riemann());          // n^4
    push_field(im.ricci());            // n^2
    roots.push_back(im.scalar_curvature());
    push_field(im.schouten());         // n^2
    push_field(im.weyl());             // n^4
    push_field(im.div_weyl());         // n^3
    push_field(im.div2_weyl());        // n^2
    push_field(im.grad_scalar());      // n
    push_field(im.grad_q());           // n
    roots.push_back(im.lap_scalar());
    push_field(im.hess_scalar());      // n^2
    push_field(im.nabla_ricci());      // n^3
    im.bundle_prog = Program::compile(roots);
    im.bundle_bound = im.bundle_prog->bind(im.chart.params());
  }

  size_t n1 = n, n2 = static_cast<size_t>(n) * n, n3 = n2 * n, n4 = n3 * n;
  std::vector<double> scratch, out(im.bundle_prog->num_outputs());
  im.bundle_prog->eval(point, im.bundle_bound, scratch, out);

  CurvatureBundle b;
  b.point.assign(point.begin(), point.end());
  const double* p = out.data();
  b.metric = make_tensor(n, 2, p); p += n2;
  b.inverse_metric = make_tensor(n, 2, p); p += n2;
  b.gamma = TensorValue(n, {Variance::Contra, Variance::Co, Variance::Co});
  for (size_t i = 0; i < n3; ++i) b.gamma.flat(i) = p[i];
  p += n3;
  b.riemann = make_tensor(n, 4, p); p += n4;
  b.ricci = make_tensor(n, 2, p); p += n2;
  b.scalar = *p; p += 1;
  b.schouten = make_tensor(n, 2, p); p += n2;
  b.weyl = make_tensor(n, 4, p); p += n4;
  b.div_weyl = make_tensor(n, 3, p); p += n3;
  TensorValue d2w = make_tensor(n, 2, p); p += n2;
  b.grad_R = make_tensor(n, 1, p); p += n1;
  b.grad_Q = make_tensor(n, 1, p); p += n1;
  b.lap_R = *p; p += 1;
  b.hess_R = make_tensor(n, 2, p); p += n2;
  b.nabla_ricci = make_tensor(n, 3, p); p += n3;

  // traceless Ricci
  b.traceless_ricci = b.ricci;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      b.traceless_ricci(i, j) -= (b.scalar / n) * b.metric(i, j);

  // |Ric|^2 and Q, assembled from bundle floats
  b.ric_norm_sq = tensor_norm_sq(b.ricci, b.metric, b.inverse_metric);
  double ca, cb, cc;
  im.q_constants(&ca, &cb, &cc);
  b.q = -(ca * b.lap_R) - (cb * b.ric_norm_sq) + (cc * (b.scalar * b.scalar));

  if (n == 3) {
    b.bach_absent_reason = "Bach tensor undefined for n = 3 (assembly divides by n - 3)";
  } else {
    b.div2_weyl = d2w;
    TensorValue bach(n, std::vector<Variance>(2, Variance::Co));
    TensorValue ric_up = raise_slot(raise_slot(b.ricci, 0, b.inverse_metric), 1,
                                    b.inverse_metric);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) acc += ric_up(k, l) * b.weyl(i, k, j, l);
        bach(i, j) = d2w(i, j) / (n - 3) + acc / (n - 2);
      }
    b.bach = std::move(bach);
  }
  return b;
}

double ChartGeometry::q_curvature(std::span<const double> point) {
  Impl& im = *impl_;
  int n = im.n;
  if (n < 3) throw GeometryError("Q-curvature requires n >= 3");
  if (!im.chart.inside(point))
    throw GeometryError("point is outside the chart domain");

  if (!im.q_prog) {
    std::vector<Expr> roots;
    auto push_field = [&roots](const ExprField& f) {
      roots.insert(roots.end(), f.comp.begin(), f.comp.end());
    };
    push_field(im.metric_field());
    push_field(im.inverse_metric());
    push_field(im.ricci());
    roots.push_back(im.lap_scalar());
    roots.push_back(im.scalar_curvature());
    im.q_prog = Program::compile(roots);
    im.q_bound = im.q_prog->bind(im.chart.params());
  }

  size_t n2 = static_cast<size_t>(n) * n;
  std::vector<double> scratch, out(im.q_prog->num_outputs());
  im.q_prog->eval(point, im.q_bound, scratch, out);
  const double* p = out.data();
  TensorValue g = make_tensor(n, 2, p); p += n2;
  TensorValue gi = make_tensor(n, 2, p); p += n2;
  TensorValue rc = make_tensor(n, 2, p); p += n2;
  double lap = *p; p += 1;
  double R = *p;

  double ric2 = tensor_norm_sq(rc, g, gi);
  double ca, cb, cc;
  im.q_constants(&ca, &cb, &cc);
  return -(ca * lap) - (cb * ric2) + (cc * (R * R));
}

}  // namespace qcurv
