#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sfd/core.hpp"

namespace sfd {

struct MarsOptions {
  std::vector<int> max_terms_grid{21, 41, 61};
  std::vector<int> max_degree_grid{1, 2, 3};
  double knot_penalty = 3.0;
  double min_rss_improvement = 1e-4;
};

/// max(0, x_var - knot) for sign +1, max(0, knot - x_var) for sign -1.
struct Hinge {
  int var = 0;
  double knot = 0.0;
  int sign = 1;

  double eval(const double* x) const {
    const double t = sign > 0 ? x[var] - knot : knot - x[var];
    return t > 0.0 ? t : 0.0;
  }
  bool operator==(const Hinge&) const = default;
};

/// Product of hinges; the empty product is the intercept.
struct MarsBasis {
  std::vector<Hinge> hinges;

  double eval(const double* x) const {
    double v = 1.0;
    for (const auto& h : hinges) {
      v *= h.eval(x);
      if (v == 0.0) return 0.0;
    }
    return v;
  }
  int degree() const { return static_cast<int>(hinges.size()); }
  bool uses(int var) const {
    return std::any_of(hinges.begin(), hinges.end(), [var](const Hinge& h) { return h.var == var; });
  }
};

struct MarsModel {
  std::vector<MarsBasis> basis;
  Vector coefficients;
  int max_terms = 0;
  int max_degree = 0;
  double gcv = 0.0;
  double gcv_unpruned = 0.0;
  double gcv_r2 = 0.0;

  double predict_one(const double* x) const {
    double s = 0.0;
    for (std::size_t m = 0; m < basis.size(); ++m) s += coefficients[static_cast<Eigen::Index>(m)] * basis[m].eval(x);
    return s;
  }

  Vector predict(const PointMatrix& q) const {
    Vector out(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) out[i] = predict_one(q.row(i).data());
    return out;
  }
};

namespace detail {

inline double mars_gcv(double rss, double n, int terms, double penalty) {
  const double c = terms + penalty * (terms - 1) / 2.0;
  if (c >= n) return std::numeric_limits<double>::infinity();
  const double denom = 1.0 - c / n;
  return rss / n / (denom * denom);
}

struct ForwardPass {
  std::vector<MarsBasis> basis;  // in order of addition, intercept first
  Eigen::MatrixXd columns;       // n x basis.size()
};

// Greedy forward pass. Candidate scoring works on an orthonormal basis Q of
// the current columns; for a parent/variable pair every knot is scored in one
// sorted sweep from running sums, so a step costs O(parents * d * n * M).
inline ForwardPass mars_forward(const PointMatrix& x, const Vector& y, int max_terms, int max_degree,
                                double min_improvement) {
  const auto n = x.rows();
  const int d = static_cast<int>(x.cols());
  ForwardPass fp;
  fp.basis.push_back(MarsBasis{});
  std::vector<Vector> cols{Vector::Ones(n)};
  Eigen::MatrixXd q(n, std::max(1, max_terms));
  q.col(0) = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  int qcols = 1;
  Vector r = y - q.col(0) * q.col(0).dot(y);
  double rss = r.squaredNorm();
  const double tss = rss;

  std::vector<std::vector<int>> order(static_cast<std::size_t>(d));
  for (int v = 0; v < d; ++v) {
    auto& o = order[static_cast<std::size_t>(v)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, v) < x(b, v); });
  }

  auto add_column = [&](const Vector& c) {
    Vector v = c;
    for (int pass = 0; pass < 2; ++pass) v -= q.leftCols(qcols) * (q.leftCols(qcols).transpose() * v);
    const double nv = v.norm();
    if (!(nv > 1e-6 * c.norm()) || qcols >= q.cols()) return false;
    q.col(qcols) = v / nv;
    r -= q.col(qcols) * q.col(qcols).dot(r);
    ++qcols;
    return true;
  };

  while (static_cast<int>(fp.basis.size()) + 1 <= max_terms && tss > 0.0) {
    const int mq = qcols;
    double best_gain = 0.0;
    int best_parent = -1, best_var = -1;
    double best_knot = 0.0;
    bool best_pos = false, best_neg = false;
    Vector a0(mq), a1(mq), pa0(mq), pa1(mq);

    for (std::size_t pidx = 0; pidx < fp.basis.size(); ++pidx) {
      const auto& parent = fp.basis[pidx];
      if (parent.degree() >= max_degree) continue;
      const Vector& pc = cols[pidx];
      for (int v = 0; v < d; ++v) {
        if (parent.uses(v)) continue;
        const auto& o = order[static_cast<std::size_t>(v)];
        // totals over the parent's support
        a0.setZero();
        a1.setZero();
        double s0 = 0, s1 = 0, s2 = 0, r0 = 0, r1 = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double p = pc[i];
          if (p == 0.0) continue;
          const double xi = x(i, v);
          a0 += q.row(i).head(mq).transpose() * p;
          a1 += q.row(i).head(mq).transpose() * (p * xi);
          s0 += p * p;
          s1 += p * p * xi;
          s2 += p * p * xi * xi;
          r0 += p * r[i];
          r1 += p * r[i] * xi;
        }
        if (s0 == 0.0) continue;
        // prefix sums over x <= knot
        pa0.setZero();
        pa1.setZero();
        double ps0 = 0, ps1 = 0, ps2 = 0, pr0 = 0, pr1 = 0;
        std::size_t t = 0;
        while (t < o.size()) {
          const double c = x(o[t], v);
          while (t < o.size() && x(o[t], v) == c) {
            const int i = o[t];
            const double p = pc[i];
            if (p != 0.0) {
              pa0 += q.row(i).head(mq).transpose() * p;
              pa1 += q.row(i).head(mq).transpose() * (p * c);
              ps0 += p * p;
              ps1 += p * p * c;
              ps2 += p * p * c * c;
              pr0 += p * r[i];
              pr1 += p * r[i] * c;
            }
            ++t;
          }
          if (ps0 == 0.0) continue;  // knot below the parent's support
          // b+ = p (x - c)+ over x > c ; b- = p (c - x)+ over x < c
          const double bb_pos = (s2 - ps2) - 2 * c * (s1 - ps1) + c * c * (s0 - ps0);
          const double bb_neg = c * c * ps0 - 2 * c * ps1 + ps2;
          if (bb_pos <= 0.0 && bb_neg <= 0.0) continue;
          const Vector qb_pos = (a1 - pa1) - c * (a0 - pa0);
          const Vector qb_neg = c * pa0 - pa1;
          const double g11 = bb_pos - qb_pos.squaredNorm();
          const double g22 = bb_neg - qb_neg.squaredNorm();
          const double g12 = -qb_pos.dot(qb_neg);
          const double br_pos = (r1 - pr1) - c * (r0 - pr0);
          const double br_neg = c * pr0 - pr1;
          const bool ok_pos = bb_pos > 0.0 && g11 > 1e-10 * bb_pos;
          const bool ok_neg = bb_neg > 0.0 && g22 > 1e-10 * bb_neg;
          double gain = 0.0;
          bool use_pos = ok_pos, use_neg = ok_neg;
          if (ok_pos && ok_neg && static_cast<int>(fp.basis.size()) + 2 <= max_terms) {
            const double det = g11 * g22 - g12 * g12;
            if (det > 1e-12 * g11 * g22) {
              gain = (g22 * br_pos * br_pos - 2 * g12 * br_pos * br_neg + g11 * br_neg * br_neg) / det;
            } else {
              use_neg = false;
            }
          } else if (ok_pos && ok_neg) {
            // room for only one more column
            if (br_pos * br_pos / g11 >= br_neg * br_neg / g22) use_neg = false;
            else use_pos = false;
          }
          if (gain == 0.0) {
            if (use_pos && !use_neg) gain = br_pos * br_pos / g11;
            else if (use_neg && !use_pos) gain = br_neg * br_neg / g22;
          }
          if (gain > best_gain * (1.0 + 1e-12)) {
            best_gain = gain;
            best_parent = static_cast<int>(pidx);
            best_var = v;
            best_knot = c;
            best_pos = use_pos;
            best_neg = use_neg;
          }
        }
      }
    }
    if (best_parent < 0 || best_gain < min_improvement * rss) break;
    const MarsBasis parent = fp.basis[static_cast<std::size_t>(best_parent)];
    const Vector pc = cols[static_cast<std::size_t>(best_parent)];
    bool added = false;
    for (int sign : {1, -1}) {
      if ((sign > 0 && !best_pos) || (sign < 0 && !best_neg)) continue;
      MarsBasis b = parent;
      b.hinges.push_back(Hinge{best_var, best_knot, sign});
      Vector c(n);
      for (Eigen::Index i = 0; i < n; ++i) c[i] = pc[i] == 0.0 ? 0.0 : pc[i] * b.hinges.back().eval(x.row(i).data());
      if (add_column(c)) {
        fp.basis.push_back(std::move(b));
        cols.push_back(std::move(c));
        added = true;
      }
    }
    if (!added) break;
    const double new_rss = r.squaredNorm();
    if (new_rss <= 1e-24 * tss) break;
    rss = new_rss;
  }
  fp.columns.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t m = 0; m < cols.size(); ++m) fp.columns.col(static_cast<Eigen::Index>(m)) = cols[m];
  return fp;
}

struct PruneResult {
  std::vector<int> keep;  // indices into the forward basis, intercept (0) always kept
  double gcv = 0.0;
  double gcv_full = 0.0;
};

// Backward elimination on the first `count` forward terms. Removing term j
// raises RSS by beta_j^2 / (G^-1)_jj, so each step is O(M^2).
inline PruneResult mars_prune(const Eigen::MatrixXd& columns, const Vector& y, int count, double penalty) {
  const auto n = columns.rows();
  const double nd = static_cast<double>(n);
  std::vector<int> active(static_cast<std::size_t>(count));
  std::iota(active.begin(), active.end(), 0);
  Vector scale(count);
  Eigen::MatrixXd b(n, count);
  for (int m = 0; m < count; ++m) {
    scale[m] = columns.col(m).norm();
    b.col(m) = columns.col(m) / scale[m];
  }
  const Eigen::MatrixXd gram = b.transpose() * b;
  const Vector h = b.transpose() * y;
  const double yy = y.squaredNorm();
  Eigen::MatrixXd ginv = gram.ldlt().solve(Eigen::MatrixXd::Identity(count, count));
  Vector beta = ginv * h;
  // exact residual for the full set, then track increments
  double rss = (y - b * beta).squaredNorm();
  (void)yy;

  PruneResult res;
  res.gcv_full = mars_gcv(rss, nd, count, penalty);
  res.gcv = res.gcv_full;
  res.keep = active;

  // positions in ginv/beta correspond to `active`
  while (active.size() > 1) {
    int best = -1;
    double best_inc = std::numeric_limits<double>::infinity();
    for (std::size_t pos = 1; pos < active.size(); ++pos) {
      const auto p = static_cast<Eigen::Index>(pos);
      const double inc = beta[p] * beta[p] / ginv(p, p);
      if (inc < best_inc) {
        best_inc = inc;
        best = static_cast<int>(pos);
      }
    }
    const auto j = static_cast<Eigen::Index>(best);
    const auto k = static_cast<Eigen::Index>(active.size());
    const double gjj = ginv(j, j);
    const Vector gj = ginv.col(j);
    Vector beta_new(k - 1);
    Eigen::MatrixXd ginv_new(k - 1, k - 1);
    for (Eigen::Index a = 0, ra = 0; a < k; ++a) {
      if (a == j) continue;
      beta_new[ra] = beta[a] - gj[a] * beta[j] / gjj;
      for (Eigen::Index c = 0, rc = 0; c < k; ++c) {
        if (c == j) continue;
        ginv_new(ra, rc) = ginv(a, c) - gj[a] * gj[c] / gjj;
        ++rc;
      }
      ++ra;
    }
    beta = std::move(beta_new);
    ginv = std::move(ginv_new);
    rss += std::max(0.0, best_inc);
    active.erase(active.begin() + best);
    const double g = mars_gcv(rss, nd, static_cast<int>(active.size()), penalty);
    if (g < res.gcv) {
      res.gcv = g;
      res.keep = active;
    }
  }
  return res;
}

}  // namespace detail

/// MARS with a (max_terms, max_degree) grid; the model with the highest
/// GCV-R^2 wins (ties: first grid point).
inline MarsModel fit_mars(const Dataset& data, const MarsOptions& opt = {}) {
  const auto& x = data.x();
  const auto n = x.rows();
  if (n < 10) throw ShapeError("mars needs at least 10 points");
  if (opt.max_terms_grid.empty() || opt.max_degree_grid.empty()) throw ShapeError("mars grids must be nonempty");
  const Vector& y = data.responses;
  const double nd = static_cast<double>(n);
  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  const double gcv_null = detail::mars_gcv(tss, nd, 1, opt.knot_penalty);
  const int terms_cap = *std::max_element(opt.max_terms_grid.begin(), opt.max_terms_grid.end());

  MarsModel best;
  best.basis = {MarsBasis{}};
  best.coefficients = Vector::Constant(1, ybar);
  best.gcv = gcv_null;
  best.gcv_unpruned = gcv_null;
  best.gcv_r2 = 0.0;
  best.max_terms = opt.max_terms_grid.front();
  best.max_degree = opt.max_degree_grid.front();
  bool have = false;
  if (!(tss > 0.0)) return best;

  for (int degree : opt.max_degree_grid) {
    const auto fp = detail::mars_forward(x, y, terms_cap, degree, opt.min_rss_improvement);
    for (int max_terms : opt.max_terms_grid) {
      const int count = std::min<int>(max_terms, static_cast<int>(fp.basis.size()));
      const auto pr = detail::mars_prune(fp.columns, y, count, opt.knot_penalty);
      const double r2 = 1.0 - pr.gcv / gcv_null;
      if (!have || r2 > best.gcv_r2 + 1e-12) {
        have = true;
        best.basis.clear();
        Eigen::MatrixXd b(n, static_cast<Eigen::Index>(pr.keep.size()));
        for (std::size_t m = 0; m < pr.keep.size(); ++m) {
          best.basis.push_back(fp.basis[static_cast<std::size_t>(pr.keep[m])]);
          b.col(static_cast<Eigen::Index>(m)) = fp.columns.col(pr.keep[m]);
        }
        best.coefficients = b.colPivHouseholderQr().solve(y);
        best.gcv = pr.gcv;
        best.gcv_unpruned = pr.gcv_full;
        best.gcv_r2 = r2;
        best.max_terms = max_terms;
        best.max_degree = degree;
      }
    }
  }
  return best;
}

}  // namespace sfd
