#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sfd/core.hpp"

namespace sfd {

/// The (up to) d+1 vertices of the Delaunay simplex containing a query, or
/// its hull projection when the query is exterior.
struct SimplexResult {
  std::vector<int> vertex_indices;
  std::vector<double> weights;
  bool extrapolated = false;
  double projection_distance = 0.0;
  Vector projected_query;
};

inline constexpr double kExtrapolationTolerance = 1e-10;

namespace detail {

struct LpSolution {
  std::vector<int> basis;  // real column indices (into the caller's column list) with nonzero weight
  std::vector<double> weights;
};

/// Revised simplex for the lifted Delaunay LP over the columns `cols`:
///   min sum_j w_j |p_j - q|^2  s.t.  sum_j w_j (p_j - q) = 0, sum_j w_j = 1, w >= 0.
/// Returns nullopt when phase I leaves a positive residual (q outside the hull
/// of the columns). Ties are broken toward the lowest column index.
class LiftedLp {
 public:
  LiftedLp(const PointMatrix& points, const std::vector<int>& cols, const Vector& q)
      : p_(points), cols_(cols), q_(q), d_(static_cast<int>(points.cols())), m_(d_ + 1),
        n_(static_cast<int>(cols.size())) {
    cost_.resize(n_);
    for (int j = 0; j < n_; ++j) cost_[j] = (p_.row(cols_[static_cast<std::size_t>(j)]).transpose() - q_).squaredNorm();
  }

  std::optional<LpSolution> solve(double feasibility_tol) {
    basis_.resize(static_cast<std::size_t>(m_));
    for (int r = 0; r < m_; ++r) basis_[static_cast<std::size_t>(r)] = n_ + r;
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    rhs_ = Vector::Zero(m_);
    rhs_[d_] = 1.0;
    xb_ = rhs_;
    in_basis_.assign(static_cast<std::size_t>(n_ + m_), false);
    for (int r = 0; r < m_; ++r) in_basis_[static_cast<std::size_t>(n_ + r)] = true;

    iterate(true);
    double infeas = 0.0;
    for (int r = 0; r < m_; ++r)
      if (basis_[static_cast<std::size_t>(r)] >= n_) infeas += std::max(0.0, xb_[r]);
    if (infeas > feasibility_tol) return std::nullopt;
    drive_out_artificials();
    iterate(false);

    LpSolution sol;
    double total = 0.0;
    std::vector<std::pair<int, double>> entries;
    for (int r = 0; r < m_; ++r) {
      const int j = basis_[static_cast<std::size_t>(r)];
      if (j >= n_) continue;
      const double w = std::max(0.0, xb_[r]);
      entries.emplace_back(j, w);
      total += w;
    }
    if (!(total > 0.0)) throw NumericalError("Delaunay LP produced no positive weights");
    std::sort(entries.begin(), entries.end());
    for (auto [j, w] : entries) {
      sol.basis.push_back(j);
      sol.weights.push_back(w / total);
    }
    return sol;
  }

 private:
  Vector column(int j) const {
    Vector a(m_);
    if (j >= n_) {
      a.setZero();
      a[j - n_] = 1.0;
      return a;
    }
    a.head(d_) = p_.row(cols_[static_cast<std::size_t>(j)]).transpose() - q_;
    a[d_] = 1.0;
    return a;
  }

  double phase_cost(int j, bool phase1) const {
    if (j >= n_) return phase1 ? 1.0 : 0.0;
    return phase1 ? 0.0 : cost_[j];
  }

  void refactor() {
    Eigen::MatrixXd b(m_, m_);
    for (int r = 0; r < m_; ++r) b.col(r) = column(basis_[static_cast<std::size_t>(r)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (!lu.isInvertible()) return;  // keep the product-form inverse
    binv_ = lu.inverse();
    xb_ = binv_ * rhs_;
  }

  void pivot(int r, int j, const Vector& u) {
    const double piv = u[r];
    binv_.row(r) /= piv;
    xb_[r] /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == r || u[i] == 0.0) continue;
      binv_.row(i) -= u[i] * binv_.row(r);
      xb_[i] -= u[i] * xb_[r];
    }
    in_basis_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = false;
    basis_[static_cast<std::size_t>(r)] = j;
    in_basis_[static_cast<std::size_t>(j)] = true;
  }

  void iterate(bool phase1) {
    const long cap = 50L * (n_ + m_) + 1000;
    int degenerate_run = 0;
    Vector cb(m_);
    for (long it = 0; it < cap; ++it) {
      if (it > 0 && it % 64 == 0) refactor();
      for (int r = 0; r < m_; ++r) cb[r] = phase_cost(basis_[static_cast<std::size_t>(r)], phase1);
      const Eigen::RowVectorXd y = cb.transpose() * binv_;
      const double ybias = y[d_];
      const bool bland = degenerate_run > 40;
      int enter = -1;
      double best = -1e-12;
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double* pj = p_.row(cols_[static_cast<std::size_t>(j)]).data();
        double ya = ybias;
        for (int k = 0; k < d_; ++k) ya += y[k] * (pj[k] - q_[k]);
        const double rc = phase_cost(j, phase1) - ya;
        if (rc < best) {
          best = rc;
          enter = j;
          if (bland) break;
        }
      }
      if (enter < 0) return;
      const Vector u = binv_ * column(enter);
      int leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        if (u[r] <= 1e-11) continue;
        const double t = std::max(0.0, xb_[r]) / u[r];
        if (t < theta - 1e-15 ||
            (leave >= 0 && std::abs(t - theta) <= 1e-15 &&
             basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)])) {
          theta = t;
          leave = r;
        }
      }
      if (leave < 0) throw NumericalError("Delaunay LP is unbounded (numerical breakdown)");
      degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;
      pivot(leave, enter, u);
    }
    throw NumericalError("Delaunay LP iteration cap exceeded");
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < n_) continue;
      int best_j = -1;
      double best_abs = 1e-9;
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double v = std::abs(binv_.row(r).dot(column(j)));
        if (v > best_abs) {
          best_abs = v;
          best_j = j;
        }
      }
      if (best_j < 0) continue;  // redundant row (lower-dimensional face)
      pivot(r, best_j, binv_ * column(best_j));
    }
  }

  const PointMatrix& p_;
  const std::vector<int>& cols_;
  Vector q_;
  int d_, m_, n_;
  Vector cost_;
  std::vector<int> basis_;
  std::vector<bool> in_basis_;
  Eigen::MatrixXd binv_;
  Vector rhs_, xb_;
};

struct HullProjection {
  Vector point;
  double distance = 0.0;
  std::vector<int> support;
  std::vector<double> weights;
};

/// Wolfe's nearest-point algorithm: closest point of conv(points) to q.
inline HullProjection wolfe_nearest_point(const PointMatrix& points, const Vector& q) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  if (n < 1) throw ShapeError("projection needs at least one point");
  PointMatrix z = points.rowwise() - q.transpose();
  Vector norms(n);
  for (int i = 0; i < n; ++i) norms[i] = z.row(i).squaredNorm();
  int first = 0;
  norms.minCoeff(&first);
  std::vector<int> s{first};
  std::vector<double> lambda{1.0};
  Vector x = z.row(first).transpose();
  const double zmax = norms.maxCoeff();
  const double eps1 = 1e-14 * std::max(1.0, zmax);
  const double eps2 = 1e-12;

  auto affine_minimizer = [&](const std::vector<int>& set) {
    const int k = static_cast<int>(set.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) m(a, b) = z.row(set[static_cast<std::size_t>(a)]).dot(z.row(set[static_cast<std::size_t>(b)]));
      m(a, k) = 1.0;
      m(k, a) = 1.0;
    }
    Vector rhs = Vector::Zero(k + 1);
    rhs[k] = 1.0;
    Vector sol = m.completeOrthogonalDecomposition().solve(rhs);
    return Vector(sol.head(k));
  };

  const int cap = 100 * (n + d) + 1000;
  for (int major = 0; major < cap; ++major) {
    int j = 0;
    (z * x).minCoeff(&j);
    const double gap = x.squaredNorm() - z.row(j).dot(x);
    if (gap <= eps1 || std::find(s.begin(), s.end(), j) != s.end()) break;
    s.push_back(j);
    lambda.push_back(0.0);
    for (int minor = 0; minor < cap; ++minor) {
      const Vector mu = affine_minimizer(s);
      bool interior = true;
      for (Eigen::Index i = 0; i < mu.size(); ++i) interior = interior && mu[i] > eps2;
      if (interior) {
        for (std::size_t i = 0; i < s.size(); ++i) lambda[i] = mu[static_cast<Eigen::Index>(i)];
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double mi = mu[static_cast<Eigen::Index>(i)];
        if (mi <= eps2 && lambda[i] - mi > 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - mi));
      }
      std::vector<int> ns;
      std::vector<double> nl;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = lambda[i] + theta * (mu[static_cast<Eigen::Index>(i)] - lambda[i]);
        if (v > eps2) {
          ns.push_back(s[i]);
          nl.push_back(v);
        }
      }
      if (ns.empty()) {
        ns.push_back(s.back());
        nl.push_back(1.0);
      }
      const double tot = std::accumulate(nl.begin(), nl.end(), 0.0);
      for (auto& v : nl) v /= tot;
      s = std::move(ns);
      lambda = std::move(nl);
      if (minor + 1 == cap) throw NumericalError("hull projection minor-cycle cap exceeded");
    }
    x.setZero();
    for (std::size_t i = 0; i < s.size(); ++i) x += lambda[i] * z.row(s[i]).transpose();
    if (major + 1 == cap) throw NumericalError("hull projection iteration cap exceeded");
  }
  HullProjection out;
  out.point = x + q;
  out.distance = x.norm();
  out.support = s;
  out.weights = lambda;
  return out;
}

}  // namespace detail

/// Delaunay simplex location over a fixed point set, without building the
/// triangulation: the containing simplex is the optimal basis of the lifted LP.
class DelaunayLocator {
 public:
  explicit DelaunayLocator(PointMatrix points) : points_(std::move(points)) {
    const auto n = points_.rows();
    const auto d = points_.cols();
    if (d < 1) throw DegeneracyError("points have no coordinates");
    if (n < d + 1) throw DegeneracyError("need at least d+1 points to span the space");
    const Vector mean = points_.colwise().mean().transpose();
    const Eigen::MatrixXd centered = points_.rowwise() - mean.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered);
    const Vector ev = es.eigenvalues();
    if (!(ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff())))
      throw DegeneracyError("points do not affinely span R^" + std::to_string(d));
    all_.resize(static_cast<std::size_t>(n));
    std::iota(all_.begin(), all_.end(), 0);
  }

  const PointMatrix& points() const { return points_; }
  int dim() const { return static_cast<int>(points_.cols()); }

  SimplexResult locate(const Vector& query) const {
    if (query.size() != points_.cols()) throw ShapeError("query dimension mismatch");
    if (auto sol = detail::LiftedLp(points_, all_, query).solve(kInteriorTolerance)) {
      SimplexResult res;
      for (std::size_t i = 0; i < sol->basis.size(); ++i) {
        res.vertex_indices.push_back(all_[static_cast<std::size_t>(sol->basis[i])]);
        res.weights.push_back(sol->weights[i]);
      }
      res.projected_query = query;
      return res;
    }
    auto proj = detail::wolfe_nearest_point(points_, query);
    SimplexResult res = locate_on_face(query, proj);
    res.projection_distance = proj.distance;
    res.extrapolated = proj.distance > kExtrapolationTolerance;
    res.projected_query = proj.point;
    return res;
  }

  /// Nearest hull point and its distance; interior queries map to themselves.
  std::pair<Vector, double> project(const Vector& query) const {
    if (query.size() != points_.cols()) throw ShapeError("query dimension mismatch");
    if (detail::LiftedLp(points_, all_, query).solve(kInteriorTolerance)) return {query, 0.0};
    auto proj = detail::wolfe_nearest_point(points_, query);
    return {proj.point, proj.distance};
  }

 private:
  static constexpr double kInteriorTolerance = 1e-10;

  // Re-run the lifted LP at the projected point over every vertex of the
  // supporting face, so the returned simplex is Delaunay within that face.
  SimplexResult locate_on_face(const Vector& query, const detail::HullProjection& proj) const {
    SimplexResult res;
    const Vector normal = (query - proj.point) / std::max(proj.distance, 1e-300);
    std::vector<int> face;
    const double level = normal.dot(proj.point);
    for (Eigen::Index i = 0; i < points_.rows(); ++i)
      if (normal.dot(points_.row(i).transpose()) >= level - 1e-9) face.push_back(static_cast<int>(i));
    if (face.size() > proj.support.size()) {
      if (auto sol = detail::LiftedLp(points_, face, proj.point).solve(1e-8)) {
        for (std::size_t i = 0; i < sol->basis.size(); ++i) {
          res.vertex_indices.push_back(face[static_cast<std::size_t>(sol->basis[i])]);
          res.weights.push_back(sol->weights[i]);
        }
        return res;
      }
    }
    std::vector<std::pair<int, double>> entries;
    for (std::size_t i = 0; i < proj.support.size(); ++i) entries.emplace_back(proj.support[i], proj.weights[i]);
    std::sort(entries.begin(), entries.end());
    for (auto [j, w] : entries) {
      res.vertex_indices.push_back(j);
      res.weights.push_back(w);
    }
    return res;
  }

  PointMatrix points_;
  std::vector<int> all_;
};

inline SimplexResult locate_simplex(const PointMatrix& points, const Vector& query) {
  return DelaunayLocator(points).locate(query);
}

inline std::pair<Vector, double> project_to_hull(const PointMatrix& points, const Vector& query) {
  if (points.rows() < 1) throw ShapeError("projection needs at least one point");
  if (points.rows() < points.cols() + 1) {
    auto proj = detail::wolfe_nearest_point(points, query);
    return {proj.point, proj.distance};
  }
  // Lower-dimensional point sets cannot contain a full-dimensional
  // neighbourhood, so Wolfe's algorithm alone answers them.
  try {
    return DelaunayLocator(points).project(query);
  } catch (const DegeneracyError&) {
    auto proj = detail::wolfe_nearest_point(points, query);
    return {proj.point, proj.distance};
  }
}

}  // namespace sfd
