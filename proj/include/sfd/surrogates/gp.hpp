#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "sfd/core.hpp"
#include "sfd/rng.hpp"

namespace sfd {

struct GpOptions {
  double nugget_floor = 1e-12;
  /// Upper end of the nugget search; equal to the floor pins the nugget.
  double nugget_ceiling = 1.0;
  double lengthscale_lo = 1e-3;
  double lengthscale_hi = 1e3;
  int restarts = 5;
  std::optional<int> local_neighborhood = 50;
  Eigen::Index local_threshold = 2000;
  /// Hyperparameters are estimated on at most this many points.
  Eigen::Index mle_max_points = 400;
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

inline void validate(const GpOptions& o) {
  if (!(o.nugget_floor > 0.0) || o.nugget_floor > 1.0) throw ShapeError("gp nugget floor must lie in (0, 1]");
  if (!(o.nugget_ceiling >= o.nugget_floor) || o.nugget_ceiling > 1.0)
    throw ShapeError("gp nugget ceiling must lie in [nugget_floor, 1]");
  if (!(o.lengthscale_lo > 0.0 && o.lengthscale_lo < o.lengthscale_hi))
    throw ShapeError("gp lengthscale bounds need 0 < lo < hi");
  if (o.restarts < 1) throw ShapeError("gp restarts must be at least 1");
  if (o.local_neighborhood && *o.local_neighborhood < 2) throw ShapeError("gp local neighborhood must be at least 2");
  if (o.mle_max_points < 5) throw ShapeError("gp mle_max_points must be at least 5");
}

/// exp(-sum_k (a_k - b_k)^2 / theta_k)
inline double gauss_corr(const double* a, const double* b, const Vector& theta) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t / theta[k];
  }
  return std::exp(-s);
}

inline Eigen::MatrixXd gauss_corr_matrix(const PointMatrix& x, const Vector& theta) {
  const auto n = x.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) r(i, j) = r(j, i) = gauss_corr(x.row(i).data(), x.row(j).data(), theta);
  }
  return r;
}

/// Plain kriging mean r(q)' (R + nugget I)^-1 y, no normalisation or centring.
inline Vector kriging_mean(const PointMatrix& x, const Vector& y, const Vector& theta, double nugget,
                           const PointMatrix& q) {
  Eigen::MatrixXd k = gauss_corr_matrix(x, theta);
  k.diagonal().array() += nugget;
  const Vector alpha = k.ldlt().solve(y);
  Vector out(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.rows(); ++j) s += gauss_corr(q.row(i).data(), x.row(j).data(), theta) * alpha[j];
    out[i] = s;
  }
  return out;
}

struct GpLikelihood {
  double value = -std::numeric_limits<double>::infinity();
  /// d value / d (log theta_1..d, log nugget)
  Vector gradient;
  double sigma2 = 0.0;
  bool ok = false;
};

/// Profile log marginal likelihood (sigma^2 maximised out, constants dropped):
/// -n/2 log(z'K^-1 z / n) - 1/2 log|K|, K = R(theta) + nugget I.
inline GpLikelihood gp_log_likelihood(const PointMatrix& x, const Vector& z, const Vector& log_params,
                                      bool with_gradient = true) {
  const auto n = x.rows();
  const auto d = x.cols();
  GpLikelihood out;
  const Vector theta = log_params.head(d).array().exp();
  const double nugget = std::exp(log_params[d]);
  Eigen::MatrixXd k = gauss_corr_matrix(x, theta);
  const Eigen::MatrixXd r = with_gradient ? k : Eigen::MatrixXd();
  k.diagonal().array() += nugget;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return out;
  const Vector alpha = llt.solve(z);
  const double nd = static_cast<double>(n);
  const double quad = z.dot(alpha);
  if (!(quad > 0.0)) return out;
  const double sigma2 = quad / nd;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.value = -0.5 * nd * std::log(sigma2) - 0.5 * logdet;
  out.sigma2 = sigma2;
  out.ok = std::isfinite(out.value);
  if (!with_gradient || !out.ok) return out;

  // dl/dp = 1/2 tr(W dK/dp), W = alpha alpha' / sigma2 - K^-1
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
  w = (alpha * alpha.transpose()) / sigma2 - w;
  out.gradient = Vector::Zero(d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double base = w(i, j) * r(i, j);
      if (base == 0.0) continue;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double t = x(i, c) - x(j, c);
        out.gradient[c] += base * t * t;
      }
    }
  }
  for (Eigen::Index c = 0; c < d; ++c) out.gradient[c] /= theta[c];  // 2 * 1/2 for the symmetric pair
  out.gradient[d] = 0.5 * nugget * w.trace();
  return out;
}

struct GpModel {
  Vector x_min, x_range;
  double y_min = 0.0, y_range = 1.0, y_center = 0.0;
  Vector theta;
  double nugget = 0.0;
  double sigma2 = 0.0;
  double log_likelihood = 0.0;
  PointMatrix train;      // normalised inputs
  Vector z;               // normalised, centred responses
  Vector alpha;           // K^-1 z (global mode)
  std::optional<int> local_neighborhood;  // set when predictions use local subsets
  int nugget_retries = 0;

  bool local() const { return local_neighborhood.has_value(); }

  PointMatrix normalize(const PointMatrix& q) const {
    PointMatrix out(q.rows(), q.cols());
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      for (Eigen::Index k = 0; k < q.cols(); ++k) out(i, k) = (q(i, k) - x_min[k]) / x_range[k];
    return out;
  }

  double denormalize(double m) const { return y_min + y_range * (m + y_center); }

  Vector predict(const PointMatrix& q) const {
    if (q.cols() != train.cols() && q.rows() > 0) throw ShapeError("gp: query dimension mismatch");
    const PointMatrix qn = normalize(q);
    Vector out(q.rows());
    if (!local()) {
      for (Eigen::Index i = 0; i < qn.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < train.rows(); ++j) s += gauss_corr(qn.row(i).data(), train.row(j).data(), theta) * alpha[j];
        out[i] = denormalize(s);
      }
      return out;
    }
    for (Eigen::Index i = 0; i < qn.rows(); ++i) out[i] = denormalize(local_mean(qn.row(i).data()));
    return out;
  }

  /// Predictive variance in normalised response units: sigma2 (1 + nugget - r'K^-1 r).
  Vector variance(const PointMatrix& q) const {
    if (local()) throw NumericalError("gp variance is only available for global models");
    Eigen::MatrixXd k = gauss_corr_matrix(train, theta);
    k.diagonal().array() += nugget;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    const PointMatrix qn = normalize(q);
    Vector out(q.rows());
    Vector r(train.rows());
    for (Eigen::Index i = 0; i < qn.rows(); ++i) {
      for (Eigen::Index j = 0; j < train.rows(); ++j) r[j] = gauss_corr(qn.row(i).data(), train.row(j).data(), theta);
      const Vector v = llt.matrixL().solve(r);
      out[i] = std::max(0.0, sigma2 * (1.0 + nugget - v.squaredNorm()));
    }
    return out;
  }

 private:
  double local_mean(const double* q) const {
    const auto n = train.rows();
    const auto m = std::min<Eigen::Index>(*local_neighborhood, n);
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < train.cols(); ++k) {
        const double t = q[k] - train(j, k);
        s += t * t / theta[k];
      }
      dist[static_cast<std::size_t>(j)] = {s, j};
    }
    std::partial_sort(dist.begin(), dist.begin() + m, dist.end());
    Eigen::MatrixXd k(m, m);
    Vector r(m), zl(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto ia = dist[static_cast<std::size_t>(a)].second;
      r[a] = std::exp(-dist[static_cast<std::size_t>(a)].first);
      zl[a] = z[ia];
      k(a, a) = 1.0 + nugget;
      for (Eigen::Index b = 0; b < a; ++b) {
        const auto ib = dist[static_cast<std::size_t>(b)].second;
        k(a, b) = k(b, a) = gauss_corr(train.row(ia).data(), train.row(ib).data(), theta);
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    double eta = nugget;
    for (int t = 0; llt.info() != Eigen::Success && t < 8; ++t) {
      k.diagonal().array() += eta;
      eta *= 2.0;
      llt.compute(k);
    }
    if (llt.info() != Eigen::Success) return r.dot(k.ldlt().solve(zl));
    return r.dot(llt.solve(zl));
  }
};

namespace detail {

struct BoxProblem {
  Vector lo, hi;
  Vector clip(const Vector& v) const { return v.cwiseMax(lo).cwiseMin(hi); }
};

// Projected quasi-Newton ascent on a box with Armijo backtracking. f(x, grad)
// returns the likelihood, with the gradient only when grad is true.
template <class F>
Vector maximize_box(F&& f, Vector x, const BoxProblem& box, int max_iter, double* best_value) {
  const auto p = x.size();
  x = box.clip(x);
  GpLikelihood cur = f(x, true);
  if (!cur.ok) {
    *best_value = -std::numeric_limits<double>::infinity();
    return x;
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(p, p);
  int stalls = 0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = -cur.gradient;  // minimise -l
    auto pin = [&](Vector& v) {
      for (Eigen::Index i = 0; i < p; ++i) {
        if (x[i] <= box.lo[i] && v[i] < 0.0) v[i] = 0.0;
        if (x[i] >= box.hi[i] && v[i] > 0.0) v[i] = 0.0;
      }
    };
    Vector pg = -g;
    pin(pg);
    if (pg.cwiseAbs().maxCoeff() < 1e-6 * (1.0 + std::abs(cur.value))) break;
    Vector dir = -h * g;
    pin(dir);
    if (g.dot(dir) >= 0.0) {
      h.setIdentity();
      dir = pg;
    }
    const double big = dir.cwiseAbs().maxCoeff();
    if (big > 2.0) dir *= 2.0 / big;
    double t = 1.0;
    bool moved = false;
    Vector xn;
    double vn = 0.0;
    for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
      xn = box.clip(x + t * dir);
      const GpLikelihood trial = f(xn, false);
      if (trial.ok && -trial.value <= -cur.value + 1e-4 * g.dot(xn - x)) {
        moved = true;
        vn = trial.value;
        break;
      }
    }
    if (!moved) break;
    const GpLikelihood nxt = f(xn, true);
    if (!nxt.ok) break;
    (void)vn;
    const Vector s = xn - x;
    const Vector yv = -nxt.gradient - g;
    const double sy = s.dot(yv);
    const double gain = nxt.value - cur.value;
    x = xn;
    cur = nxt;
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(p, p);
      h = (i - rho * s * yv.transpose()) * h * (i - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    stalls = gain < 1e-8 * (1.0 + std::abs(cur.value)) ? stalls + 1 : 0;
    if (stalls >= 3 || s.norm() < 1e-8) break;
  }
  *best_value = cur.value;
  return x;
}

}  // namespace detail

/// Gaussian process with separable Gaussian kernel and nugget; hyperparameters
/// by maximum profile likelihood with multi-start quasi-Newton search.
inline GpModel fit_gp(const Dataset& data, const GpOptions& opt = {}) {
  validate(opt);
  const auto n = data.size();
  const int d = data.dim();
  if (n < 5) throw ShapeError("gp needs at least 5 points");
  GpModel m;
  const auto& x = data.x();
  m.x_min = x.colwise().minCoeff().transpose();
  m.x_range = (x.colwise().maxCoeff().transpose() - m.x_min);
  for (int k = 0; k < d; ++k)
    if (!(m.x_range[k] > 0.0)) m.x_range[k] = 1.0;
  m.y_min = data.responses.minCoeff();
  m.y_range = data.responses.maxCoeff() - m.y_min;
  if (!(m.y_range > 0.0)) m.y_range = 1.0;
  m.train = m.normalize(x);
  const Vector yn = (data.responses.array() - m.y_min) / m.y_range;
  m.y_center = yn.mean();
  m.z = yn.array() - m.y_center;

  // hyperparameter subsample
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(opt.seed, "gp/subsample"));
  if (n > opt.mle_max_points) {
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(opt.mle_max_points));
    std::sort(idx.begin(), idx.end());
  }
  PointMatrix xs(static_cast<Eigen::Index>(idx.size()), d);
  Vector zs(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = m.train.row(idx[i]);
    zs[static_cast<Eigen::Index>(i)] = m.z[idx[i]];
  }

  detail::BoxProblem box;
  box.lo = Vector::Constant(d + 1, std::log(opt.lengthscale_lo));
  box.hi = Vector::Constant(d + 1, std::log(opt.lengthscale_hi));
  box.lo[d] = std::log(opt.nugget_floor);
  box.hi[d] = std::log(opt.nugget_ceiling);

  Vector best_p = box.clip(Vector::Zero(d + 1));
  double best_v = -std::numeric_limits<double>::infinity();
  if (zs.squaredNorm() > 0.0) {
    Rng start_rng(derive_seed(opt.seed, "gp/restarts"));
    auto lik = [&](const Vector& p, bool grad) { return gp_log_likelihood(xs, zs, p, grad); };
    for (int r = 0; r < opt.restarts; ++r) {
      Vector p0(d + 1);
      if (r == 0) {
        p0.head(d).setConstant(std::log(0.5));
        p0[d] = std::clamp(std::log(1e-6), box.lo[d], box.hi[d]);
      } else {
        for (int c = 0; c <= d; ++c) p0[c] = start_rng.uniform(box.lo[c], box.hi[c]);
      }
      double v = 0.0;
      const Vector p = detail::maximize_box(lik, p0, box, opt.max_iterations, &v);
      if (v > best_v) {
        best_v = v;
        best_p = p;
      }
    }
  }
  m.theta = best_p.head(d).array().exp();
  m.nugget = std::exp(best_p[d]);
  m.log_likelihood = best_v;

  if (opt.local_neighborhood && n > opt.local_threshold) {
    m.local_neighborhood = opt.local_neighborhood;
    const auto fit = gp_log_likelihood(xs, zs, best_p, false);
    m.sigma2 = fit.ok ? fit.sigma2 : zs.squaredNorm() / static_cast<double>(zs.size());
    return m;
  }

  Eigen::MatrixXd k = gauss_corr_matrix(m.train, m.theta);
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd kk;
  for (int t = 0;; ++t) {
    kk = k;
    kk.diagonal().array() += m.nugget;
    llt.compute(kk);
    if (llt.info() == Eigen::Success) break;
    if (t == 8) throw NumericalError("gp covariance is not positive definite after nugget retries");
    m.nugget *= 2.0;
    ++m.nugget_retries;
  }
  m.alpha = llt.solve(m.z);
  // iterative refinement; near-floor nuggets leave K badly conditioned
  for (int it = 0; it < 3; ++it) {
    const Vector r = m.z - kk * m.alpha;
    if (!(r.norm() > 0.0)) break;
    m.alpha += llt.solve(r);
  }
  m.sigma2 = m.z.dot(m.alpha) / static_cast<double>(n);
  return m;
}

}  // namespace sfd
