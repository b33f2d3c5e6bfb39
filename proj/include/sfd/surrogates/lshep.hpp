#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sfd/core.hpp"

namespace sfd {

struct LshepOptions {
  double radius_multiplier = 1.0;
};

struct LshepPredictions {
  Vector values;
  Eigen::Index uncovered = 0;  // queries outside every radius
};

struct LshepModel {
  PointMatrix nodes;         // training points, sorted lexicographically
  Vector values;             // f(p_i)
  Eigen::MatrixXd gradients; // row i: slope of the local linear fit at p_i
  Vector radii;
  int padded_fits = 0;       // local fits replaced by the global slope

  double local(Eigen::Index i, const double* x) const {
    double s = values[i];
    for (Eigen::Index k = 0; k < nodes.cols(); ++k) s += gradients(i, k) * (x[k] - nodes(i, k));
    return s;
  }

  double predict_one(const double* x, bool* covered = nullptr) const {
    const auto n = nodes.rows();
    const auto d = nodes.cols();
    double wsum = 0.0, acc = 0.0;
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index nearest = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double dist2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double t = x[k] - nodes(i, k);
        dist2 += t * t;
      }
      if (dist2 == 0.0) {
        if (covered) *covered = true;
        return values[i];
      }
      if (dist2 < best) {
        best = dist2;
        nearest = i;
      }
      const double dist = std::sqrt(dist2);
      const double r = radii[i];
      if (dist >= r) continue;
      const double w0 = (r - dist) / (r * dist);
      const double w = w0 * w0;
      wsum += w;
      acc += w * local(i, x);
    }
    if (wsum > 0.0) {
      if (covered) *covered = true;
      return acc / wsum;
    }
    if (covered) *covered = false;
    return local(nearest, x);
  }

  LshepPredictions predict_detailed(const PointMatrix& q) const {
    LshepPredictions out;
    out.values.resize(q.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      bool cov = true;
      out.values[i] = predict_one(q.row(i).data(), &cov);
      if (!cov) ++out.uncovered;
    }
    return out;
  }

  Vector predict(const PointMatrix& q) const { return predict_detailed(q).values; }
};

/// Shepard weight [(R - d)+ / (R d)]^2.
inline double shepard_weight(double radius, double dist) {
  if (dist >= radius) return 0.0;
  const double w = (radius - dist) / (radius * dist);
  return w * w;
}

/// Linear Shepard interpolant with local weighted linear fits.
inline LshepModel fit_lshep(const Dataset& data, const LshepOptions& opt = {}) {
  const auto n = data.size();
  const int d = data.dim();
  if (n < d + 2) throw ShapeError("lshep needs at least d+2 points");
  if (!(opt.radius_multiplier > 0.0)) throw ShapeError("lshep radius multiplier must be positive");

  // Canonical row order makes the fit independent of input labelling.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto& x = data.x();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int k = 0; k < d; ++k)
      if (x(a, k) != x(b, k)) return x(a, k) < x(b, k);
    return data.responses[a] < data.responses[b];
  });

  LshepModel m;
  m.nodes.resize(n, d);
  m.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.nodes.row(i) = x.row(order[static_cast<std::size_t>(i)]);
    m.values[i] = data.responses[order[static_cast<std::size_t>(i)]];
  }
  m.gradients.resize(n, d);
  m.radii.resize(n);

  // global linear slope, used to pad degenerate local fits
  Eigen::MatrixXd ga(n, d + 1);
  ga.col(0).setOnes();
  ga.rightCols(d) = m.nodes;
  const Vector gcoef = ga.completeOrthogonalDecomposition().solve(m.values);
  const Vector gslope = gcoef.tail(d);

  const auto nw = std::min<Eigen::Index>(n - 1, 3 * (d + 1));
  const auto nr = static_cast<Eigen::Index>(std::ceil(3.0 * (d + 1) / 2.0));
  std::vector<std::pair<double, Eigen::Index>> nb(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      nb[c++] = {(m.nodes.row(j) - m.nodes.row(i)).norm(), j};
    }
    std::sort(nb.begin(), nb.end());
    m.radii[i] = opt.radius_multiplier * nb[static_cast<std::size_t>(std::min(nr, n - 1) - 1)].first;
    const double rfit = 1.1 * nb[static_cast<std::size_t>(nw - 1)].first;

    Eigen::MatrixXd a(nw, d);
    Vector b(nw);
    for (Eigen::Index r = 0; r < nw; ++r) {
      const auto j = nb[static_cast<std::size_t>(r)].second;
      const double dist = nb[static_cast<std::size_t>(r)].first;
      const double w = dist > 0.0 ? std::sqrt(shepard_weight(rfit, dist)) : 0.0;
      a.row(r) = w * (m.nodes.row(j) - m.nodes.row(i));
      b[r] = w * (m.values[j] - m.values[i]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (nw < d || qr.rank() < d) {
      m.gradients.row(i) = gslope.transpose();
      ++m.padded_fits;
    } else {
      m.gradients.row(i) = qr.solve(b).transpose();
    }
    if (m.radii[i] <= 0.0) m.radii[i] = std::numeric_limits<double>::min();
  }
  return m;
}

}  // namespace sfd
