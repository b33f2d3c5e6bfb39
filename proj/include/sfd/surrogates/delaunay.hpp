#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "sfd/core.hpp"
#include "sfd/geometry.hpp"

namespace sfd {

struct DelaunayPredictions {
  Vector values;
  std::vector<bool> extrapolated;
  std::vector<double> projection_distance;
};

/// Piecewise-linear interpolation over the Delaunay simplex of each query.
class DelaunayModel {
 public:
  DelaunayModel(PointMatrix points, Vector values) : values_(std::move(values)), locator_(canonical(points, values_)) {}

  const PointMatrix& points() const { return locator_.points(); }
  const Vector& values() const { return values_; }

  double predict_one(const Vector& q, SimplexResult* info = nullptr) const {
    SimplexResult s = locator_.locate(q);
    double v = 0.0;
    for (std::size_t i = 0; i < s.vertex_indices.size(); ++i) v += s.weights[i] * values_[s.vertex_indices[i]];
    if (info) *info = std::move(s);
    return v;
  }

  DelaunayPredictions predict_detailed(const PointMatrix& q) const {
    DelaunayPredictions out;
    out.values.resize(q.rows());
    out.extrapolated.resize(static_cast<std::size_t>(q.rows()));
    out.projection_distance.resize(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      SimplexResult s;
      out.values[i] = predict_one(q.row(i).transpose(), &s);
      out.extrapolated[static_cast<std::size_t>(i)] = s.extrapolated;
      out.projection_distance[static_cast<std::size_t>(i)] = s.projection_distance;
    }
    return out;
  }

  Vector predict(const PointMatrix& q) const { return predict_detailed(q).values; }

 private:
  // Sort rows (and values with them) so ties in the LP resolve the same way
  // whatever order the training data came in.
  static PointMatrix canonical(const PointMatrix& pts, Vector& values) {
    const auto n = pts.rows();
    const auto d = pts.cols();
    if (values.size() != n) throw ShapeError("delaunay: value count does not match point count");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      for (Eigen::Index k = 0; k < d; ++k)
        if (pts(a, k) != pts(b, k)) return pts(a, k) < pts(b, k);
      return values[a] < values[b];
    });
    PointMatrix sorted(n, d);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sorted.row(i) = pts.row(order[static_cast<std::size_t>(i)]);
      v[i] = values[order[static_cast<std::size_t>(i)]];
    }
    values = std::move(v);
    return sorted;
  }

  Vector values_;
  DelaunayLocator locator_;
};

inline DelaunayModel fit_delaunay(const Dataset& data) { return DelaunayModel(data.x(), data.responses); }

}  // namespace sfd
