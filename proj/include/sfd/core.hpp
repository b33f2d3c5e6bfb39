#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sfd/errors.hpp"

namespace sfd {

using Vector = Eigen::VectorXd;
/// n x d, one design point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kConstraintTolerance = 1e-12;

enum class Sense { GreaterEqual, LessEqual };

/// coefficients . x (>= | <=) offset, on natural-scale coordinates.
struct LinearConstraint {
  Vector coefficients;
  double offset = 0.0;
  Sense sense = Sense::GreaterEqual;

  /// Non-negative when satisfied.
  double slack(const Vector& x) const {
    const double lhs = coefficients.dot(x);
    return sense == Sense::GreaterEqual ? lhs - offset : offset - lhs;
  }
};

struct Bound {
  double lower = 0.0;
  double upper = 1.0;
  double width() const { return upper - lower; }
};

class DesignSpace {
 public:
  DesignSpace(std::vector<Bound> bounds, std::vector<LinearConstraint> constraints = {},
              std::vector<std::vector<double>> levels = {})
      : bounds_(std::move(bounds)), constraints_(std::move(constraints)), levels_(std::move(levels)) {
    const auto d = bounds_.size();
    if (d == 0) throw SpaceError("design space needs at least one factor");
    for (std::size_t k = 0; k < d; ++k) {
      if (!(bounds_[k].lower < bounds_[k].upper))
        throw SpaceError("factor " + std::to_string(k + 1) + ": lower bound must be below upper bound");
    }
    for (const auto& c : constraints_) {
      if (static_cast<std::size_t>(c.coefficients.size()) != d)
        throw SpaceError("constraint coefficient count does not match dimension");
      if ((c.coefficients.array() == 0.0).all()) throw SpaceError("constraint has no nonzero coefficient");
    }
    if (!levels_.empty()) {
      if (levels_.size() != d) throw SpaceError("levels must be given for every factor or none");
      for (std::size_t k = 0; k < d; ++k) {
        auto& lv = levels_[k];
        std::sort(lv.begin(), lv.end());
        lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
        for (double v : lv) {
          if (v < bounds_[k].lower || v > bounds_[k].upper)
            throw SpaceError("level " + std::to_string(v) + " of factor " + std::to_string(k + 1) +
                             " lies outside its bounds");
        }
      }
    }
  }

  int dim() const { return static_cast<int>(bounds_.size()); }
  const std::vector<Bound>& bounds() const { return bounds_; }
  const Bound& bound(int k) const { return bounds_[static_cast<std::size_t>(k)]; }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }
  bool constrained() const { return !constraints_.empty(); }

  /// Per-factor admissible values; empty = continuous.
  const std::vector<std::vector<double>>& levels() const { return levels_; }
  bool discrete() const {
    return !levels_.empty() && std::all_of(levels_.begin(), levels_.end(), [](const auto& l) { return !l.empty(); });
  }

  static DesignSpace unit_cube(int d, std::vector<LinearConstraint> constraints = {}) {
    return DesignSpace(std::vector<Bound>(static_cast<std::size_t>(d), Bound{0.0, 1.0}), std::move(constraints));
  }

 private:
  std::vector<Bound> bounds_;
  std::vector<LinearConstraint> constraints_;
  std::vector<std::vector<double>> levels_;
};

using SpacePtr = std::shared_ptr<const DesignSpace>;

inline SpacePtr share(DesignSpace space) { return std::make_shared<const DesignSpace>(std::move(space)); }

/// x_k >= x_j in natural coordinates (0-based factor indices).
inline LinearConstraint dominance_constraint(int d, int greater, int lesser) {
  Vector a = Vector::Zero(d);
  a[greater] = 1.0;
  a[lesser] = -1.0;
  return {a, 0.0, Sense::GreaterEqual};
}

namespace detail {
inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void check_width(const DesignSpace& space, Eigen::Index cols) {
  if (cols != space.dim())
    throw ShapeError("point matrix has " + std::to_string(cols) + " columns, space has dimension " +
                     std::to_string(space.dim()));
}
}  // namespace detail

inline PointMatrix to_unit_cube(const DesignSpace& space, const PointMatrix& natural) {
  detail::check_width(space, natural.cols());
  PointMatrix out(natural.rows(), natural.cols());
  for (Eigen::Index i = 0; i < natural.rows(); ++i) {
    for (int k = 0; k < space.dim(); ++k) {
      const auto& b = space.bound(k);
      const double v = natural(i, k);
      if (!(v >= b.lower && v <= b.upper))
        throw BoundsError("factor " + std::to_string(k + 1) + " value " + detail::fmt_double(v) + " outside [" +
                          detail::fmt_double(b.lower) + ", " + detail::fmt_double(b.upper) + "]");
      out(i, k) = (v - b.lower) / b.width();
    }
  }
  return out;
}

inline PointMatrix from_unit_cube(const DesignSpace& space, const PointMatrix& unit) {
  detail::check_width(space, unit.cols());
  PointMatrix out(unit.rows(), unit.cols());
  for (Eigen::Index i = 0; i < unit.rows(); ++i)
    for (int k = 0; k < space.dim(); ++k) out(i, k) = space.bound(k).lower + unit(i, k) * space.bound(k).width();
  return out;
}

inline Vector point_from_unit(const DesignSpace& space, const Vector& unit) {
  Vector out(unit.size());
  for (int k = 0; k < space.dim(); ++k) out[k] = space.bound(k).lower + unit[k] * space.bound(k).width();
  return out;
}

inline Vector point_to_unit(const DesignSpace& space, const Vector& natural) {
  PointMatrix m = natural.transpose();
  return to_unit_cube(space, m).row(0).transpose();
}

inline bool is_feasible(const DesignSpace& space, const Vector& natural_point) {
  if (natural_point.size() != space.dim()) throw ShapeError("point dimension does not match space");
  for (const auto& c : space.constraints())
    if (c.slack(natural_point) < -kConstraintTolerance) return false;
  return true;
}

inline bool is_feasible_unit(const DesignSpace& space, const Vector& unit_point) {
  if (!space.constrained()) return true;
  return is_feasible(space, point_from_unit(space, unit_point));
}

struct PointTag {
  std::string generator;
  bool augmented = false;
};

/// Points live in unit-cube coordinates; the space carries the scaling map.
struct Design {
  SpacePtr space;
  PointMatrix points;
  std::vector<PointTag> tags;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
  PointMatrix natural() const { return from_unit_cube(*space, points); }
  Eigen::Index augmented_count() const {
    return std::count_if(tags.begin(), tags.end(), [](const PointTag& t) { return t.augmented; });
  }
};

inline Design make_design(SpacePtr space, PointMatrix points, const std::string& generator, std::uint64_t seed = 0) {
  Design d{std::move(space), std::move(points), {}, seed};
  d.tags.assign(static_cast<std::size_t>(d.points.rows()), PointTag{generator, false});
  return d;
}

inline bool has_duplicate_rows(const PointMatrix& pts) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) rows[static_cast<std::size_t>(i)].assign(pts.row(i).begin(), pts.row(i).end());
  std::sort(rows.begin(), rows.end());
  return std::adjacent_find(rows.begin(), rows.end()) != rows.end();
}

/// Throws on any violated Design invariant; duplicate check applies to SFDs only.
inline void validate_design(const Design& design, bool require_distinct) {
  if (!design.space) throw ShapeError("design has no space");
  if (design.size() < 1) throw EmptyDesignError("design has no points");
  detail::check_width(*design.space, design.points.cols());
  if (static_cast<Eigen::Index>(design.tags.size()) != design.size()) throw ShapeError("tag count mismatch");
  if ((design.points.array() < 0.0).any() || (design.points.array() > 1.0).any())
    throw BoundsError("design coordinate outside the unit cube");
  for (Eigen::Index i = 0; i < design.size(); ++i)
    if (!is_feasible_unit(*design.space, design.points.row(i).transpose()))
      throw InfeasibleRegionError("design point " + std::to_string(i) + " violates a constraint");
  if (require_distinct && has_duplicate_rows(design.points)) throw ShapeError("design contains duplicated points");
}

struct ResponseNorm {
  double min = 0.0;
  double max = 1.0;
};

struct Dataset {
  Design design;
  Vector responses;
  std::optional<ResponseNorm> response_norm;

  Dataset() = default;
  Dataset(Design d, Vector y, std::optional<ResponseNorm> norm = std::nullopt)
      : design(std::move(d)), responses(std::move(y)), response_norm(norm) {
    if (responses.size() != design.size()) throw ShapeError("response count does not match design size");
    if (!responses.allFinite()) throw ShapeError("responses must be finite");
  }

  Eigen::Index size() const { return responses.size(); }
  int dim() const { return design.dim(); }
  const PointMatrix& x() const { return design.points; }
};

/// Rows `idx` of a dataset, keeping the space.
inline Dataset subset(const Dataset& data, const std::vector<int>& idx) {
  PointMatrix pts(static_cast<Eigen::Index>(idx.size()), data.dim());
  Vector y(static_cast<Eigen::Index>(idx.size()));
  std::vector<PointTag> tags;
  tags.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    pts.row(static_cast<Eigen::Index>(r)) = data.x().row(idx[r]);
    y[static_cast<Eigen::Index>(r)] = data.responses[idx[r]];
    tags.push_back(data.design.tags[static_cast<std::size_t>(idx[r])]);
  }
  Design d{data.design.space, std::move(pts), std::move(tags), data.design.seed};
  return Dataset(std::move(d), std::move(y), data.response_norm);
}

struct MetricRecord {
  std::string design_name;
  std::string surrogate_name;
  int budget = 0;
  int replication = 0;
  double rmse = 0.0;
  double mape = 0.0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string failure;
};

// ---------------------------------------------------------------- metrics

inline double rmse(const Vector& truth, const Vector& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("rmse: length mismatch");
  if (truth.size() == 0) throw ShapeError("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
}

struct MapeResult {
  double value = 0.0;
  Eigen::Index excluded = 0;
};

inline constexpr double kMapeNearZero = 1e-8;

/// Mean of |pred - y| / |y| over points with |y| >= 1e-8 * max|y|.
inline MapeResult mape_detailed(const Vector& truth, const Vector& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("mape: length mismatch");
  if (truth.size() == 0) throw ShapeError("mape: empty input");
  const double cutoff = kMapeNearZero * truth.cwiseAbs().maxCoeff();
  double sum = 0.0;
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double a = std::abs(truth[i]);
    if (a < cutoff || a == 0.0) continue;
    sum += std::abs(predicted[i] - truth[i]) / a;
    ++kept;
  }
  if (kept == 0) throw DegenerateMetricError("mape: every truth value is near zero");
  return {sum / static_cast<double>(kept), truth.size() - kept};
}

inline double mape(const Vector& truth, const Vector& predicted) { return mape_detailed(truth, predicted).value; }

}  // namespace sfd
