#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "sfd/core.hpp"

namespace sfd {

inline double colville(const Vector& x) {
  if (x.size() != 4) throw ShapeError("colville takes 4 inputs");
  const double a = x[0] * x[0] - x[1];
  const double b = x[2] * x[2] - x[3];
  return 100.0 * a * a + (x[0] - 1) * (x[0] - 1) + (x[2] - 1) * (x[2] - 1) + 90.0 * b * b +
         10.1 * ((x[1] - 1) * (x[1] - 1) + (x[3] - 1) * (x[3] - 1)) + 19.8 * (x[1] - 1) * (x[3] - 1);
}

/// Friedman's five-input function on its first four inputs, x5 fixed at 0.5.
inline double friedman(const Vector& x) {
  if (x.size() != 4) throw ShapeError("friedman takes 4 inputs");
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 2.5;
}

/// Flow rate through a borehole; inputs (r_w, r, T_u, H_u, T_l, H_l, L, K_w).
inline double borehole(const Vector& x) {
  if (x.size() != 8) throw ShapeError("borehole takes 8 inputs");
  const double rw = x[0], r = x[1], tu = x[2], hu = x[3], tl = x[4], hl = x[5], l = x[6], kw = x[7];
  const double lg = std::log(r / rw);
  return 2.0 * std::numbers::pi * tu * (hu - hl) / (lg * (1.0 + 2.0 * l * tu / (lg * rw * rw * kw) + tu / tl));
}

inline DesignSpace colville_space() {
  return DesignSpace(std::vector<Bound>(4, Bound{-10.0, 10.0}), {dominance_constraint(4, 2, 3)});
}

inline DesignSpace friedman_space() { return DesignSpace::unit_cube(4, {dominance_constraint(4, 2, 3)}); }

inline DesignSpace borehole_space() {
  return DesignSpace({{0.05, 0.15},
                      {100.0, 50000.0},
                      {63070.0, 115600.0},
                      {990.0, 1110.0},
                      {63.1, 116.0},
                      {700.0, 820.0},
                      {1120.0, 1680.0},
                      {9855.0, 12045.0}});
}

/// A deterministic response over a design space, evaluated on natural coordinates.
struct TruthSurface {
  enum class Kind { Analytic, Fitted };
  Kind kind = Kind::Analytic;
  std::string name;
  SpacePtr space;
  std::function<double(const Vector&)> evaluator;

  double operator()(const Vector& natural) const { return evaluator(natural); }

  /// Responses at unit-cube points.
  Vector evaluate_unit(const PointMatrix& unit) const {
    Vector y(unit.rows());
    for (Eigen::Index i = 0; i < unit.rows(); ++i) y[i] = evaluator(point_from_unit(*space, unit.row(i).transpose()));
    return y;
  }
};

inline TruthSurface analytic_truth(const std::string& name) {
  if (name == "colville") return {TruthSurface::Kind::Analytic, name, share(colville_space()), colville};
  if (name == "friedman") return {TruthSurface::Kind::Analytic, name, share(friedman_space()), friedman};
  if (name == "borehole") return {TruthSurface::Kind::Analytic, name, share(borehole_space()), borehole};
  throw FormatError("unknown test function '" + name + "'");
}

}  // namespace sfd
