#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sfd/core.hpp"
#include "sfd/rng.hpp"

namespace sfd {

enum class GeneratorKind { Grid, Uniform, Lhd, MaximinLhd, MaxPro, MaxEnt };

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Grid: return "grid";
    case GeneratorKind::Uniform: return "uniform";
    case GeneratorKind::Lhd: return "lhd";
    case GeneratorKind::MaximinLhd: return "maximin_lhd";
    case GeneratorKind::MaxPro: return "maxpro";
    case GeneratorKind::MaxEnt: return "maxent";
  }
  return "?";
}

inline GeneratorKind parse_generator_kind(const std::string& s) {
  static const std::map<std::string, GeneratorKind> names = {
      {"grid", GeneratorKind::Grid},           {"gbd", GeneratorKind::Grid},
      {"uniform", GeneratorKind::Uniform},     {"lhd", GeneratorKind::Lhd},
      {"maximin_lhd", GeneratorKind::MaximinLhd}, {"mmlh", GeneratorKind::MaximinLhd},
      {"maxpro", GeneratorKind::MaxPro},       {"maxent", GeneratorKind::MaxEnt}};
  auto it = names.find(s);
  if (it == names.end()) throw FormatError("unknown design kind '" + s + "'");
  return it->second;
}

struct AnnealParams {
  /// 0 selects the automatic budget: min(10000 n, work_budget / cost-per-move).
  long iterations = 0;
  double initial_temperature = 0.05;
  double cooling_rate = 0.995;
  double work_budget = 5e8;
};

struct CriterionParams {
  /// phi_m exponent; 0 selects the default (2).
  int m = 0;
  double distance_power = 2.0;
  double variogram_range = 0.5;
  AnnealParams anneal;
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Uniform;
  int size = 0;
  std::vector<int> levels;  // grid kind only
  CriterionParams params;
  std::uint64_t seed = 0;
};

struct AugmentationReport {
  int requested_aug = 0;
  int n_a = 0;
  int oversample_factor = 1;
};

// ---------------------------------------------------------------- criteria

namespace detail {

inline double inverse_distance_power(const double* a, const double* b, int d, int m, double s) {
  double acc = 0.0;
  if (s == 2.0) {
    for (int k = 0; k < d; ++k) {
      const double t = a[k] - b[k];
      acc += t * t;
    }
    if (m == 2) return 1.0 / acc;
    return std::pow(acc, -0.5 * m);
  }
  for (int k = 0; k < d; ++k) acc += std::pow(std::abs(a[k] - b[k]), s);
  return std::pow(acc, -static_cast<double>(m) / s);
}

inline double inverse_product_gap(const double* a, const double* b, int d) {
  double p = 1.0;
  for (int k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    p *= t * t;
  }
  return 1.0 / p;
}

inline double spherical_correlation(double dist, double range) {
  if (dist >= range) return 0.0;
  const double h = dist / range;
  return 1.0 - 1.5 * h + 0.5 * h * h * h;
}

inline double euclidean(const double* a, const double* b, int d) {
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    acc += t * t;
  }
  return std::sqrt(acc);
}

}  // namespace detail

/// Sum over pairs of d(xi,xj)^-m (the m-th power of phi_m).
inline double phi_m_power_sum(const PointMatrix& pts, int m, double s) {
  const int d = static_cast<int>(pts.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j)
      sum += detail::inverse_distance_power(pts.row(i).data(), pts.row(j).data(), d, m, s);
  return sum;
}

/// [sum_{i<j} d(xi,xj)^-m]^(1/m) with d the s-norm distance.
inline double phi_m(const PointMatrix& pts, int m = 2, double s = 2.0) {
  if (pts.rows() < 2) throw ShapeError("phi_m needs at least two points");
  if (m < 1 || !(s > 0.0)) throw ShapeError("phi_m needs m >= 1 and s > 0");
  const double sum = phi_m_power_sum(pts, m, s);
  if (!std::isfinite(sum)) throw CriterionOverflow("phi_m is infinite: design has duplicated points");
  return std::pow(sum, 1.0 / m);
}

inline double phi_m(const Design& d, int m = 2, double s = 2.0) { return phi_m(d.points, m, s); }

/// sum_{i<j} 1 / prod_k (x_ik - x_jk)^2.
inline double maxpro_criterion(const PointMatrix& pts) {
  if (pts.rows() < 2) throw ShapeError("maxpro criterion needs at least two points");
  const int d = static_cast<int>(pts.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) {
      const double t = detail::inverse_product_gap(pts.row(i).data(), pts.row(j).data(), d);
      if (!std::isfinite(t))
        throw CriterionOverflow("maxpro criterion is infinite: points " + std::to_string(i) + " and " +
                                std::to_string(j) + " share a coordinate value");
      sum += t;
    }
  }
  if (!std::isfinite(sum)) throw CriterionOverflow("maxpro criterion overflowed");
  return sum;
}

inline double maxpro_criterion(const Design& d) { return maxpro_criterion(d.points); }

inline constexpr double kMaxEntRegularization = 1e-10;

inline Eigen::MatrixXd spherical_correlation_matrix(const PointMatrix& pts, double range) {
  const auto n = pts.rows();
  const int d = static_cast<int>(pts.cols());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = 1.0 + kMaxEntRegularization;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r =
          detail::spherical_correlation(detail::euclidean(pts.row(i).data(), pts.row(j).data(), d), range);
      c(i, j) = r;
      c(j, i) = r;
    }
  }
  return c;
}

/// log det of the spherical-correlation matrix (+1e-10 on the diagonal).
inline double maxent_objective(const PointMatrix& pts, double range = 0.5) {
  if (pts.rows() < 2) throw ShapeError("maxent objective needs at least two points");
  if (!(range > 0.0)) throw ShapeError("variogram range must be positive");
  const Eigen::MatrixXd c = spherical_correlation_matrix(pts, range);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw CriterionOverflow("maxent correlation matrix is not positive definite");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (!std::isfinite(logdet)) throw CriterionOverflow("maxent log-determinant is not finite");
  return logdet;
}

inline double maxent_objective(const Design& d, double range = 0.5) { return maxent_objective(d.points, range); }

// ---------------------------------------------------------------- raw generators on [0,1]^d

inline PointMatrix random_uniform_points(int n, int d, Rng& rng) {
  PointMatrix p(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = rng.uniform();
  return p;
}

/// One point per interval [j/n, (j+1)/n) per axis, uniformly jittered.
inline PointMatrix random_lhd_points(int n, int d, Rng& rng) {
  PointMatrix p(n, d);
  for (int k = 0; k < d; ++k) {
    const auto perm = rng.permutation(n);
    for (int i = 0; i < n; ++i) {
      double v = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
      p(i, k) = std::min(v, 1.0);
    }
  }
  return p;
}

struct AnnealResult {
  PointMatrix points;
  double initial_criterion = 0.0;
  double final_criterion = 0.0;
  long iterations = 0;
  long accepted = 0;
};

inline long anneal_iterations(const AnnealParams& a, int n, double cost_per_move) {
  if (a.iterations > 0) return a.iterations;
  const double full = 10000.0 * n;
  const double budget = std::max(2000.0, a.work_budget / std::max(1.0, cost_per_move));
  return static_cast<long>(std::min(full, budget));
}

namespace detail {

// Annealing over LHDs minimizing a pairwise-sum criterion. Moves alternate
// between within-column swaps and redrawing one coordinate inside its cell;
// both keep the Latin property.
template <class PairTerm>
AnnealResult anneal_lhd(PointMatrix x, const AnnealParams& ap, Rng& rng, PairTerm term) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  auto total = [&](const PointMatrix& p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += term(p.row(i).data(), p.row(j).data(), d);
    return s;
  };
  PointMatrix start = x;
  AnnealResult res;
  res.initial_criterion = total(x);
  res.iterations = anneal_iterations(ap, n, static_cast<double>(n) * d);
  if (n < 2) {
    res.points = x;
    res.final_criterion = res.initial_criterion;
    return res;
  }
  double current = res.initial_criterion;
  double best = current;
  PointMatrix best_x = x;
  double temperature = ap.initial_temperature;
  const long block = std::max<long>(1, res.iterations / 1500);
  std::vector<double> row_i(static_cast<std::size_t>(d)), row_j(static_cast<std::size_t>(d));

  for (long it = 0; it < res.iterations; ++it) {
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const bool jitter = rng.uniform() < 0.5;
    int j = -1;
    for (int c = 0; c < d; ++c) row_i[static_cast<std::size_t>(c)] = x(i, c);
    if (jitter) {
      const double cell = std::min<double>(n - 1, std::floor(x(i, k) * n));
      row_i[static_cast<std::size_t>(k)] = std::min(1.0, (cell + rng.uniform()) / n);
    } else {
      j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
      if (j >= i) ++j;
      for (int c = 0; c < d; ++c) row_j[static_cast<std::size_t>(c)] = x(j, c);
      std::swap(row_i[static_cast<std::size_t>(k)], row_j[static_cast<std::size_t>(k)]);
    }
    double delta = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == i || l == j) continue;
      const double* pl = x.row(l).data();
      delta += term(row_i.data(), pl, d) - term(x.row(i).data(), pl, d);
      if (j >= 0) delta += term(row_j.data(), pl, d) - term(x.row(j).data(), pl, d);
    }
    bool accept = delta <= 0.0;
    if (!accept && temperature > 0.0 && std::isfinite(delta)) {
      const double rel = delta / (temperature * std::max(current, std::numeric_limits<double>::min()));
      accept = rng.uniform() < std::exp(-rel);
    }
    if (accept) {
      if (j >= 0) std::swap(x(i, k), x(j, k));
      else x(i, k) = row_i[static_cast<std::size_t>(k)];
      current += delta;
      ++res.accepted;
      if (current < best) {
        best = current;
        best_x = x;
      }
    }
    if ((it + 1) % block == 0) temperature *= ap.cooling_rate;
  }
  res.points = std::move(best_x);
  res.final_criterion = total(res.points);
  // Incremental bookkeeping can drift; never return worse than the start.
  if (res.final_criterion > res.initial_criterion) {
    res.points = std::move(start);
    res.final_criterion = res.initial_criterion;
  }
  return res;
}

}  // namespace detail

/// Annealed maximin LHD; criterion values reported as phi_m.
inline AnnealResult anneal_maximin_lhd(int n, int d, const CriterionParams& params, Rng& rng) {
  const int m = params.m > 0 ? params.m : 2;
  const double s = params.distance_power;
  PointMatrix start = random_lhd_points(n, d, rng);
  auto res = detail::anneal_lhd(std::move(start), params.anneal, rng, [m, s](const double* a, const double* b, int dim) {
    return detail::inverse_distance_power(a, b, dim, m, s);
  });
  res.initial_criterion = std::pow(res.initial_criterion, 1.0 / m);
  res.final_criterion = std::pow(res.final_criterion, 1.0 / m);
  return res;
}

inline AnnealResult anneal_maxpro(int n, int d, const CriterionParams& params, Rng& rng) {
  PointMatrix start = random_lhd_points(n, d, rng);
  return detail::anneal_lhd(std::move(start), params.anneal, rng, [](const double* a, const double* b, int dim) {
    return detail::inverse_product_gap(a, b, dim);
  });
}

/// Coordinate-perturbation annealing maximizing log det of the spherical
/// correlation matrix. The inverse is kept current with O(n^2) row/column
/// replacement updates.
inline AnnealResult anneal_maxent(int n, int d, const CriterionParams& params, Rng& rng) {
  const double range = params.variogram_range;
  PointMatrix x = random_uniform_points(n, d, rng);
  const PointMatrix start = x;
  AnnealResult res;
  res.iterations = anneal_iterations(params.anneal, n, static_cast<double>(n) * (n + d));
  if (n < 2) {
    res.points = x;
    return res;
  }
  auto factor = [&](const PointMatrix& p, Eigen::MatrixXd& inv) {
    const Eigen::MatrixXd c = spherical_correlation_matrix(p, range);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      inv.setIdentity(n, n);
      llt.solveInPlace(inv);
      return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    return ldlt.vectorD().array().log().sum();
  };
  Eigen::MatrixXd g;
  double current = factor(x, g);
  res.initial_criterion = current;
  double best = current;
  PointMatrix best_x = x;
  double temperature = params.anneal.initial_temperature;
  const long block = std::max<long>(1, res.iterations / 1500);
  const double step = 0.5 * std::pow(static_cast<double>(n), -1.0 / d);
  // The inverse is held as g + u v' with the last r accepted rank-2 updates
  // deferred, and folded into g in one product every kDeferred columns.
  constexpr int kDeferred = 64;
  Eigen::MatrixXd u(n, kDeferred), vt(n, kDeferred);
  int r = 0;
  auto flush = [&] {
    if (r > 0) g.noalias() += u.leftCols(r) * vt.leftCols(r).transpose();
    r = 0;
  };
  Vector cnew(n), v(n), gi(n), q(n), vc(kDeferred);
  std::vector<int> nz;
  std::vector<double> candidate(static_cast<std::size_t>(d));
  long since_refactor = 0;

  for (long it = 0; it < res.iterations; ++it) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    for (int k = 0; k < d; ++k)
      candidate[static_cast<std::size_t>(k)] = std::clamp(x(i, k) + step * rng.normal(), 0.0, 1.0);
    nz.clear();
    for (int l = 0; l < n; ++l) {
      cnew[l] = l == i ? 0.0
                       : detail::spherical_correlation(detail::euclidean(candidate.data(), x.row(l).data(), d), range);
      if (cnew[l] != 0.0) nz.push_back(l);
    }
    gi = g.col(i);
    if (r > 0) gi.noalias() += u.leftCols(r) * vt.row(i).head(r).transpose();
    const double beta = gi[i];
    // cnew[i] == 0, so this is G(:, -i) c'; the spherical kernel is mostly zero
    v.setZero();
    vc.head(r).setZero();
    for (int l : nz) {
      v.noalias() += g.col(l) * cnew[l];
      if (r > 0) vc.head(r).noalias() += vt.row(l).head(r).transpose() * cnew[l];
    }
    if (r > 0) v.noalias() += u.leftCols(r) * vc.head(r);
    const double quad = cnew.dot(v) - v[i] * v[i] / beta;
    const double schur_new = 1.0 + kMaxEntRegularization - quad;
    if (!(schur_new > 0.0)) {
      if ((it + 1) % block == 0) temperature *= params.anneal.cooling_rate;
      continue;
    }
    const double schur_old = 1.0 / beta;
    const double delta = std::log(schur_new) - std::log(schur_old);
    bool accept = delta >= 0.0;
    if (!accept && temperature > 0.0) {
      const double scale = temperature * std::max(1e-3, std::abs(current));
      accept = rng.uniform() < std::exp(delta / scale);
    }
    if (accept) {
      // new inverse: G - gi gi'/beta + q q'/schur_new, q = B^-1 c' - e_i
      q = v - gi * (v[i] / beta);
      q[i] = -1.0;
      if (r + 2 > kDeferred) flush();
      u.col(r) = gi * (-1.0 / beta);
      vt.col(r) = gi;
      u.col(r + 1) = q / schur_new;
      vt.col(r + 1) = q;
      r += 2;
      for (int k = 0; k < d; ++k) x(i, k) = candidate[static_cast<std::size_t>(k)];
      current += delta;
      ++res.accepted;
      if (++since_refactor >= std::max(200, n)) {
        current = factor(x, g);
        r = 0;
        since_refactor = 0;
      }
      if (current > best) {
        best = current;
        best_x = x;
      }
    }
    if ((it + 1) % block == 0) temperature *= params.anneal.cooling_rate;
  }
  res.points = std::move(best_x);
  res.final_criterion = maxent_objective(res.points, range);
  if (res.final_criterion < res.initial_criterion) {
    // only possible through update drift; the start was better
    res.points = start;
    res.final_criterion = res.initial_criterion;
  }
  return res;
}

/// Unconstrained generator on the unit cube.
inline PointMatrix generate_raw(GeneratorKind kind, int n, int d, const CriterionParams& params, Rng& rng) {
  switch (kind) {
    case GeneratorKind::Uniform: return random_uniform_points(n, d, rng);
    case GeneratorKind::Lhd: return random_lhd_points(n, d, rng);
    case GeneratorKind::MaximinLhd: return anneal_maximin_lhd(n, d, params, rng).points;
    case GeneratorKind::MaxPro: return anneal_maxpro(n, d, params, rng).points;
    case GeneratorKind::MaxEnt: return anneal_maxent(n, d, params, rng).points;
    case GeneratorKind::Grid: break;
  }
  throw FormatError("grid designs are not size-driven; use gen_grid");
}

// ---------------------------------------------------------------- public generators

/// Cartesian product of equally spaced levels (endpoints included), filtered
/// to the feasible region.
inline Design gen_grid(SpacePtr space, const std::vector<int>& levels_per_factor) {
  const int d = space->dim();
  if (static_cast<int>(levels_per_factor.size()) != d) throw ShapeError("need a level count per factor");
  for (int l : levels_per_factor)
    if (l < 2) throw ShapeError("grid needs at least 2 levels per factor");
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<Vector> rows;
  Vector u(d);
  while (true) {
    for (int k = 0; k < d; ++k)
      u[k] = static_cast<double>(idx[static_cast<std::size_t>(k)]) / (levels_per_factor[static_cast<std::size_t>(k)] - 1);
    if (is_feasible_unit(*space, u)) rows.push_back(u);
    int k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == levels_per_factor[static_cast<std::size_t>(k)]) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  if (rows.empty()) throw EmptyDesignError("no grid point satisfies the constraints");
  PointMatrix pts(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return make_design(std::move(space), std::move(pts), "grid");
}

inline Design gen_grid(SpacePtr space, int levels) {
  const int d = space->dim();
  return gen_grid(std::move(space), std::vector<int>(static_cast<std::size_t>(d), levels));
}

struct ConstrainedDesign {
  Design design;
  int oversample_factor = 1;
};

inline constexpr int kMaxOversample = 10;

/// Oversample-and-subset: run the generator at k*n for k = 1, 2, ... until at
/// least n points are feasible, then keep a uniformly random n-subset.
inline ConstrainedDesign constrain_subset(const GeneratorSpec& spec, SpacePtr space, int n) {
  if (n < 1) throw ShapeError("design size must be at least 1");
  const int d = space->dim();
  Rng rng(derive_seed(spec.seed, "constrain_subset/" + to_string(spec.kind)));
  for (int k = 1; k <= kMaxOversample; ++k) {
    PointMatrix raw = generate_raw(spec.kind, k * n, d, spec.params, rng);
    std::vector<int> feasible;
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      if (is_feasible_unit(*space, raw.row(i).transpose())) feasible.push_back(static_cast<int>(i));
    if (static_cast<int>(feasible.size()) < n) continue;
    if (static_cast<int>(feasible.size()) > n) {
      rng.shuffle(feasible);
      feasible.resize(static_cast<std::size_t>(n));
      std::sort(feasible.begin(), feasible.end());
    }
    PointMatrix pts(n, d);
    for (int r = 0; r < n; ++r) pts.row(r) = raw.row(feasible[static_cast<std::size_t>(r)]);
    return {make_design(space, std::move(pts), to_string(spec.kind), spec.seed), k};
  }
  throw InfeasibleRegionError("constraints reject more than 90% of generated points (oversampling cap " +
                              std::to_string(kMaxOversample) + " reached)");
}

inline Design gen_uniform(SpacePtr space, int n, std::uint64_t seed) {
  GeneratorSpec spec{GeneratorKind::Uniform, n, {}, {}, seed};
  return constrain_subset(spec, std::move(space), n).design;
}

inline Design gen_lhd(SpacePtr space, int n, std::uint64_t seed) {
  if (n < 2) throw ShapeError("LHD needs n >= 2");
  GeneratorSpec spec{GeneratorKind::Lhd, n, {}, {}, seed};
  return constrain_subset(spec, std::move(space), n).design;
}

inline Design gen_maximin_lhd(SpacePtr space, int n, const CriterionParams& params, std::uint64_t seed) {
  if (n < 2) throw ShapeError("maximin LHD needs n >= 2");
  GeneratorSpec spec{GeneratorKind::MaximinLhd, n, {}, params, seed};
  return constrain_subset(spec, std::move(space), n).design;
}

inline Design gen_maxpro(SpacePtr space, int n, const CriterionParams& params, std::uint64_t seed) {
  if (n < 2) throw ShapeError("MaxPro needs n >= 2");
  GeneratorSpec spec{GeneratorKind::MaxPro, n, {}, params, seed};
  return constrain_subset(spec, std::move(space), n).design;
}

inline Design gen_maxent(SpacePtr space, int n, const CriterionParams& params, std::uint64_t seed) {
  if (n < 2) throw ShapeError("MaxEnt needs n >= 2");
  GeneratorSpec spec{GeneratorKind::MaxEnt, n, {}, params, seed};
  return constrain_subset(spec, std::move(space), n).design;
}

// ---------------------------------------------------------------- augmentation

/// Face-centred CCD in unit coordinates: 2^d vertices, 2d axial points, centre.
inline PointMatrix ccd_points(int d) {
  const Eigen::Index count = (Eigen::Index{1} << d) + 2 * d + 1;
  PointMatrix p(count, d);
  Eigen::Index r = 0;
  for (Eigen::Index mask = 0; mask < (Eigen::Index{1} << d); ++mask, ++r)
    for (int k = 0; k < d; ++k) p(r, k) = (mask >> (d - 1 - k)) & 1 ? 1.0 : 0.0;
  for (int k = 0; k < d; ++k) {
    for (double v : {0.0, 1.0}) {
      p.row(r).setConstant(0.5);
      p(r, k) = v;
      ++r;
    }
  }
  p.row(r).setConstant(0.5);
  return p;
}

/// Number of CCD points that survive the constraints (n_a before any
/// duplicate removal against a concrete design).
inline int ccd_feasible_count(const DesignSpace& space) {
  const PointMatrix c = ccd_points(space.dim());
  int count = 0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) count += is_feasible_unit(space, c.row(i).transpose()) ? 1 : 0;
  return count;
}

struct AugmentedDesign {
  Design design;
  AugmentationReport report;
};

inline AugmentedDesign ccd_augment(const Design& design, const DesignSpace& space) {
  const int d = space.dim();
  const PointMatrix c = ccd_points(d);
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < design.size(); ++i)
    seen.insert(std::vector<double>(design.points.row(i).begin(), design.points.row(i).end()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (!is_feasible_unit(space, c.row(i).transpose())) continue;
    std::vector<double> key(c.row(i).begin(), c.row(i).end());
    if (!seen.insert(key).second) continue;
    keep.push_back(i);
  }
  AugmentedDesign out;
  out.design = design;
  const auto n0 = design.size();
  out.design.points.conservativeResize(n0 + static_cast<Eigen::Index>(keep.size()), d);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.design.points.row(n0 + static_cast<Eigen::Index>(r)) = c.row(keep[r]);
    out.design.tags.push_back(PointTag{"ccd", true});
  }
  out.report.requested_aug = static_cast<int>(c.rows());
  out.report.n_a = static_cast<int>(keep.size());
  return out;
}

// ---------------------------------------------------------------- binning

namespace detail {

/// Nearest admissible level; ties go to the lower level.
inline double snap(const std::vector<double>& levels, double v) {
  auto it = std::lower_bound(levels.begin(), levels.end(), v);
  if (it == levels.begin()) return *it;
  if (it == levels.end()) return levels.back();
  const double hi = *it;
  const double lo = *(it - 1);
  return (hi - v) < (v - lo) ? hi : lo;
}

// Snap every factor, then repair violated constraints by moving a single
// constrained coordinate to the nearest level restoring feasibility. Among
// candidate moves the smallest unit-scale change wins; ties prefer moving a
// coordinate down, then the highest-index factor.
inline bool snap_and_repair(const DesignSpace& space, Vector& x) {
  const int d = space.dim();
  for (int k = 0; k < d; ++k) x[k] = snap(space.levels()[static_cast<std::size_t>(k)], x[k]);
  for (int pass = 0; pass < 2 * d + 1 && !is_feasible(space, x); ++pass) {
    const LinearConstraint* violated = nullptr;
    for (const auto& c : space.constraints())
      if (c.slack(x) < -kConstraintTolerance) {
        violated = &c;
        break;
      }
    if (!violated) break;
    double best_cost = std::numeric_limits<double>::infinity();
    bool best_down = false;
    int best_k = -1;
    double best_v = 0.0;
    for (int k = d - 1; k >= 0; --k) {
      if (violated->coefficients[k] == 0.0) continue;
      for (double lv : space.levels()[static_cast<std::size_t>(k)]) {
        Vector trial = x;
        trial[k] = lv;
        if (violated->slack(trial) < -kConstraintTolerance) continue;
        const double cost = std::abs(lv - x[k]) / space.bound(k).width();
        const bool down = lv < x[k];
        const bool better = cost < best_cost - 1e-15 || (std::abs(cost - best_cost) <= 1e-15 && down && !best_down);
        if (better) {
          best_cost = cost;
          best_down = down;
          best_k = k;
          best_v = lv;
        }
      }
    }
    if (best_k < 0) return false;
    x[best_k] = best_v;
  }
  return is_feasible(space, x);
}

}  // namespace detail

inline constexpr int kBinningAttempts = 100;

/// Number of feasible level combinations of a discrete space.
inline long long grid_cardinality(const DesignSpace& space) {
  if (!space.discrete()) throw SpaceError("space has no discrete levels");
  const int d = space.dim();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Vector x(d);
  long long count = 0;
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = space.levels()[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    if (is_feasible(space, x)) ++count;
    int k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == space.levels()[static_cast<std::size_t>(k)].size()) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  return count;
}

/// Snap a design onto the feasible level grid; duplicates are replaced by
/// snapped fresh uniform draws.
namespace detail {

// Fallback repair once random redraws stop finding free cells: the free
// feasible level combination nearest (unit scale) to the colliding point.
inline bool add_nearest_free_cell(const DesignSpace& space, const Vector& unit, std::set<std::vector<double>>& seen,
                                  std::vector<Vector>& rows, std::vector<PointTag>& tags, const std::string& gen) {
  const int d = space.dim();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Vector x(d), best;
  double best_dist = std::numeric_limits<double>::infinity();
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = space.levels()[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    if (is_feasible(space, x) && !seen.count(std::vector<double>(x.data(), x.data() + d))) {
      const double dist = (point_to_unit(space, x) - unit).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = x;
      }
    }
    int k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == space.levels()[static_cast<std::size_t>(k)].size()) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  if (best.size() == 0) return false;
  seen.insert(std::vector<double>(best.data(), best.data() + d));
  rows.push_back(point_to_unit(space, best));
  tags.push_back(PointTag{gen, false});
  return true;
}

}  // namespace detail

inline Design bin_to_grid(const Design& design, const DesignSpace& space) {
  if (!space.discrete()) throw BinningError("bin_to_grid needs discrete levels for every factor");
  const int d = space.dim();
  const auto n = design.size();
  std::set<std::vector<double>> seen;
  std::vector<Vector> rows;
  std::vector<PointTag> tags;
  auto try_add = [&](Vector x, const PointTag& tag) {
    if (!detail::snap_and_repair(space, x)) return false;
    std::vector<double> key(x.data(), x.data() + d);
    if (!seen.insert(key).second) return false;
    rows.push_back(point_to_unit(space, x));
    tags.push_back(tag);
    return true;
  };
  Eigen::Index missing = 0;
  std::vector<Eigen::Index> i_missing;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!try_add(point_from_unit(space, design.points.row(i).transpose()), design.tags[static_cast<std::size_t>(i)])) {
      ++missing;
      i_missing.push_back(i);
    }
  }
  Rng rng(derive_seed(design.seed, "bin_to_grid"));
  const std::string gen = design.tags.empty() ? std::string("binned") : design.tags.front().generator;
  for (Eigen::Index m = 0; m < missing; ++m) {
    bool ok = false;
    for (int attempt = 0; attempt < kBinningAttempts && !ok; ++attempt) {
      Vector u(d);
      for (int k = 0; k < d; ++k) u[k] = rng.uniform();
      ok = try_add(point_from_unit(space, u), PointTag{gen, false});
    }
    if (!ok) ok = detail::add_nearest_free_cell(space, design.points.row(i_missing[static_cast<std::size_t>(m)]).transpose(), seen, rows, tags, gen);
    if (!ok)
      throw BinningError("could not reach " + std::to_string(n) + " distinct feasible grid points; the grid is full");
  }
  Design out{design.space, PointMatrix(static_cast<Eigen::Index>(rows.size()), d), std::move(tags), design.seed};
  for (std::size_t r = 0; r < rows.size(); ++r) out.points.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

// ---------------------------------------------------------------- dispatch

/// Build any design kind, constraint handling included.
inline ConstrainedDesign generate(const GeneratorSpec& spec, SpacePtr space) {
  if (spec.kind == GeneratorKind::Grid) {
    if (spec.levels.empty()) throw ShapeError("grid designs need levels per factor");
    if (spec.levels.size() == 1) return {gen_grid(space, spec.levels.front()), 1};
    return {gen_grid(space, spec.levels), 1};
  }
  if (spec.kind != GeneratorKind::Uniform && spec.size < 2)
    throw ShapeError(to_string(spec.kind) + " needs at least 2 points");
  return constrain_subset(spec, std::move(space), spec.size);
}

}  // namespace sfd
