#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "sfd/bench/functions.hpp"
#include "sfd/core.hpp"
#include "sfd/designs.hpp"
#include "sfd/rng.hpp"
#include "sfd/surrogates.hpp"

namespace sfd {

enum class AugmentMode { Auto, Always, Never };

struct ExperimentConfig {
  std::string test_function = "colville";
  std::vector<int> grid_levels{3, 4, 5, 6, 7};
  std::vector<GeneratorKind> sfd_kinds{GeneratorKind::Uniform, GeneratorKind::MaximinLhd, GeneratorKind::MaxEnt,
                                       GeneratorKind::MaxPro};
  std::vector<SurrogateKind> surrogates = all_surrogate_kinds();
  int n_g = 2000;
  int replications = 10;
  /// Per-surrogate replication counts overriding `replications`.
  std::map<SurrogateKind, int> replications_by_kind;
  std::uint64_t seed = 1;
  bool rmse = true;
  bool mape = true;
  /// Explicit SFD budgets; switches to single-GBD mode.
  std::vector<int> sfd_sizes;
  AugmentMode augment = AugmentMode::Auto;
  CriterionParams criterion;
  SurrogateSpec surrogate;
  int jobs = 1;
  /// Score the truth itself as the predictor.
  bool self_test = false;
};

inline void validate(const ExperimentConfig& c) {
  if (c.replications < 1) throw ShapeError("B must be at least 1");
  for (const auto& [k, b] : c.replications_by_kind)
    if (b < 1) throw ShapeError("B for " + to_string(k) + " must be at least 1");
  if (c.n_g < 100) throw ShapeError("n_g must be at least 100");
  if (c.grid_levels.empty()) throw ShapeError("grid_levels must not be empty");
  for (int l : c.grid_levels)
    if (l < 2) throw ShapeError("grid levels must be at least 2");
  if (c.surrogates.empty()) throw ShapeError("no surrogate kinds selected");
  for (auto k : c.sfd_kinds)
    if (k == GeneratorKind::Grid) throw ShapeError("grid is not an SFD kind");
  if (c.jobs < 1) throw ShapeError("jobs must be at least 1");
  if (!c.rmse && !c.mape) throw ShapeError("select at least one metric");
}

struct ExperimentReport {
  std::vector<MetricRecord> records;
  std::vector<std::string> warnings;
};

inline bool augments(const ExperimentConfig& c) {
  if (c.augment == AugmentMode::Always) return true;
  if (c.augment == AugmentMode::Never) return false;
  return std::find(c.surrogates.begin(), c.surrogates.end(), SurrogateKind::Delaunay) != c.surrogates.end();
}

inline int replications_for(const ExperimentConfig& c, SurrogateKind k) {
  auto it = c.replications_by_kind.find(k);
  return it == c.replications_by_kind.end() ? c.replications : it->second;
}

/// n uniform points on the feasible region (unit coordinates), by rejection.
inline PointMatrix uniform_feasible_points(const DesignSpace& space, int n, std::uint64_t seed) {
  Rng rng(seed);
  PointMatrix out(n, space.dim());
  Vector u(space.dim());
  long tries = 0;
  for (int i = 0; i < n;) {
    for (int k = 0; k < space.dim(); ++k) u[k] = rng.uniform();
    if (++tries > 1000L * n + 100000) throw InfeasibleRegionError("test-set rejection sampling found no feasible points");
    if (!is_feasible_unit(space, u)) continue;
    out.row(i++) = u.transpose();
  }
  return out;
}

/// Feasible level combinations of a discrete space, unit coordinates, last factor fastest.
inline PointMatrix feasible_grid_cells(const DesignSpace& space) {
  if (!space.discrete()) throw SpaceError("space has no discrete levels");
  const int d = space.dim();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  std::vector<Vector> rows;
  Vector x(d);
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = space.levels()[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    if (is_feasible(space, x)) rows.push_back(point_to_unit(space, x));
    int k = d - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == space.levels()[static_cast<std::size_t>(k)].size()) {
      idx[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) break;
  }
  PointMatrix out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

/// Test points drawn uniformly with replacement from the feasible grid cells.
inline PointMatrix uniform_grid_points(const DesignSpace& space, int n, std::uint64_t seed) {
  const PointMatrix cells = feasible_grid_cells(space);
  Rng rng(seed);
  PointMatrix out(n, space.dim());
  for (int i = 0; i < n; ++i) out.row(i) = cells.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(cells.rows()))));
  return out;
}

namespace detail {

struct TestSet {
  PointMatrix points;
  Vector truth;
};

// One unit of bench work: a design plus the surrogates to fit on it.
struct Cell {
  std::string design_name;
  int budget = 0;
  int replication = 0;
  std::vector<int> replicate_as;  // GBD metrics are copied to these replication indices
  std::function<Design()> build;
  std::vector<SurrogateKind> kinds;
  std::uint64_t seed = 0;
};

struct CellOutput {
  std::vector<MetricRecord> records;
  std::vector<std::string> warnings;
};

inline CellOutput run_cell(const Cell& cell, const TruthSurface& truth, const TestSet& test, const ExperimentConfig& cfg) {
  CellOutput out;
  Design design;
  std::string design_failure;
  try {
    design = cell.build();
  } catch (const Error& e) {
    design_failure = std::string(e.name()) + ": " + e.what();
  } catch (const std::exception& e) {
    design_failure = std::string("Error: ") + e.what();
  }
  std::optional<Dataset> data;
  if (design_failure.empty()) {
    try {
      data.emplace(design, truth.evaluate_unit(design.points));
    } catch (const Error& e) {
      design_failure = std::string(e.name()) + ": " + e.what();
    }
  }
  for (auto kind : cell.kinds) {
    MetricRecord rec;
    rec.design_name = cell.design_name;
    rec.surrogate_name = to_string(kind);
    rec.budget = cell.budget;
    rec.replication = cell.replication;
    const auto t0 = std::chrono::steady_clock::now();
    if (!design_failure.empty()) {
      rec.failed = true;
      rec.failure = design_failure;
    } else {
      try {
        Vector pred;
        if (cfg.self_test) {
          pred = test.truth;
        } else {
          SurrogateSpec spec = cfg.surrogate;
          spec.kind = kind;
          spec.gp.seed = derive_seed(cell.seed, "gp");
          const FittedSurrogate model = fit(*data, spec);
          for (const auto& w : model.warnings)
            out.warnings.push_back(cell.design_name + "/" + std::to_string(cell.budget) + "/" + to_string(kind) + ": " + w);
          pred = model.predict(test.points);
        }
        rec.rmse = cfg.rmse ? rmse(test.truth, pred) : std::numeric_limits<double>::quiet_NaN();
        rec.mape = cfg.mape ? mape(test.truth, pred) : std::numeric_limits<double>::quiet_NaN();
      } catch (const Error& e) {
        rec.failed = true;
        rec.failure = std::string(e.name()) + ": " + e.what();
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.failure = std::string("Error: ") + e.what();
      }
    }
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rec.failed) {
      rec.rmse = std::numeric_limits<double>::quiet_NaN();
      rec.mape = std::numeric_limits<double>::quiet_NaN();
      out.warnings.push_back(cell.design_name + "/" + std::to_string(cell.budget) + "/" + rec.surrogate_name +
                             " failed: " + rec.failure);
    }
    if (cell.replicate_as.empty()) {
      out.records.push_back(rec);
    } else {
      for (int r : cell.replicate_as) {
        MetricRecord copy = rec;
        copy.replication = r;
        out.records.push_back(copy);
      }
    }
  }
  return out;
}

// Runs cells on `jobs` workers; output order is the cell order.
inline ExperimentReport run_cells(const std::vector<Cell>& cells, const TruthSurface& truth, const TestSet& test,
                                  const ExperimentConfig& cfg) {
  std::vector<CellOutput> outputs(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) outputs[i] = run_cell(cells[i], truth, test, cfg);
  };
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  ExperimentReport rep;
  for (auto& o : outputs) {
    rep.records.insert(rep.records.end(), o.records.begin(), o.records.end());
    rep.warnings.insert(rep.warnings.end(), o.warnings.begin(), o.warnings.end());
  }
  return rep;
}

inline std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

inline std::string cell_path(const std::string& design, int budget, int rep) {
  return "cell/" + design + "/" + std::to_string(budget) + "/" + std::to_string(rep);
}

// Adds GBD and SFD cells for one budget. SFD replications fit only the
// surrogates whose replication count exceeds the replication index.
inline void add_budget_cells(std::vector<Cell>& cells, const ExperimentConfig& cfg, SpacePtr space, int budget,
                             std::function<Design()> gbd, std::function<Design(GeneratorKind, int, std::uint64_t)> sfd,
                             bool with_gbd) {
  int max_b = 0;
  for (auto k : cfg.surrogates) max_b = std::max(max_b, replications_for(cfg, k));
  if (with_gbd) {
    // fit once per surrogate, replicate to that surrogate's B rows
    for (auto k : cfg.surrogates) {
      Cell c;
      c.design_name = "gbd";
      c.budget = budget;
      c.replicate_as = iota_vec(replications_for(cfg, k));
      c.build = gbd;
      c.kinds = {k};
      c.seed = derive_seed(cfg.seed, cell_path("gbd", budget, 0));
      cells.push_back(std::move(c));
    }
  }
  (void)space;
  if (!sfd) return;
  for (auto kind : cfg.sfd_kinds) {
    const std::string name = to_string(kind);
    for (int r = 0; r < max_b; ++r) {
      Cell c;
      c.design_name = name;
      c.budget = budget;
      c.replication = r;
      for (auto k : cfg.surrogates)
        if (r < replications_for(cfg, k)) c.kinds.push_back(k);
      c.seed = derive_seed(cfg.seed, cell_path(name, budget, r));
      const std::uint64_t s = c.seed;
      c.build = [sfd, kind, budget, s]() { return sfd(kind, budget, s); };
      cells.push_back(std::move(c));
    }
  }
}

}  // namespace detail

/// SFD of total size `budget`: N = budget - n_a generated points plus the
/// feasible CCD points when augmenting.
inline Design build_sfd(GeneratorKind kind, int budget, std::uint64_t seed, SpacePtr space, bool augment,
                        const CriterionParams& params) {
  const int n_a = augment ? ccd_feasible_count(*space) : 0;
  const int n = budget - n_a;
  if (n < 2) throw ShapeError("budget " + std::to_string(budget) + " leaves fewer than 2 points after augmentation");
  GeneratorSpec spec{kind, n, {}, params, seed};
  Design d = generate(spec, space).design;
  if (augment) d = ccd_augment(d, *space).design;
  return d;
}

/// The design-versus-surrogate comparison on an analytic (or supplied) truth.
inline ExperimentReport run_comparison(const ExperimentConfig& cfg, const TruthSurface& truth) {
  validate(cfg);
  const SpacePtr space = truth.space;
  const bool aug = augments(cfg);
  detail::TestSet test;
  test.points = uniform_feasible_points(*space, cfg.n_g, derive_seed(cfg.seed, "test_set"));
  test.truth = truth.evaluate_unit(test.points);

  auto sfd = [space, aug, params = cfg.criterion](GeneratorKind k, int budget, std::uint64_t s) {
    return build_sfd(k, budget, s, space, aug, params);
  };
  std::vector<detail::Cell> cells;
  if (cfg.sfd_sizes.empty()) {
    for (int level : cfg.grid_levels) {
      const Design g = gen_grid(space, level);
      const int budget = static_cast<int>(g.size());
      detail::add_budget_cells(cells, cfg, space, budget, [g]() { return g; }, sfd, true);
    }
  } else {
    // one GBD as a horizontal reference, SFDs at explicit budgets
    const Design g = gen_grid(space, cfg.grid_levels.front());
    const int gb = static_cast<int>(g.size());
    detail::add_budget_cells(cells, cfg, space, gb, [g]() { return g; }, nullptr, true);
    for (int size : cfg.sfd_sizes) detail::add_budget_cells(cells, cfg, space, size, nullptr, sfd, false);
  }
  return detail::run_cells(cells, truth, test, cfg);
}

inline ExperimentReport run_comparison(const ExperimentConfig& cfg) {
  return run_comparison(cfg, analytic_truth(cfg.test_function));
}

// ---------------------------------------------------------------- cross validation

struct CvResult {
  std::string kind;
  double rmse = 0.0;
  double mape = 0.0;
  int folds = 0;
  bool skipped = false;
  std::string note;
};

/// Fold assignment: identity split when k = n, otherwise a seeded shuffle.
inline std::vector<std::vector<int>> kfold_indices(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw ShapeError("k must be at least 2");
  if (n < k) throw ShapeError("k-fold needs at least k points");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  if (k != n) {
    Rng rng(derive_seed(seed, "kfold"));
    rng.shuffle(perm);
  }
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < perm.size(); ++i) folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

inline std::vector<CvResult> kfold_cv(const Dataset& data, int k, const std::vector<SurrogateKind>& kinds,
                                      std::uint64_t seed, const SurrogateSpec& base = {}) {
  const auto folds = kfold_indices(data.size(), k, seed);
  std::vector<CvResult> out;
  for (auto kind : kinds) {
    CvResult res;
    res.kind = to_string(kind);
    double sr = 0.0, sm = 0.0;
    int used = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<int> train;
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
      std::sort(train.begin(), train.end());
      if (static_cast<Eigen::Index>(train.size()) < minimum_training_size(kind, data.dim())) {
        res.note = "training folds smaller than the minimum for " + res.kind;
        break;
      }
      const Dataset tr = subset(data, train);
      const Dataset te = subset(data, folds[f]);
      SurrogateSpec spec = base;
      spec.kind = kind;
      spec.gp.seed = derive_seed(seed, "cv/" + res.kind + "/" + std::to_string(f));
      const FittedSurrogate model = fit(tr, spec);
      const Vector pred = model.predict(te.x());
      sr += rmse(te.responses, pred);
      sm += mape(te.responses, pred);
      ++used;
    }
    if (used < static_cast<int>(folds.size())) {
      res.skipped = true;
      res.rmse = res.mape = std::numeric_limits<double>::quiet_NaN();
    } else {
      res.rmse = sr / used;
      res.mape = sm / used;
    }
    res.folds = used;
    out.push_back(res);
  }
  return out;
}

// ---------------------------------------------------------------- fitted-truth protocol

/// Budgets 100, 300, ..., 2700.
inline std::vector<int> default_real_data_sizes() {
  std::vector<int> s;
  for (int v = 100; v <= 2700; v += 200) s.push_back(v);
  return s;
}

/// SFD on a discrete space: generate N = budget - n_a, bin to the grid, then
/// add the CCD points snapped to the grid.
inline Design build_binned_sfd(GeneratorKind kind, int budget, std::uint64_t seed, SpacePtr space, bool augment,
                               const CriterionParams& params) {
  const int n_a = augment ? ccd_feasible_count(*space) : 0;
  const int n = budget - n_a;
  if (n < 2) throw ShapeError("budget " + std::to_string(budget) + " leaves fewer than 2 points after augmentation");
  GeneratorSpec spec{kind, n, {}, params, seed};
  Design d = bin_to_grid(generate(spec, space).design, *space);
  if (!augment) return d;
  const PointMatrix c = ccd_points(space->dim());
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < d.size(); ++i) seen.insert(std::vector<double>(d.points.row(i).begin(), d.points.row(i).end()));
  std::vector<Vector> add;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (!is_feasible_unit(*space, c.row(i).transpose())) continue;
    Vector x = point_from_unit(*space, c.row(i).transpose());
    if (!detail::snap_and_repair(*space, x)) continue;
    Vector u = point_to_unit(*space, x);
    std::vector<double> key(u.data(), u.data() + u.size());
    if (!seen.insert(key).second) continue;
    add.push_back(u);
  }
  const auto n0 = d.size();
  d.points.conservativeResize(n0 + static_cast<Eigen::Index>(add.size()), space->dim());
  for (std::size_t r = 0; r < add.size(); ++r) {
    d.points.row(n0 + static_cast<Eigen::Index>(r)) = add[r].transpose();
    d.tags.push_back(PointTag{"ccd", true});
  }
  return d;
}

struct MarsTruth {
  TruthSurface truth;
  MarsModel model;
};

/// MARS fitted on the whole dataset, evaluated on natural coordinates.
inline MarsTruth mars_truth(const Dataset& data, const MarsOptions& opt = {}) {
  MarsTruth out;
  out.model = fit_mars(data, opt);
  const SpacePtr space = data.design.space;
  auto model = std::make_shared<MarsModel>(out.model);
  out.truth = TruthSurface{TruthSurface::Kind::Fitted, "mars_truth", space, [model, space](const Vector& natural) {
                             const Vector u = point_to_unit(*space, natural);
                             return model->predict_one(u.data());
                           }};
  return out;
}

inline ExperimentReport mars_truth_experiment(const Dataset& data, const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  validate(cfg);
  const SpacePtr space = data.design.space;
  if (!space->discrete()) throw SpaceError("the fitted-truth protocol needs a discrete-level space");
  ExperimentReport head;
  const MarsTruth mt = mars_truth(data, cfg.surrogate.mars);
  const long long cells_total = grid_cardinality(*space);
  std::vector<int> sizes = cfg.sfd_sizes.empty() ? default_real_data_sizes() : cfg.sfd_sizes;
  for (int& s : sizes) {
    if (s > cells_total) {
      head.warnings.push_back("size " + std::to_string(s) + " exceeds the " + std::to_string(cells_total) +
                              " feasible grid cells; capped");
      s = static_cast<int>(cells_total);
    }
  }
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  detail::TestSet test;
  test.points = uniform_grid_points(*space, cfg.n_g, derive_seed(cfg.seed, "test_set"));
  test.truth = mt.truth.evaluate_unit(test.points);

  const bool aug = augments(cfg);
  auto sfd = [space, aug, params = cfg.criterion](GeneratorKind k, int budget, std::uint64_t s) {
    return build_binned_sfd(k, budget, s, space, aug, params);
  };
  std::vector<detail::Cell> cells;
  const Design gbd = data.design;
  detail::add_budget_cells(cells, cfg, space, static_cast<int>(gbd.size()), [gbd]() { return gbd; }, nullptr, true);
  for (int s : sizes) detail::add_budget_cells(cells, cfg, space, s, nullptr, sfd, false);
  ExperimentReport rep = detail::run_cells(cells, mt.truth, test, cfg);
  rep.warnings.insert(rep.warnings.begin(), head.warnings.begin(), head.warnings.end());
  return rep;
}

// ---------------------------------------------------------------- aggregation

struct SummaryRow {
  std::string design_name;
  std::string surrogate_name;
  int budget = 0;
  int count = 0;
  int failures = 0;
  double rmse_mean = 0.0, rmse_se = 0.0;
  double mape_mean = 0.0, mape_se = 0.0;
};

namespace detail {
inline std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}
}  // namespace detail

/// Cell means and standard errors over replications; failed rows are counted, not averaged.
/// Rows follow first appearance order of (design, surrogate, budget).
inline std::vector<SummaryRow> summarize(const std::vector<MetricRecord>& records) {
  using Key = std::tuple<std::string, std::string, int>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> vals;
  std::map<Key, int> fails, counts;
  for (const auto& r : records) {
    Key k{r.design_name, r.surrogate_name, r.budget};
    if (!counts.count(k)) order.push_back(k);
    ++counts[k];
    if (r.failed) {
      ++fails[k];
      continue;
    }
    if (std::isfinite(r.rmse)) vals[k].first.push_back(r.rmse);
    if (std::isfinite(r.mape)) vals[k].second.push_back(r.mape);
  }
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    SummaryRow row;
    row.design_name = std::get<0>(k);
    row.surrogate_name = std::get<1>(k);
    row.budget = std::get<2>(k);
    row.count = counts[k];
    row.failures = fails[k];
    std::tie(row.rmse_mean, row.rmse_se) = detail::mean_se(vals[k].first);
    std::tie(row.mape_mean, row.mape_se) = detail::mean_se(vals[k].second);
    out.push_back(row);
  }
  return out;
}

inline const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const std::string& design,
                                  const std::string& surrogate, int budget) {
  for (const auto& r : rows)
    if (r.design_name == design && r.surrogate_name == surrogate && r.budget == budget) return &r;
  return nullptr;
}

}  // namespace sfd
