#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "sfd/bench/experiment.hpp"
#include "sfd/core.hpp"
#include "sfd/designs.hpp"
#include "sfd/surrogates.hpp"

namespace sfd {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw FormatError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get_as(const Json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------- space

inline DesignSpace parse_space(const Json& j) {
  detail::check_keys(j, {"dim", "bounds", "constraints", "levels"}, "space");
  const auto bounds = detail::get_as<std::vector<std::vector<double>>>(j, "bounds", "space");
  std::vector<Bound> b;
  for (const auto& p : bounds) {
    if (p.size() != 2) throw FormatError("space.bounds entries must be [lower, upper]");
    b.push_back({p[0], p[1]});
  }
  if (j.contains("dim") && detail::get_as<int>(j, "dim", "space") != static_cast<int>(b.size()))
    throw SpaceError("space.dim does not match the number of bounds");
  std::vector<LinearConstraint> cons;
  if (j.contains("constraints")) {
    for (const auto& c : j.at("constraints")) {
      detail::check_keys(c, {"coefficients", "offset", "sense"}, "constraint");
      const auto coef = detail::get_as<std::vector<double>>(c, "coefficients", "constraint");
      LinearConstraint lc;
      lc.coefficients = Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size()));
      lc.offset = c.value("offset", 0.0);
      const std::string sense = c.value("sense", std::string(">="));
      if (sense == ">=" || sense == "ge") lc.sense = Sense::GreaterEqual;
      else if (sense == "<=" || sense == "le") lc.sense = Sense::LessEqual;
      else throw FormatError("constraint sense must be '>=' or '<='");
      cons.push_back(std::move(lc));
    }
  }
  std::vector<std::vector<double>> levels;
  if (j.contains("levels") && !j.at("levels").is_null())
    levels = detail::get_as<std::vector<std::vector<double>>>(j, "levels", "space");
  return DesignSpace(std::move(b), std::move(cons), std::move(levels));
}

inline Json space_to_json(const DesignSpace& s) {
  Json j;
  j["dim"] = s.dim();
  j["bounds"] = Json::array();
  for (const auto& b : s.bounds()) j["bounds"].push_back({b.lower, b.upper});
  j["constraints"] = Json::array();
  for (const auto& c : s.constraints())
    j["constraints"].push_back({{"coefficients", std::vector<double>(c.coefficients.data(), c.coefficients.data() + c.coefficients.size())},
                                {"offset", c.offset},
                                {"sense", c.sense == Sense::GreaterEqual ? ">=" : "<="}});
  if (!s.levels().empty()) j["levels"] = s.levels();
  return j;
}

inline DesignSpace load_space(const std::string& path) { return parse_space(read_json_file(path)); }

// ---------------------------------------------------------------- criterion / surrogate

inline CriterionParams parse_criterion(const Json& j) {
  detail::check_keys(j, {"m", "distance_power", "variogram_range", "anneal"}, "criterion");
  CriterionParams p;
  p.m = j.value("m", 0);
  p.distance_power = j.value("distance_power", p.distance_power);
  p.variogram_range = j.value("variogram_range", p.variogram_range);
  if (p.m < 0 || !(p.distance_power > 0.0) || !(p.variogram_range > 0.0))
    throw FormatError("criterion needs m >= 1, distance_power > 0, variogram_range > 0");
  if (j.contains("anneal")) {
    const Json& a = j.at("anneal");
    detail::check_keys(a, {"iterations", "initial_temperature", "cooling_rate", "work_budget"}, "criterion.anneal");
    p.anneal.iterations = a.value("iterations", p.anneal.iterations);
    p.anneal.initial_temperature = a.value("initial_temperature", p.anneal.initial_temperature);
    p.anneal.cooling_rate = a.value("cooling_rate", p.anneal.cooling_rate);
    p.anneal.work_budget = a.value("work_budget", p.anneal.work_budget);
  }
  return p;
}

inline SurrogateSpec parse_surrogate_spec(const Json& j, SurrogateSpec s = {}) {
  detail::check_keys(j, {"kind", "gp", "mars", "lshep"}, "surrogate");
  if (j.contains("kind")) s.kind = parse_surrogate_kind(detail::get_as<std::string>(j, "kind", "surrogate"));
  if (j.contains("gp")) {
    const Json& g = j.at("gp");
    detail::check_keys(g, {"nugget_floor", "nugget_ceiling", "lengthscale_bounds", "restarts", "local_neighborhood", "local_threshold",
                           "mle_max_points", "max_iterations"},
                       "surrogate.gp");
    s.gp.nugget_floor = g.value("nugget_floor", s.gp.nugget_floor);
    s.gp.nugget_ceiling = g.value("nugget_ceiling", s.gp.nugget_ceiling);
    if (g.contains("lengthscale_bounds")) {
      const auto lb = detail::get_as<std::vector<double>>(g, "lengthscale_bounds", "surrogate.gp");
      if (lb.size() != 2) throw FormatError("surrogate.gp.lengthscale_bounds must be [lo, hi]");
      s.gp.lengthscale_lo = lb[0];
      s.gp.lengthscale_hi = lb[1];
    }
    s.gp.restarts = g.value("restarts", s.gp.restarts);
    if (g.contains("local_neighborhood")) {
      if (g.at("local_neighborhood").is_null()) s.gp.local_neighborhood.reset();
      else s.gp.local_neighborhood = detail::get_as<int>(g, "local_neighborhood", "surrogate.gp");
    }
    s.gp.local_threshold = g.value("local_threshold", s.gp.local_threshold);
    s.gp.mle_max_points = g.value("mle_max_points", s.gp.mle_max_points);
    s.gp.max_iterations = g.value("max_iterations", s.gp.max_iterations);
  }
  if (j.contains("mars")) {
    const Json& m = j.at("mars");
    detail::check_keys(m, {"max_terms_grid", "max_degree_grid", "knot_penalty"}, "surrogate.mars");
    if (m.contains("max_terms_grid")) s.mars.max_terms_grid = detail::get_as<std::vector<int>>(m, "max_terms_grid", "surrogate.mars");
    if (m.contains("max_degree_grid")) s.mars.max_degree_grid = detail::get_as<std::vector<int>>(m, "max_degree_grid", "surrogate.mars");
    s.mars.knot_penalty = m.value("knot_penalty", s.mars.knot_penalty);
  }
  if (j.contains("lshep")) {
    const Json& l = j.at("lshep");
    detail::check_keys(l, {"radius_multiplier"}, "surrogate.lshep");
    s.lshep.radius_multiplier = l.value("radius_multiplier", s.lshep.radius_multiplier);
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------- experiment

struct BenchConfig {
  ExperimentConfig experiment;
  /// Dataset CSV for the fitted-truth protocol (HPC column layout).
  std::string data;
  /// Set when the config pins n_g / B explicitly.
  bool explicit_n_g = false;
  bool explicit_b = false;
};

inline BenchConfig parse_bench_config(const Json& j) {
  detail::check_keys(j,
                     {"test_function", "grid_levels", "sfd_kinds", "surrogates", "n_g", "B", "B_by_kind", "seed",
                      "metrics", "sfd_sizes", "augment", "criterion", "surrogate", "jobs", "data", "self_test"},
                     "config");
  BenchConfig bc;
  ExperimentConfig& c = bc.experiment;
  c.test_function = j.value("test_function", c.test_function);
  static const std::set<std::string> fns = {"colville", "friedman", "borehole", "dataset_mars_truth"};
  if (!fns.count(c.test_function)) throw FormatError("unknown test_function '" + c.test_function + "'");
  if (c.test_function == "borehole") {
    c.grid_levels = {3};
    for (int v = 500; v <= 2000; v += 100) c.sfd_sizes.push_back(v);
  }
  if (j.contains("grid_levels")) c.grid_levels = detail::get_as<std::vector<int>>(j, "grid_levels", "config");
  if (j.contains("sfd_kinds")) {
    c.sfd_kinds.clear();
    for (const auto& s : detail::get_as<std::vector<std::string>>(j, "sfd_kinds", "config")) c.sfd_kinds.push_back(parse_generator_kind(s));
  }
  if (j.contains("surrogates")) {
    c.surrogates.clear();
    for (const auto& s : detail::get_as<std::vector<std::string>>(j, "surrogates", "config")) c.surrogates.push_back(parse_surrogate_kind(s));
  }
  if (j.contains("n_g")) {
    c.n_g = detail::get_as<int>(j, "n_g", "config");
    bc.explicit_n_g = true;
  }
  if (j.contains("B")) {
    c.replications = detail::get_as<int>(j, "B", "config");
    bc.explicit_b = true;
  }
  if (j.contains("B_by_kind")) {
    for (auto it = j.at("B_by_kind").begin(); it != j.at("B_by_kind").end(); ++it)
      c.replications_by_kind[parse_surrogate_kind(it.key())] = it.value().get<int>();
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("metrics")) {
    const auto ms = detail::get_as<std::vector<std::string>>(j, "metrics", "config");
    c.rmse = std::find(ms.begin(), ms.end(), "rmse") != ms.end();
    c.mape = std::find(ms.begin(), ms.end(), "mape") != ms.end();
    for (const auto& m : ms)
      if (m != "rmse" && m != "mape") throw FormatError("unknown metric '" + m + "'");
  }
  if (j.contains("sfd_sizes")) c.sfd_sizes = detail::get_as<std::vector<int>>(j, "sfd_sizes", "config");
  if (j.contains("augment")) {
    const Json& a = j.at("augment");
    if (a.is_boolean()) c.augment = a.get<bool>() ? AugmentMode::Always : AugmentMode::Never;
    else if (a.is_string() && a.get<std::string>() == "auto") c.augment = AugmentMode::Auto;
    else throw FormatError("config.augment must be true, false or \"auto\"");
  }
  if (j.contains("criterion")) c.criterion = parse_criterion(j.at("criterion"));
  if (j.contains("surrogate")) c.surrogate = parse_surrogate_spec(j.at("surrogate"));
  c.jobs = j.value("jobs", c.jobs);
  c.self_test = j.value("self_test", c.self_test);
  bc.data = j.value("data", std::string());
  if (c.test_function == "dataset_mars_truth" && bc.data.empty())
    throw FormatError("dataset_mars_truth needs a 'data' CSV path");
  validate(c);
  return bc;
}

/// Full-scale test-set sizes and replication counts.
inline void apply_paper_scale(ExperimentConfig& c) {
  if (c.test_function == "borehole") {
    c.n_g = 5000;
    c.replications = 60;
    c.replications_by_kind[SurrogateKind::Lshep] = 180;
  } else {
    c.n_g = 10000;
    c.replications = 30;
  }
}

}  // namespace sfd
