// sfdkit: designs, surrogate fits and the design-versus-surrogate benchmark.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sfd/bench/experiment.hpp"
#include "sfd/bench/hpc.hpp"
#include "sfd/designs.hpp"
#include "sfd/io/config.hpp"
#include "sfd/io/csv.hpp"
#include "sfd/io/model_io.hpp"
#include "sfd/rng.hpp"
#include "sfd/surrogates.hpp"
#include "sfd/version.hpp"

namespace fs = std::filesystem;

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Write to a sibling temp file, then rename over the target.
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw sfd::FormatError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw sfd::FormatError("short write to '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

struct Manifest {
  std::string command;
  std::string inputs;  // hashed: config text plus the effective arguments
  std::uint64_t seed = 0;
  std::string started;
  std::vector<std::string> outputs;

  void write(const fs::path& path) const {
    for (const auto& o : outputs)
      if (!fs::exists(o)) throw sfd::FormatError("manifest output '" + o + "' is missing");
    sfd::Json j;
    j["command"] = command;
    j["config_hash"] = hex64(sfd::fnv1a(inputs));
    j["seed"] = seed;
    j["tool_version"] = sfd::kVersion;
    j["started"] = started;
    j["finished"] = timestamp();
    j["outputs"] = outputs;
    write_atomic(path, j.dump(2) + "\n");
  }
};

std::string render(const std::function<void(std::ostream&)>& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

sfd::Dataset load_any_dataset(const std::string& path, sfd::SpacePtr space) {
  const sfd::CsvTable t = sfd::read_csv(path);
  if (t.column("y") >= 0 && t.column("x1") >= 0) return sfd::read_dataset_csv(path, std::move(space));
  auto hpc = sfd::load_hpc_csv(path);
  for (const auto& w : hpc.warnings) spdlog::info("{}", w);
  return hpc.data;
}

// ---------------------------------------------------------------- design

struct DesignArgs {
  std::string space, kind = "maxpro", out, levels;
  int n = 0, dim = 4;
  std::uint64_t seed = 1;
  bool augment = false, bin = false;
};

int cmd_design(const DesignArgs& a) {
  Manifest man{"design", "", a.seed, timestamp(), {}};
  sfd::SpacePtr space = a.space.empty() ? sfd::share(sfd::DesignSpace::unit_cube(a.dim)) : sfd::share(sfd::load_space(a.space));
  man.inputs = (a.space.empty() ? std::string() : slurp(a.space)) + "|" + a.kind + "|" + std::to_string(a.n) + "|" +
               a.levels + "|" + std::to_string(a.augment) + std::to_string(a.bin);
  sfd::GeneratorSpec spec;
  spec.kind = sfd::parse_generator_kind(a.kind);
  spec.size = a.n;
  spec.seed = a.seed;
  if (spec.kind == sfd::GeneratorKind::Grid) {
    for (const auto& s : split_list(a.levels)) spec.levels.push_back(std::stoi(s));
    if (spec.levels.empty()) throw CLI::ValidationError("--levels", "grid designs need --levels");
  } else if (a.n < 1) {
    throw CLI::ValidationError("--n", "design size must be positive");
  }
  auto built = sfd::generate(spec, space);
  sfd::Design d = built.design;
  if (built.oversample_factor > 1) spdlog::info("constraint handling oversampled by k={}", built.oversample_factor);
  if (a.bin) d = sfd::bin_to_grid(d, *space);
  if (a.augment) {
    auto aug = sfd::ccd_augment(d, *space);
    spdlog::info("ccd augmentation kept {} of {} points", aug.report.n_a, aug.report.requested_aug);
    d = aug.design;
  }
  const std::string csv = render([&](std::ostream& os) { sfd::write_points_csv(os, d.natural(), &d.tags); });
  if (a.out.empty()) {
    std::cout << csv;
    return 0;
  }
  write_atomic(a.out, csv);
  man.outputs = {a.out};
  man.write(a.out + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------- fit / predict

struct FitArgs {
  std::string data, kind = "gp", config, model_out, space;
  std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a) {
  Manifest man{"fit", "", a.seed, timestamp(), {}};
  sfd::SurrogateSpec spec;
  std::string cfg_text;
  if (!a.config.empty()) {
    cfg_text = slurp(a.config);
    spec = sfd::parse_surrogate_spec(sfd::read_json_file(a.config));
  }
  spec.kind = sfd::parse_surrogate_kind(a.kind);
  spec.gp.seed = a.seed;
  sfd::SpacePtr space = a.space.empty() ? nullptr : sfd::share(sfd::load_space(a.space));
  const sfd::Dataset data = load_any_dataset(a.data, space);
  const sfd::FittedSurrogate model = sfd::fit(data, spec);
  for (const auto& w : model.warnings) spdlog::warn("{}", w);
  write_atomic(a.model_out, sfd::model_to_json(model, data.design.space.get()).dump(1) + "\n");
  man.inputs = cfg_text + "|" + slurp(a.data) + "|" + a.kind;
  man.outputs = {a.model_out};
  man.write(a.model_out + ".manifest.json");
  spdlog::info("fitted {} on {} points", a.kind, data.size());
  return 0;
}

struct PredictArgs {
  std::string model, points, out;
};

int cmd_predict(const PredictArgs& a) {
  Manifest man{"predict", slurp(a.model) + "|" + slurp(a.points), 0, timestamp(), {}};
  const auto loaded = sfd::load_model(a.model);
  sfd::PointMatrix natural = sfd::read_points_csv(a.points, loaded.model.dim);
  sfd::PointMatrix unit = natural;
  if (loaded.space) {
    unit = sfd::to_unit_cube(*loaded.space, natural);
    int bad = 0;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) bad += sfd::is_feasible_unit(*loaded.space, unit.row(i).transpose()) ? 0 : 1;
    if (bad > 0) spdlog::warn("{} query points violate the space constraints", bad);
  }
  const auto pred = loaded.model.predict_detailed(unit);
  for (const auto& w : pred.warnings) spdlog::warn("{}", w);
  const std::string csv = render([&](std::ostream& os) { sfd::write_points_csv(os, natural, nullptr, &pred.values, "prediction"); });
  if (a.out.empty()) {
    std::cout << csv;
    return 0;
  }
  write_atomic(a.out, csv);
  man.outputs = {a.out};
  man.write(a.out + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------- bench / report

void write_report_files(const fs::path& dir, const std::vector<sfd::MetricRecord>& recs, Manifest& man) {
  const auto rows = sfd::summarize(recs);
  const fs::path summary = dir / "summary.csv", pr = dir / "plotdata_rmse.csv", pm = dir / "plotdata_mape.csv";
  write_atomic(summary, render([&](std::ostream& os) { sfd::write_summary_csv(os, rows); }));
  write_atomic(pr, render([&](std::ostream& os) { sfd::write_plotdata_csv(os, rows, true); }));
  write_atomic(pm, render([&](std::ostream& os) { sfd::write_plotdata_csv(os, rows, false); }));
  for (const auto& p : {summary, pr, pm}) man.outputs.push_back(p.string());
}

struct BenchArgs {
  std::string config, out_dir;
  bool paper_scale = false;
  int jobs = 0;
};

int cmd_bench(const BenchArgs& a) {
  const std::string text = slurp(a.config);
  sfd::BenchConfig bc = sfd::parse_bench_config(sfd::read_json_file(a.config));
  sfd::ExperimentConfig& cfg = bc.experiment;
  if (a.paper_scale) sfd::apply_paper_scale(cfg);
  if (a.jobs > 0) cfg.jobs = a.jobs;
  // relative dataset paths are taken from the config's directory
  if (!bc.data.empty() && fs::path(bc.data).is_relative()) bc.data = (fs::path(a.config).parent_path() / bc.data).string();
  Manifest man{"bench", text + "|paper_scale=" + std::to_string(a.paper_scale), cfg.seed, timestamp(), {}};
  spdlog::info("{}: n_g={} B={} jobs={}", cfg.test_function, cfg.n_g, cfg.replications, cfg.jobs);
  sfd::ExperimentReport rep;
  if (cfg.test_function == "dataset_mars_truth") {
    auto hpc = sfd::load_hpc_csv(bc.data);
    for (const auto& w : hpc.warnings) spdlog::info("{}", w);
    rep = sfd::mars_truth_experiment(hpc.data, cfg);
  } else {
    rep = sfd::run_comparison(cfg);
  }
  for (const auto& w : rep.warnings) spdlog::warn("{}", w);
  const fs::path dir = a.out_dir;
  const fs::path records = dir / "records.csv", timings = dir / "timings.csv";
  write_atomic(records, render([&](std::ostream& os) { sfd::write_records_csv(os, rep.records); }));
  write_atomic(timings, render([&](std::ostream& os) { sfd::write_timings_csv(os, rep.records); }));
  man.outputs = {records.string(), timings.string()};
  write_report_files(dir, rep.records, man);
  man.write(dir / "manifest.json");
  int failed = 0;
  for (const auto& r : rep.records) failed += r.failed ? 1 : 0;
  spdlog::info("{} records ({} failed) written to {}", rep.records.size(), failed, dir.string());
  return 0;
}

struct ReportArgs {
  std::string in, out_dir;
};

int cmd_report(const ReportArgs& a) {
  const auto recs = sfd::read_records_csv(a.in);
  if (a.out_dir.empty()) {
    sfd::write_summary_csv(std::cout, sfd::summarize(recs));
    return 0;
  }
  Manifest man{"report", slurp(a.in), 0, timestamp(), {}};
  write_report_files(a.out_dir, recs, man);
  man.write(fs::path(a.out_dir) / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------- cv

struct CvArgs {
  std::string data, out, kinds = "rsm,mars,lshep,delaunay,gp", config, space;
  int k = 10;
  std::uint64_t seed = 1;
};

int cmd_cv(const CvArgs& a) {
  sfd::SurrogateSpec base;
  std::string cfg_text;
  if (!a.config.empty()) {
    cfg_text = slurp(a.config);
    base = sfd::parse_surrogate_spec(sfd::read_json_file(a.config));
  }
  std::vector<sfd::SurrogateKind> kinds;
  for (const auto& s : split_list(a.kinds)) kinds.push_back(sfd::parse_surrogate_kind(s));
  sfd::SpacePtr space = a.space.empty() ? nullptr : sfd::share(sfd::load_space(a.space));
  const sfd::Dataset data = load_any_dataset(a.data, space);
  Manifest man{"cv", cfg_text + "|" + slurp(a.data) + "|" + std::to_string(a.k) + "|" + a.kinds, a.seed, timestamp(), {}};
  const auto res = sfd::kfold_cv(data, a.k, kinds, a.seed, base);
  for (const auto& r : res)
    if (r.skipped) spdlog::warn("{} skipped: {}", r.kind, r.note);
  const std::string csv = render([&](std::ostream& os) { sfd::write_cv_csv(os, res); });
  if (a.out.empty()) {
    std::cout << csv;
    return 0;
  }
  write_atomic(a.out, csv);
  man.outputs = {a.out};
  man.write(a.out + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("sfdkit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Space-filling and grid designs, surrogate models, and their benchmark"};
  app.set_version_flag("--version", std::string(sfd::kVersion));
  app.require_subcommand(1);
  std::string level = "info";
  app.add_option("--log-level", level, "trace, debug, info, warn, error")->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  DesignArgs da;
  auto* design = app.add_subcommand("design", "generate a design as CSV");
  design->add_option("--space", da.space, "space definition (JSON)")->check(CLI::ExistingFile);
  design->add_option("--dim", da.dim, "unit-cube dimension when no --space is given")->check(CLI::PositiveNumber);
  design->add_option("--kind", da.kind, "grid, uniform, lhd, maximin_lhd, maxpro, maxent");
  design->add_option("--n", da.n, "number of points (SFD kinds)");
  design->add_option("--levels", da.levels, "levels per factor for grid designs, e.g. 3 or 3,3,5,5");
  design->add_option("--seed", da.seed, "random seed");
  design->add_flag("--augment-ccd", da.augment, "append feasible CCD points");
  design->add_flag("--bin-to-grid", da.bin, "snap points to the space's discrete levels");
  design->add_option("--out", da.out, "output CSV (stdout if omitted)");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "fit a surrogate to a dataset CSV");
  fitc->add_option("--data", fa.data, "dataset CSV (x1..xd,y or the HPC column layout)")->required()->check(CLI::ExistingFile);
  fitc->add_option("--kind", fa.kind, "rsm, mars, lshep, delaunay, gp");
  fitc->add_option("--config", fa.config, "surrogate options (JSON)")->check(CLI::ExistingFile);
  fitc->add_option("--space", fa.space, "space definition (JSON); default: data bounding box")->check(CLI::ExistingFile);
  fitc->add_option("--seed", fa.seed, "seed for GP restarts");
  fitc->add_option("--model-out", fa.model_out, "model file to write")->required();

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "predict with a saved model");
  pred->add_option("--model", pa.model, "model file")->required()->check(CLI::ExistingFile);
  pred->add_option("--points", pa.points, "query CSV with x1..xd")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", pa.out, "output CSV (stdout if omitted)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "run the design/surrogate comparison");
  bench->add_option("--config", ba.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--out-dir", ba.out_dir, "output directory")->required();
  bench->add_flag("--paper-scale", ba.paper_scale, "use the full test-set sizes and replication counts");
  bench->add_option("--jobs", ba.jobs, "worker threads")->check(CLI::PositiveNumber);

  CvArgs ca;
  auto* cv = app.add_subcommand("cv", "k-fold cross validation of every surrogate");
  cv->add_option("--data", ca.data, "dataset CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--k", ca.k, "number of folds")->check(CLI::Range(2, 1 << 30));
  cv->add_option("--kinds", ca.kinds, "comma-separated surrogate kinds");
  cv->add_option("--config", ca.config, "surrogate options (JSON)")->check(CLI::ExistingFile);
  cv->add_option("--space", ca.space, "space definition (JSON)")->check(CLI::ExistingFile);
  cv->add_option("--seed", ca.seed, "fold shuffle seed");
  cv->add_option("--out", ca.out, "output CSV (stdout if omitted)");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "re-aggregate an existing records.csv");
  report->add_option("--in", ra.in, "records.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--out-dir", ra.out_dir, "directory for summary and plot data (stdout summary if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  spdlog::set_level(spdlog::level::from_str(level));

  try {
    if (*design) return cmd_design(da);
    if (*fitc) return cmd_fit(fa);
    if (*pred) return cmd_predict(pa);
    if (*bench) return cmd_bench(ba);
    if (*cv) return cmd_cv(ca);
    if (*report) return cmd_report(ra);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const sfd::Error& e) {
    std::cerr << "error: " << e.name() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
