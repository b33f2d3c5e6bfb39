// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance            run everything
//   acceptance 1 6 7      run the listed criteria only
// Criterion 11 needs SFD_HPC_DATA pointing at the HPC throughput CSV.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sfd/bench/experiment.hpp"
#include "sfd/bench/hpc.hpp"
#include "sfd/io/csv.hpp"

using namespace sfd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum class Status { Pass, Fail, Skip } status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(detail)}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double mean_rmse(const std::vector<MetricRecord>& recs, const std::string& design, const std::string& surrogate, int budget) {
  const auto rows = summarize(recs);
  const SummaryRow* r = find_row(rows, design, surrogate, budget);
  if (!r || r->failures > 0) return std::numeric_limits<double>::quiet_NaN();
  return r->rmse_mean;
}

ExperimentConfig base_config(const std::string& fn, std::uint64_t seed) {
  ExperimentConfig c;
  c.test_function = fn;
  c.n_g = 2000;
  c.replications = 10;
  c.seed = seed;
  c.mape = false;
  return c;
}

std::string batch_line(int wins, int batches, const std::string& extra) {
  return std::to_string(wins) + "/" + std::to_string(batches) + " batches" + (extra.empty() ? "" : "; " + extra);
}

// ---------------------------------------------------------------- 1

Outcome grid_sizes() {
  const auto t0 = std::chrono::steady_clock::now();
  auto space = share(DesignSpace::unit_cube(4, {dominance_constraint(4, 2, 3)}));
  const int want[] = {54, 160, 375, 756, 1372};
  std::string got;
  bool ok = true;
  for (int l = 3; l <= 7; ++l) {
    const auto n = gen_grid(space, l).size();
    ok = ok && n == want[l - 3];
    got += (got.empty() ? "" : ",") + std::to_string(n);
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return pass_if(ok && s < 1.0, "sizes " + got + " in " + fmt(s) + " s");
}

// ---------------------------------------------------------------- 2

Outcome colville_inversion() {
  int wins = 0;
  std::string worst;
  for (int b = 0; b < 10; ++b) {
    const std::uint64_t seed = 2000 + b;
    ExperimentConfig sfd = base_config("colville", seed);
    sfd.grid_levels = {3};
    sfd.sfd_kinds = {GeneratorKind::MaxPro};
    sfd.surrogates = {SurrogateKind::Gp};
    sfd.augment = AugmentMode::Always;
    ExperimentConfig gbd = sfd;
    gbd.grid_levels = {7};
    gbd.sfd_kinds = {};
    const double s = mean_rmse(run_comparison(sfd).records, "maxpro", "gp", 54);
    const double g = mean_rmse(run_comparison(gbd).records, "gbd", "gp", 1372);
    wins += s < g ? 1 : 0;
    std::printf("    batch %d: maxpro@54 %s  gbd@1372 %s\n", b, fmt(s).c_str(), fmt(g).c_str());
    std::fflush(stdout);
  }
  return pass_if(wins >= 8, batch_line(wins, 10, "need 8"));
}

// ---------------------------------------------------------------- 3

Outcome friedman_reversal() {
  int wins = 0;
  for (int b = 0; b < 10; ++b) {
    const std::uint64_t seed = 3000 + b;
    ExperimentConfig gbd = base_config("friedman", seed);
    gbd.grid_levels = {5};
    gbd.sfd_kinds = {};
    gbd.surrogates = {SurrogateKind::Gp};
    ExperimentConfig sfd = gbd;
    sfd.grid_levels = {7};
    sfd.sfd_kinds = {GeneratorKind::Uniform, GeneratorKind::MaximinLhd, GeneratorKind::MaxEnt, GeneratorKind::MaxPro};
    const double g = mean_rmse(run_comparison(gbd).records, "gbd", "gp", 375);
    const auto recs = run_comparison(sfd).records;
    bool all = std::isfinite(g);
    std::string line = "gbd@375 " + fmt(g);
    for (auto k : sfd.sfd_kinds) {
      const double s = mean_rmse(recs, to_string(k), "gp", 1372);
      all = all && g <= s;
      line += "  " + to_string(k) + "@1372 " + fmt(s);
    }
    wins += all ? 1 : 0;
    std::printf("    batch %d: %s\n", b, line.c_str());
    std::fflush(stdout);
  }
  return pass_if(wins >= 8, batch_line(wins, 10, "need 8"));
}

// ---------------------------------------------------------------- 4

Outcome borehole_win() {
  int wins = 0;
  for (int b = 0; b < 5; ++b) {
    ExperimentConfig c = base_config("borehole", 4000 + b);
    c.replications = 5;
    c.grid_levels = {3};
    c.sfd_sizes = {500};
    c.sfd_kinds = {GeneratorKind::MaxPro};
    c.surrogates = {SurrogateKind::Gp};
    c.augment = AugmentMode::Never;
    c.surrogate.gp.local_neighborhood = 50;
    const auto recs = run_comparison(c).records;
    const double s = mean_rmse(recs, "maxpro", "gp", 500);
    const double g = mean_rmse(recs, "gbd", "gp", 6561);
    wins += s < g ? 1 : 0;
    std::printf("    batch %d: maxpro@500 %s  local-gp gbd@6561 %s\n", b, fmt(s).c_str(), fmt(g).c_str());
    std::fflush(stdout);
  }
  return pass_if(wins >= 4, batch_line(wins, 5, "need 4"));
}

// ---------------------------------------------------------------- 5

Outcome colville_delaunay() {
  int wins = 0;
  for (int b = 0; b < 10; ++b) {
    ExperimentConfig c = base_config("colville", 5000 + b);
    c.grid_levels = {7};
    c.surrogates = {SurrogateKind::Delaunay};
    const auto recs = run_comparison(c).records;
    const double g = mean_rmse(recs, "gbd", "delaunay", 1372);
    bool all = std::isfinite(g);
    std::string line = "gbd " + fmt(g);
    for (auto k : c.sfd_kinds) {
      const double s = mean_rmse(recs, to_string(k), "delaunay", 1372);
      all = all && g <= s;
      line += "  " + to_string(k) + " " + fmt(s);
    }
    wins += all ? 1 : 0;
    std::printf("    batch %d: %s\n", b, line.c_str());
    std::fflush(stdout);
  }
  return pass_if(wins >= 8, batch_line(wins, 10, "need 8"));
}

// ---------------------------------------------------------------- 6

Outcome delaunay_property() {
  Rng rng(6000);
  double worst_margin = std::numeric_limits<double>::infinity(), worst_sum = 0.0, worst_affine = 0.0;
  int extrapolated = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 10 + static_cast<int>(rng.below(51));
    const PointMatrix p = random_uniform_points(n, 2, rng);
    const Vector a = (Vector(2) << rng.normal(), rng.normal()).finished();
    const double c0 = rng.normal();
    DelaunayLocator loc(p);
    for (int t = 0; t < 200; ++t) {
      const Vector q = oracle::interior_query(p, rng);
      const SimplexResult r = loc.locate(q);
      extrapolated += r.extrapolated ? 1 : 0;
      worst_margin = std::min(worst_margin, oracle::circumsphere_margin(p, r.vertex_indices));
      double sum = 0.0, f = 0.0;
      for (std::size_t i = 0; i < r.weights.size(); ++i) {
        sum += r.weights[i];
        f += r.weights[i] * (c0 + a.dot(p.row(r.vertex_indices[i]).transpose()));
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      worst_affine = std::max(worst_affine, std::abs(f - (c0 + a.dot(q))));
    }
  }
  return pass_if(extrapolated == 0 && worst_margin >= -1e-9 && worst_sum <= 1e-10 && worst_affine <= 1e-8,
                 "min circumsphere margin " + fmt(worst_margin) + ", weight-sum err " + fmt(worst_sum) +
                     ", affine err " + fmt(worst_affine) + ", extrapolated " + std::to_string(extrapolated));
}

// ---------------------------------------------------------------- 7

Outcome gp_property() {
  Rng rng(7000);
  double worst_grad = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 5 + static_cast<int>(rng.below(26));
    const int d = 1 + static_cast<int>(rng.below(4));
    const PointMatrix x = random_uniform_points(n, d, rng);
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = std::cos(2 * x(i, 0)) + x.row(i).sum() + 0.1 * rng.normal();
    z.array() -= z.mean();
    Vector p(d + 1);
    for (int k = 0; k < d; ++k) p[k] = rng.uniform(std::log(0.05), std::log(2.0));
    p[d] = rng.uniform(std::log(1e-4), std::log(1e-1));
    worst_grad = std::max(worst_grad, oracle::gradient_error(x, z, p));
  }

  double worst_repro = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const PointMatrix x = random_uniform_points(30, 2, rng);
    Vector y(30);
    for (int i = 0; i < 30; ++i) y[i] = 10 * std::sin(4 * x(i, 0)) + x(i, 1);
    auto space = share(DesignSpace::unit_cube(2));
    const Dataset data(make_design(space, x, "uniform"), y);
    GpOptions opt;
    opt.nugget_ceiling = opt.nugget_floor;
    opt.seed = static_cast<std::uint64_t>(inst);
    const Vector pred = fit_gp(data, opt).predict(x);
    const double range = y.maxCoeff() - y.minCoeff();
    worst_repro = std::max(worst_repro, (pred - y).cwiseAbs().maxCoeff() / range);
  }

  PointMatrix x1(2, 1), q(1, 1);
  x1 << 0.0, 1.0;
  q << 0.5;
  const double mu = kriging_mean(x1, (Vector(2) << 0.0, 1.0).finished(), (Vector(1) << 1.0).finished(), 0.0, q)[0];
  const double hand = std::exp(-0.25) / (1.0 + std::exp(-1.0));

  return pass_if(worst_grad <= 1e-4 && worst_repro <= 1e-6 && std::abs(mu - hand) <= 1e-10,
                 "grad rel err " + fmt(worst_grad) + ", training repro " + fmt(worst_repro) + " of range, hand example " +
                     std::to_string(mu) + " vs " + std::to_string(hand));
}

// ---------------------------------------------------------------- 8

Outcome criterion_optimality() {
  struct Inst {
    int n, d;
  };
  const Inst insts[] = {{4, 2}, {5, 2}, {6, 2}, {5, 3}, {6, 3}};
  int checks = 0, ok = 0;
  double worst = 0.0;
  std::string where;
  for (std::size_t ii = 0; ii < std::size(insts); ++ii) {
    const auto [n, d] = insts[ii];
    Rng oracle(8000 + ii);
    double best_phi = std::numeric_limits<double>::infinity(), best_mp = best_phi, best_me = -best_phi;
    for (int t = 0; t < 10000; ++t) {
      const PointMatrix l = random_lhd_points(n, d, oracle);
      best_phi = std::min(best_phi, phi_m(l, 2));
      best_mp = std::min(best_mp, maxpro_criterion(l));
      best_me = std::max(best_me, maxent_objective(random_uniform_points(n, d, oracle)));
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng r1(seed), r2(seed), r3(seed);
      const double gaps[] = {phi_m(anneal_maximin_lhd(n, d, {}, r1).points, 2) / best_phi - 1.0,
                             maxpro_criterion(anneal_maxpro(n, d, {}, r2).points) / best_mp - 1.0,
                             (best_me - maxent_objective(anneal_maxent(n, d, {}, r3).points)) / std::abs(best_me)};
      const char* names[] = {"mmlh", "maxpro", "maxent"};
      for (int k = 0; k < 3; ++k) {
        ++checks;
        ok += gaps[k] <= 0.10 ? 1 : 0;
        if (gaps[k] > worst) {
          worst = gaps[k];
          where = std::string(names[k]) + " n=" + std::to_string(n) + " d=" + std::to_string(d) + " seed " + std::to_string(seed);
        }
      }
    }
  }
  return pass_if(ok == checks, std::to_string(ok) + "/" + std::to_string(checks) + " within 10%, worst gap " + fmt(100 * worst) +
                                   "%" + (where.empty() ? "" : " (" + where + ")"));
}

// ---------------------------------------------------------------- 9

int enumerate_feasible_ccd(const DesignSpace& s) {
  const int d = s.dim();
  std::set<std::vector<double>> pts;
  for (int m = 0; m < (1 << d); ++m) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) v[static_cast<std::size_t>(k)] = (m >> k) & 1;
    pts.insert(v);
  }
  for (int k = 0; k < d; ++k)
    for (double e : {0.0, 1.0}) {
      std::vector<double> v(static_cast<std::size_t>(d), 0.5);
      v[static_cast<std::size_t>(k)] = e;
      pts.insert(v);
    }
  pts.insert(std::vector<double>(static_cast<std::size_t>(d), 0.5));
  int count = 0;
  for (const auto& v : pts) count += is_feasible_unit(s, Eigen::Map<const Vector>(v.data(), d)) ? 1 : 0;
  return count;
}

Outcome augmentation_coverage() {
  int outside = 0, queries = 0;
  for (int d = 2; d <= 4; ++d) {
    auto cube = share(DesignSpace::unit_cube(d));
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Design base = gen_maxpro(cube, 10 * d, {}, 9000 + seed);
      const Design aug = ccd_augment(base, *cube).design;
      DelaunayLocator loc(aug.points);
      const PointMatrix q = uniform_feasible_points(*cube, 500, 9100 + seed);
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const auto r = loc.locate(q.row(i).transpose());
        ++queries;
        outside += (r.extrapolated || r.projection_distance != 0.0) ? 1 : 0;
      }
    }
  }
  auto hpc = share(hpc_space());
  const Design base = gen_maxpro(hpc, 40, {}, 9200);
  const int n_a = ccd_augment(base, *hpc).report.n_a;
  const int oracle_count = enumerate_feasible_ccd(*hpc);
  return pass_if(outside == 0 && n_a == 19 && oracle_count == 19,
                 std::to_string(outside) + "/" + std::to_string(queries) + " queries extrapolated; HPC n_a " +
                     std::to_string(n_a) + " (enumeration " + std::to_string(oracle_count) + ")");
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "sfd_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({"test_function": "friedman", "grid_levels": [3, 4], "sfd_kinds": ["uniform", "mmlh", "maxent", "maxpro"],
    "surrogates": ["rsm", "mars", "lshep", "delaunay", "gp"], "n_g": 300, "B": 3, "seed": 10})";
  std::vector<std::string> outputs;
  const std::pair<int, int> runs[] = {{1, 0}, {1, 1}, {2, 0}, {4, 0}};
  for (const auto& [jobs, rep] : runs) {
    const fs::path out = dir / ("j" + std::to_string(jobs) + "_" + std::to_string(rep));
    const std::string cmd = std::string("\"") + SFDKIT_PATH + "\" --log-level error bench --config \"" + cfg.string() +
                            "\" --out-dir \"" + out.string() + "\" --jobs " + std::to_string(jobs);
    const int raw = std::system(cmd.c_str());
    if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return pass_if(false, "bench exited abnormally at --jobs " + std::to_string(jobs));
    outputs.push_back(slurp(out / "records.csv"));
  }
  bool same = !outputs[0].empty();
  for (const auto& o : outputs) same = same && o == outputs[0];
  std::size_t lines = 0;
  for (char ch : outputs[0]) lines += ch == '\n';
  return pass_if(same, std::to_string(outputs.size()) + " runs (--jobs 1,1,2,4), " + std::to_string(lines - 1) + " records, " +
                           (same ? "byte-identical" : "DIFFER"));
}

// ---------------------------------------------------------------- 11

Outcome hpc_cv() {
  const char* path = std::getenv("SFD_HPC_DATA");
  if (!path || !*path) return {Outcome::Status::Skip, "SFD_HPC_DATA not set"};
  const auto hpc = load_hpc_csv(path);
  const auto res = kfold_cv(hpc.data, 10, all_surrogate_kinds(), 11000, SurrogateSpec{});
  const CvResult* best_rmse = nullptr;
  const CvResult* best_mape = nullptr;
  std::string line;
  for (const auto& r : res) {
    line += r.kind + " rmse " + fmt(r.rmse) + " mape " + fmt(r.mape) + "; ";
    if (r.skipped) continue;
    if (!best_rmse || r.rmse < best_rmse->rmse) best_rmse = &r;
    if (!best_mape || r.mape < best_mape->mape) best_mape = &r;
  }
  const bool ok = best_rmse && best_mape && best_rmse->kind == "gp" && best_mape->kind == "delaunay";
  return pass_if(ok, line + "best rmse " + (best_rmse ? best_rmse->kind : "-") + ", best mape " + (best_mape ? best_mape->kind : "-"));
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "grid sizes 54/160/375/756/1372", grid_sizes},
      {2, "Colville GP: MaxPro@54 beats GBD@1372", colville_inversion},
      {3, "Friedman GP: GBD@375 <= every SFD@1372", friedman_reversal},
      {4, "Borehole GP: MaxPro@500 beats local GP on 6561 GBD", borehole_win},
      {5, "Colville Delaunay@1372: GBD <= every SFD", colville_delaunay},
      {6, "Delaunay simplex/weights/affine properties", delaunay_property},
      {7, "GP gradient, interpolation, hand example", gp_property},
      {8, "annealed criteria within 10% of random-search best", criterion_optimality},
      {9, "CCD augmentation coverage and HPC n_a", augmentation_coverage},
      {10, "bench records byte-identical across runs and --jobs", determinism},
      {11, "HPC 10-fold CV: GP best RMSE, Delaunay best MAPE", hpc_cv},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const Error& e) {
      o = {Outcome::Status::Fail, std::string("threw ") + e.name() + ": " + e.what()};
    } catch (const std::exception& e) {
      o = {Outcome::Status::Fail, std::string("threw ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Outcome::Status::Pass ? "PASS" : o.status == Outcome::Status::Fail ? "FAIL" : "SKIP";
    std::printf("[%s] %2d %s: %s (%.1f s)\n", tag, c.id, c.name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += o.status == Outcome::Status::Fail ? 1 : 0;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
