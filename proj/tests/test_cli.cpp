#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("sfdkit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CliResult sfdkit(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SFDKIT_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

const std::string kConfigs = SFD_CONFIG_DIR;

}  // namespace

TEST(Cli, VersionFlag) {
  const auto dir = scratch("version");
  const CliResult r = sfdkit("--version", dir);
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("0.1.0"), std::string::npos);
}

TEST(Cli, MissingConfigIsUsageError) {
  const auto dir = scratch("missing");
  const CliResult r = sfdkit("bench --config no_such_config.json --out-dir " + (dir / "o").string(), dir);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("no_such_config.json"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto dir = scratch("unknown");
  EXPECT_EQ(sfdkit("frobnicate", dir).status, 2);
}

TEST(Cli, DesignIsDeterministic) {
  const auto dir = scratch("design");
  const CliResult a = sfdkit("design --kind maxpro --n 54 --seed 7 --dim 4", dir);
  const CliResult b = sfdkit("design --kind maxpro --n 54 --seed 7 --dim 4", dir);
  ASSERT_EQ(a.status, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  std::istringstream in(a.out);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 54);
}

TEST(Cli, DesignWritesManifest) {
  const auto dir = scratch("design_manifest");
  const fs::path out = dir / "pts.csv";
  const CliResult r = sfdkit("design --kind grid --levels 3 --space " + kConfigs + "/hpc_space.json --out " + out.string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  ASSERT_TRUE(fs::exists(out));
  const std::string man = slurp(out.string() + ".manifest.json");
  EXPECT_NE(man.find("pts.csv"), std::string::npos);
  EXPECT_NE(man.find("config_hash"), std::string::npos);
  std::istringstream in(slurp(out));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 54);
}

TEST(Cli, ReportMatchesGolden) {
  const auto dir = scratch("report");
  const std::string in = kConfigs + "/example_records.csv";
  const std::string before = slurp(in);
  const CliResult r = sfdkit("report --in " + in, dir);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kConfigs + "/example_summary.csv"));
  EXPECT_EQ(slurp(in), before);
}

TEST(Cli, ReportToDirectory) {
  const auto dir = scratch("report_dir");
  const CliResult r = sfdkit("report --in " + kConfigs + "/example_records.csv --out-dir " + (dir / "o").string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"summary.csv", "plotdata_rmse.csv", "plotdata_mape.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "o" / f)) << f;
  EXPECT_EQ(slurp(dir / "o" / "summary.csv"), slurp(kConfigs + "/example_summary.csv"));
}

TEST(Cli, FitPredictRoundTrip) {
  const auto dir = scratch("fit");
  {
    std::ofstream d(dir / "data.csv");
    d << "x1,x2,y\n";
    for (int i = 0; i <= 4; ++i)
      for (int j = 0; j <= 4; ++j) d << i * 0.25 << "," << j * 0.25 << "," << 1.0 + 2.0 * i * 0.25 - j * 0.25 << "\n";
    std::ofstream q(dir / "q.csv");
    q << "x1,x2\n0.3,0.6\n0.9,0.1\n";
  }
  const CliResult f = sfdkit("fit --data " + (dir / "data.csv").string() + " --kind delaunay --model-out " + (dir / "m.json").string(), dir);
  ASSERT_EQ(f.status, 0) << f.err;
  EXPECT_TRUE(fs::exists(dir / "m.json.manifest.json"));
  const CliResult p = sfdkit("predict --model " + (dir / "m.json").string() + " --points " + (dir / "q.csv").string(), dir);
  ASSERT_EQ(p.status, 0) << p.err;
  std::istringstream in(p.out);
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(header, "x1,x2,prediction");
  EXPECT_NEAR(std::stod(l1.substr(l1.rfind(',') + 1)), 1.0 + 0.6 - 0.6, 1e-9);
  EXPECT_NEAR(std::stod(l2.substr(l2.rfind(',') + 1)), 1.0 + 1.8 - 0.1, 1e-9);
}

TEST(Cli, RuntimeErrorNamesTheError) {
  const auto dir = scratch("runtime");
  {
    std::ofstream d(dir / "data.csv");
    d << "x1,y\n0,1\n1,2\n";
  }
  const CliResult r = sfdkit("fit --data " + (dir / "data.csv").string() + " --kind gp --model-out " + (dir / "m.json").string(), dir);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("ShapeError"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST(Cli, MalformedConfigIsFormatError) {
  const auto dir = scratch("malformed");
  {
    std::ofstream c(dir / "bad.json");
    c << R"({"test_function": "colville", "replicates": 3})";
  }
  const CliResult r = sfdkit("bench --config " + (dir / "bad.json").string() + " --out-dir " + (dir / "o").string(), dir);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("FormatError"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("replicates"), std::string::npos) << r.err;
}

TEST(Cli, BenchRecordsIndependentOfJobs) {
  const auto dir = scratch("bench");
  const std::string cfg = kConfigs + "/tiny.json";
  const std::string before = slurp(cfg);
  const CliResult a = sfdkit("bench --config " + cfg + " --out-dir " + (dir / "a").string() + " --jobs 1", dir);
  const CliResult b = sfdkit("bench --config " + cfg + " --out-dir " + (dir / "b").string() + " --jobs 2", dir);
  ASSERT_EQ(a.status, 0) << a.err;
  ASSERT_EQ(b.status, 0) << b.err;
  const std::string ra = slurp(dir / "a" / "records.csv");
  EXPECT_FALSE(ra.empty());
  EXPECT_EQ(ra, slurp(dir / "b" / "records.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
  const std::string man = slurp(dir / "a" / "manifest.json");
  for (const char* f : {"records.csv", "timings.csv", "summary.csv", "plotdata_rmse.csv", "plotdata_mape.csv"})
    EXPECT_NE(man.find(f), std::string::npos) << f;
  EXPECT_EQ(slurp(cfg), before);
}
