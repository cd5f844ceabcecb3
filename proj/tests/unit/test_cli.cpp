#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "wkm_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

// Runs the CLI with stdout to `out` (relative to the work dir) and returns its exit code.
int run(const std::string& args, const std::string& out = "stdout.txt") {
  const std::string cmd = quote(WKM_CLI_PATH) + " " + args + " > " + quote(path(out)) + " 2> " + quote(path("stderr.txt"));
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(path(name), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kGauss = R"({"family":"gaussian","mu":0,"sigma":1})";
const std::string kT = R"({"family":"student_t","nu":2.5})";

std::string sample_file(const std::string& model, std::size_t n, std::uint64_t seed, const std::string& name) {
  EXPECT_EQ(run("sample --model " + quote(model) + " --n " + std::to_string(n) + " --seed " + std::to_string(seed) +
                " --out " + quote(path(name))),
            0);
  return path(name);
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("nonsense"), 2);
  EXPECT_EQ(run("sample --model " + quote(kGauss) + " --n 5"), 2);  // seed is mandatory
  EXPECT_EQ(run("sample --model " + quote(R"({"family":"cauchy"})") + " --n 5 --seed 1"), 2);
  EXPECT_EQ(run("metric --data /nonexistent.csv --model " + quote(kGauss)), 2);
  EXPECT_EQ(run("params --eta 1 --model " + quote(kT)), 2);
  EXPECT_EQ(run("sample --model " + quote("{broken") + " --n 5 --seed 1"), 2);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

TEST(Cli, SampleIsReproducible) {
  sample_file(kT, 100, 9, "s1.csv");
  sample_file(kT, 100, 9, "s2.csv");
  sample_file(kT, 100, 10, "s3.csv");
  EXPECT_EQ(slurp("s1.csv"), slurp("s2.csv"));
  EXPECT_NE(slurp("s1.csv"), slurp("s3.csv"));
  EXPECT_EQ(slurp("s1.csv").substr(0, 2), "x\n");
}

TEST(Cli, MetricSingleAtom) {
  std::ofstream(path("zero.csv")) << "x\n0\n";
  ASSERT_EQ(run("metric --data " + quote(path("zero.csv")) + " --model " + quote(kGauss) + " --weight " +
                quote(R"({"kind":"absolute","q":1.2})")),
            0);
  const auto j = json::parse(slurp("stdout.txt"));
  EXPECT_DOUBLE_EQ(j.at("value").get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j.at("q").get<double>(), 1.2);
}

TEST(Cli, TwoSampleHandExample) {
  std::ofstream(path("a.csv")) << "-1\n";
  std::ofstream(path("b.csv")) << "1\n";
  ASSERT_EQ(run("two-sample --a " + quote(path("a.csv")) + " --b " + quote(path("b.csv")) + " --weight " +
                quote(R"({"kind":"absolute","q":1})")),
            0);
  EXPECT_DOUBLE_EQ(json::parse(slurp("stdout.txt")).at("value").get<double>(), 1.0);
}

TEST(Cli, ParamsJsonAndTable) {
  ASSERT_EQ(run("params --eta 1 --delta 0.5 --json"), 0);
  const auto j = json::parse(slurp("stdout.txt"));
  EXPECT_DOUBLE_EQ(j.at("beta").get<double>(), 0.5);
  EXPECT_TRUE(j.at("feasible").get<bool>());
  ASSERT_EQ(run("params --eta 0.3 --delta 0.5"), 0);
  EXPECT_NE(slurp("stdout.txt").find("VIOLATED"), std::string::npos);
}

TEST(Cli, ValidateExitCodes) {
  const auto good = sample_file(kGauss, 1000, 1, "good.csv");
  const auto heavy = sample_file(kT, 3000, 1, "heavy.csv");
  const std::string policy = quote(R"({"core":{"mode":"fixed","eps":0.04}})");
  EXPECT_EQ(run("validate --data " + quote(good) + " --model " + quote(kGauss) + " --policy " + policy + " --seed 1"), 0);
  EXPECT_TRUE(json::parse(slurp("stdout.txt")).at("accept").get<bool>());
  EXPECT_EQ(run("validate --data " + quote(heavy) + " --model " + quote(kGauss) + " --policy " + policy + " --seed 1"), 1);
  EXPECT_FALSE(json::parse(slurp("stdout.txt")).at("accept").get<bool>());
}

TEST(Cli, BootstrapCacheReuse) {
  const std::string args = "bootstrap --model " + quote(kGauss) + " --n 50 --B 100 --seed 4 --observed 0.1 --cache-dir " +
                           quote(path("cache"));
  ASSERT_EQ(run(args + " --out " + quote(path("boot1.csv"))), 0);
  const auto first = slurp("stdout.txt");
  ASSERT_EQ(run(args + " --out " + quote(path("boot2.csv"))), 0);
  EXPECT_EQ(slurp("stdout.txt"), first);
  EXPECT_EQ(slurp("boot1.csv"), slurp("boot2.csv"));
  EXPECT_EQ(std::distance(fs::directory_iterator(path("cache")), fs::directory_iterator{}), 1);
}

// Every randomized subcommand: same seed, different thread counts, same bytes.
TEST(Cli, DeterministicAcrossThreadCounts) {
  const auto data = sample_file(kT, 400, 3, "det.csv");
  const std::string config =
      quote(R"({"scenario":"t","model":{"family":"student_t","nu":2.5},"n_grid":[10,20,40],"M":100,"repetitions":2})");
  const std::string boot = "bootstrap --model " + quote(kT) + " --n 100 --B 120 --seed 8 --observed 0.05";
  const std::string val = "validate --data " + quote(data) + " --model " + quote(kT) +
                          " --policy " + quote(R"({"B":100})") + " --seed 6";
  for (const auto& [name, args] : std::vector<std::pair<std::string, std::string>>{
           {"sample", "sample --model " + quote(kT) + " --n 500 --seed 2"},
           {"convergence", "convergence --config " + config + " --seed 5"},
           {"bootstrap", boot},
           {"validate", val}}) {
    const int a = run("--threads 1 " + args, name + "_1.out");
    const int b = run(args + " --threads 3", name + "_3.out");
    EXPECT_EQ(a, b) << name;
    EXPECT_LE(a, 1) << name;
    EXPECT_EQ(slurp(name + "_1.out"), slurp(name + "_3.out")) << name;
    EXPECT_FALSE(slurp(name + "_1.out").empty()) << name;
  }
}

TEST(Cli, ConvergenceWritesCsvAndSlopes) {
  const std::string config =
      quote(R"({"model":{"family":"pareto","alpha":2.8},"n_grid":[10,20,40,80],"M":50})");
  ASSERT_EQ(run("convergence --config " + config + " --seed 1 --out " + quote(path("conv.csv")) + " --slopes " +
                quote(path("slopes.json"))),
            0);
  const auto csv = slurp("conv.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scenario,metric,n,mean,stderr,M,seed,floor");
  const auto slopes = json::parse(slurp("slopes.json"));
  EXPECT_TRUE(slopes.contains("weighted"));
  EXPECT_TRUE(slopes.contains("ks"));
}

TEST(Cli, TailscanCsv) {
  ASSERT_EQ(run("tailscan --model " + quote(R"({"family":"pareto","alpha":2.8})") +
                " --delta 0.5 --r-min 10 --r-max 1000 --points 5"),
            0);
  const auto out = slurp("stdout.txt");
  EXPECT_EQ(out.substr(0, out.find('\n')), "R,tail_remainder,M3,tau_R2,term_core,term_tail,term_weight,total");
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 6);
}

TEST(Cli, GridReportsThreshold) {
  const auto data = sample_file(kT, 500, 12, "grid.csv");
  ASSERT_EQ(run("grid --data " + quote(data) + " --model " + quote(kT) + " --q-grid 0.5,1,2.5 --eps 0.5"), 0);
  const auto j = json::parse(slurp("stdout.txt"));
  EXPECT_DOUBLE_EQ(j.at("argmax_q").get<double>(), 0.5);
  EXPECT_TRUE(j.at("pass").get<bool>());
}
