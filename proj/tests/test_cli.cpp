#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hawkesmix/cli.hpp"

using namespace hawkesmix;
namespace fs = std::filesystem;

namespace {

const char* kModel = R"({
  "eta": [1.0, 1.0],
  "kernels": [
    [{"family": "exponential", "alpha": 0.5, "beta": 2.0}, {"family": "exponential", "alpha": 0.3, "beta": 2.0}],
    [{"family": "exponential", "alpha": 0.2, "beta": 2.0}, {"family": "exponential", "alpha": 0.4, "beta": 2.0}]
  ]
})";

const char* kExperiment = R"({
  "model": "model.json",
  "simulate": {"T": 200.0, "seed": 4},
  "spectrum": {"xi": {"min": 0, "max": 3, "count": 7},
               "f": [{"type": "constant", "k": 1}, {"type": "indicator", "a": 10, "b": 60}], "T": 100},
  "mixing": {"beta": 2.0, "gamma": 0.5, "lags": [4, 8]},
  "clt": {"f": [{"type": "constant", "k": 1}, {"type": "constant", "k": 1}],
          "T": 100, "R": 30, "seed": 5, "beta": 3, "delta": 2},
  "decay": {"i": 0, "j": 1, "window": 1, "lags": [2, 4], "R": 50, "seed": 6, "beta": 2.0, "gamma": 0.5}
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("hawkesmix_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    spit(dir / "model.json", kModel);
    spit(dir / "exp.json", kExperiment);
  }
  void TearDown() override { fs::remove_all(dir); }

  int run(const std::string& sub, const fs::path& out, std::optional<std::uint64_t> seed = std::nullopt,
          const fs::path& config = {}, std::size_t threads = 1) {
    cli::Options opt;
    opt.subcommand = sub;
    opt.config = (config.empty() ? dir / "exp.json" : config).string();
    opt.out = out.string();
    opt.seed = seed;
    opt.threads = threads;
    log.str("");
    err.str("");
    return cli::execute(opt, log, err);
  }

  // Runs the installed binary through the shell; returns its exit status.
  int shell(const std::string& args) {
    const char* bin = std::getenv("HAWKESMIX_BIN");
    if (!bin) return -1;
    const std::string cmd = std::string(bin) + " " + args + " >" + (dir / "stdout").string() + " 2>" +
                            (dir / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir;
  std::ostringstream log, err;
};

}  // namespace

TEST_F(Cli, ValidatePrintsRhoAndMean) {
  EXPECT_EQ(run("validate", dir / "out"), 0) << err.str();
  EXPECT_NE(log.str().find("rho = 0.7"), std::string::npos) << log.str();
  EXPECT_NE(log.str().find("3.333333333333333"), std::string::npos);
  const auto summary = Json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_NEAR(summary["rho"].get<double>(), 0.7, 1e-12);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST_F(Cli, SupercriticalIsRefused) {
  spit(dir / "model.json", R"({"eta": [1], "kernels": [[{"family": "exponential", "alpha": 1.2, "beta": 1}]]})");
  EXPECT_EQ(run("validate", dir / "out"), 2);
  EXPECT_NE(err.str().find(kSubcriticality), std::string::npos) << err.str();
}

TEST_F(Cli, UnknownKeyIsPointedAt) {
  auto cfg = Json::parse(kExperiment);
  cfg["simulate"]["bogus"] = 1;
  spit(dir / "exp.json", cfg.dump());
  EXPECT_EQ(run("simulate", dir / "out"), 1);
  EXPECT_NE(err.str().find("/simulate/bogus"), std::string::npos) << err.str();
  cfg = Json::parse(kExperiment);
  cfg["extra"] = true;
  spit(dir / "exp.json", cfg.dump());
  EXPECT_EQ(run("validate", dir / "out"), 1);
  EXPECT_NE(err.str().find("/extra"), std::string::npos);
}

TEST_F(Cli, BadValuesArePointedAt) {
  auto model = Json::parse(kModel);
  model["kernels"][0][1]["alpha"] = "big";
  spit(dir / "model.json", model.dump());
  EXPECT_EQ(run("validate", dir / "out"), 1);
  EXPECT_NE(err.str().find("/model/kernels/0/1/alpha"), std::string::npos) << err.str();
  model = Json::parse(kModel);
  model["kernels"][1][0]["beta"] = -1.0;
  spit(dir / "model.json", model.dump());
  EXPECT_EQ(run("validate", dir / "out"), 1);
  EXPECT_NE(err.str().find("/model/kernels/1/0"), std::string::npos) << err.str();
  spit(dir / "model.json", kModel);
  auto cfg = Json::parse(kExperiment);
  cfg["clt"]["f"][1]["type"] = "sawtooth";
  spit(dir / "exp.json", cfg.dump());
  EXPECT_EQ(run("clt-test", dir / "out"), 1);
  EXPECT_NE(err.str().find("/clt/f/1/type"), std::string::npos) << err.str();
}

TEST_F(Cli, MissingBlock) {
  auto cfg = Json::parse(kExperiment);
  cfg.erase("mixing");
  spit(dir / "exp.json", cfg.dump());
  EXPECT_EQ(run("mixing-bound", dir / "out"), 1);
  EXPECT_NE(err.str().find("/mixing"), std::string::npos);
}

TEST_F(Cli, HypothesisRefusalInBlock) {
  auto cfg = Json::parse(kExperiment);
  cfg["clt"]["delta"] = 0.5;  // (beta - 1) delta = 1
  spit(dir / "exp.json", cfg.dump());
  EXPECT_EQ(run("clt-test", dir / "out"), 2);
  EXPECT_NE(err.str().find(kCltRate), std::string::npos) << err.str();
}

TEST_F(Cli, EverySubcommandIsDeterministic) {
  for (const std::string sub : {"validate", "simulate", "spectrum", "variance", "mixing-bound", "clt-test", "decay"}) {
    const int a = run(sub, dir / "a", std::nullopt, {}, 1);
    const int b = run(sub, dir / "b", std::nullopt, {}, 3);
    ASSERT_EQ(a, b) << sub << err.str();
    ASSERT_TRUE(a == 0 || a == 3) << sub << err.str();
    const auto manifest = Json::parse(slurp(dir / "a" / "manifest.json"));
    const std::string hash = manifest["config_hash"];
    for (const auto& name : manifest["artifacts"]) {
      const std::string n = name;
      const std::string body = slurp(dir / "a" / n);
      EXPECT_EQ(body, slurp(dir / "b" / n)) << sub << " " << n;
      if (n != "config.json") {
        EXPECT_NE(body.find(hash), std::string::npos) << sub << " " << n;
      }
    }
    EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
    fs::remove_all(dir / "a");
    fs::remove_all(dir / "b");
  }
}

TEST_F(Cli, SeedOverrideAndManifestReplay) {
  ASSERT_EQ(run("simulate", dir / "a"), 0);
  ASSERT_EQ(run("simulate", dir / "b", 99), 0);
  EXPECT_NE(slurp(dir / "a" / "events.csv"), slurp(dir / "b" / "events.csv"));
  const auto mb = Json::parse(slurp(dir / "b" / "manifest.json"));
  EXPECT_EQ(mb["seed"].get<std::uint64_t>(), 99u);
  EXPECT_NE(mb["config_hash"], Json::parse(slurp(dir / "a" / "manifest.json"))["config_hash"]);
  // The written config replays the run exactly.
  ASSERT_EQ(run("simulate", dir / "c", std::nullopt, dir / "b" / "config.json"), 0);
  EXPECT_EQ(slurp(dir / "b" / "events.csv"), slurp(dir / "c" / "events.csv"));
  EXPECT_EQ(slurp(dir / "b" / "manifest.json"), slurp(dir / "c" / "manifest.json"));
}

TEST_F(Cli, EventCsvRoundTrip) {
  ASSERT_EQ(run("simulate", dir / "a"), 0);
  std::ifstream in(dir / "a" / "events.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# config_hash: ", 0), 0u);
  std::getline(in, line);
  EXPECT_EQ(line, "component,time");
  cli::Options opt;
  opt.subcommand = "simulate";
  opt.config = (dir / "exp.json").string();
  const auto model = cli::load(opt).model;
  const EventLog log = simulate_cluster(model, 200.0, default_burn_in(model), 4);
  std::size_t n = 0;
  double prev = -1.0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(comma + 1));
    const auto c = std::stoul(line.substr(0, comma));
    EXPECT_GE(t, prev);
    prev = t;
    EXPECT_TRUE(std::binary_search(log.events[c].begin(), log.events[c].end(), t));
    ++n;
  }
  EXPECT_EQ(n, log.total_events());
}

TEST_F(Cli, BinaryExitCodesAndEnvOutput) {
  if (!std::getenv("HAWKESMIX_BIN")) GTEST_SKIP() << "HAWKESMIX_BIN not set";
  const std::string cfg = "--config " + (dir / "exp.json").string();
  setenv("HAWKESMIX_OUT", (dir / "envout").c_str(), 1);
  EXPECT_EQ(shell("validate " + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "envout" / "summary.json"));
  EXPECT_NE(slurp(dir / "stdout").find("rho = "), std::string::npos);
  unsetenv("HAWKESMIX_OUT");
  EXPECT_EQ(shell("mixing-bound " + cfg + " --out " + (dir / "o").string() + " --threads 2"), 0);
  EXPECT_NE(slurp(dir / "stdout").find("tau bound"), std::string::npos);
  EXPECT_EQ(shell("validate"), 1);
  EXPECT_EQ(shell("frobnicate " + cfg), 1);
  spit(dir / "model.json", R"({"eta": [1], "kernels": [[{"family": "uniform", "alpha": 1.5, "a": 1}]]})");
  EXPECT_EQ(shell("validate " + cfg + " --out " + (dir / "o").string()), 2);
  EXPECT_NE(slurp(dir / "stderr").find("subcriticality"), std::string::npos);
}
