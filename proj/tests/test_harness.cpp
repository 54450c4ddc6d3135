#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "qhl/errors.hpp"
#include "qhl/harness.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json poisson_config() {
  return json::parse(R"({
    "experiment": "simulate-hawkes",
    "params": {"mu": 1.0, "phi": {"variant": "zero"}, "k": {"variant": "zero"}, "horizon": 100.0},
    "n_reps": 1
  })");
}

json hawkes_config() {
  return json::parse(R"({
    "experiment": "simulate-hawkes",
    "params": {"mu": 1.0, "phi": {"variant": "exponential", "rate": 1.0, "scale": 0.3},
               "k": {"variant": "exponential", "rate": 1.0, "scale": 0.6}, "horizon": 50.0},
    "n_reps": 6, "residuals": true, "rescale_grid": 33
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("qhl_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

struct Run {
  int code;
  std::string err;
};

Run run_cli(const std::string& args, const std::string& env = "") {
  const fs::path err = scratch("stderr");
  const std::string cmd = env + " " + std::string(QHL_CLI_PATH) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
  fs::remove(err);
  return r;
}

fs::path write_config(const std::string& name, const json& cfg) {
  const fs::path p = scratch(name).string() + ".json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

}  // namespace

TEST(Harness, PoissonExample) {
  const auto res = qhl::run_experiment("simulate-hawkes", poisson_config(), 1, 1);
  ASSERT_GE(res.artifacts.size(), 3u);
  EXPECT_EQ(res.artifacts.back().name, "manifest.json");
  const auto& events = res.artifacts.front();
  EXPECT_EQ(events.name, "events_0000.csv");
  const long rows = std::count(events.content.begin(), events.content.end(), '\n') - 1;
  EXPECT_GT(rows, 70);
  EXPECT_LT(rows, 130);
  // Every artifact is listed with its size and hash.
  const auto& listed = res.manifest.at("artifacts");
  ASSERT_EQ(listed.size() + 1, res.artifacts.size());
  for (std::size_t i = 0; i < listed.size(); ++i) {
    EXPECT_EQ(listed[i].at("name"), res.artifacts[i].name);
    EXPECT_EQ(listed[i].at("bytes"), res.artifacts[i].content.size());
  }
  EXPECT_EQ(res.manifest.at("config").at("master_seed"), 1);
  EXPECT_FALSE(res.manifest.at("config").contains("threads"));
}

TEST(Harness, ManifestSufficesToRerun) {
  const auto a = qhl::run_experiment("simulate-hawkes", hawkes_config(), 42, 1);
  const json recorded = a.manifest.at("config");
  const auto b = qhl::run_experiment(recorded.at("experiment"), recorded, recorded.at("master_seed"), 2);
  ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) EXPECT_EQ(a.artifacts[i].content, b.artifacts[i].content);
}

TEST(Harness, ThreadCountDoesNotChangeBytes) {
  for (const auto& [kind, cfg] : std::vector<std::pair<std::string, json>>{
           {"simulate-hawkes", hawkes_config()},
           {"simulate-limit", json::parse(R"({"spec": {"model": {"kind": "nu", "alpha": 0.7, "lambda": 1.0,
              "mu_star": 1.0, "k": {"variant": "exponential", "rate": 1.0, "scale": 1.4142135623730951}},
              "n_steps": 64}, "n_reps": 5})")}}) {
    const auto a = qhl::run_experiment(kind, cfg, 7, 1);
    const auto b = qhl::run_experiment(kind, cfg, 7, 4);
    ASSERT_EQ(a.artifacts.size(), b.artifacts.size()) << kind;
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) EXPECT_EQ(a.artifacts[i].content, b.artifacts[i].content);
  }
}

TEST(Harness, SeedChangesOutput) {
  const auto a = qhl::run_experiment("simulate-hawkes", poisson_config(), 1, 1);
  const auto b = qhl::run_experiment("simulate-hawkes", poisson_config(), 2, 1);
  EXPECT_NE(a.artifacts.front().content, b.artifacts.front().content);
}

TEST(Harness, ValidationErrors) {
  auto cfg = poisson_config();
  cfg["n_repz"] = 3;
  EXPECT_THROW(qhl::run_experiment("simulate-hawkes", cfg, 1, 1), qhl::ConfigError);
  EXPECT_THROW(qhl::run_experiment("simulate-limit", poisson_config(), 1, 1), qhl::ConfigError);
  EXPECT_THROW(qhl::run_experiment("bogus", json::object(), 1, 1), qhl::ConfigError);
  const json unstable = json::parse(R"({"spec": {"model": {"kind": "sq", "mu": 1.0, "gamma": 0.6, "beta": 0.6,
      "k": {"variant": "exponential", "rate": 1.0, "scale": 1.4142135623730951},
      "phi": {"variant": "exponential", "rate": 1.0, "scale": 1.0}}, "n_steps": 64}, "n_reps": 1})");
  try {
    qhl::run_experiment("simulate-limit", unstable, 1, 1);
    FAIL();
  } catch (const qhl::ConfigError& e) {
    EXPECT_EQ(e.invariant(), "stability");
    const auto ej = qhl::error_json(e);
    EXPECT_EQ(ej.at("error"), "validation");
    EXPECT_EQ(ej.at("exit_code"), 2);
  }
}

TEST(Harness, ExitCodes) {
  EXPECT_EQ(qhl::exit_code_for(qhl::ConfigError("x", "y")), 2);
  EXPECT_EQ(qhl::exit_code_for(qhl::DomainError("y")), 2);
  EXPECT_EQ(qhl::exit_code_for(qhl::IoError("y")), 4);
  EXPECT_EQ(qhl::exit_code_for(qhl::AccuracyLossError(1e-3, "y")), 3);
  EXPECT_EQ(qhl::exit_code_for(qhl::ExplosionError("y")), 3);
  EXPECT_EQ(qhl::error_json(qhl::AccuracyLossError(1e-3, "y")).at("achieved_bound"), 1e-3);
}

TEST(Harness, MlTable) {
  const auto csv = qhl::ml_table_csv({1.0, 0.7}, {1.0}, {0.0, 1.0, 2.0});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "alpha,lambda,t,f,F");
  EXPECT_NE(csv.find("1,1,1,0.36787944117144233,0.6321205588285577"), std::string::npos) << csv;
  EXPECT_NE(csv.find("0.7,1,0,inf,0"), std::string::npos) << csv;
  // F^{0.7,1}(2) golden value.
  const auto pos = csv.find("0.7,1,2,");
  ASSERT_NE(pos, std::string::npos);
  const std::string row = csv.substr(pos, csv.find('\n', pos) - pos);
  EXPECT_NEAR(std::stod(row.substr(row.rfind(',') + 1)), 0.736809993200907543385, 1e-12);
}

TEST(Harness, Fnv1a) {
  EXPECT_EQ(qhl::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(qhl::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Harness, WriteFailureLeavesNothingBehind) {
  const auto res = qhl::run_experiment("simulate-hawkes", poisson_config(), 1, 1);
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "file, not a directory";
  EXPECT_THROW(qhl::write_artifacts((blocker / "sub").string(), res), qhl::IoError);
  fs::remove(blocker);

  const fs::path dir = scratch("partial");
  fs::create_directories(dir / "manifest.json");  // the last artifact cannot be written
  EXPECT_THROW(qhl::write_artifacts(dir.string(), res), qhl::IoError);
  for (const auto& a : res.artifacts) {
    if (a.name != "manifest.json") EXPECT_FALSE(fs::exists(dir / a.name)) << a.name;
  }
  fs::remove_all(dir);
}

TEST(Cli, PoissonRunWritesManifestAndIsRepeatable) {
  const auto cfg = write_config("cli_poisson", hawkes_config());
  const auto out1 = scratch("out1"), out2 = scratch("out2");
  ASSERT_EQ(run_cli("simulate-hawkes --config " + cfg.string() + " --seed 5 --out " + out1.string() + " --threads 1").code, 0);
  ASSERT_EQ(run_cli("simulate-hawkes --config " + cfg.string() + " --seed 5 --out " + out2.string(), "QHL_THREADS=3").code, 0);
  const auto manifest = json::parse(slurp(out1 / "manifest.json"));
  for (const auto& a : manifest.at("artifacts")) {
    const std::string name = a.at("name");
    EXPECT_EQ(slurp(out1 / name), slurp(out2 / name)) << name;
    EXPECT_EQ(slurp(out1 / name).size(), a.at("bytes").get<std::size_t>());
  }
  EXPECT_EQ(slurp(out1 / "manifest.json"), slurp(out2 / "manifest.json"));
  fs::remove_all(out1);
  fs::remove_all(out2);
  fs::remove(cfg);
}

TEST(Cli, InvalidConfigReportsJsonAndLeavesNoOutput) {
  const json bad = json::parse(R"({"experiment": "simulate-limit", "spec": {"model": {"kind": "sq", "mu": 1.0,
      "gamma": 0.6, "beta": 0.6, "k": {"variant": "exponential", "rate": 1.0, "scale": 1.4142135623730951},
      "phi": {"variant": "exponential", "rate": 1.0, "scale": 1.0}}, "n_steps": 64}, "n_reps": 1})");
  const auto cfg = write_config("cli_bad", bad);
  const auto out = scratch("out_bad");
  const auto r = run_cli("simulate-limit --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(r.code, 2);
  const auto ej = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(ej.at("error"), "validation");
  EXPECT_EQ(ej.at("invariant"), "stability");
  EXPECT_FALSE(fs::exists(out));
  fs::remove(cfg);

  EXPECT_EQ(run_cli("simulate-limit --config /nonexistent/config.json --out " + out.string()).code, 4);
  EXPECT_EQ(run_cli("no-such-command").code, 2);
  EXPECT_EQ(run_cli("--version").code, 0);
}
