#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// A 1-D drift x+ = x + 0.1 u pushed down by a constant bias of 0.05 per step.
json drift_config(const fs::path& out) {
  json j = json::parse(R"({
    "system": {"model": "affine", "tau": 1.0, "state_box": [[0.0, 1.0]],
               "input": {"lower": [-1.0], "upper": [1.0], "step": [0.5]},
               "affine": {"A": [1.0], "B": [0.1], "c": [0.0]}},
    "simulator": {"backend": "synthetic", "bias": [{"offset": -0.05}],
                  "noise": {"law": "gaussian", "sigma": [0.001]}},
    "cover": {"epsilon": 0.01},
    "sampling": {"n_hat_1": 10},
    "gap": {"basis_degree": 1, "delta1": 0.005, "delta2": 0.005},
    "synthesis": {"grid_widths": [0.02]},
    "spec": {"kind": "invariance", "safe": [[0.2, 0.8]]},
    "validation": {"x0": [0.5], "steps": 30, "replicates": 20, "coverage_points": 100},
    "seed": 7
  })");
  j["output_dir"] = out.string();
  return j;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("simgap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& j, const std::string& name = "cfg.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Runs the CLI; stdout and stderr are captured into out_ and err_.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + SIMGAP_CLI + " " + args + " > " + (dir_ / "stdout").string() +
                            " 2> " + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    out_ = slurp(dir_ / "stdout");
    err_ = slurp(dir_ / "stderr");
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::string out_, err_;
};

const char* kArtifacts[] = {"dataset.sgd", "estimation.json", "gap.json", "controller.txt",
                            "validation/validation.json", "validation/trajectories.csv",
                            "validation/mean.csv", "config.resolved.json"};

TEST_F(Cli, GapAwareRunSucceeds) {
  const auto cfg = write_config(drift_config(dir_ / "out"));
  EXPECT_EQ(run("run-all " + cfg.string()), 0) << out_ << err_;
  EXPECT_NE(out_.find("collect: "), std::string::npos);
  EXPECT_NE(out_.find("mean-trajectory satisfied"), std::string::npos) << out_;
  EXPECT_NE(out_.find("replicates 20/20 satisfied"), std::string::npos) << out_;
  for (const char* a : kArtifacts) EXPECT_TRUE(fs::exists(dir_ / "out" / a)) << a;
  EXPECT_TRUE(fs::exists(dir_ / "out" / "timing.log"));
}

TEST_F(Cli, IgnoringTheGapUnderHeavyBiasExitsTwo) {
  auto j = drift_config(dir_ / "out");
  j["synthesis"]["use_gap"] = false;
  const auto cfg = write_config(j);
  EXPECT_EQ(run("run-all " + cfg.string()), 2) << out_ << err_;
  EXPECT_NE(out_.find("mean-trajectory violated"), std::string::npos) << out_;
  EXPECT_NE(out_.find("(gap ignored)"), std::string::npos);
}

TEST_F(Cli, MissingDatasetExitsOne) {
  const auto cfg = write_config(drift_config(dir_ / "out"));
  EXPECT_EQ(run("estimate " + cfg.string()), 1);
  EXPECT_NE(err_.find("dataset not found; run collect"), std::string::npos) << err_;
  EXPECT_EQ(run("fit-gap " + cfg.string()), 1);
  EXPECT_NE(err_.find("dataset not found; run collect"), std::string::npos) << err_;
  EXPECT_EQ(run("synthesize " + cfg.string()), 1);
  EXPECT_NE(err_.find("run estimate"), std::string::npos) << err_;
  EXPECT_EQ(run("estimate " + (dir_ / "nope.json").string()), 1);
  EXPECT_NE(err_.find("config not found"), std::string::npos) << err_;
}

TEST_F(Cli, SchemaErrorsAreListedTogether) {
  auto j = drift_config(dir_ / "out");
  j["system"]["tau"] = -1.0;
  j["cover"]["epsilon"] = 0.0;
  j["sampling"]["n_hat_1"] = 1;
  j["gap"]["delta1"] = 0.0;
  j["spec"]["safe"] = json::parse("[[0.2, 1.8]]");
  j["validation"].erase("steps");
  j.erase("seed");
  j["colour"] = "blue";
  const auto cfg = write_config(j);
  EXPECT_EQ(run("collect " + cfg.string()), 1);
  for (const char* needle :
       {"system.tau", "cover.epsilon", "sampling.n_hat_1", "gap.delta1", "spec.safe",
        "validation.steps", "$.seed", "colour"})
    EXPECT_NE(err_.find(needle), std::string::npos) << needle << "\n" << err_;
  EXPECT_FALSE(fs::exists(dir_ / "out" / "dataset.sgd"));

  std::ofstream(dir_ / "bad.json") << "{\"system\": ";
  EXPECT_EQ(run("collect " + (dir_ / "bad.json").string()), 1);
  EXPECT_NE(err_.find("not valid JSON"), std::string::npos);
  EXPECT_NE(run("frobnicate " + cfg.string()), 0);
}

TEST_F(Cli, StagesAreIdempotentAndMatchRunAll) {
  const auto staged = write_config(drift_config(dir_ / "staged"), "staged.json");
  for (const char* stage : {"collect", "estimate", "fit-gap", "synthesize", "validate"})
    ASSERT_EQ(run(std::string(stage) + " " + staged.string()), 0) << stage << err_;
  std::vector<std::string> first;
  for (const char* a : kArtifacts) first.push_back(slurp(dir_ / "staged" / a));
  for (const char* stage : {"collect", "estimate", "fit-gap", "synthesize", "validate"})
    ASSERT_EQ(run(std::string(stage) + " " + staged.string()), 0) << stage;
  for (std::size_t i = 0; i < std::size(kArtifacts); ++i)
    EXPECT_EQ(slurp(dir_ / "staged" / kArtifacts[i]), first[i]) << kArtifacts[i];

  const auto all = write_config(drift_config(dir_ / "all"), "all.json");
  ASSERT_EQ(run("run-all " + all.string()), 0);
  for (std::size_t i = 0; i < std::size(kArtifacts); ++i) {
    if (std::string(kArtifacts[i]) == "config.resolved.json") continue;
    EXPECT_EQ(slurp(dir_ / "all" / kArtifacts[i]), first[i]) << kArtifacts[i];
  }
}

TEST_F(Cli, SeedAndEnvironmentOverrides) {
  const auto cfg = write_config(drift_config(dir_ / "out"));
  ASSERT_EQ(run("collect " + cfg.string() + " --seed 99",
                "SIMGAP_OUTPUT_DIR=" + (dir_ / "env").string() + " SIMGAP_WORKERS=2"),
            0)
      << err_;
  EXPECT_FALSE(fs::exists(dir_ / "out"));
  const json resolved = json::parse(slurp(dir_ / "env" / "config.resolved.json"));
  EXPECT_EQ(resolved["seed"], 99);
  EXPECT_EQ(resolved["workers"], 2);
  EXPECT_EQ(resolved["output_dir"], (dir_ / "env").string());

  ASSERT_EQ(run("collect " + cfg.string()), 0);
  EXPECT_NE(slurp(dir_ / "out" / "dataset.sgd"), slurp(dir_ / "env" / "dataset.sgd"));
  ASSERT_EQ(run("collect " + cfg.string() + " --seed 99",
                "SIMGAP_OUTPUT_DIR=" + (dir_ / "env2").string()),
            0);
  EXPECT_EQ(slurp(dir_ / "env2" / "dataset.sgd"), slurp(dir_ / "env" / "dataset.sgd"));

  EXPECT_EQ(run("collect " + cfg.string(), "SIMGAP_WORKERS=zero"), 1);
  EXPECT_NE(err_.find("SIMGAP_WORKERS"), std::string::npos);
}

TEST_F(Cli, ExternalBackend) {
  auto j = drift_config(dir_ / "out");
  j["simulator"] = {{"backend", "external"},
                    {"command", {SIMGAP_FAKE_SIM, "1", "1"}},
                    {"timeout_ms", 2000}};
  j["cover"]["epsilon"] = 0.05;
  j["sampling"]["n_hat_1"] = 3;
  const auto cfg = write_config(j);
  ASSERT_EQ(run("collect " + cfg.string()), 0) << err_;
  EXPECT_NE(out_.find("10 centers x 5 inputs x 3 replicates"), std::string::npos) << out_;
  ASSERT_EQ(run("estimate " + cfg.string()), 0) << err_;
  ASSERT_EQ(run("fit-gap " + cfg.string()), 0) << err_;

  j["simulator"]["command"] = {SIMGAP_FAKE_SIM, "1", "1", "error", "4"};
  j["output_dir"] = (dir_ / "broken").string();
  const auto broken = write_config(j, "broken.json");
  EXPECT_EQ(run("collect " + broken.string()), 1);
  EXPECT_NE(err_.find("physics engine diverged"), std::string::npos) << err_;
  EXPECT_TRUE(fs::exists(dir_ / "broken" / "dataset.partial.sgd"));
}

}  // namespace
