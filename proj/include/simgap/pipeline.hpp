#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simgap/cover.hpp"
#include "simgap/estimate.hpp"
#include "simgap/scp.hpp"
#include "simgap/synth.hpp"
#include "simgap/systems.hpp"
#include "simgap/validate.hpp"

namespace simgap {

struct SimulatorConfig {
  std::string backend = "synthetic";
  std::vector<BiasTerm> bias;
  NoiseModel noise;
  std::vector<std::string> command;
  std::int64_t timeout_ms = 5000;
};

/// Every knob of one experiment. Parsed from JSON; see README for the schema.
struct PipelineConfig {
  ModelKind model = ModelKind::pendulum;
  PendulumParams pendulum;
  Vec affine_a, affine_b, affine_c;
  SystemSpec system;
  Vec input_lower, input_upper, input_step;

  SimulatorConfig simulator;

  double epsilon = 0.0;
  std::size_t max_centers = kDefaultCoverCap;
  std::size_t n_hat_1 = 0;

  double variance_safety = 10.0;
  double lipschitz_safety = 1.2;
  std::vector<std::optional<double>> lipschitz_f_override;
  std::vector<std::optional<double>> lipschitz_fhat_override;

  std::vector<unsigned> basis_degree;
  Vec delta1, delta2;

  Vec grid_widths;
  GrowthBound::Mode growth = GrowthBound::Mode::componentwise;
  std::size_t max_transitions = kDefaultTransitionCap;
  bool use_gap = true;
  SpecDescriptor spec;

  Vec x0;
  std::size_t steps = 0;
  std::size_t replicates = 0;
  std::size_t coverage_points = 0;
  std::size_t coverage_replicates = 100;

  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "simgap-out";
  std::size_t workers = 1;
};

/// Parses and validates; throws ConfigError listing every problem found.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// The configuration with all defaults filled in, as JSON.
std::string resolved_config_json(const PipelineConfig& cfg);

/// Applies SIMGAP_OUTPUT_DIR and SIMGAP_WORKERS when set.
void apply_environment(PipelineConfig& cfg);

NominalModel make_model(const PipelineConfig& cfg);
std::unique_ptr<Simulator> make_simulator(const PipelineConfig& cfg,
                                          const NominalModel& model);

/// Artifact locations inside the output directory.
struct ArtifactPaths {
  std::filesystem::path dir;
  std::filesystem::path dataset() const { return dir / "dataset.sgd"; }
  std::filesystem::path partial_dataset() const { return dir / "dataset.partial.sgd"; }
  std::filesystem::path estimation() const { return dir / "estimation.json"; }
  std::filesystem::path gap() const { return dir / "gap.json"; }
  std::filesystem::path controller() const { return dir / "controller.txt"; }
  std::filesystem::path validation_dir() const { return dir / "validation"; }
  std::filesystem::path resolved_config() const { return dir / "config.resolved.json"; }
  std::filesystem::path timing() const { return dir / "timing.log"; }
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUnsatisfied = 2;

/// Pipeline stages. Each reads the previous stage's artifact from the output
/// directory, writes its own, prints one summary line to `log` and returns
/// an exit code. Errors are thrown.
int stage_collect(const PipelineConfig& cfg, std::ostream& log);
int stage_estimate(const PipelineConfig& cfg, std::ostream& log);
int stage_fit_gap(const PipelineConfig& cfg, std::ostream& log);
int stage_synthesize(const PipelineConfig& cfg, std::ostream& log);
int stage_validate(const PipelineConfig& cfg, std::ostream& log);
int stage_run_all(const PipelineConfig& cfg, std::ostream& log);

/// Growth bound selected by the configuration from an estimation report.
GrowthBound make_growth(const PipelineConfig& cfg, const EstimationReport& rep);

}  // namespace simgap
