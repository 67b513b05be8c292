#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simgap/scp.hpp"
#include "simgap/synth.hpp"
#include "simgap/systems.hpp"

namespace simgap {

using TestPoint = std::pair<Vec, Vec>;

/// Random (x, u) pairs: x uniform in `box`, u drawn from `inputs`.
std::vector<TestPoint> sample_test_points(const Box& box,
                                          const std::vector<Vec>& inputs,
                                          std::size_t count, std::uint64_t seed);

/// Per-dimension fraction of test points with |mean gap_i| <= gamma_i(x, u).
/// Uses the simulator's exact mean gap when it has one, otherwise the
/// empirical mean of `n_test` replicates.
Vec coverage_check(const GapModel& gap, const NominalModel& model,
                   const Simulator& sim, const std::vector<TestPoint>& points,
                   std::size_t n_test, std::uint64_t seed);

struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  /// The controller had no input at the last state (out of domain or losing).
  bool truncated = false;
};

struct TrajectoryBundle {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  Vec x0;
  std::size_t steps = 0;
  std::uint64_t master_seed = 0;
  std::vector<Trajectory> replicates;
  /// Step t averages the replicates that reached step t.
  std::vector<Vec> mean;
};

/// Seed of replicate `rep` at step `t`.
std::uint64_t closed_loop_seed(std::uint64_t master, std::size_t rep, std::size_t t);

/// Throws InvalidArgument naming the cell when x0 is not winning.
TrajectoryBundle run_closed_loop(const Controller& controller, const Simulator& sim,
                                 const Vec& x0, std::size_t steps,
                                 std::size_t replicates, std::uint64_t master_seed,
                                 std::size_t workers = 1);

struct SpecOutcome {
  bool satisfied = false;
  /// First step at which the spec failed (obstacle hit, unsafe state, or the
  /// point where the trajectory ended early).
  std::optional<std::size_t> violation_step;
  /// Reach-avoid: first step inside the target.
  std::optional<std::size_t> reached_step;
  bool collided = false;
};

/// `states` is expected to hold horizon + 1 states; a shorter trajectory
/// violates invariance and counts as not reached for reach-avoid unless the
/// target was entered first.
SpecOutcome check_spec(const std::vector<Vec>& states, const SpecDescriptor& spec,
                       std::size_t horizon);

struct ValidationReport {
  Vec coverage_rate;
  std::size_t coverage_points = 0;
  SpecDescriptor spec;
  std::size_t steps = 0;
  std::size_t replicates = 0;
  std::uint64_t master_seed = 0;
  Vec x0;
  std::size_t replicates_satisfied = 0;
  std::size_t replicates_truncated = 0;
  std::size_t replicates_collided = 0;
  double replicate_satisfaction_rate = 0.0;
  bool mean_satisfied = false;
  std::optional<std::size_t> mean_violation_step;
  double declared_confidence = 0.0;
  std::string controller_digest;

  bool operator==(const ValidationReport&) const;
};

ValidationReport summarize(const TrajectoryBundle& bundle, const SpecDescriptor& spec,
                           double declared_confidence);

std::string serialize_report(const ValidationReport& r);
ValidationReport parse_report(const std::string& json);

/// Writes <dir>/validation.json, <dir>/trajectories.csv (replicate, step,
/// states, inputs) and <dir>/mean.csv.
void emit_report(const ValidationReport& report, const TrajectoryBundle& bundle,
                 const std::filesystem::path& dir);

void write_trajectories_csv(const TrajectoryBundle& bundle,
                            const std::filesystem::path& path);

}  // namespace simgap
