#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/validate.hpp"

namespace simgap {
namespace {

SystemSpec drift_spec() {
  SystemSpec s;
  s.state_dim = 2;
  s.input_dim = 1;
  s.tau = 1.0;
  s.state_box = {{-1, 1}, {-1, 1}};
  s.input_grid = {{0}, {-1}, {1}};
  return s;
}

// x+ = x + 0.05 u on both axes.
NominalModel drift_model() {
  return NominalModel::affine(drift_spec(), {1, 0, 0, 1}, {0.05, 0.05}, {0, 0});
}

GapModel constant_gap(double g) {
  GapModel gap = GapModel::zero(2, 1);
  for (auto& d : gap.dims) d.q = {g};
  return gap;
}

// Hides the exact mean gap so coverage falls back to replicate averages.
class OpaqueSimulator final : public Simulator {
 public:
  explicit OpaqueSimulator(SyntheticSimulator inner) : inner_(std::move(inner)) {}
  const SystemSpec& spec() const override { return inner_.spec(); }
  Vec step(std::span<const double> x, std::span<const double> u, std::uint64_t seed) override {
    return inner_.step(x, u, seed);
  }
  bool supports_common_random_numbers() const override { return true; }
  std::unique_ptr<Simulator> clone() const override {
    return std::make_unique<OpaqueSimulator>(inner_);
  }
  std::string describe() const override { return "opaque"; }

 private:
  SyntheticSimulator inner_;
};

Controller hold_controller() {
  static const NominalModel model = drift_model();
  static const GapModel gap = GapModel::zero(2, 1);
  const SymbolicModel sym(model, gap, StateGrid(drift_spec().state_box, {0.1, 0.1}),
                          GrowthBound::euclidean({0, 0}));
  SpecDescriptor spec;
  spec.safe = drift_spec().state_box;
  return synthesize(sym, spec);
}

TEST(Coverage, AllCoveredAndNoneCovered) {
  const auto model = drift_model();
  SyntheticSimulator sim(model, {BiasTerm::constant(0.01), BiasTerm::constant(-0.01)},
                         NoiseModel{NoiseLaw::gaussian, {0.001, 0.001}});
  const auto pts = sample_test_points(drift_spec().state_box, drift_spec().input_grid, 1000, 5);
  EXPECT_EQ(coverage_check(constant_gap(0.02), model, sim, pts, 0, 1), (Vec{1.0, 1.0}));
  EXPECT_EQ(coverage_check(constant_gap(0.005), model, sim, pts, 0, 1), (Vec{0.0, 0.0}));

  OpaqueSimulator opaque(sim);
  EXPECT_EQ(coverage_check(constant_gap(0.02), model, opaque, pts, 50, 1), (Vec{1.0, 1.0}));
  EXPECT_EQ(coverage_check(constant_gap(0.005), model, opaque, pts, 50, 1), (Vec{0.0, 0.0}));
  EXPECT_THROW(coverage_check(constant_gap(0.02), model, opaque, pts, 0, 1), InvalidArgument);
}

TEST(Coverage, TestPointsStayInBox) {
  const auto pts = sample_test_points({{2, 3}}, {{7}, {8}}, 500, 9);
  ASSERT_EQ(pts.size(), 500u);
  bool saw7 = false, saw8 = false;
  for (const auto& [x, u] : pts) {
    EXPECT_TRUE(x[0] >= 2 && x[0] <= 3);
    saw7 = saw7 || u[0] == 7;
    saw8 = saw8 || u[0] == 8;
  }
  EXPECT_TRUE(saw7 && saw8);
  EXPECT_EQ(sample_test_points({{2, 3}}, {{7}}, 10, 4), sample_test_points({{2, 3}}, {{7}}, 10, 4));
}

TEST(ClosedLoop, NoiselessReplicatesAreIdentical) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {BiasTerm::constant(0.001), BiasTerm::constant(0.0)},
                         NoiseModel{NoiseLaw::gaussian, {0, 0}});
  const auto b = run_closed_loop(ctl, sim, {0.05, 0.05}, 20, 8, 3);
  ASSERT_EQ(b.replicates.size(), 8u);
  for (const auto& tr : b.replicates) {
    EXPECT_EQ(tr.states, b.replicates[0].states);
    EXPECT_EQ(tr.states.size(), 21u);
    EXPECT_FALSE(tr.truncated);
  }
  ASSERT_EQ(b.mean.size(), 21u);
  for (std::size_t t = 0; t <= 20; ++t)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(b.mean[t][i], b.replicates[0].states[t][i], 1e-15);
}

TEST(ClosedLoop, SingleReplicateMeanIsTheTrajectory) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {}, NoiseModel{NoiseLaw::gaussian, {0.002, 0.002}});
  const auto b = run_closed_loop(ctl, sim, {0.0, 0.0}, 15, 1, 11);
  ASSERT_EQ(b.replicates.size(), 1u);
  EXPECT_EQ(b.mean, b.replicates[0].states);
}

TEST(ClosedLoop, MeanIsPerStepAverage) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {BiasTerm::constant(0.002), BiasTerm::constant(0.0)},
                         NoiseModel{NoiseLaw::gaussian, {0.005, 0.005}});
  const auto b = run_closed_loop(ctl, sim, {0.0, 0.0}, 30, 50, 12, 3);
  ASSERT_EQ(b.mean.size(), 31u);
  for (std::size_t t = 0; t <= 30; ++t) {
    Vec acc(2, 0.0);
    std::size_t alive = 0;
    for (const auto& tr : b.replicates) {
      if (tr.states.size() <= t) continue;
      ++alive;
      for (std::size_t i = 0; i < 2; ++i) acc[i] += tr.states[t][i];
    }
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(b.mean[t][i], acc[i] / alive, 1e-12);
  }
}

TEST(ClosedLoop, SeedReproducibilityAndWorkerIndependence) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {}, NoiseModel{NoiseLaw::uniform, {0.01, 0.01}});
  const auto a = run_closed_loop(ctl, sim, {0.0, 0.0}, 25, 12, 99, 1);
  const auto b = run_closed_loop(ctl, sim, {0.0, 0.0}, 25, 12, 99, 4);
  const auto c = run_closed_loop(ctl, sim, {0.0, 0.0}, 25, 12, 100, 1);
  for (std::size_t r = 0; r < 12; ++r) EXPECT_EQ(a.replicates[r].states, b.replicates[r].states);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_NE(a.replicates[0].states, c.replicates[0].states);
}

TEST(ClosedLoop, RejectsLosingInitialState) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {}, NoiseModel{NoiseLaw::gaussian, {0, 0}});
  EXPECT_THROW(run_closed_loop(ctl, sim, {3.0, 0.0}, 5, 2, 1), InvalidArgument);
}

TEST(ClosedLoop, TruncatesWhenLeavingTheDomain) {
  const Controller ctl = hold_controller();
  SyntheticSimulator sim(drift_model(), {BiasTerm::constant(0.3), BiasTerm::constant(0.0)},
                         NoiseModel{NoiseLaw::gaussian, {0, 0}});
  const auto b = run_closed_loop(ctl, sim, {0.0, 0.0}, 10, 2, 1);
  for (const auto& tr : b.replicates) {
    EXPECT_TRUE(tr.truncated);
    EXPECT_LT(tr.states.size(), 11u);
  }
  SpecDescriptor spec;
  spec.safe = drift_spec().state_box;
  const auto rep = summarize(b, spec, 0.9);
  EXPECT_EQ(rep.replicates_truncated, 2u);
  EXPECT_EQ(rep.replicates_satisfied, 0u);
  EXPECT_FALSE(rep.mean_satisfied);
}

std::vector<Vec> line(std::initializer_list<double> xs) {
  std::vector<Vec> out;
  for (double x : xs) out.push_back({x});
  return out;
}

TEST(CheckSpec, Invariance) {
  SpecDescriptor s;
  s.safe = {{0, 1}};
  EXPECT_TRUE(check_spec(line({0.5, 0.5, 0.5, 0.5}), s, 3).satisfied);
  EXPECT_TRUE(check_spec(line({0, 1, 0, 1}), s, 3).satisfied);
  const auto out = check_spec(line({0.5, 0.9, 1.1, 0.5}), s, 3);
  EXPECT_FALSE(out.satisfied);
  EXPECT_EQ(out.violation_step, 2u);
  const auto shortened = check_spec(line({0.5, 0.5}), s, 3);
  EXPECT_FALSE(shortened.satisfied);
  EXPECT_EQ(shortened.violation_step, 2u);
  EXPECT_TRUE(check_spec(line({0.5}), s, 0).satisfied);
}

TEST(CheckSpec, ReachAvoid) {
  SpecDescriptor s;
  s.kind = SpecDescriptor::Kind::reach_avoid;
  s.target = {{0.9, 1.0}};
  s.obstacles = {{{0.4, 0.5}}};
  auto reached = check_spec(line({0.0, 0.6, 0.95, 0.45}), s, 3);
  EXPECT_TRUE(reached.satisfied);
  EXPECT_EQ(reached.reached_step, 2u);
  EXPECT_FALSE(reached.collided);

  auto hit = check_spec(line({0.0, 0.45, 0.95, 0.95}), s, 3);
  EXPECT_FALSE(hit.satisfied);
  EXPECT_TRUE(hit.collided);
  EXPECT_EQ(hit.violation_step, 1u);

  auto late = check_spec(line({0.0, 0.2, 0.3, 0.95}), s, 3);
  EXPECT_TRUE(late.satisfied);
  s.deadline = 2;
  late = check_spec(line({0.0, 0.2, 0.3, 0.95}), s, 3);
  EXPECT_FALSE(late.satisfied);
  EXPECT_EQ(late.violation_step, 3u);

  s.deadline = 0;
  EXPECT_TRUE(check_spec(line({0.95}), s, 3).satisfied);
  auto never = check_spec(line({0.0, 0.1}), s, 3);
  EXPECT_FALSE(never.satisfied);
  EXPECT_EQ(never.violation_step, 2u);
}

// Every 3-step trajectory over five sample points, against a direct reading
// of the specification.
TEST(CheckSpec, ExhaustiveThreeStepOracle) {
  const double pts[] = {0.0, 0.3, 0.45, 0.7, 0.95};
  SpecDescriptor inv;
  inv.safe = {{0.0, 0.8}};
  SpecDescriptor ra;
  ra.kind = SpecDescriptor::Kind::reach_avoid;
  ra.target = {{0.9, 1.0}};
  ra.obstacles = {{{0.4, 0.5}}};
  for (int code = 0; code < 625; ++code) {
    std::vector<Vec> tr;
    int c = code;
    for (int t = 0; t < 4; ++t, c /= 5) tr.push_back({pts[c % 5]});
    bool safe = true;
    for (const auto& x : tr) safe = safe && x[0] <= 0.8;
    EXPECT_EQ(check_spec(tr, inv, 3).satisfied, safe);
    bool ok = false, done = false;
    for (const auto& x : tr) {
      if (done) break;
      if (x[0] >= 0.4 && x[0] <= 0.5) done = true;
      else if (x[0] >= 0.9) ok = done = true;
    }
    EXPECT_EQ(check_spec(tr, ra, 3).satisfied, ok) << code;
  }
}

TrajectoryBundle tiny_bundle(std::size_t reps, std::size_t steps) {
  TrajectoryBundle b;
  b.state_dim = 2;
  b.input_dim = 1;
  b.steps = steps;
  b.x0 = {0, 0};
  for (std::size_t r = 0; r < reps; ++r) {
    Trajectory tr;
    tr.states.push_back({0, 0});
    for (std::size_t t = 0; t < steps; ++t) {
      tr.inputs.push_back({1});
      tr.states.push_back({0.1 * (t + 1), double(r)});
    }
    b.replicates.push_back(tr);
  }
  return b;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

TEST(Report, TrajectoryCsv) {
  const auto dir = std::filesystem::temp_directory_path() / "simgap_validate_csv";
  std::filesystem::create_directories(dir);
  write_trajectories_csv(tiny_bundle(0, 0), dir / "empty.csv");
  EXPECT_EQ(read_lines(dir / "empty.csv"), std::vector<std::string>{"replicate,step,x1,x2,u1"});
  write_trajectories_csv(tiny_bundle(2, 1), dir / "t.csv");
  const auto lines = read_lines(dir / "t.csv");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[1], "0,0,0,0,1");
  EXPECT_EQ(lines[2], "0,1,0.1,0,");
  EXPECT_EQ(lines[4], "1,1,0.1,1,");
  std::filesystem::remove_all(dir);
}

TEST(Report, RoundTripAndEmit) {
  SpecDescriptor s;
  s.kind = SpecDescriptor::Kind::reach_avoid;
  s.target = {{0.9, 1.0}, {-1, 1}};
  s.obstacles = {{{0.4, 0.5}, {-1, 1}}};
  s.deadline = 4;
  auto b = tiny_bundle(3, 2);
  b.mean = b.replicates[1].states;
  ValidationReport r = summarize(b, s, 0.93);
  r.coverage_rate = {1.0, 0.998};
  r.coverage_points = 500;
  r.controller_digest = "deadbeef";
  const ValidationReport back = parse_report(serialize_report(r));
  EXPECT_EQ(back, r);
  EXPECT_EQ(back.replicates, 3u);
  EXPECT_EQ(back.declared_confidence, 0.93);
  EXPECT_THROW(parse_report("{\"kind\":\"other\"}"), InvalidArgument);
  EXPECT_THROW(parse_report("[1,2"), InvalidArgument);

  const auto dir = std::filesystem::temp_directory_path() / "simgap_validate_emit";
  std::filesystem::remove_all(dir);
  emit_report(r, b, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "validation.json"));
  EXPECT_EQ(read_lines(dir / "trajectories.csv").size(), 10u);
  const auto mean = read_lines(dir / "mean.csv");
  ASSERT_EQ(mean.size(), 4u);
  EXPECT_EQ(mean[0], "step,x1,x2");
  EXPECT_EQ(mean[2], "1,0.1,1");
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace simgap
