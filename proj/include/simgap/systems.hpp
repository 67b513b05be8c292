#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "simgap/types.hpp"

namespace simgap {

/// Dimensions, sampling time, compact state box and finite input grid.
struct SystemSpec {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  double tau = 0.0;
  Box state_box;
  std::vector<Vec> input_grid;

  std::size_t input_count() const { return input_grid.size(); }

  /// Throws InvalidArgument describing the first broken invariant.
  void validate() const;
};

enum class ModelKind { turtlebot, pendulum, affine_test, user_defined };

std::string to_string(ModelKind kind);

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
};

/// Known deterministic transition map x+ = f(x, u). Immutable; safe to share
/// between threads.
class NominalModel {
 public:
  using Map = std::function<void(std::span<const double> x,
                                 std::span<const double> u, double tau,
                                 std::span<double> out)>;

  /// x1+ = x1 + tau u1 cos x3, x2+ = x2 + tau u1 sin x3, x3+ = x3 + tau u2.
  static NominalModel turtlebot(SystemSpec spec);
  /// x1+ = x1 + tau x2,
  /// x2+ = -(3 g tau / 2 l) sin x1 + x2 + 3 tau u / (m l^2).
  static NominalModel pendulum(SystemSpec spec, PendulumParams params = {});
  /// x+ = A x + B u + c with row-major A (n x n) and B (n x m).
  static NominalModel affine(SystemSpec spec, Vec a, Vec b, Vec c);
  static NominalModel user_defined(SystemSpec spec, Map map);

  const SystemSpec& spec() const { return *spec_; }
  ModelKind kind() const { return kind_; }
  const PendulumParams& pendulum_params() const { return pendulum_; }

  /// Throws InvalidArgument on non-finite or mis-sized arguments.
  Vec step(std::span<const double> x, std::span<const double> u) const;
  void step_into(std::span<const double> x, std::span<const double> u,
                 std::span<double> out) const;

 private:
  NominalModel(SystemSpec spec, ModelKind kind, Map map);

  std::shared_ptr<const SystemSpec> spec_;
  ModelKind kind_;
  Map map_;
  PendulumParams pendulum_;
};

/// One component of a synthetic bias b_i(x, u):
///   offset + state_coeffs . x + input_coeffs . u
///     + amplitude * sin(frequency * x[axis] + phase).
/// Constant, linear-in-state and sinusoidal biases are special cases.
struct BiasTerm {
  double offset = 0.0;
  Vec state_coeffs;
  Vec input_coeffs;
  double amplitude = 0.0;
  double frequency = 0.0;
  std::size_t axis = 0;
  double phase = 0.0;

  static BiasTerm constant(double c) {
    BiasTerm t;
    t.offset = c;
    return t;
  }
  static BiasTerm linear(double offset, Vec state_coeffs) {
    BiasTerm t;
    t.offset = offset;
    t.state_coeffs = std::move(state_coeffs);
    return t;
  }
  static BiasTerm sinusoid(double amplitude, double frequency,
                           std::size_t axis, double phase = 0.0) {
    BiasTerm t;
    t.amplitude = amplitude;
    t.frequency = frequency;
    t.axis = axis;
    t.phase = phase;
    return t;
  }

  double eval(std::span<const double> x, std::span<const double> u) const;
};

enum class NoiseLaw { gaussian, uniform, truncated_gaussian };

std::string to_string(NoiseLaw law);
NoiseLaw parse_noise_law(const std::string& s);

/// Zero-mean additive noise, independent per state dimension. `sigma` is the
/// standard deviation for gaussian and uniform laws; for the truncated law it
/// is the scale of the parent normal, truncated symmetrically at 2 sigma.
struct NoiseModel {
  NoiseLaw law = NoiseLaw::gaussian;
  Vec sigma;

  /// Per-dimension variance of the drawn noise.
  Vec variance() const;
};

/// A stochastic one-step simulator x+ ~ fhat(x, u, w). Instances are used by
/// one worker at a time; clone() hands out independent instances.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual const SystemSpec& spec() const = 0;
  virtual Vec step(std::span<const double> x, std::span<const double> u,
                   std::uint64_t seed) = 0;
  virtual bool supports_common_random_numbers() const = 0;
  virtual bool has_true_mean_gap() const { return false; }
  /// |E_w fhat(x,u,w) - f(x,u)| componentwise; synthetic backends only.
  virtual Vec true_mean_gap(std::span<const double> x,
                            std::span<const double> u) const;
  virtual std::unique_ptr<Simulator> clone() const = 0;
  virtual std::string describe() const = 0;
};

/// fhat = f + b(x, u) + noise. The noise draw depends on the seed only, so a
/// seed reused at different states gives common random numbers.
class SyntheticSimulator final : public Simulator {
 public:
  SyntheticSimulator(NominalModel base, std::vector<BiasTerm> bias,
                     NoiseModel noise);

  const SystemSpec& spec() const override { return base_.spec(); }
  Vec step(std::span<const double> x, std::span<const double> u,
           std::uint64_t seed) override;
  bool supports_common_random_numbers() const override { return true; }
  bool has_true_mean_gap() const override { return true; }
  Vec true_mean_gap(std::span<const double> x,
                    std::span<const double> u) const override;
  /// Signed bias b(x, u).
  Vec bias(std::span<const double> x, std::span<const double> u) const;
  std::unique_ptr<Simulator> clone() const override;
  std::string describe() const override;

  const NominalModel& base() const { return base_; }
  const NoiseModel& noise() const { return noise_; }
  const std::vector<BiasTerm>& bias_terms() const { return bias_; }

  /// The noise vector that `step` adds for a given seed.
  Vec draw_noise(std::uint64_t seed) const;

 private:
  NominalModel base_;
  std::vector<BiasTerm> bias_;
  NoiseModel noise_;
};

}  // namespace simgap
