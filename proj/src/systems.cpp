#include "simgap/systems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/rng.hpp"

namespace simgap {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("bad number '" + s + "'");
  return v;
}

std::string format_vec(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ')';
  return os.str();
}

void SystemSpec::validate() const {
  if (state_dim < 1) throw InvalidArgument("state_dim must be >= 1");
  if (input_dim < 1) throw InvalidArgument("input_dim must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw InvalidArgument("tau must be a positive finite number");
  if (state_box.size() != state_dim)
    throw InvalidArgument("state_box has " + std::to_string(state_box.size()) +
                          " intervals, expected " + std::to_string(state_dim));
  for (std::size_t i = 0; i < state_box.size(); ++i) {
    const auto& iv = state_box[i];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
      throw InvalidArgument("state_box axis " + std::to_string(i) +
                            " must satisfy lower <= upper");
  }
  if (input_grid.empty()) throw InvalidArgument("input_grid is empty");
  for (const auto& u : input_grid) {
    if (u.size() != input_dim)
      throw InvalidArgument("input " + format_vec(u) + " has wrong dimension");
    if (!all_finite(u))
      throw InvalidArgument("input " + format_vec(u) + " is not finite");
  }
  auto sorted = input_grid;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("input_grid contains duplicate inputs");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::turtlebot: return "turtlebot";
    case ModelKind::pendulum: return "pendulum";
    case ModelKind::affine_test: return "affine-test";
    case ModelKind::user_defined: return "user-defined";
  }
  return "unknown";
}

NominalModel::NominalModel(SystemSpec spec, ModelKind kind, Map map)
    : spec_(std::make_shared<const SystemSpec>(std::move(spec))),
      kind_(kind),
      map_(std::move(map)) {
  spec_->validate();
}

NominalModel NominalModel::turtlebot(SystemSpec spec) {
  if (spec.state_dim != 3 || spec.input_dim != 2)
    throw InvalidArgument("turtlebot requires n = 3, m = 2");
  return NominalModel(std::move(spec), ModelKind::turtlebot,
                      [](std::span<const double> x, std::span<const double> u,
                         double tau, std::span<double> out) {
                        out[0] = x[0] + tau * u[0] * std::cos(x[2]);
                        out[1] = x[1] + tau * u[0] * std::sin(x[2]);
                        out[2] = x[2] + tau * u[1];
                      });
}

NominalModel NominalModel::pendulum(SystemSpec spec, PendulumParams p) {
  if (spec.state_dim != 2 || spec.input_dim != 1)
    throw InvalidArgument("pendulum requires n = 2, m = 1");
  if (!(p.mass > 0.0) || !(p.length > 0.0))
    throw InvalidArgument("pendulum mass and length must be positive");
  NominalModel model(
      std::move(spec), ModelKind::pendulum,
      [p](std::span<const double> x, std::span<const double> u, double tau,
          std::span<double> out) {
        out[0] = x[0] + tau * x[1];
        out[1] = -(3.0 * p.gravity * tau / (2.0 * p.length)) * std::sin(x[0]) +
                 x[1] + 3.0 * tau * u[0] / (p.mass * p.length * p.length);
      });
  model.pendulum_ = p;
  return model;
}

NominalModel NominalModel::affine(SystemSpec spec, Vec a, Vec b, Vec c) {
  const std::size_t n = spec.state_dim, m = spec.input_dim;
  if (a.size() != n * n || b.size() != n * m || c.size() != n)
    throw InvalidArgument("affine model matrices have inconsistent sizes");
  return NominalModel(
      std::move(spec), ModelKind::affine_test,
      [a = std::move(a), b = std::move(b), c = std::move(c), n, m](
          std::span<const double> x, std::span<const double> u, double,
          std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
          double s = c[i];
          for (std::size_t k = 0; k < n; ++k) s += a[i * n + k] * x[k];
          for (std::size_t k = 0; k < m; ++k) s += b[i * m + k] * u[k];
          out[i] = s;
        }
      });
}

NominalModel NominalModel::user_defined(SystemSpec spec, Map map) {
  if (!map) throw InvalidArgument("user-defined model needs a transition map");
  return NominalModel(std::move(spec), ModelKind::user_defined, std::move(map));
}

void NominalModel::step_into(std::span<const double> x,
                             std::span<const double> u,
                             std::span<double> out) const {
  if (x.size() != spec_->state_dim || u.size() != spec_->input_dim ||
      out.size() != spec_->state_dim)
    throw InvalidArgument("step: dimension mismatch");
  if (!all_finite(x) || !all_finite(u))
    throw InvalidArgument("step: non-finite argument x=" + format_vec(x) +
                          " u=" + format_vec(u));
  map_(x, u, spec_->tau, out);
}

Vec NominalModel::step(std::span<const double> x,
                       std::span<const double> u) const {
  Vec out(spec_->state_dim);
  step_into(x, u, out);
  return out;
}

double BiasTerm::eval(std::span<const double> x,
                      std::span<const double> u) const {
  double v = offset;
  for (std::size_t k = 0; k < state_coeffs.size() && k < x.size(); ++k)
    v += state_coeffs[k] * x[k];
  for (std::size_t k = 0; k < input_coeffs.size() && k < u.size(); ++k)
    v += input_coeffs[k] * u[k];
  if (amplitude != 0.0 && axis < x.size())
    v += amplitude * std::sin(frequency * x[axis] + phase);
  return v;
}

std::string to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::gaussian: return "gaussian";
    case NoiseLaw::uniform: return "uniform";
    case NoiseLaw::truncated_gaussian: return "truncated-gaussian";
  }
  return "unknown";
}

NoiseLaw parse_noise_law(const std::string& s) {
  if (s == "gaussian") return NoiseLaw::gaussian;
  if (s == "uniform") return NoiseLaw::uniform;
  if (s == "truncated-gaussian") return NoiseLaw::truncated_gaussian;
  throw InvalidArgument("unknown noise law '" + s + "'");
}

Vec NoiseModel::variance() const {
  // Variance of N(0,1) truncated to [-2, 2]: 1 - 2 phi(2) * 2 / (2 Phi(2) - 1).
  const double phi2 = std::exp(-2.0) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(2.0 / std::sqrt(2.0));
  const double trunc = 1.0 - 4.0 * phi2 / mass;
  Vec v(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double s2 = sigma[i] * sigma[i];
    v[i] = law == NoiseLaw::truncated_gaussian ? s2 * trunc : s2;
  }
  return v;
}

Vec Simulator::true_mean_gap(std::span<const double>,
                             std::span<const double>) const {
  throw UnsupportedOperation("true_mean_gap is only available for synthetic "
                             "simulators (backend: " + describe() + ")");
}

SyntheticSimulator::SyntheticSimulator(NominalModel base,
                                       std::vector<BiasTerm> bias,
                                       NoiseModel noise)
    : base_(std::move(base)), bias_(std::move(bias)), noise_(std::move(noise)) {
  const std::size_t n = base_.spec().state_dim;
  if (bias_.empty()) bias_.resize(n);
  if (noise_.sigma.empty()) noise_.sigma.assign(n, 0.0);
  if (bias_.size() != n || noise_.sigma.size() != n)
    throw InvalidArgument("synthetic simulator: bias and sigma need one entry "
                          "per state dimension");
  for (double s : noise_.sigma)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw InvalidArgument("synthetic simulator: sigma must be >= 0");
}

Vec SyntheticSimulator::draw_noise(std::uint64_t seed) const {
  const std::size_t n = noise_.sigma.size();
  Vec w(n, 0.0);
  Engine eng = make_engine(seed);
  switch (noise_.law) {
    case NoiseLaw::gaussian: {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (std::size_t i = 0; i < n; ++i) w[i] = noise_.sigma[i] * nd(eng);
      break;
    }
    case NoiseLaw::uniform: {
      std::uniform_real_distribution<double> ud(-1.0, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        w[i] = noise_.sigma[i] * std::sqrt(3.0) * ud(eng);
      break;
    }
    case NoiseLaw::truncated_gaussian: {
      std::normal_distribution<double> nd(0.0, 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        double z = nd(eng);
        while (std::abs(z) > 2.0) z = nd(eng);
        w[i] = noise_.sigma[i] * z;
      }
      break;
    }
  }
  return w;
}

Vec SyntheticSimulator::bias(std::span<const double> x,
                             std::span<const double> u) const {
  Vec b(bias_.size());
  for (std::size_t i = 0; i < bias_.size(); ++i) b[i] = bias_[i].eval(x, u);
  return b;
}

Vec SyntheticSimulator::step(std::span<const double> x,
                             std::span<const double> u, std::uint64_t seed) {
  Vec out = base_.step(x, u);
  const Vec w = draw_noise(seed);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += bias_[i].eval(x, u) + w[i];
  return out;
}

Vec SyntheticSimulator::true_mean_gap(std::span<const double> x,
                                      std::span<const double> u) const {
  Vec g = bias(x, u);
  for (double& v : g) v = std::abs(v);
  return g;
}

std::unique_ptr<Simulator> SyntheticSimulator::clone() const {
  return std::make_unique<SyntheticSimulator>(*this);
}

std::string SyntheticSimulator::describe() const {
  return "synthetic(" + to_string(base_.kind()) + ", " +
         to_string(noise_.law) + ")";
}

}  // namespace simgap
