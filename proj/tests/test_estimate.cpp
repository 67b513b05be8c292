#include <gtest/gtest.h>

#include <cmath>

#include "simgap/error.hpp"
#include "simgap/estimate.hpp"
#include "simgap/rng.hpp"

namespace simgap {
namespace {

TEST(SampleVariance, Examples) {
  EXPECT_EQ(sample_variance(Vec{1, 1, 1}), 0.0);
  EXPECT_EQ(sample_variance(Vec{0, 2}), 2.0);
  EXPECT_THROW(sample_variance(Vec{1}), InvalidArgument);
  Engine eng = make_engine(1);
  std::normal_distribution<double> d(3.0, 0.1);
  Vec v(10000);
  for (double& x : v) x = d(eng);
  const double s = sample_variance(v);
  EXPECT_GE(s, 0.008);
  EXPECT_LE(s, 0.012);
}

// One-dimensional dataset with hand-set replicate values.
Dataset handmade(const std::vector<Vec>& replicate_values) {
  Dataset ds;
  ds.spec.state_dim = 1;
  ds.spec.input_dim = 1;
  ds.spec.tau = 1;
  ds.spec.state_box = {{0, 1}};
  ds.spec.input_grid = {{0}};
  ds.cover = build_cover({{0, 1}}, 0.5 / static_cast<double>(replicate_values.size()));
  ds.n_hat_1 = replicate_values[0].size();
  for (std::size_t r = 0; r < replicate_values.size(); ++r) {
    DatasetRecord rec;
    rec.r = r;
    rec.nominal = {0.0};
    rec.replicates = replicate_values[r];
    rec.seeds.assign(ds.n_hat_1, 0);
    ds.records.push_back(rec);
  }
  return ds;
}

TEST(VarianceBound, Examples) {
  EXPECT_EQ(variance_bound(handmade({{1, 1}, {2, 2}}), 0, 10), 0.0);
  // Sample variance of {0, d} is d^2 / 2.
  const double d = std::sqrt(0.0014);
  const double b = variance_bound(handmade({{0, d}, {0, 0.01}}), 0, 10);
  EXPECT_NEAR(b, 0.007, 1e-15);
  EXPECT_THROW(variance_bound(handmade({{0, 1}}), 0, 0.5), InvalidArgument);
}

TEST(VarianceBound, GaussianDataset) {
  SystemSpec s;
  s.state_dim = 2;
  s.input_dim = 1;
  s.tau = 0.1;
  s.state_box = {{-0.5, 0.5}, {-0.5, 0.5}};
  s.input_grid = {{-1}, {0}, {1}};
  const auto model = NominalModel::pendulum(s);
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.1, 0.1}});
  const Dataset ds = collect_dataset(model, sim, build_cover(s.state_box, 0.25), 1000, 3);
  for (std::size_t i = 0; i < 2; ++i) {
    const double m = variance_bound(ds, i, 10);
    EXPECT_GE(m, 0.08);
    EXPECT_LE(m, 0.13);
    // Dominance holds exactly, record by record.
    for (double v : record_variances(ds, i)) EXPECT_LE(v, m);
  }
}

TEST(Lipschitz, ConstantAndLinear) {
  std::vector<Vec> states;
  for (int i = 0; i <= 20; ++i) states.push_back({0.05 * i});
  EXPECT_EQ(estimate_lipschitz(states, {Vec(21, 4.2)}), 0.0);
  Vec g;
  for (const auto& x : states) g.push_back(2 * x[0]);
  EXPECT_NEAR(estimate_lipschitz(states, {g}), 2.0, 1e-12);
  EXPECT_THROW(estimate_lipschitz(std::vector<Vec>{{1}, {1}}, {Vec{0, 1}}), InvalidArgument);
}

TEST(Lipschitz, TurtlebotHeadingUpdate) {
  SystemSpec s;
  s.state_dim = 3;
  s.input_dim = 2;
  s.tau = 0.01;
  s.state_box = {{0, 1}, {0, 1}, {-1, 1}};
  s.input_grid = enumerate_inputs({-1, -1}, {1, 1}, {0.5, 0.5});
  const auto model = NominalModel::turtlebot(s);
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0, 0, 0}});
  const Dataset ds = collect_dataset(model, sim, build_cover(s.state_box, 0.1), 2, 1);
  EstimateOptions opt;
  opt.lipschitz_safety = 1.05;
  const EstimationReport rep = estimate(ds, opt);
  EXPECT_GE(rep.dims[2].lipschitz_f, 1.0);
  EXPECT_LE(rep.dims[2].lipschitz_f, 1.1);
  // Growth rows: f3 depends on x3 only.
  EXPECT_NEAR(rep.dims[2].growth_row[2], 1.05, 1e-9);
  EXPECT_EQ(rep.dims[2].growth_row[0], 0.0);
  EXPECT_EQ(rep.dims[0].variance_bound, 0.0);
}

TEST(Beta, Examples) {
  EXPECT_NEAR(beta1(0.1, 0.1, 1000), 0.01, 1e-15);
  EXPECT_EQ(beta1(0, 0.3, 7), 0.0);
  EXPECT_NEAR(beta1(0.0101, 0.05, 1000), 0.00404, 1e-15);
  EXPECT_NEAR(beta2(0.1, 0.1, 1000), 0.02, 1e-15);
  EXPECT_EQ(beta2(0, 0.3, 7), 0.0);
  EXPECT_EQ(beta1(5.0, 0.01, 1), 1.0);
  EXPECT_THROW(beta1(0.1, 0.0, 10), InvalidArgument);
}

TEST(Beta, IdentityAndMonotonicity) {
  Engine eng = make_engine(17);
  std::uniform_real_distribution<double> m(0, 0.01), d(0.01, 0.5);
  for (int t = 0; t < 1000; ++t) {
    const double M = m(eng), delta = d(eng);
    const std::size_t N = 1 + t;
    const double b1 = beta1(M, delta, N), b2 = beta2(M, delta, N);
    if (b2 < 1.0) {
      EXPECT_DOUBLE_EQ(b2, 2 * b1);
    } else {
      EXPECT_GE(2 * b1, 1.0 - 1e-12);
    }
    EXPECT_LE(beta1(M, delta, N + 5), b1);
    EXPECT_LE(beta1(M, delta * 1.1, N), b1);
    EXPECT_GE(beta1(M * 1.1, delta, N), b1);
    EXPECT_LE(beta2(M, delta, N + 5), b2);
    EXPECT_LE(beta2(M, delta * 1.1, N), b2);
    EXPECT_GE(beta2(M * 1.1, delta, N), b2);
  }
}

// Frequency of Chebyshev failures for the empirical mean (beta1) and for the
// difference of two independent empirical means (beta2).
TEST(Beta, ChebyshevFrequency) {
  const double sigma2 = 0.04, delta = 0.1;
  const std::size_t n = 20, trials = 10000;
  Engine eng = make_engine(99);
  std::normal_distribution<double> w(0.0, std::sqrt(sigma2));
  std::size_t fail1 = 0, fail2 = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    double a = 0, b = 0;
    for (std::size_t k = 0; k < n; ++k) a += w(eng) / n;
    for (std::size_t k = 0; k < n; ++k) b += w(eng) / n;
    fail1 += std::abs(a) > delta;
    fail2 += std::abs(a - b) > delta;
  }
  const double b1 = beta1(sigma2, delta, n), b2 = beta2(sigma2, delta, n);
  const double se1 = std::sqrt(b1 * (1 - b1) / trials), se2 = std::sqrt(b2 * (1 - b2) / trials);
  EXPECT_LE(double(fail1) / trials, b1 + 3 * se1);
  EXPECT_LE(double(fail2) / trials, b2 + 3 * se2);
}

TEST(Estimation, SaveLoadRoundTrip) {
  SystemSpec s;
  s.state_dim = 2;
  s.input_dim = 1;
  s.tau = 0.1;
  s.state_box = {{-0.5, 0.5}, {-0.5, 0.5}};
  s.input_grid = {{-1}, {1}};
  const auto model = NominalModel::pendulum(s);
  SyntheticSimulator sim(model, {}, NoiseModel{NoiseLaw::gaussian, {0.01, 0.02}});
  const Dataset ds = collect_dataset(model, sim, build_cover(s.state_box, 0.2), 5, 3);
  EstimateOptions opt;
  opt.lipschitz_f_override = {std::nullopt, 7.5};
  const EstimationReport rep = estimate(ds, opt);
  EXPECT_EQ(rep.dims[1].lipschitz_f, 7.5);
  EXPECT_TRUE(rep.dims[1].lipschitz_overridden);
  EXPECT_FALSE(rep.dims[0].lipschitz_overridden);
  const auto p = std::filesystem::temp_directory_path() / "simgap_estimation_test.json";
  save_estimation(rep, p);
  const EstimationReport back = load_estimation(p);
  ASSERT_EQ(back.dims.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.dims[i].variance_bound, rep.dims[i].variance_bound);
    EXPECT_EQ(back.dims[i].lipschitz_f, rep.dims[i].lipschitz_f);
    EXPECT_EQ(back.dims[i].lipschitz_fhat, rep.dims[i].lipschitz_fhat);
    EXPECT_EQ(back.dims[i].growth_row, rep.dims[i].growth_row);
    EXPECT_EQ(back.dims[i].sample_variances, rep.dims[i].sample_variances);
  }
}

}  // namespace
}  // namespace simgap
