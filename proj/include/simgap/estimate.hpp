#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "simgap/dataset.hpp"
#include "simgap/types.hpp"

namespace simgap {

/// Unbiased sample variance sum (v - mean)^2 / (N - 1). Requires N >= 2.
double sample_variance(std::span<const double> values);

/// Sample variance of dimension `dim` for every record of the dataset.
Vec record_variances(const Dataset& ds, std::size_t dim);

/// safety_factor * max over records of the dimension-`dim` sample variance.
double variance_bound(const Dataset& ds, std::size_t dim, double safety_factor);

using NeighborLists = std::vector<std::vector<std::size_t>>;

/// The k nearest other states of each state (Euclidean, ties by index).
NeighborLists nearest_neighbors(std::span<const Vec> states, std::size_t k);

/// Data-driven Lipschitz estimate of x -> g(x, u):
///   safety * max over inputs j, states r, neighbors s of
///   |g_j(r) - g_j(s)| / |x_r - x_s|.
/// `values[j][r]` is g(x_r, u_j). Throws InvalidArgument with fewer than two
/// distinct states.
double estimate_lipschitz(std::span<const Vec> states,
                          const std::vector<Vec>& values,
                          const NeighborLists& neighbors, double safety = 1.0);

/// Same, with neighbors taken as the 2n nearest states.
double estimate_lipschitz(std::span<const Vec> states,
                          const std::vector<Vec>& values, double safety = 1.0);

/// Per-axis slope bounds: entry k bounds |g(x + h e_k) - g(x)| / |h| using
/// only axis-aligned neighbor pairs of the cover grid.
Vec estimate_axis_lipschitz(const Cover& cover, const std::vector<Vec>& values,
                            double safety = 1.0);

/// Chebyshev bound for the empirical-mean substitution:
/// min(1, M / (delta1^2 n_hat_1)).
double beta1(double variance_bound, double delta1, std::size_t n_hat_1);

/// Chebyshev bound for the paired-difference substitution:
/// min(1, 2 M / (delta2^2 n_hat_1)).
double beta2(double variance_bound, double delta2, std::size_t n_hat_1);

struct DimensionEstimate {
  double variance_bound = 0.0;
  double lipschitz_f = 0.0;
  double lipschitz_fhat = 0.0;
  /// Lipschitz constant of the fitted gap polynomial; set after fitting.
  double lipschitz_gap_basis = 0.0;
  /// Growth-bound row: per-axis slope bound of f_i.
  Vec growth_row;
  bool lipschitz_overridden = false;
  Vec sample_variances;
};

struct EstimateOptions {
  double variance_safety = 10.0;
  double lipschitz_safety = 1.2;
  /// Optional user-supplied constants per dimension (replace the estimates).
  std::vector<std::optional<double>> lipschitz_f_override;
  std::vector<std::optional<double>> lipschitz_fhat_override;
  std::size_t workers = 1;
};

struct EstimationReport {
  std::size_t n_hat_1 = 0;
  double variance_safety = 0.0;
  double lipschitz_safety = 0.0;
  std::vector<DimensionEstimate> dims;
};

EstimationReport estimate(const Dataset& ds, const EstimateOptions& options = {});

void save_estimation(const EstimationReport& rep,
                     const std::filesystem::path& path);
EstimationReport load_estimation(const std::filesystem::path& path);

}  // namespace simgap
