#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "simgap/basis.hpp"
#include "simgap/dataset.hpp"
#include "simgap/estimate.hpp"
#include "simgap/lp.hpp"

namespace simgap {

/// |empirical mean - nominal| of dimension `dim` per record (r-major).
Vec residuals(const Dataset& ds, std::size_t dim);

/// Basis evaluated at every (x_r, u_j) of the dataset; one row per record.
Eigen::MatrixXd basis_matrix(const Dataset& ds, const Basis& basis);

/// Scenario program over y = (q, eta), minimizing eta. For each sample s,
/// in order, row A: q^T p_s - eta <= 0 and row B: -q^T p_s <= -(res_s + delta1).
struct ScenarioLP {
  std::size_t basis_size = 0;
  LinearProgram lp;

  std::size_t num_vars() const { return lp.num_vars(); }
  std::size_t num_constraints() const { return lp.num_constraints(); }
};

ScenarioLP assemble_scp(std::span<const double> residuals,
                        const Eigen::MatrixXd& basis_values, double delta1);

/// Gap function of one state dimension:
///   gamma(x, u) = L_x eps + q^T p(x, u) + delta2,
///   L_x = lipschitz_f + lipschitz_fhat + lipschitz_gap_basis.
struct GapDimension {
  Basis basis;
  Vec q;
  double eta = 0.0;
  double lipschitz_f = 0.0;
  double lipschitz_fhat = 0.0;
  double lipschitz_gap_basis = 0.0;
  double epsilon = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;

  double lipschitz_x() const {
    return lipschitz_f + lipschitz_fhat + lipschitz_gap_basis;
  }
  double confidence() const { return 1.0 - beta1 - beta2; }
  double fit(std::span<const double> x, std::span<const double> u) const;
  double eval(std::span<const double> x, std::span<const double> u) const;
  /// Upper bound of gamma over x in `cell` for fixed u, clamped at zero.
  double upper_bound(const Box& cell, std::span<const double> u) const;
};

/// Builds one dimension. `lipschitz_x` is booked as lipschitz_f; use the
/// struct fields directly to keep the three contributions apart.
GapDimension assemble_gap(Vec q, Basis basis, double lipschitz_x, double epsilon,
                          double delta2, double beta1, double beta2);

/// max(0, 1 - sum_i (beta1_i + beta2_i)).
double overall_confidence(std::span<const std::pair<double, double>> betas);

struct GapModel {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::vector<GapDimension> dims;
  double overall_confidence = 1.0;

  Vec eval(std::span<const double> x, std::span<const double> u) const;
  Vec upper_bound(const Box& cell, std::span<const double> u) const;
  void refresh_confidence();

  /// gamma identically zero (the deterministic-gap baseline).
  static GapModel zero(std::size_t state_dim, std::size_t input_dim);
};

struct FitOptions {
  /// Per-dimension settings; a single entry is broadcast to all dimensions.
  std::vector<unsigned> basis_degree{1};
  std::vector<double> delta1;
  std::vector<double> delta2;
  std::size_t workers = 1;
  LpOptions lp;
};

/// Solves one scenario program per state dimension, bounds the Lipschitz
/// constant of each fit over the state box (written back into `report`),
/// and assembles gamma with its Chebyshev confidence.
GapModel fit_gap(const Dataset& ds, EstimationReport& report,
                 const FitOptions& options);

/// The scenario program of one dimension together with its optimum.
struct DimensionFit {
  ScenarioLP scp;
  LpResult result;
  Vec q;
  double eta = 0.0;
};

/// Solves the scenario program of one dimension. Throws Error when the
/// program is infeasible or unbounded.
DimensionFit fit_dimension(std::span<const double> residuals,
                           const Eigen::MatrixXd& basis_values, double delta1,
                           const LpOptions& options = {});

void save_gap_model(const GapModel& gap, const std::filesystem::path& path);
GapModel load_gap_model(const std::filesystem::path& path);
std::string serialize_gap_model(const GapModel& gap);

}  // namespace simgap
