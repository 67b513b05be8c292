#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "simgap/lp.hpp"
#include "simgap/rng.hpp"
#include "simgap/scp.hpp"

namespace simgap::testing {

/// Brute-force optimum of min c^T y s.t. A y <= b over a pointed polyhedron:
/// every choice of num_vars rows whose equality system is nonsingular gives
/// a candidate vertex; the best feasible one is returned.
inline std::optional<double> vertex_enumeration(const LinearProgram& lp,
                                                double tol = 1e-9) {
  const int rows = static_cast<int>(lp.A.rows());
  const int z = static_cast<int>(lp.A.cols());
  std::vector<int> pick(z);
  for (int i = 0; i < z; ++i) pick[i] = i;
  std::optional<double> best;
  Eigen::MatrixXd S(z, z);
  Eigen::VectorXd t(z);
  if (rows < z) return best;
  for (;;) {
    for (int i = 0; i < z; ++i) {
      S.row(i) = lp.A.row(pick[i]);
      t(i) = lp.b(pick[i]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (lu.isInvertible()) {
      const Eigen::VectorXd y = lu.solve(t);
      const double scale = 1.0 + y.lpNorm<Eigen::Infinity>();
      bool feasible = true;
      for (int r = 0; r < rows && feasible; ++r)
        feasible = lp.A.row(r).dot(y) - lp.b(r) <= tol * scale;
      if (feasible) {
        const double obj = lp.c.dot(y);
        if (!best || obj < *best) best = obj;
      }
    }
    int k = z - 1;
    while (k >= 0 && pick[k] == rows - z + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int i = k + 1; i < z; ++i) pick[i] = pick[i - 1] + 1;
  }
  return best;
}

/// Random scenario program: `samples` basis rows of size `z` whose first
/// entry is the constant 1, nonnegative residuals.
inline ScenarioLP random_scp(Engine& eng, std::size_t z, std::size_t samples,
                             double delta1) {
  std::uniform_real_distribution<double> x(-1.0, 1.0), res(0.0, 0.2);
  Eigen::MatrixXd P(samples, z);
  Vec r(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    P(s, 0) = 1.0;
    for (std::size_t l = 1; l < z; ++l) P(s, l) = x(eng);
    r[s] = res(eng);
  }
  return assemble_scp(r, P, delta1);
}

}  // namespace simgap::testing
