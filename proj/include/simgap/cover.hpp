#pragma once

#include <cstddef>
#include <vector>

#include "simgap/types.hpp"

namespace simgap {

/// Finite epsilon-cover of a state box: a uniform grid of centers such that
/// every point of the box is within Euclidean distance epsilon of a center.
struct Cover {
  double epsilon = 0.0;
  Box box;
  Vec per_axis_spacing;
  std::vector<std::size_t> per_axis_count;
  /// Row-major over axes (last axis varies fastest).
  std::vector<Vec> centers;

  std::size_t size() const { return centers.size(); }
  std::size_t dim() const { return box.size(); }

  /// Index of the center nearest to x (x is clamped into the box first).
  std::size_t nearest(std::span<const double> x) const;

  /// For every center, the indices of its axis-adjacent centers (at most 2n).
  std::vector<std::vector<std::size_t>> grid_neighbors() const;
};

inline constexpr std::size_t kDefaultCoverCap = 10'000'000;

/// Uniform grid with per-axis spacing at most 2 epsilon / sqrt(n), centers at
/// the midpoints of the cells that tile the box. When epsilon reaches the
/// half-diagonal of the box the cover is the single midpoint.
/// Throws InvalidArgument for epsilon <= 0 and ResourceLimit when the number
/// of centers would exceed `cap`.
Cover build_cover(const Box& box, double epsilon,
                  std::size_t cap = kDefaultCoverCap);

/// Cartesian product of the per-axis sequences lo, lo + step, ..., hi
/// (endpoint included up to 1e-9). The first axis varies slowest.
std::vector<Vec> enumerate_inputs(const Vec& lo, const Vec& hi, const Vec& step);

}  // namespace simgap
