#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgap/scp.hpp"
#include "simgap/systems.hpp"

namespace simgap {

/// Uniform grid of cells tiling the state box. Cell ids are row-major over
/// axes (last axis fastest). A cell owns [lower, upper) on every axis, except
/// the last cell of an axis which also owns the upper face of the box.
class StateGrid {
 public:
  StateGrid() = default;
  /// Cell counts are ceil(extent / width) per axis; widths are then shrunk
  /// so the grid tiles the box exactly.
  StateGrid(Box box, const Vec& widths);

  const Box& box() const { return box_; }
  const Vec& widths() const { return widths_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t dim() const { return box_.size(); }
  std::size_t size() const { return size_; }

  std::vector<std::size_t> coords(std::size_t id) const;
  std::size_t id(std::span<const std::size_t> coords) const;
  Vec center(std::size_t id) const;
  Vec lower(std::size_t id) const;
  Box cell_box(std::size_t id) const;

  /// Owning cell of x under the half-open convention; none outside the box.
  std::optional<std::size_t> locate(std::span<const double> x) const;

  /// Cells whose interior meets the closed interval [lo, hi] on `axis`,
  /// as an inclusive index range clamped to the grid. Endpoints within
  /// 1e-9 cell widths of a grid line snap to it.
  std::pair<std::size_t, std::size_t> axis_range(std::size_t axis, double lo,
                                                 double hi) const;

  /// Cells whose closed box lies inside `b` (up to snapping).
  std::vector<char> cells_inside(const Box& b) const;
  /// Cells that share at least one owned point with the closed box `b`.
  std::vector<char> cells_meeting(const Box& b) const;

 private:
  Box box_;
  Vec widths_;
  std::vector<std::size_t> counts_;
  std::size_t size_ = 0;
};

/// How the image of a cell is inflated around the image of its center.
struct GrowthBound {
  enum class Mode { euclidean, componentwise };
  Mode mode = Mode::componentwise;
  /// euclidean: r_i = lipschitz[i] * |rho|.
  Vec lipschitz;
  /// componentwise: r_i = sum_k matrix[i][k] * rho_k.
  std::vector<Vec> matrix;

  static GrowthBound euclidean(Vec lipschitz);
  static GrowthBound componentwise(std::vector<Vec> matrix);
  /// Inflation vector for a cell of half-widths rho.
  Vec radius(std::span<const double> rho) const;
};

std::string to_string(GrowthBound::Mode mode);
GrowthBound::Mode parse_growth_mode(const std::string& s);

inline constexpr std::size_t kDefaultTransitionCap = 200'000'000;

/// Finite abstraction of x+ in f(x, u) + [-gamma, gamma]. Each (cell, input)
/// keeps the index box of the cells its successor interval overlaps.
class SymbolicModel {
 public:
  SymbolicModel(const NominalModel& model, const GapModel& gap, StateGrid grid,
                GrowthBound growth, std::size_t workers = 1,
                std::size_t cap = kDefaultTransitionCap);

  const StateGrid& grid() const { return grid_; }
  const std::vector<Vec>& inputs() const { return inputs_; }
  std::size_t input_count() const { return inputs_.size(); }

  bool out_of_box(std::size_t cell, std::size_t input) const {
    return out_[cell * inputs_.size() + input] != 0;
  }
  /// Inclusive per-axis index ranges of the successor cells.
  std::span<const std::uint32_t> successor_ranges(std::size_t cell,
                                                  std::size_t input) const;
  /// The successor hyper-interval, recomputed from the model.
  Box successor_interval(std::size_t cell, std::size_t input) const;

  /// Calls fn(id) for every successor cell of (cell, input).
  template <typename Fn>
  void for_each_successor(std::size_t cell, std::size_t input, Fn&& fn) const;
  /// True when every successor cell is flagged in `set` and the successor
  /// interval stays inside the box.
  bool successors_within(std::size_t cell, std::size_t input,
                         const std::vector<char>& set) const;

 private:
  Box interval(std::size_t cell, std::size_t input) const;

  const NominalModel* model_;
  const GapModel* gap_;
  StateGrid grid_;
  GrowthBound growth_;
  std::vector<Vec> inputs_;
  std::vector<std::uint32_t> ranges_;
  std::vector<char> out_;
};

/// Invariance in a safe box, or reach-avoid with a target box and obstacles.
struct SpecDescriptor {
  enum class Kind { invariance, reach_avoid };
  Kind kind = Kind::invariance;
  Box safe;
  Box target;
  std::vector<Box> obstacles;
  /// Reach-avoid deadline in steps (0 means the whole horizon).
  std::size_t deadline = 0;
};

std::string to_string(SpecDescriptor::Kind kind);

struct LookupResult {
  std::optional<std::size_t> input;
  std::optional<std::size_t> cell;
  bool out_of_domain = false;
};

struct Controller {
  StateGrid grid;
  std::vector<Vec> inputs;
  SpecDescriptor spec;
  /// Chosen input index per cell, -1 outside the winning set.
  std::vector<std::int32_t> choice;
  /// Fixed-point iteration at which the cell was won (reach-avoid).
  std::vector<std::uint32_t> rank;
  /// Target cells (reach-avoid) or safe cells (invariance).
  std::vector<char> goal;
  std::string gap_digest;

  bool winning(std::size_t cell) const { return choice[cell] >= 0; }
  std::size_t winning_count() const;
  LookupResult lookup(std::span<const double> x) const;
};

/// Greatest fixed point inside `safe`; picks the first valid input per cell.
Controller synthesize_invariance(const SymbolicModel& sym,
                                 const std::vector<char>& safe,
                                 std::size_t workers = 1);

/// Least fixed point from `target` avoiding `avoid`; rank = iteration index.
/// Target cells keep rank 0 and the first input whose successors stay
/// winning (input 0 when none does).
Controller synthesize_reach_avoid(const SymbolicModel& sym,
                                  const std::vector<char>& target,
                                  const std::vector<char>& avoid,
                                  std::size_t workers = 1);

/// Builds the cell sets of `spec` on the model's grid and synthesizes.
Controller synthesize(const SymbolicModel& sym, const SpecDescriptor& spec,
                      std::size_t workers = 1);

std::string serialize_controller(const Controller& c);
Controller deserialize_controller(const std::string& text);
void save_controller(const Controller& c, const std::filesystem::path& path);
Controller load_controller(const std::filesystem::path& path);

template <typename Fn>
void SymbolicModel::for_each_successor(std::size_t cell, std::size_t input,
                                       Fn&& fn) const {
  const auto r = successor_ranges(cell, input);
  const std::size_t n = grid_.dim();
  std::vector<std::size_t> c(n);
  for (std::size_t k = 0; k < n; ++k) c[k] = r[2 * k];
  for (;;) {
    fn(grid_.id(c));
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (c[k] < r[2 * k + 1]) {
        ++c[k];
        break;
      }
      c[k] = r[2 * k];
      if (k == 0) return;
    }
    if (n == 0) return;
  }
}

}  // namespace simgap
