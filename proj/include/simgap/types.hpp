#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace simgap {

using Vec = std::vector<double>;

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned hyper-rectangle, one closed interval per state axis.
using Box = std::vector<Interval>;

inline bool box_contains(const Box& box, std::span<const double> x) {
  if (x.size() != box.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!box[i].contains(x[i])) return false;
  return true;
}

inline bool all_finite(std::span<const double> v) {
  for (double d : v)
    if (!std::isfinite(d)) return false;
  return true;
}

inline double euclidean_distance(std::span<const double> a,
                                 std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double euclidean_norm(std::span<const double> a) {
  double s = 0.0;
  for (double d : a) s += d * d;
  return std::sqrt(s);
}

std::string format_vec(std::span<const double> v);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Inverse of format_double; throws InvalidArgument on malformed text.
double parse_double(const std::string& s);

}  // namespace simgap
