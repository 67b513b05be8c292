#include "simgap/cover.hpp"

#include <algorithm>
#include <cmath>

#include "simgap/error.hpp"

namespace simgap {

Cover build_cover(const Box& box, double epsilon, std::size_t cap) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw InvalidArgument("cover: epsilon must be positive");
  if (box.empty()) throw InvalidArgument("cover: empty state box");
  const std::size_t n = box.size();

  Cover cover;
  cover.epsilon = epsilon;
  cover.box = box;
  cover.per_axis_spacing.assign(n, 0.0);
  cover.per_axis_count.assign(n, 1);

  double half_diag2 = 0.0;
  for (const auto& iv : box) half_diag2 += 0.25 * iv.width() * iv.width();

  if (epsilon * epsilon >= half_diag2) {
    Vec mid(n);
    for (std::size_t i = 0; i < n; ++i) {
      mid[i] = box[i].mid();
      cover.per_axis_spacing[i] = box[i].width();
    }
    cover.centers.push_back(std::move(mid));
    return cover;
  }

  // A cell of side h has half-diagonal h sqrt(n) / 2, so h = 2 eps / sqrt(n)
  // keeps every cell point within eps of the cell midpoint.
  const double h = 2.0 * epsilon / std::sqrt(static_cast<double>(n));
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = box[i].width();
    std::size_t k = 1;
    if (w > 0.0) {
      const double ratio = w / h;
      k = static_cast<std::size_t>(std::ceil(ratio - 1e-12));
      k = std::max<std::size_t>(k, 1);
    }
    cover.per_axis_count[i] = k;
    cover.per_axis_spacing[i] = w / static_cast<double>(k);
    total *= static_cast<double>(k);
  }
  if (total > static_cast<double>(cap))
    throw ResourceLimit("cover with epsilon " + std::to_string(epsilon),
                        static_cast<std::size_t>(std::min(total, 1e18)), cap);

  const std::size_t count = static_cast<std::size_t>(total);
  cover.centers.reserve(count);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t c = 0; c < count; ++c) {
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = cover.per_axis_spacing[i];
      x[i] = box[i].width() > 0.0
                 ? box[i].lo + (static_cast<double>(idx[i]) + 0.5) * s
                 : box[i].lo;
    }
    cover.centers.push_back(std::move(x));
    for (std::size_t i = n; i-- > 0;) {
      if (++idx[i] < cover.per_axis_count[i]) break;
      idx[i] = 0;
    }
  }
  return cover;
}

std::size_t Cover::nearest(std::span<const double> x) const {
  if (centers.size() == 1) return 0;
  std::size_t id = 0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    std::size_t k = 0;
    if (per_axis_count[i] > 1) {
      const double t = (x[i] - box[i].lo) / per_axis_spacing[i];
      const double f = std::floor(t);
      k = f < 0.0 ? 0
                  : std::min(static_cast<std::size_t>(f), per_axis_count[i] - 1);
    }
    id = id * per_axis_count[i] + k;
  }
  return id;
}

std::vector<std::vector<std::size_t>> Cover::grid_neighbors() const {
  const std::size_t n = box.size();
  std::vector<std::size_t> stride(n, 1);
  for (std::size_t i = n - 1; i-- > 0;)
    stride[i] = stride[i + 1] * per_axis_count[i + 1];

  std::vector<std::vector<std::size_t>> out(centers.size());
  if (centers.size() == 1) return out;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    auto& nb = out[c];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t coord = (c / stride[i]) % per_axis_count[i];
      if (coord > 0) nb.push_back(c - stride[i]);
      if (coord + 1 < per_axis_count[i]) nb.push_back(c + stride[i]);
    }
  }
  return out;
}

std::vector<Vec> enumerate_inputs(const Vec& lo, const Vec& hi,
                                  const Vec& step) {
  const std::size_t m = lo.size();
  if (m == 0 || hi.size() != m || step.size() != m)
    throw InvalidArgument("enumerate_inputs: lo, hi and step must share a "
                          "positive dimension");
  std::vector<Vec> axes(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(step[i] > 0.0)) throw InvalidArgument("enumerate_inputs: step <= 0");
    if (lo[i] > hi[i]) throw InvalidArgument("enumerate_inputs: lo > hi");
    const auto k = static_cast<std::size_t>(
        std::floor((hi[i] - lo[i]) / step[i] + 1e-9));
    for (std::size_t t = 0; t <= k; ++t) {
      double v = lo[i] + static_cast<double>(t) * step[i];
      // Snap accumulated representation error onto a 1e-12 lattice so that
      // e.g. -1 + 3 * 0.1 is stored as -0.7.
      v = std::round(v * 1e12) / 1e12;
      if (std::abs(v - hi[i]) <= 1e-9) v = hi[i];
      axes[i].push_back(v);
    }
  }
  std::vector<Vec> out;
  std::vector<std::size_t> idx(m, 0);
  for (;;) {
    Vec u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = axes[i][idx[i]];
    out.push_back(std::move(u));
    std::size_t i = m;
    while (i-- > 0) {
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

}  // namespace simgap
