#include "simgap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/parallel.hpp"

namespace simgap {

namespace {

constexpr double kSnap = 1e-9;

}  // namespace

StateGrid::StateGrid(Box box, const Vec& widths) : box_(std::move(box)) {
  if (box_.empty()) throw InvalidArgument("grid: empty state box");
  if (widths.size() != box_.size())
    throw InvalidArgument("grid: need one width per state axis");
  size_ = 1;
  for (std::size_t k = 0; k < box_.size(); ++k) {
    const double ext = box_[k].width();
    if (!(ext > 0.0) || !std::isfinite(ext))
      throw InvalidArgument("grid: axis " + std::to_string(k) + " has no extent");
    if (!(widths[k] > 0.0) || !std::isfinite(widths[k]))
      throw InvalidArgument("grid: width must be positive on axis " +
                            std::to_string(k));
    const double ratio = ext / widths[k];
    if (ratio > 1e9)
      throw InvalidArgument("grid: width too small on axis " + std::to_string(k));
    const auto c = static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - kSnap)));
    counts_.push_back(c);
    widths_.push_back(ext / static_cast<double>(c));
    if (size_ > std::numeric_limits<std::size_t>::max() / c)
      throw ResourceLimit("grid cells", std::numeric_limits<std::size_t>::max(),
                          std::numeric_limits<std::size_t>::max());
    size_ *= c;
  }
}

std::vector<std::size_t> StateGrid::coords(std::size_t id) const {
  std::vector<std::size_t> c(dim());
  for (std::size_t k = dim(); k-- > 0;) {
    c[k] = id % counts_[k];
    id /= counts_[k];
  }
  return c;
}

std::size_t StateGrid::id(std::span<const std::size_t> c) const {
  std::size_t id = 0;
  for (std::size_t k = 0; k < dim(); ++k) id = id * counts_[k] + c[k];
  return id;
}

Vec StateGrid::lower(std::size_t id) const {
  const auto c = coords(id);
  Vec x(dim());
  for (std::size_t k = 0; k < dim(); ++k)
    x[k] = box_[k].lo + static_cast<double>(c[k]) * widths_[k];
  return x;
}

Vec StateGrid::center(std::size_t id) const {
  Vec x = lower(id);
  for (std::size_t k = 0; k < dim(); ++k) x[k] += 0.5 * widths_[k];
  return x;
}

Box StateGrid::cell_box(std::size_t id) const {
  const Vec lo = lower(id);
  const auto c = coords(id);
  Box b(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    const bool last = c[k] + 1 == counts_[k];
    b[k] = {lo[k], last ? box_[k].hi : lo[k] + widths_[k]};
  }
  return b;
}

std::optional<std::size_t> StateGrid::locate(std::span<const double> x) const {
  if (x.size() != dim() || !box_contains(box_, x)) return std::nullopt;
  std::vector<std::size_t> c(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    const auto n = static_cast<long long>(counts_[k]);
    auto i = static_cast<long long>(std::floor((x[k] - box_[k].lo) / widths_[k]));
    i = std::clamp(i, 0LL, n - 1);
    auto lower_of = [&](long long j) {
      return box_[k].lo + static_cast<double>(j) * widths_[k];
    };
    if (i + 1 < n && x[k] >= lower_of(i + 1)) ++i;
    if (i > 0 && x[k] < lower_of(i)) --i;
    c[k] = static_cast<std::size_t>(i);
  }
  return id(c);
}

std::pair<std::size_t, std::size_t> StateGrid::axis_range(std::size_t axis,
                                                          double lo,
                                                          double hi) const {
  const double w = widths_[axis], base = box_[axis].lo;
  const double n = static_cast<double>(counts_[axis]);
  double first = std::floor((lo - base) / w + kSnap);
  double last = std::ceil((hi - base) / w - kSnap) - 1.0;
  first = std::clamp(first, 0.0, n - 1.0);
  last = std::clamp(last, 0.0, n - 1.0);
  if (last < first) last = first;
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

namespace {

/// Expands per-axis cell masks into a flag per cell.
std::vector<char> product_mask(const StateGrid& g,
                               const std::vector<std::vector<char>>& axis) {
  std::vector<char> out(g.size(), 0);
  for (std::size_t id = 0; id < g.size(); ++id) {
    const auto c = g.coords(id);
    bool in = true;
    for (std::size_t k = 0; k < g.dim() && in; ++k) in = axis[k][c[k]] != 0;
    out[id] = in;
  }
  return out;
}

}  // namespace

std::vector<char> StateGrid::cells_inside(const Box& b) const {
  if (b.size() != dim()) throw InvalidArgument("cells_inside: dimension mismatch");
  std::vector<std::vector<char>> axis(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    const double tol = kSnap * widths_[k];
    axis[k].resize(counts_[k]);
    for (std::size_t i = 0; i < counts_[k]; ++i) {
      const double lo = box_[k].lo + static_cast<double>(i) * widths_[k];
      const double hi = i + 1 == counts_[k] ? box_[k].hi : lo + widths_[k];
      axis[k][i] = lo >= b[k].lo - tol && hi <= b[k].hi + tol;
    }
  }
  return product_mask(*this, axis);
}

std::vector<char> StateGrid::cells_meeting(const Box& b) const {
  if (b.size() != dim()) throw InvalidArgument("cells_meeting: dimension mismatch");
  std::vector<std::vector<char>> axis(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    const double tol = kSnap * widths_[k];
    axis[k].resize(counts_[k]);
    for (std::size_t i = 0; i < counts_[k]; ++i) {
      const double lo = box_[k].lo + static_cast<double>(i) * widths_[k];
      const bool last = i + 1 == counts_[k];
      const double hi = last ? box_[k].hi : lo + widths_[k];
      axis[k][i] = lo <= b[k].hi + tol && (last ? hi >= b[k].lo - tol : hi > b[k].lo + tol);
    }
  }
  return product_mask(*this, axis);
}

GrowthBound GrowthBound::euclidean(Vec lipschitz) {
  GrowthBound g;
  g.mode = Mode::euclidean;
  g.lipschitz = std::move(lipschitz);
  return g;
}

GrowthBound GrowthBound::componentwise(std::vector<Vec> matrix) {
  GrowthBound g;
  g.mode = Mode::componentwise;
  g.matrix = std::move(matrix);
  return g;
}

Vec GrowthBound::radius(std::span<const double> rho) const {
  if (mode == Mode::euclidean) {
    const double r = euclidean_norm(rho);
    Vec out(lipschitz.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lipschitz[i] * r;
    return out;
  }
  Vec out(matrix.size(), 0.0);
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (matrix[i].size() != rho.size())
      throw InvalidArgument("growth matrix row has wrong length");
    for (std::size_t k = 0; k < rho.size(); ++k) out[i] += matrix[i][k] * rho[k];
  }
  return out;
}

std::string to_string(GrowthBound::Mode mode) {
  return mode == GrowthBound::Mode::euclidean ? "euclidean" : "componentwise";
}

GrowthBound::Mode parse_growth_mode(const std::string& s) {
  if (s == "euclidean") return GrowthBound::Mode::euclidean;
  if (s == "componentwise") return GrowthBound::Mode::componentwise;
  throw InvalidArgument("unknown growth mode '" + s + "'");
}

SymbolicModel::SymbolicModel(const NominalModel& model, const GapModel& gap,
                             StateGrid grid, GrowthBound growth,
                             std::size_t workers, std::size_t cap)
    : model_(&model),
      gap_(&gap),
      grid_(std::move(grid)),
      growth_(std::move(growth)),
      inputs_(model.spec().input_grid) {
  const std::size_t n = grid_.dim();
  if (n != model.spec().state_dim || gap.dims.size() != n)
    throw InvalidArgument("abstraction: grid, model and gap dimensions differ");
  if (growth_.radius(Vec(n, 0.0)).size() != n)
    throw InvalidArgument("abstraction: growth bound has wrong dimension");
  const std::size_t M = inputs_.size();
  if (M == 0) throw InvalidArgument("abstraction: empty input grid");
  if (grid_.size() > cap / M)
    throw ResourceLimit("abstraction transitions", grid_.size() * M, cap);

  ranges_.resize(grid_.size() * M * 2 * n);
  out_.resize(grid_.size() * M);
  parallel_for(grid_.size(), workers, [&](std::size_t, std::size_t cell) {
    for (std::size_t j = 0; j < M; ++j) {
      const Box iv = interval(cell, j);
      bool out = false;
      for (std::size_t k = 0; k < n; ++k) {
        const double tol = kSnap * grid_.widths()[k];
        if (iv[k].lo < grid_.box()[k].lo - tol || iv[k].hi > grid_.box()[k].hi + tol)
          out = true;
        const auto [a, b] = grid_.axis_range(k, iv[k].lo, iv[k].hi);
        std::uint32_t* r = &ranges_[(cell * M + j) * 2 * n + 2 * k];
        r[0] = static_cast<std::uint32_t>(a);
        r[1] = static_cast<std::uint32_t>(b);
      }
      out_[cell * M + j] = out;
    }
  });
}

Box SymbolicModel::interval(std::size_t cell, std::size_t input) const {
  const std::size_t n = grid_.dim();
  const Vec xc = grid_.center(cell);
  const Vec& u = inputs_[input];
  const Vec fc = model_->step(xc, u);
  const Vec gbar = gap_->upper_bound(grid_.cell_box(cell), u);
  Vec rho(n);
  for (std::size_t k = 0; k < n; ++k) rho[k] = 0.5 * grid_.widths()[k];
  const Vec r = growth_.radius(rho);
  Box iv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rad = r[i] + gbar[i];
    iv[i] = {fc[i] - rad, fc[i] + rad};
  }
  return iv;
}

std::span<const std::uint32_t> SymbolicModel::successor_ranges(
    std::size_t cell, std::size_t input) const {
  const std::size_t n = grid_.dim();
  return {&ranges_[(cell * inputs_.size() + input) * 2 * n], 2 * n};
}

Box SymbolicModel::successor_interval(std::size_t cell, std::size_t input) const {
  return interval(cell, input);
}

bool SymbolicModel::successors_within(std::size_t cell, std::size_t input,
                                      const std::vector<char>& set) const {
  if (out_of_box(cell, input)) return false;
  const auto r = successor_ranges(cell, input);
  const std::size_t n = grid_.dim();
  std::vector<std::size_t> c(n);
  for (std::size_t k = 0; k < n; ++k) c[k] = r[2 * k];
  for (;;) {
    if (!set[grid_.id(c)]) return false;
    std::size_t k = n;
    for (;;) {
      --k;
      if (c[k] < r[2 * k + 1]) {
        ++c[k];
        break;
      }
      c[k] = r[2 * k];
      if (k == 0) return true;
    }
  }
}

std::string to_string(SpecDescriptor::Kind kind) {
  return kind == SpecDescriptor::Kind::invariance ? "invariance" : "reach-avoid";
}

std::size_t Controller::winning_count() const {
  return static_cast<std::size_t>(
      std::count_if(choice.begin(), choice.end(), [](std::int32_t c) { return c >= 0; }));
}

LookupResult Controller::lookup(std::span<const double> x) const {
  LookupResult res;
  res.cell = grid.locate(x);
  if (!res.cell) {
    res.out_of_domain = true;
    return res;
  }
  if (winning(*res.cell)) res.input = static_cast<std::size_t>(choice[*res.cell]);
  return res;
}

namespace {

Controller blank_controller(const SymbolicModel& sym) {
  Controller c;
  c.grid = sym.grid();
  c.inputs = sym.inputs();
  c.choice.assign(sym.grid().size(), -1);
  c.rank.assign(sym.grid().size(), 0);
  return c;
}

std::int32_t first_valid_input(const SymbolicModel& sym, std::size_t cell,
                               const std::vector<char>& set) {
  for (std::size_t j = 0; j < sym.input_count(); ++j)
    if (sym.successors_within(cell, j, set)) return static_cast<std::int32_t>(j);
  return -1;
}

}  // namespace

Controller synthesize_invariance(const SymbolicModel& sym,
                                 const std::vector<char>& safe,
                                 std::size_t workers) {
  const std::size_t cells = sym.grid().size();
  if (safe.size() != cells) throw InvalidArgument("safe set has wrong size");
  std::vector<char> w = safe, next(cells);
  for (bool changed = true; changed;) {
    parallel_for(cells, workers, [&](std::size_t, std::size_t c) {
      next[c] = w[c] && first_valid_input(sym, c, w) >= 0;
    });
    changed = next != w;
    w.swap(next);
  }
  Controller ctl = blank_controller(sym);
  ctl.spec.kind = SpecDescriptor::Kind::invariance;
  ctl.goal = safe;
  parallel_for(cells, workers, [&](std::size_t, std::size_t c) {
    if (w[c]) ctl.choice[c] = first_valid_input(sym, c, w);
  });
  return ctl;
}

Controller synthesize_reach_avoid(const SymbolicModel& sym,
                                  const std::vector<char>& target,
                                  const std::vector<char>& avoid,
                                  std::size_t workers) {
  const std::size_t cells = sym.grid().size();
  if (target.size() != cells || avoid.size() != cells)
    throw InvalidArgument("target/avoid sets have wrong size");
  for (std::size_t c = 0; c < cells; ++c)
    if (target[c] && avoid[c])
      throw InvalidArgument("target and avoid sets intersect at cell " +
                            std::to_string(c));

  Controller ctl = blank_controller(sym);
  ctl.spec.kind = SpecDescriptor::Kind::reach_avoid;
  ctl.goal = target;
  std::vector<char> w = target;
  std::vector<std::int32_t> found(cells);
  for (std::uint32_t k = 1;; ++k) {
    parallel_for(cells, workers, [&](std::size_t, std::size_t c) {
      found[c] = (w[c] || avoid[c]) ? -1 : first_valid_input(sym, c, w);
    });
    bool grew = false;
    for (std::size_t c = 0; c < cells; ++c) {
      if (found[c] < 0) continue;
      w[c] = 1;
      ctl.choice[c] = found[c];
      ctl.rank[c] = k;
      grew = true;
    }
    if (!grew) break;
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (!target[c]) continue;
    ctl.choice[c] = std::max<std::int32_t>(0, first_valid_input(sym, c, w));
  }
  return ctl;
}

Controller synthesize(const SymbolicModel& sym, const SpecDescriptor& spec,
                      std::size_t workers) {
  const StateGrid& g = sym.grid();
  Controller ctl;
  if (spec.kind == SpecDescriptor::Kind::invariance) {
    ctl = synthesize_invariance(sym, g.cells_inside(spec.safe), workers);
  } else {
    std::vector<char> avoid(g.size(), 0);
    for (const Box& ob : spec.obstacles) {
      const auto m = g.cells_meeting(ob);
      for (std::size_t c = 0; c < g.size(); ++c) avoid[c] |= m[c];
    }
    std::vector<char> target = g.cells_inside(spec.target);
    for (std::size_t c = 0; c < g.size(); ++c)
      if (avoid[c] && target[c])
        throw InvalidArgument("target box overlaps an obstacle");
    ctl = synthesize_reach_avoid(sym, target, avoid, workers);
  }
  ctl.spec = spec;
  return ctl;
}

namespace {

std::string join(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

std::string join_box(const Box& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i)
    s += (i ? " " : "") + format_double(b[i].lo) + " " + format_double(b[i].hi);
  return s;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> t;
  for (std::string s; is >> s;) t.push_back(s);
  return t;
}

Box parse_box(const std::vector<std::string>& t, std::size_t from) {
  if ((t.size() - from) % 2) throw InvalidArgument("controller: odd box bounds");
  Box b;
  for (std::size_t i = from; i < t.size(); i += 2)
    b.push_back({parse_double(t[i]), parse_double(t[i + 1])});
  return b;
}

}  // namespace

std::string serialize_controller(const Controller& c) {
  std::ostringstream os;
  os << "SIMGAP-CONTROLLER 1\n";
  os << "spec " << to_string(c.spec.kind) << "\n";
  if (c.spec.kind == SpecDescriptor::Kind::invariance) {
    os << "safe " << join_box(c.spec.safe) << "\n";
  } else {
    os << "target " << join_box(c.spec.target) << "\n";
    os << "obstacles " << c.spec.obstacles.size() << "\n";
    for (const Box& b : c.spec.obstacles) os << "obstacle " << join_box(b) << "\n";
    os << "deadline " << c.spec.deadline << "\n";
  }
  os << "gap_sha256 " << (c.gap_digest.empty() ? "-" : c.gap_digest) << "\n";
  os << "grid_box " << join_box(c.grid.box()) << "\n";
  os << "grid_widths " << join(c.grid.widths()) << "\n";
  os << "grid_counts";
  for (std::size_t k : c.grid.counts()) os << " " << k;
  os << "\n";
  os << "inputs " << c.inputs.size() << "\n";
  for (const Vec& u : c.inputs) os << "input " << join(u) << "\n";
  os << "winning " << c.winning_count() << "\n";
  os << "# cell-id lower-corner input rank\n";
  for (std::size_t id = 0; id < c.choice.size(); ++id) {
    if (!c.winning(id)) continue;
    os << id << " " << join(c.grid.lower(id)) << " "
       << join(c.inputs[static_cast<std::size_t>(c.choice[id])]) << " " << c.rank[id]
       << "\n";
  }
  return os.str();
}

Controller deserialize_controller(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next = [&](const std::string& key) {
    if (!std::getline(is, line)) throw InvalidArgument("controller truncated at " + key);
    auto t = tokens(line);
    if (t.empty() || t[0] != key)
      throw InvalidArgument("controller: expected '" + key + "', found '" + line + "'");
    return t;
  };
  if (!std::getline(is, line) || line != "SIMGAP-CONTROLLER 1")
    throw InvalidArgument("not a controller file");
  Controller c;
  auto t = next("spec");
  if (t.size() != 2) throw InvalidArgument("controller: bad spec line");
  if (t[1] == "invariance") {
    c.spec.kind = SpecDescriptor::Kind::invariance;
    c.spec.safe = parse_box(next("safe"), 1);
  } else if (t[1] == "reach-avoid") {
    c.spec.kind = SpecDescriptor::Kind::reach_avoid;
    c.spec.target = parse_box(next("target"), 1);
    const auto k = std::stoul(next("obstacles").at(1));
    for (std::size_t i = 0; i < k; ++i) c.spec.obstacles.push_back(parse_box(next("obstacle"), 1));
    c.spec.deadline = std::stoul(next("deadline").at(1));
  } else {
    throw InvalidArgument("controller: unknown spec '" + t[1] + "'");
  }
  c.gap_digest = next("gap_sha256").at(1);
  if (c.gap_digest == "-") c.gap_digest.clear();
  const Box box = parse_box(next("grid_box"), 1);
  Vec widths;
  const auto wt = next("grid_widths");
  for (std::size_t k = 1; k < wt.size(); ++k) widths.push_back(parse_double(wt[k]));
  c.grid = StateGrid(box, widths);
  const auto counts = next("grid_counts");
  for (std::size_t k = 0; k < c.grid.dim(); ++k)
    if (std::stoul(counts.at(k + 1)) != c.grid.counts()[k])
      throw InvalidArgument("controller: grid counts do not match widths");
  const auto m = std::stoul(next("inputs").at(1));
  for (std::size_t j = 0; j < m; ++j) {
    Vec u;
    const auto ut = next("input");
    for (std::size_t k = 1; k < ut.size(); ++k) u.push_back(parse_double(ut[k]));
    c.inputs.push_back(std::move(u));
  }
  const auto wins = std::stoul(next("winning").at(1));
  std::getline(is, line);
  c.choice.assign(c.grid.size(), -1);
  c.rank.assign(c.grid.size(), 0);
  const std::size_t n = c.grid.dim();
  for (std::size_t w = 0; w < wins; ++w) {
    if (!std::getline(is, line)) throw InvalidArgument("controller: missing rows");
    const auto r = tokens(line);
    const std::size_t mdim = c.inputs.empty() ? 0 : c.inputs[0].size();
    if (r.size() != 2 + n + mdim) throw InvalidArgument("controller: bad row '" + line + "'");
    const auto id = std::stoul(r[0]);
    if (id >= c.grid.size()) throw InvalidArgument("controller: cell id out of range");
    Vec u;
    for (std::size_t i = 0; i < mdim; ++i) u.push_back(parse_double(r[1 + n + i]));
    auto it = std::find(c.inputs.begin(), c.inputs.end(), u);
    if (it == c.inputs.end()) throw InvalidArgument("controller: unknown input in row");
    c.choice[id] = static_cast<std::int32_t>(it - c.inputs.begin());
    c.rank[id] = static_cast<std::uint32_t>(std::stoul(r.back()));
  }
  c.goal = c.spec.kind == SpecDescriptor::Kind::invariance ? c.grid.cells_inside(c.spec.safe)
                                                           : c.grid.cells_inside(c.spec.target);
  return c;
}

void save_controller(const Controller& c, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << serialize_controller(c);
  if (!os) throw Error("failed writing " + path.string());
}

Controller load_controller(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("controller not found: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize_controller(ss.str());
}

}  // namespace simgap
