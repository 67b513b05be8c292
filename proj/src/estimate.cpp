#include "simgap/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "simgap/error.hpp"
#include "simgap/parallel.hpp"

namespace simgap {

using nlohmann::ordered_json;

double sample_variance(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw InvalidArgument("sample_variance needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n - 1);
}

Vec record_variances(const Dataset& ds, std::size_t dim) {
  const std::size_t n = ds.spec.state_dim;
  if (dim >= n) throw InvalidArgument("record_variances: dimension out of range");
  Vec out(ds.records.size());
  Vec col(ds.n_hat_1);
  for (std::size_t idx = 0; idx < ds.records.size(); ++idx) {
    const auto& rec = ds.records[idx];
    for (std::size_t k = 0; k < ds.n_hat_1; ++k) col[k] = rec.replicates[k * n + dim];
    out[idx] = sample_variance(col);
  }
  return out;
}

double variance_bound(const Dataset& ds, std::size_t dim, double safety_factor) {
  if (!(safety_factor >= 1.0))
    throw InvalidArgument("variance_bound: safety factor must be >= 1");
  const Vec v = record_variances(ds, dim);
  const double mx = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  return safety_factor * mx;
}

NeighborLists nearest_neighbors(std::span<const Vec> states, std::size_t k) {
  const std::size_t N = states.size();
  NeighborLists out(N);
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(N);
  for (std::size_t r = 0; r < N; ++r) {
    d.clear();
    for (std::size_t s = 0; s < N; ++s)
      if (s != r) d.emplace_back(euclidean_distance(states[r], states[s]), s);
    const std::size_t take = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<long>(take), d.end());
    for (std::size_t t = 0; t < take; ++t) out[r].push_back(d[t].second);
  }
  return out;
}

double estimate_lipschitz(std::span<const Vec> states,
                          const std::vector<Vec>& values,
                          const NeighborLists& neighbors, double safety) {
  bool distinct = false;
  for (std::size_t r = 1; r < states.size() && !distinct; ++r)
    distinct = euclidean_distance(states[0], states[r]) > 0.0;
  if (!distinct)
    throw InvalidArgument("estimate_lipschitz needs at least two distinct states");
  double best = 0.0;
  for (const Vec& g : values) {
    if (g.size() != states.size())
      throw InvalidArgument("estimate_lipschitz: value count != state count");
    for (std::size_t r = 0; r < states.size(); ++r) {
      for (std::size_t s : neighbors[r]) {
        const double dist = euclidean_distance(states[r], states[s]);
        if (dist <= 0.0) continue;
        best = std::max(best, std::abs(g[r] - g[s]) / dist);
      }
    }
  }
  return safety * best;
}

double estimate_lipschitz(std::span<const Vec> states,
                          const std::vector<Vec>& values, double safety) {
  const std::size_t n = states.empty() ? 0 : states[0].size();
  return estimate_lipschitz(states, values, nearest_neighbors(states, 2 * n),
                            safety);
}

Vec estimate_axis_lipschitz(const Cover& cover, const std::vector<Vec>& values,
                            double safety) {
  const std::size_t n = cover.dim();
  std::vector<std::size_t> stride(n, 1);
  for (std::size_t i = n - 1; i-- > 0;)
    stride[i] = stride[i + 1] * cover.per_axis_count[i + 1];
  Vec out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (cover.per_axis_count[k] < 2) continue;
    const double h = cover.per_axis_spacing[k];
    for (const Vec& g : values) {
      for (std::size_t c = 0; c < cover.size(); ++c) {
        const std::size_t coord = (c / stride[k]) % cover.per_axis_count[k];
        if (coord + 1 >= cover.per_axis_count[k]) continue;
        out[k] = std::max(out[k], std::abs(g[c + stride[k]] - g[c]) / h);
      }
    }
    out[k] *= safety;
  }
  return out;
}

double beta1(double variance_bound, double delta1, std::size_t n_hat_1) {
  if (!(delta1 > 0.0)) throw InvalidArgument("beta1: delta1 must be positive");
  if (n_hat_1 < 1) throw InvalidArgument("beta1: n_hat_1 must be >= 1");
  if (variance_bound < 0.0) throw InvalidArgument("beta1: negative variance");
  const double b = variance_bound / (delta1 * delta1 * static_cast<double>(n_hat_1));
  return std::min(1.0, b);
}

double beta2(double variance_bound, double delta2, std::size_t n_hat_1) {
  if (!(delta2 > 0.0)) throw InvalidArgument("beta2: delta2 must be positive");
  if (n_hat_1 < 1) throw InvalidArgument("beta2: n_hat_1 must be >= 1");
  if (variance_bound < 0.0) throw InvalidArgument("beta2: negative variance");
  const double b =
      2.0 * variance_bound / (delta2 * delta2 * static_cast<double>(n_hat_1));
  return std::min(1.0, b);
}

EstimationReport estimate(const Dataset& ds, const EstimateOptions& options) {
  if (!ds.complete) throw InvalidArgument("estimate: dataset is incomplete");
  if (ds.n_hat_1 < 2)
    throw InvalidArgument("estimate: n_hat_1 must be >= 2 for variances");
  const std::size_t n = ds.spec.state_dim, M = ds.spec.input_count();
  const std::size_t N = ds.cover.size();

  EstimationReport rep;
  rep.n_hat_1 = ds.n_hat_1;
  rep.variance_safety = options.variance_safety;
  rep.lipschitz_safety = options.lipschitz_safety;
  rep.dims.resize(n);

  const auto neighbors = ds.cover.grid_neighbors();
  std::vector<Vec> means(ds.records.size());
  for (std::size_t idx = 0; idx < ds.records.size(); ++idx)
    means[idx] = ds.empirical_mean(ds.records[idx]);

  parallel_for(n, options.workers, [&](std::size_t, std::size_t i) {
    auto& d = rep.dims[i];
    if (!(options.variance_safety >= 1.0))
      throw InvalidArgument("variance safety factor must be >= 1");
    d.sample_variances = record_variances(ds, i);
    const double mx = d.sample_variances.empty()
                          ? 0.0
                          : *std::max_element(d.sample_variances.begin(),
                                              d.sample_variances.end());
    d.variance_bound = options.variance_safety * mx;

    std::vector<Vec> f(M, Vec(N)), fhat(M, Vec(N));
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t j = 0; j < M; ++j) {
        f[j][r] = ds.at(r, j).nominal[i];
        fhat[j][r] = means[r * M + j][i];
      }
    if (N >= 2) {
      d.lipschitz_f = estimate_lipschitz(ds.cover.centers, f, neighbors,
                                         options.lipschitz_safety);
      d.lipschitz_fhat = estimate_lipschitz(ds.cover.centers, fhat, neighbors,
                                            options.lipschitz_safety);
      d.growth_row =
          estimate_axis_lipschitz(ds.cover, f, options.lipschitz_safety);
    } else {
      d.growth_row.assign(n, 0.0);
    }
    if (i < options.lipschitz_f_override.size() && options.lipschitz_f_override[i]) {
      d.lipschitz_f = *options.lipschitz_f_override[i];
      d.lipschitz_overridden = true;
    }
    if (i < options.lipschitz_fhat_override.size() &&
        options.lipschitz_fhat_override[i]) {
      d.lipschitz_fhat = *options.lipschitz_fhat_override[i];
      d.lipschitz_overridden = true;
    }
  });
  return rep;
}

void save_estimation(const EstimationReport& rep,
                     const std::filesystem::path& path) {
  ordered_json j;
  j["kind"] = "simgap-estimation";
  j["version"] = 1;
  j["n_hat_1"] = rep.n_hat_1;
  j["variance_safety"] = rep.variance_safety;
  j["lipschitz_safety"] = rep.lipschitz_safety;
  j["dims"] = ordered_json::array();
  for (const auto& d : rep.dims) {
    ordered_json e;
    e["variance_bound"] = d.variance_bound;
    e["lipschitz_f"] = d.lipschitz_f;
    e["lipschitz_fhat"] = d.lipschitz_fhat;
    e["lipschitz_gap_basis"] = d.lipschitz_gap_basis;
    e["lipschitz_overridden"] = d.lipschitz_overridden;
    e["growth_row"] = d.growth_row;
    e["sample_variances"] = d.sample_variances;
    j["dims"].push_back(std::move(e));
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(1) << '\n';
}

EstimationReport load_estimation(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact("estimation report not found: " + path.string());
  EstimationReport rep;
  try {
    ordered_json j = ordered_json::parse(is);
    if (j.value("kind", "") != "simgap-estimation")
      throw Error("not an estimation report: " + path.string());
    rep.n_hat_1 = j.at("n_hat_1").get<std::size_t>();
    rep.variance_safety = j.at("variance_safety").get<double>();
    rep.lipschitz_safety = j.at("lipschitz_safety").get<double>();
    for (const auto& e : j.at("dims")) {
      DimensionEstimate d;
      d.variance_bound = e.at("variance_bound").get<double>();
      d.lipschitz_f = e.at("lipschitz_f").get<double>();
      d.lipschitz_fhat = e.at("lipschitz_fhat").get<double>();
      d.lipschitz_gap_basis = e.at("lipschitz_gap_basis").get<double>();
      d.lipschitz_overridden = e.at("lipschitz_overridden").get<bool>();
      d.growth_row = e.at("growth_row").get<Vec>();
      d.sample_variances = e.at("sample_variances").get<Vec>();
      rep.dims.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed estimation report " + path.string() + ": " + e.what());
  }
  return rep;
}

}  // namespace simgap
