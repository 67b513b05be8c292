#include "simgap/validate.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "simgap/error.hpp"
#include "simgap/parallel.hpp"
#include "simgap/rng.hpp"

namespace simgap {

using nlohmann::ordered_json;

std::vector<TestPoint> sample_test_points(const Box& box,
                                          const std::vector<Vec>& inputs,
                                          std::size_t count, std::uint64_t seed) {
  if (inputs.empty()) throw InvalidArgument("sample_test_points: no inputs");
  Engine eng = make_engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);
  std::vector<TestPoint> pts;
  pts.reserve(count);
  for (std::size_t p = 0; p < count; ++p) {
    Vec x(box.size());
    for (std::size_t k = 0; k < box.size(); ++k)
      x[k] = box[k].lo + unit(eng) * box[k].width();
    pts.emplace_back(std::move(x), inputs[pick(eng)]);
  }
  return pts;
}

Vec coverage_check(const GapModel& gap, const NominalModel& model,
                   const Simulator& sim, const std::vector<TestPoint>& points,
                   std::size_t n_test, std::uint64_t seed) {
  const std::size_t n = model.spec().state_dim;
  Vec hits(n, 0.0);
  if (points.empty()) return Vec(n, 1.0);
  auto local = sim.clone();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& [x, u] = points[p];
    Vec mean_gap;
    if (sim.has_true_mean_gap()) {
      mean_gap = sim.true_mean_gap(x, u);
    } else {
      if (n_test == 0) throw InvalidArgument("coverage_check: n_test must be > 0");
      const Vec fx = model.step(x, u);
      Vec acc(n, 0.0);
      for (std::size_t k = 0; k < n_test; ++k) {
        const Vec y = local->step(x, u, derive_seed(seed, {p, k}));
        for (std::size_t i = 0; i < n; ++i) acc[i] += y[i];
      }
      mean_gap.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        mean_gap[i] = std::abs(acc[i] / static_cast<double>(n_test) - fx[i]);
    }
    const Vec g = gap.eval(x, u);
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(mean_gap[i]) <= g[i]) hits[i] += 1.0;
  }
  for (double& h : hits) h /= static_cast<double>(points.size());
  return hits;
}

std::uint64_t closed_loop_seed(std::uint64_t master, std::size_t rep, std::size_t t) {
  return derive_seed(master, {0xc105ed100bULL, rep, t});
}

TrajectoryBundle run_closed_loop(const Controller& controller, const Simulator& sim,
                                 const Vec& x0, std::size_t steps,
                                 std::size_t replicates, std::uint64_t master_seed,
                                 std::size_t workers) {
  const auto start = controller.lookup(x0);
  if (!start.input) {
    if (start.out_of_domain)
      throw InvalidArgument("initial state " + format_vec(x0) + " is outside the grid");
    throw InvalidArgument("initial state " + format_vec(x0) + " lies in cell " +
                          std::to_string(*start.cell) + ", which is not winning");
  }
  TrajectoryBundle b;
  b.state_dim = controller.grid.dim();
  b.input_dim = controller.inputs.empty() ? 0 : controller.inputs[0].size();
  b.x0 = x0;
  b.steps = steps;
  b.master_seed = master_seed;
  b.replicates.resize(replicates);

  workers = std::max<std::size_t>(1, std::min(workers, replicates));
  std::vector<std::unique_ptr<Simulator>> sims;
  for (std::size_t w = 0; w < workers; ++w) sims.push_back(sim.clone());

  parallel_for(replicates, workers, [&](std::size_t w, std::size_t rep) {
    Trajectory& tr = b.replicates[rep];
    tr.states.reserve(steps + 1);
    tr.states.push_back(x0);
    for (std::size_t t = 0; t < steps; ++t) {
      const Vec& x = tr.states.back();
      const auto look = controller.lookup(x);
      if (!look.input) {
        tr.truncated = true;
        return;
      }
      const Vec& u = controller.inputs[*look.input];
      tr.inputs.push_back(u);
      tr.states.push_back(sims[w]->step(x, u, closed_loop_seed(master_seed, rep, t)));
    }
  });

  for (std::size_t t = 0; t <= steps; ++t) {
    Vec acc(b.state_dim, 0.0);
    std::size_t alive = 0;
    for (const auto& tr : b.replicates) {
      if (tr.states.size() <= t) continue;
      for (std::size_t i = 0; i < b.state_dim; ++i) acc[i] += tr.states[t][i];
      ++alive;
    }
    if (alive == 0) break;
    for (double& v : acc) v /= static_cast<double>(alive);
    b.mean.push_back(std::move(acc));
  }
  return b;
}

SpecOutcome check_spec(const std::vector<Vec>& states, const SpecDescriptor& spec,
                       std::size_t horizon) {
  SpecOutcome out;
  if (spec.kind == SpecDescriptor::Kind::invariance) {
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (!box_contains(spec.safe, states[t])) {
        out.violation_step = t;
        return out;
      }
    }
    if (states.size() < horizon + 1) {
      out.violation_step = states.size();
      return out;
    }
    out.satisfied = true;
    return out;
  }
  const std::size_t deadline = spec.deadline ? std::min(spec.deadline, horizon) : horizon;
  for (std::size_t t = 0; t < states.size() && t <= deadline; ++t) {
    for (const Box& ob : spec.obstacles) {
      if (box_contains(ob, states[t])) {
        out.collided = true;
        out.violation_step = t;
        return out;
      }
    }
    if (box_contains(spec.target, states[t])) {
      out.reached_step = t;
      out.satisfied = true;
      return out;
    }
  }
  out.violation_step = std::min(states.size(), deadline + 1);
  return out;
}

bool ValidationReport::operator==(const ValidationReport& o) const {
  return serialize_report(*this) == serialize_report(o);
}

ValidationReport summarize(const TrajectoryBundle& bundle, const SpecDescriptor& spec,
                           double declared_confidence) {
  ValidationReport r;
  r.spec = spec;
  r.steps = bundle.steps;
  r.replicates = bundle.replicates.size();
  r.master_seed = bundle.master_seed;
  r.x0 = bundle.x0;
  r.declared_confidence = declared_confidence;
  for (const auto& tr : bundle.replicates) {
    const SpecOutcome o = check_spec(tr.states, spec, bundle.steps);
    r.replicates_satisfied += o.satisfied;
    r.replicates_collided += o.collided;
    r.replicates_truncated += tr.truncated;
  }
  r.replicate_satisfaction_rate =
      r.replicates ? static_cast<double>(r.replicates_satisfied) /
                         static_cast<double>(r.replicates)
                   : 0.0;
  const SpecOutcome m = check_spec(bundle.mean, spec, bundle.steps);
  r.mean_satisfied = m.satisfied;
  r.mean_violation_step = m.violation_step;
  return r;
}

namespace {

ordered_json box_json(const Box& b) {
  ordered_json a = ordered_json::array();
  for (const auto& iv : b) a.push_back({iv.lo, iv.hi});
  return a;
}

Box json_box(const ordered_json& a) {
  Box b;
  for (const auto& iv : a) b.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  return b;
}

}  // namespace

std::string serialize_report(const ValidationReport& r) {
  ordered_json j;
  j["kind"] = "simgap-validation";
  j["version"] = 1;
  j["coverage_rate"] = r.coverage_rate;
  j["coverage_points"] = r.coverage_points;
  ordered_json s;
  s["kind"] = to_string(r.spec.kind);
  if (r.spec.kind == SpecDescriptor::Kind::invariance) {
    s["safe"] = box_json(r.spec.safe);
  } else {
    s["target"] = box_json(r.spec.target);
    s["obstacles"] = ordered_json::array();
    for (const Box& b : r.spec.obstacles) s["obstacles"].push_back(box_json(b));
    s["deadline"] = r.spec.deadline;
  }
  j["spec"] = s;
  j["steps"] = r.steps;
  j["replicates"] = r.replicates;
  j["master_seed"] = r.master_seed;
  j["x0"] = r.x0;
  j["replicates_satisfied"] = r.replicates_satisfied;
  j["replicates_truncated"] = r.replicates_truncated;
  j["replicates_collided"] = r.replicates_collided;
  j["replicate_satisfaction_rate"] = r.replicate_satisfaction_rate;
  j["mean_satisfied"] = r.mean_satisfied;
  j["mean_violation_step"] =
      r.mean_violation_step ? ordered_json(*r.mean_violation_step) : ordered_json(nullptr);
  j["declared_confidence"] = r.declared_confidence;
  j["controller_sha256"] = r.controller_digest;
  return j.dump(1) + "\n";
}

ValidationReport parse_report(const std::string& text) {
  ValidationReport r;
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("kind", "") != "simgap-validation")
      throw InvalidArgument("not a validation report");
    r.coverage_rate = j.at("coverage_rate").get<Vec>();
    r.coverage_points = j.at("coverage_points").get<std::size_t>();
    const auto& s = j.at("spec");
    if (s.at("kind") == "invariance") {
      r.spec.kind = SpecDescriptor::Kind::invariance;
      r.spec.safe = json_box(s.at("safe"));
    } else {
      r.spec.kind = SpecDescriptor::Kind::reach_avoid;
      r.spec.target = json_box(s.at("target"));
      for (const auto& b : s.at("obstacles")) r.spec.obstacles.push_back(json_box(b));
      r.spec.deadline = s.at("deadline").get<std::size_t>();
    }
    r.steps = j.at("steps").get<std::size_t>();
    r.replicates = j.at("replicates").get<std::size_t>();
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.x0 = j.at("x0").get<Vec>();
    r.replicates_satisfied = j.at("replicates_satisfied").get<std::size_t>();
    r.replicates_truncated = j.at("replicates_truncated").get<std::size_t>();
    r.replicates_collided = j.at("replicates_collided").get<std::size_t>();
    r.replicate_satisfaction_rate = j.at("replicate_satisfaction_rate").get<double>();
    r.mean_satisfied = j.at("mean_satisfied").get<bool>();
    if (!j.at("mean_violation_step").is_null())
      r.mean_violation_step = j.at("mean_violation_step").get<std::size_t>();
    r.declared_confidence = j.at("declared_confidence").get<double>();
    r.controller_digest = j.at("controller_sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed validation report: ") + e.what());
  }
  return r;
}

void write_trajectories_csv(const TrajectoryBundle& bundle,
                            const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "replicate,step";
  for (std::size_t i = 0; i < bundle.state_dim; ++i) os << ",x" << i + 1;
  for (std::size_t i = 0; i < bundle.input_dim; ++i) os << ",u" << i + 1;
  os << "\n";
  for (std::size_t r = 0; r < bundle.replicates.size(); ++r) {
    const auto& tr = bundle.replicates[r];
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      os << r << "," << t;
      for (double v : tr.states[t]) os << "," << format_double(v);
      for (std::size_t i = 0; i < bundle.input_dim; ++i) {
        os << ",";
        if (t < tr.inputs.size()) os << format_double(tr.inputs[t][i]);
      }
      os << "\n";
    }
  }
  if (!os) throw Error("failed writing " + path.string());
}

void emit_report(const ValidationReport& report, const TrajectoryBundle& bundle,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream os(dir / "validation.json", std::ios::binary);
    if (!os) throw Error("cannot open " + (dir / "validation.json").string() + " for writing");
    os << serialize_report(report);
  }
  write_trajectories_csv(bundle, dir / "trajectories.csv");
  std::ofstream os(dir / "mean.csv", std::ios::binary);
  if (!os) throw Error("cannot open " + (dir / "mean.csv").string() + " for writing");
  os << "step";
  for (std::size_t i = 0; i < bundle.state_dim; ++i) os << ",x" << i + 1;
  os << "\n";
  for (std::size_t t = 0; t < bundle.mean.size(); ++t) {
    os << t;
    for (double v : bundle.mean[t]) os << "," << format_double(v);
    os << "\n";
  }
}

}  // namespace simgap
