#include "simgap/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "simgap/dataset.hpp"
#include "simgap/digest.hpp"
#include "simgap/error.hpp"
#include "simgap/external_simulator.hpp"
#include "simgap/rng.hpp"

namespace simgap {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Collects schema problems while walking the document.
class Schema {
 public:
  std::vector<std::string> issues;

  void issue(const std::string& path, const std::string& what) {
    issues.push_back(path + ": " + what);
  }

  /// Reports keys of `obj` outside `allowed`.
  void only(const json& obj, const std::string& path,
            std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) return;
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) issue(path + "." + it.key(), "unknown key");
  }

  const json* section(const json& obj, const std::string& key,
                      const std::string& path, bool required) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) issue(path + "." + key, "missing");
      return nullptr;
    }
    const json& v = obj.at(key);
    if (!v.is_object()) {
      issue(path + "." + key, "must be an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json* obj, const std::string& key,
                               const std::string& path, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj->at(key);
    if (!v.is_number()) {
      issue(path + "." + key, "must be a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::uint64_t> count(const json* obj, const std::string& key,
                                     const std::string& path, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj->at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      issue(path + "." + key, "must be a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::string> text(const json* obj, const std::string& key,
                                  const std::string& path, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj->at(key);
    if (!v.is_string()) {
      issue(path + "." + key, "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<bool> flag(const json* obj, const std::string& key,
                           const std::string& path) {
    if (!obj || !obj->contains(key)) return std::nullopt;
    const json& v = obj->at(key);
    if (!v.is_boolean()) {
      issue(path + "." + key, "must be true or false");
      return std::nullopt;
    }
    return v.get<bool>();
  }

  std::optional<Vec> vec(const json* obj, const std::string& key,
                         const std::string& path, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    return vec_value(obj->at(key), path + "." + key);
  }

  std::optional<Vec> vec_value(const json& v, const std::string& path) {
    if (!v.is_array()) {
      issue(path, "must be an array of numbers");
      return std::nullopt;
    }
    Vec out;
    for (const auto& e : v) {
      if (!e.is_number()) {
        issue(path, "must be an array of numbers");
        return std::nullopt;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// A number broadcast to n entries, or an array of exactly n numbers.
  std::optional<Vec> per_dim(const json* obj, const std::string& key,
                             const std::string& path, std::size_t n, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj->at(key);
    if (v.is_number()) return Vec(n, v.get<double>());
    auto out = vec_value(v, path + "." + key);
    if (out && n && out->size() != n) {
      issue(path + "." + key, "needs " + std::to_string(n) + " entries, got " +
                                  std::to_string(out->size()));
      return std::nullopt;
    }
    return out;
  }

  std::optional<Box> box(const json* obj, const std::string& key,
                         const std::string& path, bool required) {
    if (!obj || !obj->contains(key)) {
      if (required && obj) issue(path + "." + key, "missing");
      return std::nullopt;
    }
    return box_value(obj->at(key), path + "." + key);
  }

  std::optional<Box> box_value(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) {
      issue(path, "must be a non-empty array of [lo, hi] pairs");
      return std::nullopt;
    }
    Box b;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        issue(path, "must be a non-empty array of [lo, hi] pairs");
        return std::nullopt;
      }
      const double lo = e[0].get<double>(), hi = e[1].get<double>();
      if (!(lo <= hi)) {
        issue(path, "interval [" + format_double(lo) + ", " + format_double(hi) +
                        "] has lo > hi");
        return std::nullopt;
      }
      b.push_back({lo, hi});
    }
    return b;
  }
};

bool box_within(const Box& inner, const Box& outer) {
  if (inner.size() != outer.size()) return false;
  for (std::size_t k = 0; k < inner.size(); ++k)
    if (inner[k].lo < outer[k].lo || inner[k].hi > outer[k].hi) return false;
  return true;
}

ModelKind parse_model(const std::string& s) {
  if (s == "pendulum") return ModelKind::pendulum;
  if (s == "turtlebot") return ModelKind::turtlebot;
  if (s == "affine") return ModelKind::affine_test;
  throw InvalidArgument("unknown model '" + s + "'");
}

std::string model_name(ModelKind k) {
  return k == ModelKind::affine_test ? "affine" : to_string(k);
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }
  if (!doc.is_object()) throw ConfigError({"top level must be an object"});

  Schema s;
  PipelineConfig c;
  s.only(doc, "$", {"system", "simulator", "cover", "sampling", "estimation", "gap",
                    "synthesis", "spec", "validation", "seed", "output_dir", "workers"});

  // system
  std::size_t n = 0, m = 0;
  const json* sys = s.section(doc, "system", "$", true);
  if (sys) {
    s.only(*sys, "system", {"model", "tau", "state_box", "input", "pendulum", "affine"});
    if (auto name = s.text(sys, "model", "system", true)) {
      try {
        c.model = parse_model(*name);
      } catch (const InvalidArgument&) {
        s.issue("system.model", "must be one of pendulum, turtlebot, affine");
      }
    }
    if (auto tau = s.number(sys, "tau", "system", true)) {
      if (!(*tau > 0.0)) s.issue("system.tau", "must be > 0");
      c.system.tau = *tau;
    }
    if (auto b = s.box(sys, "state_box", "system", true)) {
      c.system.state_box = *b;
      n = b->size();
      for (std::size_t k = 0; k < n; ++k)
        if (!((*b)[k].hi > (*b)[k].lo))
          s.issue("system.state_box", "axis " + std::to_string(k) + " has zero width");
    }
    if (const json* in = s.section(*sys, "input", "system", true)) {
      s.only(*in, "system.input", {"lower", "upper", "step"});
      auto lo = s.vec(in, "lower", "system.input", true);
      auto hi = s.vec(in, "upper", "system.input", true);
      auto st = s.vec(in, "step", "system.input", true);
      if (lo && hi && st) {
        if (lo->size() != hi->size() || lo->size() != st->size() || lo->empty()) {
          s.issue("system.input", "lower, upper and step need the same non-zero length");
        } else {
          m = lo->size();
          c.input_lower = *lo;
          c.input_upper = *hi;
          c.input_step = *st;
          try {
            c.system.input_grid = enumerate_inputs(*lo, *hi, *st);
          } catch (const std::exception& e) {
            s.issue("system.input", e.what());
          }
        }
      }
    }
    if (const json* p = s.section(*sys, "pendulum", "system", false)) {
      s.only(*p, "system.pendulum", {"mass", "length", "gravity"});
      c.pendulum.mass = s.number(p, "mass", "system.pendulum", false).value_or(1.0);
      c.pendulum.length = s.number(p, "length", "system.pendulum", false).value_or(1.0);
      c.pendulum.gravity = s.number(p, "gravity", "system.pendulum", false).value_or(9.81);
      if (!(c.pendulum.mass > 0.0) || !(c.pendulum.length > 0.0))
        s.issue("system.pendulum", "mass and length must be > 0");
    }
    const json* aff = s.section(*sys, "affine", "system", false);
    if (aff) {
      s.only(*aff, "system.affine", {"A", "B", "c"});
      c.affine_a = s.vec(aff, "A", "system.affine", true).value_or(Vec{});
      c.affine_b = s.vec(aff, "B", "system.affine", true).value_or(Vec{});
      c.affine_c = s.vec(aff, "c", "system.affine", false).value_or(Vec(n, 0.0));
    }
    c.system.state_dim = n;
    c.system.input_dim = m;
    if (c.model == ModelKind::pendulum && n && m && (n != 2 || m != 1))
      s.issue("system", "pendulum needs a 2-D state box and a 1-D input");
    if (c.model == ModelKind::turtlebot && n && m && (n != 3 || m != 2))
      s.issue("system", "turtlebot needs a 3-D state box and a 2-D input");
    if (c.model == ModelKind::affine_test) {
      if (!aff) {
        s.issue("system.affine", "missing (required for the affine model)");
      } else if (n && m &&
                 (c.affine_a.size() != n * n || c.affine_b.size() != n * m ||
                  c.affine_c.size() != n)) {
        s.issue("system.affine", "A must have n*n, B n*m and c n entries");
      }
    }
  }

  // simulator
  if (const json* sim = s.section(doc, "simulator", "$", true)) {
    s.only(*sim, "simulator", {"backend", "bias", "noise", "command", "timeout_ms"});
    c.simulator.backend = s.text(sim, "backend", "simulator", false).value_or("synthetic");
    if (c.simulator.backend == "synthetic") {
      if (sim->contains("bias")) {
        const json& b = sim->at("bias");
        if (!b.is_array() || (n && b.size() != n)) {
          s.issue("simulator.bias", "must be an array with one term per state dimension");
        } else {
          for (std::size_t i = 0; i < b.size(); ++i) {
            const std::string p = "simulator.bias[" + std::to_string(i) + "]";
            if (!b[i].is_object()) {
              s.issue(p, "must be an object");
              continue;
            }
            s.only(b[i], p, {"offset", "state", "input", "amplitude", "frequency", "axis", "phase"});
            BiasTerm t;
            t.offset = s.number(&b[i], "offset", p, false).value_or(0.0);
            t.state_coeffs = s.vec(&b[i], "state", p, false).value_or(Vec{});
            t.input_coeffs = s.vec(&b[i], "input", p, false).value_or(Vec{});
            t.amplitude = s.number(&b[i], "amplitude", p, false).value_or(0.0);
            t.frequency = s.number(&b[i], "frequency", p, false).value_or(0.0);
            t.axis = s.count(&b[i], "axis", p, false).value_or(0);
            t.phase = s.number(&b[i], "phase", p, false).value_or(0.0);
            if (!t.state_coeffs.empty() && n && t.state_coeffs.size() != n)
              s.issue(p + ".state", "needs " + std::to_string(n) + " entries");
            if (!t.input_coeffs.empty() && m && t.input_coeffs.size() != m)
              s.issue(p + ".input", "needs " + std::to_string(m) + " entries");
            if (n && t.axis >= n) s.issue(p + ".axis", "out of range");
            c.simulator.bias.push_back(std::move(t));
          }
        }
      } else {
        c.simulator.bias.assign(n, BiasTerm{});
      }
      if (const json* nz = s.section(*sim, "noise", "simulator", true)) {
        s.only(*nz, "simulator.noise", {"law", "sigma"});
        try {
          c.simulator.noise.law = parse_noise_law(
              s.text(nz, "law", "simulator.noise", false).value_or("gaussian"));
        } catch (const std::exception&) {
          s.issue("simulator.noise.law", "must be gaussian, uniform or truncated_gaussian");
        }
        if (auto sg = s.per_dim(nz, "sigma", "simulator.noise", n, true)) {
          for (double v : *sg)
            if (!(v >= 0.0)) s.issue("simulator.noise.sigma", "must be >= 0");
          c.simulator.noise.sigma = *sg;
        }
      }
    } else if (c.simulator.backend == "external") {
      const json& cmd = sim->contains("command") ? sim->at("command") : json();
      if (!cmd.is_array() || cmd.empty()) {
        s.issue("simulator.command", "must be a non-empty array of strings");
      } else {
        for (const auto& a : cmd) {
          if (!a.is_string()) {
            s.issue("simulator.command", "must be a non-empty array of strings");
            break;
          }
          c.simulator.command.push_back(a.get<std::string>());
        }
      }
      if (auto t = s.count(sim, "timeout_ms", "simulator", false)) {
        if (*t == 0) s.issue("simulator.timeout_ms", "must be > 0");
        c.simulator.timeout_ms = static_cast<std::int64_t>(*t);
      }
    } else {
      s.issue("simulator.backend", "must be synthetic or external");
    }
  }

  // cover and sampling
  if (const json* cv = s.section(doc, "cover", "$", true)) {
    s.only(*cv, "cover", {"epsilon", "max_centers"});
    if (auto e = s.number(cv, "epsilon", "cover", true)) {
      if (!(*e > 0.0)) s.issue("cover.epsilon", "must be > 0");
      c.epsilon = *e;
    }
    c.max_centers = s.count(cv, "max_centers", "cover", false).value_or(kDefaultCoverCap);
  }
  if (const json* sp = s.section(doc, "sampling", "$", true)) {
    s.only(*sp, "sampling", {"n_hat_1"});
    if (auto k = s.count(sp, "n_hat_1", "sampling", true)) {
      if (*k < 2) s.issue("sampling.n_hat_1", "must be >= 2");
      c.n_hat_1 = *k;
    }
  }

  // estimation
  const json* est = s.section(doc, "estimation", "$", false);
  if (est) {
    s.only(*est, "estimation", {"variance_safety", "lipschitz_safety", "lipschitz_f",
                                "lipschitz_fhat"});
    c.variance_safety = s.number(est, "variance_safety", "estimation", false).value_or(10.0);
    c.lipschitz_safety = s.number(est, "lipschitz_safety", "estimation", false).value_or(1.2);
    if (!(c.variance_safety >= 1.0)) s.issue("estimation.variance_safety", "must be >= 1");
    if (!(c.lipschitz_safety >= 1.0)) s.issue("estimation.lipschitz_safety", "must be >= 1");
    for (const char* key : {"lipschitz_f", "lipschitz_fhat"}) {
      auto& dst = std::string(key) == "lipschitz_f" ? c.lipschitz_f_override
                                                    : c.lipschitz_fhat_override;
      if (!est->contains(key)) continue;
      const json& v = est->at(key);
      if (!v.is_array() || (n && v.size() != n)) {
        s.issue(std::string("estimation.") + key,
                "must be an array of n numbers or nulls");
        continue;
      }
      for (const auto& e : v) {
        if (e.is_null()) {
          dst.emplace_back();
        } else if (e.is_number() && e.get<double>() >= 0.0) {
          dst.emplace_back(e.get<double>());
        } else {
          s.issue(std::string("estimation.") + key, "entries must be >= 0 or null");
          break;
        }
      }
    }
  }

  // gap
  if (const json* gp = s.section(doc, "gap", "$", true)) {
    s.only(*gp, "gap", {"basis_degree", "delta1", "delta2"});
    if (auto d = s.per_dim(gp, "basis_degree", "gap", n, false)) {
      for (double v : *d) {
        if (!(v >= 0.0 && v <= 6.0 && v == std::floor(v))) {
          s.issue("gap.basis_degree", "entries must be integers in [0, 6]");
          break;
        }
        c.basis_degree.push_back(static_cast<unsigned>(v));
      }
    } else {
      c.basis_degree.assign(n ? n : 1, 1);
    }
    const bool noisy = c.simulator.backend == "external" ||
                       std::any_of(c.simulator.noise.sigma.begin(),
                                   c.simulator.noise.sigma.end(),
                                   [](double v) { return v > 0.0; });
    for (const char* key : {"delta1", "delta2"}) {
      auto d = s.per_dim(gp, key, "gap", n, true);
      if (!d) continue;
      for (double v : *d) {
        if (!(v >= 0.0)) s.issue(std::string("gap.") + key, "must be >= 0");
        else if (v == 0.0 && noisy)
          s.issue(std::string("gap.") + key,
                  "must be > 0 for a stochastic simulator (the confidence would be 0)");
      }
      (std::string(key) == "delta1" ? c.delta1 : c.delta2) = *d;
    }
  }

  // synthesis
  if (const json* sy = s.section(doc, "synthesis", "$", true)) {
    s.only(*sy, "synthesis", {"grid_widths", "growth", "max_transitions", "use_gap"});
    if (auto w = s.per_dim(sy, "grid_widths", "synthesis", n, true)) {
      for (double v : *w)
        if (!(v > 0.0)) s.issue("synthesis.grid_widths", "must be > 0");
      c.grid_widths = *w;
    }
    try {
      c.growth = parse_growth_mode(
          s.text(sy, "growth", "synthesis", false).value_or("componentwise"));
    } catch (const InvalidArgument&) {
      s.issue("synthesis.growth", "must be componentwise or euclidean");
    }
    c.max_transitions =
        s.count(sy, "max_transitions", "synthesis", false).value_or(kDefaultTransitionCap);
    c.use_gap = s.flag(sy, "use_gap", "synthesis").value_or(true);
  }

  // spec
  if (const json* sp = s.section(doc, "spec", "$", true)) {
    s.only(*sp, "spec", {"kind", "safe", "target", "obstacles", "deadline"});
    const auto kind = s.text(sp, "kind", "spec", true).value_or("");
    auto within = [&](const Box& b, const std::string& path) {
      if (n && !box_within(b, c.system.state_box))
        s.issue(path, "must lie within the state box");
    };
    if (kind == "invariance") {
      c.spec.kind = SpecDescriptor::Kind::invariance;
      if (auto b = s.box(sp, "safe", "spec", true)) {
        c.spec.safe = *b;
        within(*b, "spec.safe");
      }
    } else if (kind == "reach-avoid") {
      c.spec.kind = SpecDescriptor::Kind::reach_avoid;
      if (auto b = s.box(sp, "target", "spec", true)) {
        c.spec.target = *b;
        within(*b, "spec.target");
      }
      if (sp->contains("obstacles")) {
        const json& obs = sp->at("obstacles");
        if (!obs.is_array()) {
          s.issue("spec.obstacles", "must be an array of boxes");
        } else {
          for (std::size_t i = 0; i < obs.size(); ++i) {
            const std::string p = "spec.obstacles[" + std::to_string(i) + "]";
            if (auto b = s.box_value(obs[i], p)) {
              if (b->size() != n && n) s.issue(p, "has wrong dimension");
              c.spec.obstacles.push_back(*b);
            }
          }
        }
      }
      c.spec.deadline = s.count(sp, "deadline", "spec", false).value_or(0);
    } else if (!kind.empty()) {
      s.issue("spec.kind", "must be invariance or reach-avoid");
    }
  }

  // validation
  if (const json* va = s.section(doc, "validation", "$", true)) {
    s.only(*va, "validation", {"x0", "steps", "replicates", "coverage_points",
                               "coverage_replicates"});
    if (auto x = s.vec(va, "x0", "validation", true)) {
      if (n && x->size() != n) s.issue("validation.x0", "needs " + std::to_string(n) + " entries");
      else if (n && !box_contains(c.system.state_box, *x))
        s.issue("validation.x0", "must lie within the state box");
      c.x0 = *x;
    }
    c.steps = s.count(va, "steps", "validation", true).value_or(0);
    c.replicates = s.count(va, "replicates", "validation", true).value_or(0);
    if (c.replicates == 0 && va->contains("replicates"))
      s.issue("validation.replicates", "must be >= 1");
    c.coverage_points = s.count(va, "coverage_points", "validation", false).value_or(0);
    c.coverage_replicates =
        s.count(va, "coverage_replicates", "validation", false).value_or(100);
  }

  if (!doc.contains("seed")) {
    s.issue("$.seed", "missing");
  } else if (!doc["seed"].is_number_unsigned()) {
    s.issue("$.seed", "must be a non-negative integer");
  } else {
    c.master_seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) {
    if (doc["output_dir"].is_string()) c.output_dir = doc["output_dir"].get<std::string>();
    else s.issue("$.output_dir", "must be a string");
  }
  if (doc.contains("workers")) {
    if (doc["workers"].is_number_unsigned() && doc["workers"].get<std::uint64_t>() >= 1)
      c.workers = doc["workers"].get<std::size_t>();
    else
      s.issue("$.workers", "must be an integer >= 1");
  }

  if (s.issues.empty()) {
    try {
      c.system.validate();
    } catch (const std::exception& e) {
      s.issue("system", e.what());
    }
  }
  if (!s.issues.empty()) throw ConfigError(std::move(s.issues));
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact("config not found: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

namespace {

ordered_json box_json(const Box& b) {
  ordered_json a = ordered_json::array();
  for (const auto& iv : b) a.push_back({iv.lo, iv.hi});
  return a;
}

}  // namespace

std::string resolved_config_json(const PipelineConfig& c) {
  ordered_json j;
  ordered_json sys;
  sys["model"] = model_name(c.model);
  sys["tau"] = c.system.tau;
  sys["state_box"] = box_json(c.system.state_box);
  sys["input"] = {{"lower", c.input_lower}, {"upper", c.input_upper}, {"step", c.input_step}};
  if (c.model == ModelKind::pendulum)
    sys["pendulum"] = {{"mass", c.pendulum.mass},
                       {"length", c.pendulum.length},
                       {"gravity", c.pendulum.gravity}};
  if (c.model == ModelKind::affine_test)
    sys["affine"] = {{"A", c.affine_a}, {"B", c.affine_b}, {"c", c.affine_c}};
  j["system"] = sys;

  ordered_json sim;
  sim["backend"] = c.simulator.backend;
  if (c.simulator.backend == "synthetic") {
    sim["bias"] = ordered_json::array();
    for (const auto& t : c.simulator.bias)
      sim["bias"].push_back({{"offset", t.offset},
                             {"state", t.state_coeffs},
                             {"input", t.input_coeffs},
                             {"amplitude", t.amplitude},
                             {"frequency", t.frequency},
                             {"axis", t.axis},
                             {"phase", t.phase}});
    sim["noise"] = {{"law", to_string(c.simulator.noise.law)},
                    {"sigma", c.simulator.noise.sigma}};
  } else {
    sim["command"] = c.simulator.command;
    sim["timeout_ms"] = c.simulator.timeout_ms;
  }
  j["simulator"] = sim;
  j["cover"] = {{"epsilon", c.epsilon}, {"max_centers", c.max_centers}};
  j["sampling"] = {{"n_hat_1", c.n_hat_1}};
  auto overrides = [](const std::vector<std::optional<double>>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& o : v) a.push_back(o ? ordered_json(*o) : ordered_json(nullptr));
    return a;
  };
  j["estimation"] = {{"variance_safety", c.variance_safety},
                     {"lipschitz_safety", c.lipschitz_safety},
                     {"lipschitz_f", overrides(c.lipschitz_f_override)},
                     {"lipschitz_fhat", overrides(c.lipschitz_fhat_override)}};
  j["gap"] = {{"basis_degree", c.basis_degree}, {"delta1", c.delta1}, {"delta2", c.delta2}};
  j["synthesis"] = {{"grid_widths", c.grid_widths},
                    {"growth", to_string(c.growth)},
                    {"max_transitions", c.max_transitions},
                    {"use_gap", c.use_gap}};
  ordered_json sp;
  sp["kind"] = to_string(c.spec.kind);
  if (c.spec.kind == SpecDescriptor::Kind::invariance) {
    sp["safe"] = box_json(c.spec.safe);
  } else {
    sp["target"] = box_json(c.spec.target);
    sp["obstacles"] = ordered_json::array();
    for (const Box& b : c.spec.obstacles) sp["obstacles"].push_back(box_json(b));
    sp["deadline"] = c.spec.deadline;
  }
  j["spec"] = sp;
  j["validation"] = {{"x0", c.x0},
                     {"steps", c.steps},
                     {"replicates", c.replicates},
                     {"coverage_points", c.coverage_points},
                     {"coverage_replicates", c.coverage_replicates}};
  j["seed"] = c.master_seed;
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  return j.dump(2) + "\n";
}

void apply_environment(PipelineConfig& cfg) {
  if (const char* dir = std::getenv("SIMGAP_OUTPUT_DIR"); dir && *dir)
    cfg.output_dir = dir;
  if (const char* w = std::getenv("SIMGAP_WORKERS"); w && *w) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(w, &end, 10);
    if (*end != '\0' || v == 0)
      throw ConfigError({std::string("SIMGAP_WORKERS: must be an integer >= 1, got '") +
                         w + "'"});
    cfg.workers = v;
  }
}

NominalModel make_model(const PipelineConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::pendulum: return NominalModel::pendulum(cfg.system, cfg.pendulum);
    case ModelKind::turtlebot: return NominalModel::turtlebot(cfg.system);
    case ModelKind::affine_test:
      return NominalModel::affine(cfg.system, cfg.affine_a, cfg.affine_b, cfg.affine_c);
    case ModelKind::user_defined: break;
  }
  throw InvalidArgument("configuration cannot select a user-defined model");
}

std::unique_ptr<Simulator> make_simulator(const PipelineConfig& cfg,
                                          const NominalModel& model) {
  if (cfg.simulator.backend == "external") {
    ExternalOptions opt;
    opt.command = cfg.simulator.command;
    opt.timeout = std::chrono::milliseconds(cfg.simulator.timeout_ms);
    return std::make_unique<ExternalSimulator>(cfg.system, opt);
  }
  return std::make_unique<SyntheticSimulator>(model, cfg.simulator.bias,
                                              cfg.simulator.noise);
}

GrowthBound make_growth(const PipelineConfig& cfg, const EstimationReport& rep) {
  if (cfg.growth == GrowthBound::Mode::euclidean) {
    Vec l;
    for (const auto& d : rep.dims) l.push_back(d.lipschitz_f);
    return GrowthBound::euclidean(std::move(l));
  }
  std::vector<Vec> rows;
  for (const auto& d : rep.dims) rows.push_back(d.growth_row);
  return GrowthBound::componentwise(std::move(rows));
}

namespace {

class StageTimer {
 public:
  StageTimer(const PipelineConfig& cfg, std::string stage)
      : path_(ArtifactPaths{cfg.output_dir}.timing()),
        stage_(std::move(stage)),
        start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream os(path_, std::ios::app);
    if (os) os << stage_ << " " << s << "\n";
  }

 private:
  std::filesystem::path path_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

ArtifactPaths prepare(const PipelineConfig& cfg) {
  ArtifactPaths p{cfg.output_dir};
  std::error_code ec;
  std::filesystem::create_directories(p.dir, ec);
  if (ec) throw Error("cannot create output directory " + p.dir.string() + ": " + ec.message());
  std::ofstream os(p.resolved_config(), std::ios::binary);
  if (!os) throw Error("cannot write " + p.resolved_config().string());
  os << resolved_config_json(cfg);
  return p;
}

template <typename Load>
auto require(Load&& load, const char* what, const char* stage) {
  try {
    return load();
  } catch (const MissingArtifact& e) {
    throw MissingArtifact(std::string(what) + " not found; run " + stage + " (" +
                          e.what() + ")");
  }
}

Dataset need_dataset(const ArtifactPaths& p) {
  return require([&] { return load_dataset(p.dataset()); }, "dataset", "collect");
}

EstimationReport need_estimation(const ArtifactPaths& p) {
  return require([&] { return load_estimation(p.estimation()); }, "estimation report",
                 "estimate");
}

GapModel need_gap(const ArtifactPaths& p) {
  return require([&] { return load_gap_model(p.gap()); }, "gap model", "fit-gap");
}

Controller need_controller(const ArtifactPaths& p) {
  return require([&] { return load_controller(p.controller()); }, "controller",
                 "synthesize");
}

std::string fmt_vec_plain(const Vec& v) {
  std::ostringstream os;
  os.precision(6);
  os << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  return os.str();
}

}  // namespace

int stage_collect(const PipelineConfig& cfg, std::ostream& log) {
  const ArtifactPaths p = prepare(cfg);
  StageTimer timer(cfg, "collect");
  const NominalModel model = make_model(cfg);
  const auto sim = make_simulator(cfg, model);
  const Cover cover = build_cover(cfg.system.state_box, cfg.epsilon, cfg.max_centers);

  CollectOptions opt;
  opt.workers = cfg.workers;
  opt.checkpoint = p.partial_dataset();
  std::optional<Dataset> partial;
  if (std::filesystem::exists(p.partial_dataset())) {
    partial = load_dataset(p.partial_dataset());
    opt.resume = &*partial;
  }
  const Dataset ds = collect_dataset(model, *sim, cover, cfg.n_hat_1, cfg.master_seed, opt);
  save_dataset(ds, p.dataset());
  std::filesystem::remove(p.partial_dataset());
  log << "collect: " << cover.size() << " centers x " << cfg.system.input_count()
      << " inputs x " << cfg.n_hat_1 << " replicates -> " << p.dataset().string() << "\n";
  return kExitOk;
}

int stage_estimate(const PipelineConfig& cfg, std::ostream& log) {
  const ArtifactPaths p = prepare(cfg);
  StageTimer timer(cfg, "estimate");
  const Dataset ds = need_dataset(p);
  EstimateOptions opt;
  opt.variance_safety = cfg.variance_safety;
  opt.lipschitz_safety = cfg.lipschitz_safety;
  opt.lipschitz_f_override = cfg.lipschitz_f_override;
  opt.lipschitz_fhat_override = cfg.lipschitz_fhat_override;
  opt.workers = cfg.workers;
  const EstimationReport rep = estimate(ds, opt);
  save_estimation(rep, p.estimation());
  Vec mv, lf, lh;
  for (const auto& d : rep.dims) {
    mv.push_back(d.variance_bound);
    lf.push_back(d.lipschitz_f);
    lh.push_back(d.lipschitz_fhat);
  }
  log << "estimate: M = " << fmt_vec_plain(mv) << ", L_f = " << fmt_vec_plain(lf)
      << ", L_fhat = " << fmt_vec_plain(lh) << "\n";
  return kExitOk;
}

int stage_fit_gap(const PipelineConfig& cfg, std::ostream& log) {
  const ArtifactPaths p = prepare(cfg);
  StageTimer timer(cfg, "fit-gap");
  const Dataset ds = need_dataset(p);
  EstimationReport rep = need_estimation(p);
  FitOptions opt;
  opt.basis_degree = cfg.basis_degree;
  opt.delta1 = cfg.delta1;
  opt.delta2 = cfg.delta2;
  opt.workers = cfg.workers;
  const GapModel gap = fit_gap(ds, rep, opt);
  save_gap_model(gap, p.gap());
  Vec eta;
  for (const auto& d : gap.dims) eta.push_back(d.eta);
  log << "fit-gap: eta = " << fmt_vec_plain(eta) << ", overall confidence "
      << gap.overall_confidence << "\n";
  return kExitOk;
}

int stage_synthesize(const PipelineConfig& cfg, std::ostream& log) {
  const ArtifactPaths p = prepare(cfg);
  StageTimer timer(cfg, "synthesize");
  const EstimationReport rep = need_estimation(p);
  GapModel gap;
  std::string digest;
  if (cfg.use_gap) {
    gap = need_gap(p);
    digest = sha256_file(p.gap());
  } else {
    gap = GapModel::zero(cfg.system.state_dim, cfg.system.input_dim);
    digest = sha256_hex(serialize_gap_model(gap));
  }
  const NominalModel model = make_model(cfg);
  const SymbolicModel sym(model, gap, StateGrid(cfg.system.state_box, cfg.grid_widths),
                          make_growth(cfg, rep), cfg.workers, cfg.max_transitions);
  Controller ctl = synthesize(sym, cfg.spec, cfg.workers);
  ctl.gap_digest = digest;
  save_controller(ctl, p.controller());
  const auto start = ctl.lookup(cfg.x0);
  log << "synthesize: " << to_string(cfg.spec.kind) << ", " << ctl.winning_count() << " of "
      << ctl.grid.size() << " cells winning, initial state "
      << (start.input ? "winning" : "not winning")
      << (cfg.use_gap ? "" : " (gap ignored)") << "\n";
  return ctl.winning_count() == 0 ? kExitUnsatisfied : kExitOk;
}

int stage_validate(const PipelineConfig& cfg, std::ostream& log) {
  const ArtifactPaths p = prepare(cfg);
  StageTimer timer(cfg, "validate");
  const Controller ctl = need_controller(p);
  const GapModel gap = cfg.use_gap ? need_gap(p)
                                   : GapModel::zero(cfg.system.state_dim, cfg.system.input_dim);
  const NominalModel model = make_model(cfg);
  const auto sim = make_simulator(cfg, model);

  ValidationReport report;
  if (cfg.coverage_points > 0) {
    const auto pts = sample_test_points(cfg.system.state_box, cfg.system.input_grid,
                                        cfg.coverage_points,
                                        derive_seed(cfg.master_seed, {3}));
    report.coverage_rate = coverage_check(gap, model, *sim, pts, cfg.coverage_replicates,
                                          derive_seed(cfg.master_seed, {4}));
    report.coverage_points = cfg.coverage_points;
  }
  if (!ctl.lookup(cfg.x0).input) {
    const auto cell = ctl.lookup(cfg.x0).cell;
    log << to_string(cfg.spec.kind) << ": initial state not in the winning set"
        << (cell ? " (cell " + std::to_string(*cell) + ")" : std::string()) << "\n";
    return kExitUnsatisfied;
  }
  const TrajectoryBundle bundle =
      run_closed_loop(ctl, *sim, cfg.x0, cfg.steps, cfg.replicates,
                      derive_seed(cfg.master_seed, {2}), cfg.workers);
  const ValidationReport s = summarize(bundle, cfg.spec, gap.overall_confidence);
  const Vec cov = report.coverage_rate;
  const std::size_t pts = report.coverage_points;
  report = s;
  report.coverage_rate = cov;
  report.coverage_points = pts;
  report.controller_digest = sha256_file(p.controller());
  emit_report(report, bundle, p.validation_dir());

  log << to_string(cfg.spec.kind) << ": mean-trajectory "
      << (report.mean_satisfied ? "satisfied" : "violated");
  if (report.mean_violation_step) log << " at step " << *report.mean_violation_step;
  log << "; replicates " << report.replicates_satisfied << "/" << report.replicates
      << " satisfied";
  if (cfg.spec.kind == SpecDescriptor::Kind::reach_avoid)
    log << ", " << report.replicates_collided << " collided";
  if (!report.coverage_rate.empty()) log << "; gap coverage " << fmt_vec_plain(report.coverage_rate);
  log << "; declared confidence " << report.declared_confidence << "\n";
  return report.mean_satisfied ? kExitOk : kExitUnsatisfied;
}

int stage_run_all(const PipelineConfig& cfg, std::ostream& log) {
  for (auto stage : {stage_collect, stage_estimate, stage_fit_gap}) {
    const int rc = stage(cfg, log);
    if (rc != kExitOk) return rc;
  }
  const int rc = stage_synthesize(cfg, log);
  if (rc != kExitOk) return rc;
  return stage_validate(cfg, log);
}

}  // namespace simgap
