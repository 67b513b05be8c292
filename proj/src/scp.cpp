#include "simgap/scp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "simgap/error.hpp"
#include "simgap/parallel.hpp"

namespace simgap {

using nlohmann::ordered_json;

Vec residuals(const Dataset& ds, std::size_t dim) {
  if (dim >= ds.spec.state_dim) throw InvalidArgument("residuals: bad dimension");
  if (!ds.complete) throw InvalidArgument("residuals: dataset is incomplete");
  Vec out(ds.records.size());
  for (std::size_t idx = 0; idx < ds.records.size(); ++idx) {
    const auto& rec = ds.records[idx];
    out[idx] = std::abs(ds.empirical_mean(rec)[dim] - rec.nominal[dim]);
  }
  return out;
}

Eigen::MatrixXd basis_matrix(const Dataset& ds, const Basis& basis) {
  Eigen::MatrixXd P(static_cast<Eigen::Index>(ds.records.size()),
                    static_cast<Eigen::Index>(basis.size()));
  Vec row(basis.size());
  for (std::size_t idx = 0; idx < ds.records.size(); ++idx) {
    const auto& rec = ds.records[idx];
    basis.eval(ds.cover.centers[rec.r], ds.spec.input_grid[rec.j], row);
    for (std::size_t l = 0; l < row.size(); ++l)
      P(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(l)) = row[l];
  }
  return P;
}

ScenarioLP assemble_scp(std::span<const double> res,
                        const Eigen::MatrixXd& P, double delta1) {
  if (!(delta1 >= 0.0)) throw InvalidArgument("assemble_scp: delta1 < 0");
  if (static_cast<std::size_t>(P.rows()) != res.size())
    throw InvalidArgument("assemble_scp: residual count != basis rows");
  const Eigen::Index S = P.rows(), z = P.cols();
  ScenarioLP scp;
  scp.basis_size = static_cast<std::size_t>(z);
  auto& lp = scp.lp;
  lp.A.setZero(2 * S, z + 1);
  lp.b.setZero(2 * S);
  lp.c.setZero(z + 1);
  lp.c(z) = 1.0;
  for (Eigen::Index s = 0; s < S; ++s) {
    lp.A.row(2 * s).head(z) = P.row(s);
    lp.A(2 * s, z) = -1.0;
    lp.A.row(2 * s + 1).head(z) = -P.row(s);
    lp.b(2 * s + 1) = -(res[static_cast<std::size_t>(s)] + delta1);
  }
  return scp;
}

DimensionFit fit_dimension(std::span<const double> res,
                           const Eigen::MatrixXd& P, double delta1,
                           const LpOptions& options) {
  DimensionFit fit;
  fit.scp = assemble_scp(res, P, delta1);
  fit.result = solve_lp(fit.scp.lp, options);
  if (fit.result.status == LpStatus::infeasible)
    throw Error("scenario program infeasible: constraint row " +
                std::to_string(fit.result.violated_row) + " (sample " +
                std::to_string(fit.result.violated_row / 2) +
                ") cannot be satisfied by the basis");
  if (fit.result.status == LpStatus::unbounded)
    throw Error("scenario program unbounded");

  const Eigen::Index z = P.cols();
  Eigen::VectorXd q = fit.result.y.head(z);
  Eigen::VectorXd fitted = P * q;
  // Floating-point slack from the solve is pushed into the constant term so
  // the lower constraints hold exactly at every sample.
  double slack = 0.0;
  for (Eigen::Index s = 0; s < P.rows(); ++s)
    slack = std::max(slack, res[static_cast<std::size_t>(s)] + delta1 - fitted(s));
  if (slack > 0.0) {
    for (Eigen::Index l = 0; l < z; ++l) {
      if ((P.col(l).array() == 1.0).all()) {
        q(l) += slack;
        fitted = P * q;
        break;
      }
    }
  }
  fit.q.assign(q.data(), q.data() + z);
  fit.eta = P.rows() ? fitted.maxCoeff() : 0.0;
  return fit;
}

double GapDimension::fit(std::span<const double> x,
                         std::span<const double> u) const {
  const Vec p = basis.eval(x, u);
  double s = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) s += q[l] * p[l];
  return s;
}

double GapDimension::eval(std::span<const double> x,
                          std::span<const double> u) const {
  return lipschitz_x() * epsilon + fit(x, u) + delta2;
}

double GapDimension::upper_bound(const Box& cell,
                                 std::span<const double> u) const {
  const Interval e = basis.enclose(q, cell, u);
  return std::max(0.0, lipschitz_x() * epsilon + e.hi + delta2);
}

GapDimension assemble_gap(Vec q, Basis basis, double lipschitz_x, double epsilon,
                          double delta2, double b1, double b2) {
  if (!(lipschitz_x >= 0.0)) throw InvalidArgument("assemble_gap: L_x < 0");
  if (!(epsilon > 0.0)) throw InvalidArgument("assemble_gap: epsilon <= 0");
  if (!(delta2 >= 0.0)) throw InvalidArgument("assemble_gap: delta2 < 0");
  if (q.size() != basis.size())
    throw InvalidArgument("assemble_gap: coefficient count != basis size");
  GapDimension d;
  d.basis = std::move(basis);
  d.q = std::move(q);
  d.lipschitz_f = lipschitz_x;
  d.epsilon = epsilon;
  d.delta2 = delta2;
  d.beta1 = b1;
  d.beta2 = b2;
  return d;
}

double overall_confidence(std::span<const std::pair<double, double>> betas) {
  double s = 0.0;
  for (const auto& [b1, b2] : betas) {
    if (b1 < 0.0 || b1 > 1.0 || b2 < 0.0 || b2 > 1.0)
      throw InvalidArgument("overall_confidence: beta outside [0, 1]");
    s += b1 + b2;
  }
  return std::max(0.0, 1.0 - s);
}

Vec GapModel::eval(std::span<const double> x, std::span<const double> u) const {
  Vec g(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) g[i] = dims[i].eval(x, u);
  return g;
}

Vec GapModel::upper_bound(const Box& cell, std::span<const double> u) const {
  Vec g(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) g[i] = dims[i].upper_bound(cell, u);
  return g;
}

void GapModel::refresh_confidence() {
  std::vector<std::pair<double, double>> b;
  for (const auto& d : dims) b.emplace_back(d.beta1, d.beta2);
  overall_confidence = simgap::overall_confidence(b);
}

GapModel GapModel::zero(std::size_t n, std::size_t m) {
  GapModel g;
  g.state_dim = n;
  g.input_dim = m;
  for (std::size_t i = 0; i < n; ++i) {
    GapDimension d;
    d.basis = Basis::total_degree(n, m, 0);
    d.q = {0.0};
    g.dims.push_back(std::move(d));
  }
  g.overall_confidence = 1.0;
  return g;
}

namespace {

template <typename T>
T per_dim(const std::vector<T>& v, std::size_t i, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string("fit_gap: missing ") + what);
  return v.size() == 1 ? v[0] : v.at(i);
}

double chebyshev(double (*fn)(double, double, std::size_t), double var,
                 double delta, std::size_t n) {
  // delta = 0 is the deterministic special case: certain only if var = 0.
  if (delta == 0.0) return var == 0.0 ? 0.0 : 1.0;
  return fn(var, delta, n);
}

}  // namespace

GapModel fit_gap(const Dataset& ds, EstimationReport& report,
                 const FitOptions& options) {
  const std::size_t n = ds.spec.state_dim, m = ds.spec.input_dim;
  if (report.dims.size() != n)
    throw InvalidArgument("fit_gap: estimation report has wrong dimension");
  GapModel gap;
  gap.state_dim = n;
  gap.input_dim = m;
  gap.dims.resize(n);

  parallel_for(n, options.workers, [&](std::size_t, std::size_t i) {
    const unsigned deg = per_dim(options.basis_degree, i, "basis_degree");
    const double d1 = per_dim(options.delta1, i, "delta1");
    const double d2 = per_dim(options.delta2, i, "delta2");
    if (d1 < 0.0 || d2 < 0.0) throw InvalidArgument("fit_gap: negative delta");
    Basis basis = Basis::total_degree(n, m, deg);
    const Vec res = residuals(ds, i);
    const Eigen::MatrixXd P = basis_matrix(ds, basis);
    DimensionFit fit = fit_dimension(res, P, d1, options.lp);

    auto& est = report.dims[i];
    est.lipschitz_gap_basis =
        basis.gradient_bound(fit.q, ds.spec.state_box, ds.spec.input_grid);

    GapDimension& g = gap.dims[i];
    g.basis = std::move(basis);
    g.q = std::move(fit.q);
    g.eta = fit.eta;
    g.lipschitz_f = est.lipschitz_f;
    g.lipschitz_fhat = est.lipschitz_fhat;
    g.lipschitz_gap_basis = est.lipschitz_gap_basis;
    g.epsilon = ds.cover.epsilon;
    g.delta1 = d1;
    g.delta2 = d2;
    g.beta1 = chebyshev(&beta1, est.variance_bound, d1, ds.n_hat_1);
    g.beta2 = chebyshev(&beta2, est.variance_bound, d2, ds.n_hat_1);
  });
  gap.refresh_confidence();
  return gap;
}

std::string serialize_gap_model(const GapModel& gap) {
  ordered_json j;
  j["kind"] = "simgap-gap-model";
  j["version"] = 1;
  j["state_dim"] = gap.state_dim;
  j["input_dim"] = gap.input_dim;
  j["overall_confidence"] = gap.overall_confidence;
  j["dims"] = ordered_json::array();
  for (const auto& d : gap.dims) {
    ordered_json e;
    ordered_json terms = ordered_json::array();
    ordered_json names = ordered_json::array();
    for (std::size_t l = 0; l < d.basis.size(); ++l) {
      terms.push_back(d.basis.terms()[l].exponents);
      names.push_back(d.basis.term_name(l));
    }
    e["basis_exponents"] = terms;
    e["basis_terms"] = names;
    e["q"] = d.q;
    e["eta"] = d.eta;
    e["lipschitz_f"] = d.lipschitz_f;
    e["lipschitz_fhat"] = d.lipschitz_fhat;
    e["lipschitz_gap_basis"] = d.lipschitz_gap_basis;
    e["lipschitz_x"] = d.lipschitz_x();
    e["epsilon"] = d.epsilon;
    e["delta1"] = d.delta1;
    e["delta2"] = d.delta2;
    e["beta1"] = d.beta1;
    e["beta2"] = d.beta2;
    e["confidence"] = d.confidence();
    j["dims"].push_back(std::move(e));
  }
  return j.dump(1) + "\n";
}

void save_gap_model(const GapModel& gap, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << serialize_gap_model(gap);
}

GapModel load_gap_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingArtifact("gap model not found: " + path.string());
  GapModel gap;
  try {
    ordered_json j = ordered_json::parse(is);
    if (j.value("kind", "") != "simgap-gap-model")
      throw Error("not a gap model: " + path.string());
    gap.state_dim = j.at("state_dim").get<std::size_t>();
    gap.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& e : j.at("dims")) {
      std::vector<Monomial> terms;
      for (const auto& t : e.at("basis_exponents"))
        terms.push_back(Monomial{t.get<std::vector<unsigned>>()});
      GapDimension d;
      d.basis = Basis(gap.state_dim, gap.input_dim, std::move(terms));
      d.q = e.at("q").get<Vec>();
      d.eta = e.at("eta").get<double>();
      d.lipschitz_f = e.at("lipschitz_f").get<double>();
      d.lipschitz_fhat = e.at("lipschitz_fhat").get<double>();
      d.lipschitz_gap_basis = e.at("lipschitz_gap_basis").get<double>();
      d.epsilon = e.at("epsilon").get<double>();
      d.delta1 = e.at("delta1").get<double>();
      d.delta2 = e.at("delta2").get<double>();
      d.beta1 = e.at("beta1").get<double>();
      d.beta2 = e.at("beta2").get<double>();
      gap.dims.push_back(std::move(d));
    }
    gap.overall_confidence = j.at("overall_confidence").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed gap model " + path.string() + ": " + e.what());
  }
  return gap;
}

}  // namespace simgap
