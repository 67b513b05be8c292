#include "simgap/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "simgap/error.hpp"

namespace simgap {

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

double max_violation(const LinearProgram& lp, const Eigen::VectorXd& y) {
  if (lp.A.rows() == 0) return -std::numeric_limits<double>::infinity();
  return (lp.A * y - lp.b).maxCoeff();
}

namespace {

enum class StdStatus { optimal, infeasible, unbounded };

struct StdResult {
  StdStatus status = StdStatus::optimal;
  std::vector<std::size_t> basis;
  Eigen::VectorXd x;        // primal values of the structural columns
  Eigen::VectorXd ray;      // unbounded direction over structural columns
  Eigen::VectorXd farkas;   // phase-1 multipliers (original row signs)
  Eigen::VectorXd sign;     // row flips applied to make h >= 0
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// min g^T x  s.t.  E x = h, x >= 0  by a two-phase revised simplex with
/// Bland's rule. Rows are flipped so h >= 0 and artificial columns
/// R..R+p-1 start as the basis. The basis matrix is refactorized from the
/// original data at every iteration, so no rounding accumulates across pivots.
class RevisedSimplex {
 public:
  RevisedSimplex(const Eigen::MatrixXd& E, const Eigen::VectorXd& h,
                 const LpOptions& opt)
      : p_(E.rows()), R_(E.cols()), opt_(opt) {
    sign_.resize(p_);
    for (Eigen::Index i = 0; i < p_; ++i) sign_(i) = h(i) < 0.0 ? -1.0 : 1.0;
    E_ = sign_.asDiagonal() * E;
    h_ = sign_.cwiseProduct(h);
    basis_.resize(static_cast<std::size_t>(p_));
    for (Eigen::Index i = 0; i < p_; ++i)
      basis_[static_cast<std::size_t>(i)] = static_cast<std::size_t>(R_ + i);
  }

  /// Column j of [E | I].
  Eigen::VectorXd column(std::size_t j) const {
    if (j < static_cast<std::size_t>(R_)) return E_.col(static_cast<Eigen::Index>(j));
    Eigen::VectorXd e = Eigen::VectorXd::Zero(p_);
    e(static_cast<Eigen::Index>(j) - R_) = 1.0;
    return e;
  }

  void factorize() {
    Eigen::MatrixXd B(p_, p_);
    for (Eigen::Index k = 0; k < p_; ++k) B.col(k) = column(basis_[static_cast<std::size_t>(k)]);
    lu_.compute(B);
    xb_ = lu_.solve(h_);
  }

  /// Costs over [E | I].
  void set_costs(const Eigen::VectorXd& g) { g_ = g; }

  Eigen::VectorXd multipliers() const {
    Eigen::VectorXd gb(p_);
    for (Eigen::Index k = 0; k < p_; ++k)
      gb(k) = g_(static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(k)]));
    return lu_.transpose().solve(gb);
  }

  /// Bland-rule iterations over columns [0, allowed). Returns the entering
  /// column of an unbounded ray, or -1 at optimality.
  Eigen::Index iterate(Eigen::Index allowed, std::size_t& iterations) {
    std::vector<char> basic(static_cast<std::size_t>(R_ + p_), 0);
    for (;;) {
      if (iterations >= opt_.max_iterations)
        throw Error("simplex: iteration limit reached");
      factorize();
      std::fill(basic.begin(), basic.end(), 0);
      for (std::size_t bj : basis_) basic[bj] = 1;
      const Eigen::VectorXd pi = multipliers();
      Eigen::Index enter = -1;
      const Eigen::Index structural = std::min(allowed, R_);
      const Eigen::VectorXd d = g_.head(structural) - E_.leftCols(structural).transpose() * pi;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (basic[static_cast<std::size_t>(j)]) continue;
        const double dj = j < structural ? d(j) : g_(j) - pi(j - R_);
        if (dj < -opt_.optimality_tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return -1;

      alpha_ = lu_.solve(column(static_cast<std::size_t>(enter)));
      const double pivot_floor =
          std::max(opt_.pivot_tol, 1e-9 * alpha_.cwiseAbs().maxCoeff());
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < p_; ++i) {
        const double a = alpha_(i);
        if (a <= pivot_floor) continue;
        const double ratio = std::max(0.0, xb_(i)) / a;
        if (leave < 0) {
          best = ratio;
          leave = i;
          continue;
        }
        const double tie = 1e-12 * (1.0 + std::abs(best));
        if (ratio < best - tie ||
            (std::abs(ratio - best) <= tie &&
             basis_[static_cast<std::size_t>(i)] <
                 basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return enter;
      basis_[static_cast<std::size_t>(leave)] = static_cast<std::size_t>(enter);
      ++iterations;
    }
  }

  /// Pivots basic artificials out where a structural column allows it; rows
  /// where none does are linearly dependent and keep a zero artificial.
  void drive_out_artificials() {
    for (Eigen::Index k = 0; k < p_; ++k) {
      if (basis_[static_cast<std::size_t>(k)] < static_cast<std::size_t>(R_)) continue;
      factorize();
      // Row k of B^-1 E.
      Eigen::VectorXd ek = Eigen::VectorXd::Zero(p_);
      ek(k) = 1.0;
      const Eigen::VectorXd rk = lu_.transpose().solve(ek);
      const Eigen::VectorXd row = E_.transpose() * rk;
      std::vector<char> basic(static_cast<std::size_t>(R_), 0);
      for (std::size_t bj : basis_)
        if (bj < static_cast<std::size_t>(R_)) basic[bj] = 1;
      for (Eigen::Index j = 0; j < R_; ++j) {
        if (!basic[static_cast<std::size_t>(j)] && std::abs(row(j)) > 1e-9) {
          basis_[static_cast<std::size_t>(k)] = static_cast<std::size_t>(j);
          break;
        }
      }
    }
    factorize();
  }

  double objective() const {
    double v = 0.0;
    for (Eigen::Index k = 0; k < p_; ++k)
      v += g_(static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(k)])) * xb_(k);
    return v;
  }

  Eigen::Index p_, R_;
  const LpOptions& opt_;
  Eigen::MatrixXd E_;
  Eigen::VectorXd h_, g_, sign_, xb_, alpha_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
  std::vector<std::size_t> basis_;
};

StdResult simplex_standard(const Eigen::MatrixXd& E, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& g, const LpOptions& opt) {
  StdResult res;
  RevisedSimplex rs(E, h, opt);
  const Eigen::Index p = E.rows(), R = E.cols();
  res.sign = rs.sign_;

  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(R + p);
  g1.tail(p).setOnes();
  rs.set_costs(g1);
  rs.iterate(R + p, res.iterations);  // bounded below by zero
  rs.factorize();
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (rs.objective() > opt.feasibility_tol * scale) {
    res.status = StdStatus::infeasible;
    res.farkas = rs.sign_.cwiseProduct(rs.multipliers());
    return res;
  }

  rs.drive_out_artificials();
  Eigen::VectorXd g2 = Eigen::VectorXd::Zero(R + p);
  g2.head(R) = g;
  rs.set_costs(g2);
  const Eigen::Index enter = rs.iterate(R, res.iterations);
  rs.factorize();
  res.basis = rs.basis_;
  res.x.setZero(R);
  for (Eigen::Index k = 0; k < p; ++k) {
    const std::size_t bj = rs.basis_[static_cast<std::size_t>(k)];
    if (bj < static_cast<std::size_t>(R))
      res.x(static_cast<Eigen::Index>(bj)) = std::max(0.0, rs.xb_(k));
  }
  if (enter >= 0) {
    res.status = StdStatus::unbounded;
    res.ray.setZero(R);
    res.ray(enter) = 1.0;
    for (Eigen::Index k = 0; k < p; ++k) {
      const std::size_t bj = rs.basis_[static_cast<std::size_t>(k)];
      if (bj < static_cast<std::size_t>(R))
        res.ray(static_cast<Eigen::Index>(bj)) = -rs.alpha_(k);
    }
    return res;
  }
  res.status = StdStatus::optimal;
  res.objective = g.dot(res.x);
  return res;
}

Eigen::Index argmax(const Eigen::VectorXd& v) {
  Eigen::Index k = 0;
  v.maxCoeff(&k);
  return k;
}

/// Bounded Farkas program: min b^T w s.t. A^T w = 0, 1^T w <= 1, w >= 0.
/// A negative optimum certifies that A y <= b has no solution.
bool primal_infeasible(const LinearProgram& lp, const LpOptions& opt,
                       Eigen::VectorXd& weights, std::size_t& iterations) {
  const Eigen::Index R = lp.A.rows(), p = lp.A.cols();
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(p + 1, R + 1);
  E.topLeftCorner(p, R) = lp.A.transpose();
  E.row(p).setOnes();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(p + 1);
  h(p) = 1.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(R + 1);
  g.head(R) = lp.b;
  StdResult res = simplex_standard(E, h, g, opt);
  iterations += res.iterations;
  if (res.status != StdStatus::optimal) return false;
  const double scale = std::max(1.0, lp.b.cwiseAbs().maxCoeff());
  if (res.objective < -opt.feasibility_tol * scale) {
    weights = res.x.head(R);
    return true;
  }
  return false;
}

LpResult solve_dense(const LinearProgram& lp, const LpOptions& options) {
  const Eigen::Index R = lp.A.rows(), p = lp.A.cols();
  LpResult out;
  if (R == 0) {
    if (lp.c.isZero()) {
      out.status = LpStatus::optimal;
      out.y = Eigen::VectorXd::Zero(p);
    } else {
      out.status = LpStatus::unbounded;
      out.direction = -lp.c;
    }
    return out;
  }

  const Eigen::MatrixXd E = lp.A.transpose();
  const Eigen::VectorXd h = -lp.c;
  StdResult dual = simplex_standard(E, h, lp.b, options);
  out.iterations = dual.iterations;

  switch (dual.status) {
    case StdStatus::optimal: {
      // Multipliers of the final basis: B~^T pi~ = g_B with flipped rows.
      Eigen::MatrixXd B(p, p);
      Eigen::VectorXd gb(p);
      for (Eigen::Index k = 0; k < p; ++k) {
        const std::size_t bj = dual.basis[static_cast<std::size_t>(k)];
        if (bj < static_cast<std::size_t>(R)) {
          B.col(k) = dual.sign.cwiseProduct(E.col(static_cast<Eigen::Index>(bj)));
          gb(k) = lp.b(static_cast<Eigen::Index>(bj));
        } else {
          B.col(k).setZero();
          B(static_cast<Eigen::Index>(bj) - R, k) = 1.0;
          gb(k) = 0.0;
        }
      }
      const Eigen::VectorXd pi = B.transpose().fullPivLu().solve(gb);
      out.status = LpStatus::optimal;
      out.y = dual.sign.cwiseProduct(pi);
      out.objective = lp.c.dot(out.y);
      return out;
    }
    case StdStatus::unbounded: {
      out.status = LpStatus::infeasible;
      out.certificate = dual.ray;
      out.violated_row = static_cast<std::size_t>(argmax(dual.ray));
      return out;
    }
    case StdStatus::infeasible: {
      Eigen::VectorXd w;
      if (primal_infeasible(lp, options, w, out.iterations)) {
        out.status = LpStatus::infeasible;
        out.certificate = w;
        out.violated_row = static_cast<std::size_t>(argmax(w));
      } else {
        out.status = LpStatus::unbounded;
        out.direction = dual.farkas;
      }
      return out;
    }
  }
  return out;
}

LinearProgram restrict_rows(const LinearProgram& lp, const std::vector<Eigen::Index>& rows) {
  LinearProgram sub;
  sub.A.resize(static_cast<Eigen::Index>(rows.size()), lp.A.cols());
  sub.b.resize(static_cast<Eigen::Index>(rows.size()));
  sub.c = lp.c;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sub.A.row(static_cast<Eigen::Index>(k)) = lp.A.row(rows[k]);
    sub.b(static_cast<Eigen::Index>(k)) = lp.b(rows[k]);
  }
  return sub;
}

/// Indices outside `in` with the `count` largest positive scores.
std::vector<Eigen::Index> top_rows(const Eigen::VectorXd& score,
                                   const std::vector<char>& in, double floor,
                                   std::size_t count) {
  std::vector<Eigen::Index> cand;
  for (Eigen::Index i = 0; i < score.size(); ++i)
    if (!in[static_cast<std::size_t>(i)] && score(i) > floor) cand.push_back(i);
  const std::size_t k = std::min(count, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return score(a) > score(b) || (score(a) == score(b) && a < b);
                    });
  cand.resize(k);
  return cand;
}

}  // namespace

static LpResult solve_scaled(const LinearProgram& lp, const LpOptions& options);

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options) {
  const Eigen::Index R = lp.A.rows(), p = lp.A.cols();
  if (lp.b.size() != R || lp.c.size() != p)
    throw InvalidArgument("solve_lp: inconsistent dimensions");
  if (!lp.A.allFinite() || !lp.b.allFinite() || !lp.c.allFinite())
    throw InvalidArgument("solve_lp: non-finite coefficients");
  // Equilibrate the columns; the scaled program has the same vertices and
  // the same pivoting sequence, only better conditioned bases.
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mx = lp.A.col(j).cwiseAbs().maxCoeff();
    if (R > 0 && mx > 0.0) scale(j) = 1.0 / mx;
  }
  LinearProgram scaled{lp.A * scale.asDiagonal(), lp.b, scale.cwiseProduct(lp.c)};
  LpResult out = solve_scaled(scaled, options);
  if (out.y.size() == p) out.y = scale.cwiseProduct(out.y);
  if (out.direction.size() == p) out.direction = scale.cwiseProduct(out.direction);
  return out;
}

static LpResult solve_scaled(const LinearProgram& lp, const LpOptions& options) {
  const Eigen::Index R = lp.A.rows(), p = lp.A.cols();
  if (static_cast<std::size_t>(R) <= options.working_set_threshold)
    return solve_dense(lp, options);

  // Row generation: solve on a working set of rows, then add the most
  // violated remaining rows until the working-set optimum is feasible.
  const std::size_t batch = std::max<std::size_t>(options.working_set_batch, 1);
  const Eigen::VectorXd norms = lp.A.rowwise().norm().cwiseMax(1e-300);
  const double scale = std::max(1.0, lp.b.cwiseAbs().maxCoeff());
  std::vector<char> in(static_cast<std::size_t>(R), 0);
  std::vector<Eigen::Index> rows;
  std::size_t iterations = 0;
  for (;;) {
    std::sort(rows.begin(), rows.end());
    LpResult sub = solve_dense(restrict_rows(lp, rows), options);
    iterations += sub.iterations;
    std::vector<Eigen::Index> add;
    if (sub.status == LpStatus::infeasible) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(R);
      for (std::size_t k = 0; k < rows.size(); ++k)
        w(rows[k]) = sub.certificate(static_cast<Eigen::Index>(k));
      sub.certificate = w;
      sub.violated_row = static_cast<std::size_t>(rows[sub.violated_row]);
      sub.iterations = iterations;
      return sub;
    }
    if (sub.status == LpStatus::unbounded) {
      const Eigen::VectorXd d = sub.direction.size() == p ? sub.direction : -lp.c;
      const Eigen::VectorXd score = (lp.A * d).cwiseQuotient(norms);
      add = top_rows(score, in, options.feasibility_tol, batch);
      if (add.empty()) {
        add = top_rows((lp.A * (-lp.c)).cwiseQuotient(norms), in, 0.0, batch);
        if (add.empty()) {
          sub.iterations = iterations;
          return sub;
        }
      }
    } else {
      const Eigen::VectorXd viol = lp.A * sub.y - lp.b;
      add = top_rows(viol, in, options.feasibility_tol * scale, batch);
      if (add.empty()) {
        sub.iterations = iterations;
        return sub;
      }
    }
    for (Eigen::Index i : add) {
      in[static_cast<std::size_t>(i)] = 1;
      rows.push_back(i);
    }
  }
}

}  // namespace simgap
