#include "simgap/basis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "simgap/error.hpp"

namespace simgap {

Interval operator+(const Interval& a, const Interval& b) {
  return {a.lo + b.lo, a.hi + b.hi};
}

Interval operator*(const Interval& a, const Interval& b) {
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

Interval operator*(double s, const Interval& a) {
  return s >= 0.0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

Interval ipow(const Interval& a, unsigned k) {
  if (k == 0) return {1.0, 1.0};
  const double lo = std::pow(a.lo, k), hi = std::pow(a.hi, k);
  if (k % 2 == 1) return {lo, hi};
  if (a.lo >= 0.0) return {lo, hi};
  if (a.hi <= 0.0) return {hi, lo};
  return {0.0, std::max(lo, hi)};
}

unsigned Monomial::degree() const {
  unsigned d = 0;
  for (unsigned e : exponents) d += e;
  return d;
}

Basis::Basis(std::size_t state_dim, std::size_t input_dim,
             std::vector<Monomial> terms)
    : n_(state_dim), m_(input_dim), terms_(std::move(terms)) {
  if (terms_.empty()) throw InvalidArgument("basis: no terms");
  std::set<Monomial> seen;
  for (const auto& t : terms_) {
    if (t.exponents.size() != n_ + m_)
      throw InvalidArgument("basis: exponent tuple has wrong length");
    if (!seen.insert(t).second)
      throw InvalidArgument("basis: duplicate term " +
                            term_name(static_cast<std::size_t>(&t - terms_.data())));
  }
}

Basis Basis::total_degree(std::size_t state_dim, std::size_t input_dim,
                          unsigned degree) {
  const std::size_t v = state_dim + input_dim;
  std::vector<Monomial> terms;
  for (unsigned d = degree + 1; d-- > 0;) {
    // Exponent tuples of total degree d in decreasing lexicographic order,
    // e.g. d = 2 over (a, b): a^2, a b, b^2.
    std::vector<unsigned> e(v, 0);
    std::function<void(std::size_t, unsigned)> rec = [&](std::size_t pos,
                                                         unsigned left) {
      if (pos + 1 == v) {
        e[pos] = left;
        terms.push_back(Monomial{e});
        return;
      }
      for (unsigned k = left + 1; k-- > 0;) {
        e[pos] = k;
        rec(pos + 1, left - k);
      }
      e[pos] = 0;
    };
    if (v == 0) continue;
    rec(0, d);
  }
  return Basis(state_dim, input_dim, std::move(terms));
}

bool Basis::has_constant() const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [](const Monomial& t) { return t.is_constant(); });
}

void Basis::eval(std::span<const double> x, std::span<const double> u,
                 std::span<double> out) const {
  for (std::size_t l = 0; l < terms_.size(); ++l) {
    const auto& e = terms_[l].exponents;
    double p = 1.0;
    for (std::size_t k = 0; k < n_; ++k)
      for (unsigned t = 0; t < e[k]; ++t) p *= x[k];
    for (std::size_t k = 0; k < m_; ++k)
      for (unsigned t = 0; t < e[n_ + k]; ++t) p *= u[k];
    out[l] = p;
  }
}

Vec Basis::eval(std::span<const double> x, std::span<const double> u) const {
  if (x.size() != n_ || u.size() != m_)
    throw InvalidArgument("basis: dimension mismatch");
  Vec out(terms_.size());
  eval(x, u, out);
  return out;
}

Interval Basis::enclose(std::span<const double> q, const Box& box,
                        std::span<const double> u) const {
  Interval acc{0.0, 0.0};
  for (std::size_t l = 0; l < terms_.size(); ++l) {
    const auto& e = terms_[l].exponents;
    Interval p{1.0, 1.0};
    for (std::size_t k = 0; k < n_; ++k)
      if (e[k]) p = p * ipow(box[k], e[k]);
    double uc = 1.0;
    for (std::size_t k = 0; k < m_; ++k)
      for (unsigned t = 0; t < e[n_ + k]; ++t) uc *= u[k];
    acc = acc + (q[l] * uc) * p;
  }
  return acc;
}

double Basis::gradient_bound(std::span<const double> q, const Box& box,
                             std::span<const Vec> inputs) const {
  double best = 0.0;
  for (const Vec& u : inputs) {
    double sq = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      Interval dk{0.0, 0.0};
      for (std::size_t l = 0; l < terms_.size(); ++l) {
        const auto& e = terms_[l].exponents;
        if (e[k] == 0) continue;
        Interval p{static_cast<double>(e[k]), static_cast<double>(e[k])};
        for (std::size_t a = 0; a < n_; ++a) {
          const unsigned ea = a == k ? e[a] - 1 : e[a];
          if (ea) p = p * ipow(box[a], ea);
        }
        double uc = 1.0;
        for (std::size_t b = 0; b < m_; ++b)
          for (unsigned t = 0; t < e[n_ + b]; ++t) uc *= u[b];
        dk = dk + (q[l] * uc) * p;
      }
      const double mag = std::max(std::abs(dk.lo), std::abs(dk.hi));
      sq += mag * mag;
    }
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

std::string Basis::term_name(std::size_t l) const {
  const auto& e = terms_[l].exponents;
  std::string s;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (!e[k]) continue;
    if (!s.empty()) s += "*";
    s += (k < n_ ? "x" + std::to_string(k + 1) : "u" + std::to_string(k - n_ + 1));
    if (e[k] > 1) s += "^" + std::to_string(e[k]);
  }
  return s.empty() ? "1" : s;
}

}  // namespace simgap
