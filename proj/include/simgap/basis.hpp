#pragma once

#include <span>
#include <string>
#include <vector>

#include "simgap/types.hpp"

namespace simgap {

/// Interval arithmetic on closed intervals (no outward rounding).
Interval operator+(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);
Interval operator*(double s, const Interval& a);
Interval ipow(const Interval& a, unsigned k);

/// Product of powers over the concatenated variables (x1..xn, u1..um).
struct Monomial {
  std::vector<unsigned> exponents;

  unsigned degree() const;
  bool is_constant() const { return degree() == 0; }
  bool operator==(const Monomial&) const = default;
  auto operator<=>(const Monomial&) const = default;
};

/// Polynomial basis p(x, u) used to parametrize the gap function.
class Basis {
 public:
  Basis() = default;
  /// Throws InvalidArgument on duplicate terms or wrong exponent lengths.
  Basis(std::size_t state_dim, std::size_t input_dim, std::vector<Monomial> terms);

  /// All monomials of total degree <= `degree`, highest degree first and
  /// lexicographic within a degree, so the constant term comes last. For
  /// degree 1 over (x1, x2, x3, u1, u2) this is x1, x2, x3, u1, u2, 1.
  static Basis total_degree(std::size_t state_dim, std::size_t input_dim,
                            unsigned degree);

  std::size_t size() const { return terms_.size(); }
  std::size_t state_dim() const { return n_; }
  std::size_t input_dim() const { return m_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  bool has_constant() const;

  void eval(std::span<const double> x, std::span<const double> u,
            std::span<double> out) const;
  Vec eval(std::span<const double> x, std::span<const double> u) const;

  /// Enclosure of q^T p(x, u) over x in `box` for a fixed input u.
  Interval enclose(std::span<const double> q, const Box& box,
                   std::span<const double> u) const;

  /// Upper bound on the Euclidean norm of grad_x q^T p(x, u) over `box`,
  /// maximized over the given inputs. A Lipschitz constant of the fit in x.
  double gradient_bound(std::span<const double> q, const Box& box,
                        std::span<const Vec> inputs) const;

  std::string term_name(std::size_t l) const;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<Monomial> terms_;
};

}  // namespace simgap
