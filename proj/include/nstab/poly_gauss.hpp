#pragma once

// Polynomials on Gaussian space stored as Wiener chaos components.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "nstab/hermite_analysis.hpp"
#include "nstab/symmetric_tensor.hpp"

namespace nstab {

struct PolyGauss {
  std::size_t dim = 0;
  double constant = 0.0;
  std::map<unsigned, SymmetricTensor> chaos;  // order >= 1 -> component

  PolyGauss() = default;
  explicit PolyGauss(std::size_t n, double c = 0.0) : dim(n), constant(c) {}

  unsigned degree() const;
  double mean() const { return constant; }
  /// Sum of ||f_q||_F^2 over q >= 1.
  double variance() const;
  double second_moment() const { return constant * constant + variance(); }

  /// Adds a component of order >= 1, or folds an order-0 tensor into the constant.
  void add_component(const SymmetricTensor& t);

  double eval(std::span<const double> x) const;

  PolyGauss scaled(double factor) const;
  PolyGauss shifted(double c) const;
  void prune(double tol = 0.0);

  bool operator==(const PolyGauss&) const = default;
};

PolyGauss operator+(const PolyGauss& a, const PolyGauss& b);
PolyGauss operator-(const PolyGauss& a, const PolyGauss& b);
/// Exact product through the Ito multiplication formula.
PolyGauss multiply(const PolyGauss& a, const PolyGauss& b);
/// E[a b].
double poly_inner(const PolyGauss& a, const PolyGauss& b);

/// Linear form sum_i c_i x_i + c0.
PolyGauss linear_poly(std::span<const double> coeffs, double c0 = 0.0);
/// H_q(x_i).
PolyGauss hermite_poly(std::size_t dim, std::uint32_t coord, unsigned q);

/// Compiled evaluation: terms (coefficient, (coord, hermite degree)...) with a
/// per-call Hermite table over the coordinates in use.
class PolyEvaluator {
 public:
  explicit PolyEvaluator(const PolyGauss& p);
  double operator()(std::span<const double> x) const;
  std::size_t dim() const { return dim_; }

 private:
  struct Factor {
    std::uint32_t slot;
    unsigned degree;
  };
  std::size_t dim_ = 0;
  double constant_ = 0.0;
  unsigned max_degree_ = 0;
  std::vector<std::uint32_t> coords_;  // coordinates in use, by slot
  std::vector<double> coeff_;
  std::vector<std::uint32_t> offset_;  // term i uses factors_[offset_[i], offset_[i+1])
  std::vector<Factor> factors_;
};

/// Expanded monomial form sum_alpha c_alpha x^alpha; cross-check oracle for
/// chaos-form evaluation.
struct MonomialForm {
  std::size_t dim = 0;
  std::map<std::vector<unsigned>, double> terms;  // exponent vector -> coefficient

  double eval(std::span<const double> x) const;
};

MonomialForm to_monomials(const PolyGauss& p);

/// Coefficients of the orthonormal H_q in the monomial basis (index = power).
std::vector<double> hermite_monomial_coefficients(unsigned q);

/// Polynomial for output `label` of an expansion: coefficient c on H_S becomes
/// tensor value c / sqrt(q!/prod S_i!) on the multiset of S.
PolyGauss poly_from_hermite(const HermiteExpansion& e, std::size_t label);

}  // namespace nstab
