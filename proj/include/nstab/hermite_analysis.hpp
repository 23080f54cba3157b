#pragma once

// Hermite expansions of vector-valued functions on low-dimensional Gaussian
// space, spectral weights and the Ornstein-Uhlenbeck semigroup.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "nstab/gauss_core.hpp"

namespace nstab {

/// f : R^n -> R^k; eval writes k outputs for one point.
struct VectorFunction {
  std::size_t n = 0;
  std::size_t k = 0;
  std::function<void(std::span<const double>, std::span<double>)> eval;

  std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> out(k);
    eval(x, out);
    return out;
  }
};

inline constexpr double kCoefficientDropTol = 1e-14;
inline constexpr unsigned kDefaultQuadOrder = 40;

struct HermiteExpansion {
  std::size_t n = 0;
  std::size_t k = 0;
  unsigned max_degree = 0;
  unsigned quad_order = 0;
  std::map<HermiteIndex, std::vector<double>> coefficients;
  /// Quadrature estimate of E||f||^2.
  double quadrature_mass = 0.0;
  /// Mass of the discrete basis above max_degree (per-coordinate degree < quad_order),
  /// indexed by total degree.
  std::vector<double> tail_by_degree;

  double explicit_tail() const;

  double coefficient_mass() const;
  std::vector<double> coefficient(const HermiteIndex& s) const;
  std::vector<double> evaluate(std::span<const double> x) const;
};

HermiteExpansion expand(const VectorFunction& f, unsigned max_degree,
                        unsigned quad_order = kDefaultQuadOrder, Exec exec = Exec::parallel);

struct SpectralWeights {
  std::vector<double> by_degree;
  double tail = 0.0;           // Parseval residual
  double explicit_tail = 0.0;  // explicit high-degree sum, when known
  bool tails_agree = true;     // |tail - explicit_tail| <= 1e-6
};

SpectralWeights spectral_weights(const HermiteExpansion& e, double total_mass);
/// Uses the expansion's own quadrature mass as the total.
SpectralWeights spectral_weights(const HermiteExpansion& e);

HermiteExpansion apply_ou(const HermiteExpansion& e, double t);

/// Sum over S of <e1(S), e2(S)>.
double coefficient_inner(const HermiteExpansion& a, const HermiteExpansion& b);

/// Quadrature evaluation of (P_t f)(x) = E_z f(e^{-t} x + sqrt(1 - e^{-2t}) z).
class OuOperator {
 public:
  OuOperator(std::size_t n, unsigned quad_order = kDefaultQuadOrder);

  std::size_t dim() const { return grid_.dim; }
  void apply(const VectorFunction& f, double t, std::span<const double> x,
             std::span<double> out) const;

 private:
  TensorGrid grid_;
};

std::vector<double> ou_pointwise(const VectorFunction& f, double t, std::span<const double> x,
                                 unsigned quad_order = kDefaultQuadOrder);

/// C * grad_l1 / sqrt(d), the diagnostic bound on W^{>=d}.
double gradient_tail_bound(double grad_l1, unsigned d, double constant = 1.0);

struct ParsevalReport {
  double coefficient_mass = 0.0;
  double quadrature_mass = 0.0;
  double residual_tail = 0.0;
  double explicit_tail = 0.0;
  double residual = 0.0;  // |residual_tail - explicit_tail|
  bool ok = true;
};

ParsevalReport parseval_check(const HermiteExpansion& e, double tol = 1e-6);

}  // namespace nstab
