#pragma once

// Hermite polynomials, Gauss-Hermite quadrature and correlated Gaussian
// sampling. Hermite polynomials are normalized to be orthonormal under the
// standard Gaussian measure: H_0 = 1, H_1 = x, H_2 = (x^2 - 1)/sqrt(2), ...

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nstab/parallel.hpp"
#include "nstab/rng.hpp"

namespace nstab {

/// Orthonormal Hermite value H_q(x) via the three-term recurrence.
double hermite_eval(unsigned q, double x);

/// Writes H_0(x), ..., H_{out.size()-1}(x).
void hermite_all(double x, std::span<double> out);

struct HermiteIndex {
  std::vector<unsigned> entries;

  unsigned degree() const;
  std::size_t size() const { return entries.size(); }
  auto operator<=>(const HermiteIndex&) const = default;
};

/// H_S(x) = prod_i H_{S_i}(x_i).
double hermite_multi_eval(const HermiteIndex& index, std::span<const double> x);

struct QuadratureRule {
  unsigned order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1 against the standard Gaussian
};

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the orthonormal
/// Hermite recurrence, weights the squared first eigenvector components.
QuadratureRule gauss_hermite_rule(unsigned order);

/// Tensor-product rule in n dimensions; points are stored row-major (n per point).
struct TensorGrid {
  std::size_t dim = 0;
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dim, dim};
  }
};

inline constexpr std::size_t kMaxQuadratureDim = 3;

TensorGrid tensor_grid(const QuadratureRule& rule, std::size_t dim);

double normal_cdf(double x);
double normal_quantile(double p);

/// Pairs (X, Y) with Y = rho X + sqrt(1 - rho^2) Z coordinatewise.
class CorrelatedSampler {
 public:
  CorrelatedSampler(std::size_t dimension, double rho, std::uint64_t seed);

  std::size_t dimension() const { return dimension_; }
  double rho() const { return rho_; }
  std::uint64_t seed() const { return seed_; }

  /// Stream for chunk `substream`; every estimator draws chunk c from substream c.
  CounterRng stream(std::uint64_t substream) const { return CounterRng(seed_, substream); }

  /// Fills x and y (each of length dimension) with one correlated pair.
  void draw(CounterRng& rng, std::span<double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < dimension_; ++i) x[i] = rng.normal();
    for (std::size_t i = 0; i < dimension_; ++i) y[i] = rho_ * x[i] + mix_ * rng.normal();
  }

 private:
  std::size_t dimension_;
  double rho_;
  double mix_;
  std::uint64_t seed_;
};

using SamplePair = std::pair<std::vector<double>, std::vector<double>>;

std::vector<SamplePair> sample_pairs(const CorrelatedSampler& sampler, std::size_t count);

/// Fills x (length dim) with independent standard normals.
inline void draw_gaussian(CounterRng& rng, std::span<double> x) {
  for (double& v : x) v = rng.normal();
}

}  // namespace nstab
