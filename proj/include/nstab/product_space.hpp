#pragma once

// Finite joint distributions, maximal-correlation bases, Fourier analysis on
// product spaces and block strategies built from Gaussian partitions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nstab/partition.hpp"

namespace nstab {

struct JointDist {
  Eigen::MatrixXd P;  // rows: symbols of A, columns: symbols of B

  JointDist() = default;
  explicit JointDist(Eigen::MatrixXd p);

  std::size_t size_a() const { return static_cast<std::size_t>(P.rows()); }
  std::size_t size_b() const { return static_cast<std::size_t>(P.cols()); }
  Eigen::VectorXd marginal_a() const { return P.rowwise().sum(); }
  Eigen::VectorXd marginal_b() const { return P.colwise().sum().transpose(); }
};

/// P(0,0) = P(1,1) = (1 + rho)/4, P(0,1) = P(1,0) = (1 - rho)/4.
JointDist binary_symmetric(double rho);
JointDist product_dist(const Eigen::VectorXd& pa, const Eigen::VectorXd& pb);

struct CorrelationBasis {
  Eigen::MatrixXd X;    // X(a, j) = X_j(a), |A| x |A|
  Eigen::MatrixXd Y;    // Y(b, j) = Y_j(b), |B| x |B|
  Eigen::VectorXd rho;  // length max(|A|, |B|), rho_0 = 1, zero-padded

  double maximal_correlation() const { return rho.size() > 1 ? rho[1] : 0.0; }
};

CorrelationBasis correlation_basis(const JointDist& P);

/// Coefficients over sigma in Z_m^n, flattened with sigma_0 fastest; k per entry.
struct ProductFourier {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<double> coeffs;

  std::size_t size() const { return coeffs.size() / k; }
  std::vector<std::size_t> digits(std::size_t index) const;
  std::size_t degree(std::size_t index) const;
  double norm_sq(std::size_t index) const;
};

/// Table of f : A^n -> R^k, row-major with point index sum x_i m^i.
struct ProductTable {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<double> values;

  std::size_t points() const { return values.size() / k; }
};

inline constexpr std::size_t kMaxProductPoints = 65536;  // m^n for n <= 8, m <= 4

ProductFourier tensor_fourier(const ProductTable& f, const Eigen::MatrixXd& basis,
                              const Eigen::VectorXd& marginal);

double influence(const ProductFourier& f, std::size_t i);
ProductFourier smooth(const ProductFourier& f, double delta);
double correlation(const ProductFourier& f, const ProductFourier& g, const Eigen::VectorXd& rho);
/// E[<f(X), g(Y)>] by enumeration over P^n.
double correlation_enumerate(const ProductTable& f, const ProductTable& g, const JointDist& P);
/// E[f(x')] where each x'_i keeps x_i with probability 1 - delta and is redrawn otherwise.
ProductTable noise_convolve(const ProductTable& f, const Eigen::VectorXd& marginal, double delta);

/// A deterministic strategy reading n_coords symbols.
struct DiscreteStrategy {
  std::size_t k = 0;
  std::size_t n_coords = 0;
  std::size_t alphabet = 0;
  std::function<unsigned(std::span<const std::uint32_t>)> eval;
  std::string description;
};

/// g evaluated at (sum_s basis(x_{i,s})) / sqrt(ell), i < n0. The high-influence set
/// is always empty here.
DiscreteStrategy block_strategy(const PartitionFn& g, const std::vector<double>& basis_values,
                                std::size_t ell);

/// Strategy given by a full table over A^n_coords.
DiscreteStrategy table_strategy(std::vector<unsigned> table, std::size_t k, std::size_t alphabet,
                                std::size_t n_coords);

struct DiscreteCorr {
  MeasureVector marginals_f;
  MeasureVector marginals_g;
  StabEstimate agreement;  // per_label[j] = Pr[f = j and g = j]
  bool exact = false;
};

DiscreteCorr estimate_discrete_corr(const DiscreteStrategy& f, const DiscreteStrategy& g,
                                    const JointDist& P, std::size_t samples, std::uint64_t seed,
                                    Exec exec = Exec::parallel);
/// Exact agreement and marginals by enumeration; |A|^N |B|^N <= 2^24.
DiscreteCorr exact_discrete_corr(const DiscreteStrategy& f, const DiscreteStrategy& g,
                                 const JointDist& P);

}  // namespace nstab
