#pragma once

// Eigenregularity, variance bounds for products, the multilinear lift and the
// covariance-matched eigenregular family construction.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nstab/parallel.hpp"
#include "nstab/poly_gauss.hpp"

namespace nstab {

/// Flattening of an order-q tensor: the row side takes the listed slots.
struct Bipartition {
  unsigned order = 0;
  std::vector<unsigned> row_slots;
  auto operator<=>(const Bipartition&) const = default;
};

/// Bipartitions S of [q] with 0 < |S| < q, one per complementary pair.
std::vector<Bipartition> bipartitions(unsigned q);

struct SingularValue {
  double value = 0.0;
  unsigned iterations = 0;
  bool converged = true;
};

/// Top singular value of the flattening by power iteration on M^T M.
SingularValue flattening_top_singular(const SymmetricTensor& t, const Bipartition& part,
                                      double tol = 1e-9, unsigned max_iter = 10000);

/// Dense flattening, for small tensors and cross-checks.
Eigen::MatrixXd flatten_dense(const SymmetricTensor& t, const Bipartition& part);

struct EigenReport {
  double lambda_max = 0.0;
  std::map<std::pair<unsigned, Bipartition>, double> per_partition;  // (order, S) -> value
  double variance = 0.0;
  double ratio = 0.0;
  bool converged = true;
};

EigenReport eigenregularity(const PolyGauss& p, double tol = 1e-9, unsigned max_iter = 10000);

struct VarianceBounds {
  std::optional<double> upper;           // 9^d E[p^2] E[q^2]
  double lower_top = 0.0;                // ||f_top||^2 ||g_top||^2
  std::optional<double> lower_schedule;  // needs Var(p) = Var(q) = 1
  double product_variance = 0.0;         // exact, via the product formula
  unsigned d = 0;                        // max(deg p, deg q)
};

VarianceBounds variance_bounds(const PolyGauss& p, const PolyGauss& q);

/// Schedule lower bound (Gamma(2d)/2)^2 with Gamma(x) = L * L^{-2^x},
/// L = 4 T 9^{d+1} (d+1)^2, evaluated in log space.
double schedule_lower_bound(unsigned d, double second_moment_max);

struct MultilinearLift {
  PolyGauss r;  // p under x_i -> (x_{i,1} + ... + x_{i,T}) / sqrt(T)
  PolyGauss w;  // r with repeated-index entries removed
  double var_gap = 0.0;
  double gap_bound = 0.0;  // Var(r) d^2 / T
  std::size_t block = 0;   // T; variable (i, s) maps to index i*T + s
};

MultilinearLift multilinear_lift(const PolyGauss& p, std::size_t T);

struct GramLevel {
  unsigned level = 1;  // chaos order i
  Eigen::MatrixXd gram;
};

struct GramSpec {
  std::vector<GramLevel> levels;
};

struct MatchedFamily {
  std::vector<PolyGauss> family;  // grouped by level, in input order
  std::vector<unsigned> level_of;
  std::size_t n0 = 0;
  std::size_t kappa = 0;
  std::vector<Eigen::MatrixXd> factors;  // V with G = V^T V, per level
};

/// Factor for G = V^T V by eigendecomposition; eigenvalues down to -1e-10 are clipped.
Eigen::MatrixXd gram_factor(const Eigen::MatrixXd& g);

MatchedFamily matched_family(const GramSpec& spec, double delta);
/// Same construction with a caller-supplied factor per level (V^T V must equal G).
MatchedFamily matched_family_with_factors(const GramSpec& spec, double delta,
                                          const std::vector<Eigen::MatrixXd>& factors);

struct ProductEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

ProductEstimate product_expectation_mc(const std::vector<PolyGauss>& family, std::size_t samples,
                                       std::uint64_t seed, Exec exec = Exec::parallel);

struct PairedProductEstimate {
  ProductEstimate a;
  ProductEstimate b;
  ProductEstimate difference;  // E[prod a - prod b] on common draws
};

PairedProductEstimate product_expectation_paired(const std::vector<PolyGauss>& a,
                                                 const std::vector<PolyGauss>& b,
                                                 std::size_t samples, std::uint64_t seed,
                                                 Exec exec = Exec::parallel);

}  // namespace nstab
