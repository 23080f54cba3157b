#pragma once

// Threshold rounding of simplex-valued functions, measure-matching threshold
// search, and PTF extraction from truncated Hermite expansions.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nstab/hermite_analysis.hpp"
#include "nstab/partition.hpp"

namespace nstab {

/// Shifts z; only differences matter, so the last entry is kept at 0.
struct ThresholdVector {
  std::vector<double> z;

  void normalize();
};

/// argmax_j (F_j - z_j), smallest index on ties.
unsigned round_label(std::span<const double> F, std::span<const double> z);

/// Partition x -> argmax_j (F_j(x) - z_j). F(x) must lie in the simplex within tol.
PartitionFn threshold_round(const VectorFunction& F, const ThresholdVector& z,
                            double simplex_tol = 1e-9);

/// x -> argmax_j (F_j(x) - z_j) with no simplex check, for approximate smoothings.
PartitionFn argmax_round(const VectorFunction& F, const ThresholdVector& z,
                         std::string name = "argmax-round");

/// P_t of the one-hot embedding through its Hermite expansion (n <= 3): every
/// coefficient of degree <= max_degree is damped by e^{-t|S|}. The quadrature
/// error of the discontinuous indicator remains, so values are only
/// approximately in the simplex.
VectorFunction ou_spectral(const PartitionFn& f, double t, unsigned max_degree = 30,
                           unsigned quad_order = kDefaultQuadOrder, Exec exec = Exec::parallel);

struct ThresholdSearch {
  ThresholdVector z;
  std::vector<double> measures;  // on the common sample
  double l1_error = 0.0;
  unsigned iterations = 0;
  bool converged = false;
};

/// Damped fixed-point iteration z_i += eta (m_i(z) - target_i) on a common
/// sample; eta halves whenever the l1 error grows. Returns the best iterate.
ThresholdSearch find_matching_threshold(const VectorFunction& F, const std::vector<double>& target,
                                        double tol, unsigned max_iter, std::size_t samples,
                                        std::uint64_t seed, Exec exec = Exec::parallel);

/// Same search over precomputed F values (row-major, k per sample).
ThresholdSearch match_threshold_values(const std::vector<double>& values, std::size_t k,
                                       const std::vector<double>& target, double tol,
                                       unsigned max_iter);

struct RoundingReport {
  StabEstimate stab_f;
  StabEstimate stab_g;
  StabEstimate cross;  // Pr[g(X) = f(Y)] = <g, P_t f>
  ThresholdSearch search;
  MeasureVector measures_f;
  MeasureVector measures_g;
  double slack = 0.0;  // ||E g - E f||_1 on common draws
  PartitionFn rounded;
};

RoundingReport stability_of_rounding(const PartitionFn& f, double t, double tol,
                                     std::size_t samples, std::uint64_t seed,
                                     unsigned quad_order = 0, Exec exec = Exec::parallel);

struct TruncationReport {
  PartitionFn ptf;
  std::vector<PolyGauss> polys;
  double tail = 0.0;   // W^{>d} of the centered embedding
  double bound = 0.0;  // k^2 * tail
  StabEstimate disagreement;
  StabEstimate collision;
};

TruncationReport ptf_from_truncation(const PartitionFn& h, unsigned d,
                                     unsigned quad_order = kDefaultQuadOrder,
                                     std::size_t samples = 200000, std::uint64_t seed = 1,
                                     Exec exec = Exec::parallel);

}  // namespace nstab
