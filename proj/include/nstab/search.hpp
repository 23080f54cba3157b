#pragma once

// Bounded-dimension noise-stability maximization over PTF covers, and a
// desk-scale decider for non-interactive correlation with an exhaustive oracle.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nstab/partition.hpp"
#include "nstab/product_space.hpp"

namespace nstab {

enum class SearchMode { grid_cover, local };

std::string to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string& name);

struct CoverGrid {
  double coeff_bound = 1.0;  // B
  double step = 1.0;         // h
  std::size_t max_candidates = 1u << 20;
};

struct SearchConfig {
  std::size_t k = 2;
  std::size_t n0 = 1;
  unsigned d = 1;
  double t = 0.6931471805599453;  // ln 2, i.e. rho = 1/2
  std::vector<double> target_mu{0.5, 0.5};
  double measure_tol = 0.02;
  std::size_t budget = 500;
  SearchMode mode = SearchMode::grid_cover;
  std::uint64_t seed = 1;

  CoverGrid grid{1.0, 0.1, 1u << 20};
  std::size_t samples = 400000;          // stability estimate per candidate
  std::size_t measure_samples = 50000;   // measure check / threshold matching
  unsigned restarts = 4;                 // local mode
  double initial_step = 0.5;             // local mode coordinate step
  unsigned spectral_degree = 20;         // local mode smoothing
  unsigned polish_rounds = 3;            // local mode iterated rounding

  void validate() const;
};

/// Hermite multi-indices of total degree <= d in n variables, by degree then
/// lexicographically; the parameter layout of one polynomial.
std::vector<HermiteIndex> poly_basis(std::size_t n, unsigned d);

/// sum_S c_S H_S over poly_basis(n, d).
PolyGauss poly_from_params(std::size_t n, unsigned d, std::span<const double> params);

struct CoverCandidate {
  /// One normalized coefficient vector for k = 2 (the PTF (-p, p)), k vectors otherwise.
  std::vector<std::vector<double>> params;
  std::optional<unsigned> constant_label;  // set for the degree-0 cover
};

/// Grid points of [-B, B] with step h, normalized to unit variance and deduplicated.
std::vector<CoverCandidate> enumerate_cover(std::size_t k, std::size_t n0, unsigned d,
                                            const CoverGrid& grid);

PartitionFn cover_partition(const CoverCandidate& c, std::size_t k, std::size_t n0, unsigned d);

struct TracePoint {
  std::size_t iteration = 0;
  std::vector<double> params;  // flattened
  double objective = 0.0;      // agreement probability
  double std_error = 0.0;
  bool feasible = false;
};

/// Stable hash of a parameter vector for trace tables.
std::uint64_t params_hash(const std::vector<double>& params);

struct SearchResult {
  PartitionFn best = PartitionFn::constant(1, 1, 0);
  StabEstimate stability;
  MeasureVector measures;
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;
  bool feasible = false;
  std::vector<double> best_params;
  std::string description;
};

SearchResult optimize_stability(const SearchConfig& cfg, Exec exec = Exec::parallel);

struct NcdConfig {
  std::size_t k = 2;
  std::size_t n_brute = 2;
  std::vector<std::size_t> block_lengths{1, 2, 4, 8, 16, 32, 64};
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
  std::size_t enumeration_guard = 1u << 22;
};

struct NcdWitness {
  DiscreteStrategy f;
  DiscreteStrategy g;
  std::size_t n = 0;
  std::string route;  // "table" or "block"
};

struct NcdResult {
  bool feasible = false;
  double achieved = 0.0;       // best agreement among marginal-feasible pairs
  double std_error = 0.0;      // 0 when exact
  bool any_feasible_pair = false;
  std::optional<NcdWitness> witness;
  std::vector<double> marginals_f;
  std::vector<double> marginals_g;
  std::size_t pairs_examined = 0;
  /// A not-found verdict only reports that the search found no witness.
  std::string note;
};

NcdResult ncd_decide(const JointDist& P, const std::vector<double>& mu, const std::vector<double>& nu,
                     double kappa, double delta, std::size_t n_max, const NcdConfig& cfg,
                     Exec exec = Exec::parallel);

struct OracleResult {
  double value = 0.0;  // 0 with feasible = false when no pair meets the marginals
  bool feasible = false;
  std::size_t pairs = 0;
};

/// Exact maximum agreement over all strategy pairs at block length n whose
/// marginals are within delta (l1) of mu and nu.
OracleResult ncd_brute_oracle(const JointDist& P, const std::vector<double>& mu,
                              const std::vector<double>& nu, std::size_t k, std::size_t n,
                              double delta, std::size_t guard = 1u << 22);

}  // namespace nstab
