#pragma once

// k-ary partitions of Gaussian space and Monte Carlo estimators of their
// measures and noise stability. Labels are 0-based; label 0 is the fallback
// label of a multivariate PTF.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nstab/cube.hpp"
#include "nstab/hermite_analysis.hpp"
#include "nstab/poly_gauss.hpp"

namespace nstab {

/// Label 0 when <x - a, b> <= 0, label 1 otherwise.
struct Halfspace {
  std::vector<double> a;
  std::vector<double> b;
};

/// Intervals of coordinate `axis` cut at increasing breakpoints; labels.size() =
/// breakpoints.size() + 1 and interval j is (bp[j-1], bp[j]].
struct Slabs {
  std::size_t axis = 0;
  std::vector<double> breakpoints;
  std::vector<unsigned> labels;
};

/// Product of per-axis slab grids; labels are indexed with axis 0 fastest.
struct Cells {
  std::vector<std::vector<double>> breakpoints;
  std::vector<unsigned> labels;
};

/// Label j when p_j alone is positive, label 0 otherwise.
struct MultiPTF {
  std::vector<PolyGauss> polys;
};

/// A cube function applied to the sign pattern of x (x_i >= 0 reads as +1).
struct Tabulated {
  CubeFn table;
};

struct Callback {
  std::function<unsigned(std::span<const double>)> fn;
  std::string name = "callback";
};

class PartitionFn {
 public:
  using Variant = std::variant<Halfspace, Slabs, Cells, MultiPTF, Tabulated, Callback>;

  PartitionFn(Variant v, std::size_t k, std::size_t n);

  static PartitionFn halfspace(std::vector<double> a, std::vector<double> b);
  static PartitionFn slabs(std::size_t n, std::size_t axis, std::vector<double> breakpoints,
                           std::vector<unsigned> labels, std::size_t k = 0);
  static PartitionFn cells(std::vector<std::vector<double>> breakpoints, std::vector<unsigned> labels,
                           std::size_t k = 0);
  static PartitionFn ptf(std::vector<PolyGauss> polys);
  static PartitionFn tabulated(CubeFn table);
  static PartitionFn callback(std::size_t k, std::size_t n,
                              std::function<unsigned(std::span<const double>)> fn,
                              std::string name = "callback");
  static PartitionFn constant(std::size_t k, std::size_t n, unsigned label);

  std::size_t k() const { return k_; }
  std::size_t n() const { return n_; }
  const Variant& variant() const { return v_; }
  std::string kind() const;

  unsigned operator()(std::span<const double> x) const;
  /// Same as operator() without the dimension check.
  unsigned label_unchecked(std::span<const double> x) const;

  /// Number of positive polynomials at x (MultiPTF only).
  std::size_t positive_count(std::span<const double> x) const;

 private:
  Variant v_;
  std::size_t k_;
  std::size_t n_;
  std::shared_ptr<const std::vector<PolyEvaluator>> evaluators_;
};

unsigned eval_partition(const PartitionFn& f, std::span<const double> x);

/// One-hot embedding of the partition as a Delta_k-valued function.
VectorFunction indicator_function(const PartitionFn& f);

/// Gaussian integral of H_q over (lo, hi]; infinite endpoints allowed.
double interval_hermite_moment(unsigned q, double lo, double hi);

/// Hermite expansion of the one-hot embedding. Halfspaces, slabs and cells use
/// exact interval moments; other kinds fall back to tensor quadrature. On the
/// exact path the mass above max_degree is lumped into degree max_degree + 1.
HermiteExpansion expand_partition(const PartitionFn& f, unsigned max_degree,
                                  unsigned quad_order = kDefaultQuadOrder, Exec exec = Exec::parallel);

/// P_t of the one-hot embedding. Halfspaces, slabs and cells use the closed
/// form through the Gaussian CDF; other kinds fall back to tensor quadrature.
VectorFunction ou_partition(const PartitionFn& f, double t, unsigned quad_order = 0);

/// Default quadrature order per axis for the fallback path.
unsigned default_ou_order(std::size_t n);

struct MeasureVector {
  std::vector<double> mu;
  std::vector<double> std_error;
  std::size_t samples = 0;
};

struct StabEstimate {
  double value = 0.0;  // Pr[f(X) = g(Y)]
  double std_error = 0.0;
  std::size_t samples = 0;
  double t = 0.0;
  double rho = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> per_label;  // Pr[f(X) = j and g(Y) = j]
  std::vector<double> per_label_std_error;
};

MeasureVector estimate_measures(const PartitionFn& f, std::size_t samples, std::uint64_t seed,
                                Exec exec = Exec::parallel);

StabEstimate estimate_stability(const PartitionFn& f, double t, std::size_t samples,
                                std::uint64_t seed, Exec exec = Exec::parallel);
StabEstimate estimate_stability_rho(const PartitionFn& f, double rho, std::size_t samples,
                                    std::uint64_t seed, Exec exec = Exec::parallel);
StabEstimate estimate_cross_stability(const PartitionFn& f, const PartitionFn& g, double t,
                                      std::size_t samples, std::uint64_t seed,
                                      Exec exec = Exec::parallel);
StabEstimate estimate_cross_stability_rho(const PartitionFn& f, const PartitionFn& g, double rho,
                                          std::size_t samples, std::uint64_t seed,
                                          Exec exec = Exec::parallel);

/// Pr[f(X) != g(X)] with a binomial standard error.
StabEstimate estimate_disagreement(const PartitionFn& f, const PartitionFn& g,
                                   std::size_t samples, std::uint64_t seed,
                                   Exec exec = Exec::parallel);

/// Pr[#{j : p_j(x) > 0} != 1].
StabEstimate collision_probability(const PartitionFn& f, std::size_t samples, std::uint64_t seed,
                                   Exec exec = Exec::parallel);

/// log^{d/2}(k d / delta), the mean bound of a (d, delta)-balanced PTF.
double balance_bound(std::size_t k, unsigned d, double delta);

PartitionFn balance(const PartitionFn& f, double delta);

/// Pr[X <= 0, Y <= 0] for rho-correlated standard normals.
double sheppard_orthant(double rho);

/// Pr[X <= a, Y <= b] for rho-correlated standard normals, |rho| < 1, by adaptive quadrature.
double bivariate_normal_cdf(double a, double b, double rho);

/// Agreement probability of the halfspace whose label-0 side has measure mu.
double halfspace_stability(double mu, double rho);

}  // namespace nstab
