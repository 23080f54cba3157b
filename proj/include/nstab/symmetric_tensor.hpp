#pragma once

// Symmetric tensors stored by multiset, ordered (unsymmetrized) tensors, the
// contraction product and the Ito integral / multiplication formula.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace nstab {

/// Sorted multi-index over [dim]; one key stands for every ordering.
using Multiset = std::vector<std::uint32_t>;
/// Ordered multi-index.
using OrderedIndex = std::vector<std::uint32_t>;

/// Number of distinct orderings of a sorted multiset: q! / prod m_i!.
double multiset_orderings(const Multiset& s);

/// Per-element multiplicities (element, count) of a sorted multiset.
std::vector<std::pair<std::uint32_t, unsigned>> multiplicities(const Multiset& s);

class SymmetricTensor {
 public:
  SymmetricTensor() = default;
  SymmetricTensor(unsigned order, std::size_t dim);

  unsigned order() const { return order_; }
  std::size_t dim() const { return dim_; }

  /// Value on every ordering of `key`; the key is sorted internally.
  double get(Multiset key) const;
  void set(Multiset key, double value);
  void add(Multiset key, double value);

  const std::map<Multiset, double>& entries() const { return values_; }

  /// ||f||_F^2 = sum over multisets of (q!/prod m!) value^2.
  double frobenius_sq() const;
  double frobenius() const;

  SymmetricTensor scaled(double factor) const;
  /// Removes entries with |value| <= tol.
  void prune(double tol = 0.0);

  bool operator==(const SymmetricTensor&) const = default;

  /// Order-1 tensor e_i.
  static SymmetricTensor unit(std::size_t dim, std::uint32_t i);
  /// Symmetrized outer product of vectors.
  static SymmetricTensor outer(std::span<const std::vector<double>> vectors);

 private:
  unsigned order_ = 0;
  std::size_t dim_ = 0;
  std::map<Multiset, double> values_;
};

/// Tensor indexed by ordered tuples; produced by contraction, which does not
/// preserve symmetry in general.
struct Tensor {
  unsigned order = 0;
  std::size_t dim = 0;
  bool symmetric = false;  // false marks an unsymmetrized result
  std::map<OrderedIndex, double> entries;

  double get(const OrderedIndex& idx) const;
  double frobenius_sq() const;
  double frobenius() const;
};

/// Expands a symmetric tensor to all orderings.
Tensor to_ordered(const SymmetricTensor& f);

/// (f (x)_r g)(t, s) = sum_z f(t, z) g(s, z); r = 0 is the outer product.
Tensor contract(const SymmetricTensor& f, const SymmetricTensor& g, unsigned r);

/// Average over all index permutations.
SymmetricTensor symmetrize(const Tensor& t);

/// Frobenius inner product <f, g> over all orderings.
double inner(const SymmetricTensor& f, const SymmetricTensor& g);

/// I_q(h)(x) = sum_S h(S) sqrt(q!/prod m!) prod_i H_{m_i}(x_i).
double ito_eval(const SymmetricTensor& h, std::span<const double> x);

/// Chaos decomposition of I_p(f) I_q(g): order -> component.
std::map<unsigned, SymmetricTensor> ito_product(const SymmetricTensor& f,
                                                const SymmetricTensor& g);

/// Coefficient of sym(f (x)_r g) in the product formula.
double ito_product_weight(unsigned p, unsigned q, unsigned r);

}  // namespace nstab
