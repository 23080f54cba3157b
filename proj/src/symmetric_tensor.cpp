#include "nstab/symmetric_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "nstab/gauss_core.hpp"

namespace nstab {

namespace {

double factorial(unsigned n) {
  double f = 1.0;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  double b = 1.0;
  for (unsigned i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

void check_key(const Multiset& key, unsigned order, std::size_t dim) {
  if (key.size() != order) throw std::invalid_argument("SymmetricTensor: key size != order");
  for (auto i : key)
    if (i >= dim) throw std::out_of_range("SymmetricTensor: index out of range");
}

}  // namespace

double multiset_orderings(const Multiset& s) {
  double value = factorial(static_cast<unsigned>(s.size()));
  for (const auto& [elem, count] : multiplicities(s)) value /= factorial(count);
  return value;
}

std::vector<std::pair<std::uint32_t, unsigned>> multiplicities(const Multiset& s) {
  std::vector<std::pair<std::uint32_t, unsigned>> out;
  for (auto v : s) {
    if (!out.empty() && out.back().first == v)
      ++out.back().second;
    else
      out.emplace_back(v, 1u);
  }
  return out;
}

SymmetricTensor::SymmetricTensor(unsigned order, std::size_t dim) : order_(order), dim_(dim) {}

double SymmetricTensor::get(Multiset key) const {
  std::sort(key.begin(), key.end());
  auto it = values_.find(key);
  return it == values_.end() ? 0.0 : it->second;
}

void SymmetricTensor::set(Multiset key, double value) {
  check_key(key, order_, dim_);
  std::sort(key.begin(), key.end());
  values_[std::move(key)] = value;
}

void SymmetricTensor::add(Multiset key, double value) {
  check_key(key, order_, dim_);
  std::sort(key.begin(), key.end());
  values_[std::move(key)] += value;
}

double SymmetricTensor::frobenius_sq() const {
  double s = 0.0;
  for (const auto& [key, v] : values_) s += multiset_orderings(key) * v * v;
  return s;
}

double SymmetricTensor::frobenius() const { return std::sqrt(frobenius_sq()); }

SymmetricTensor SymmetricTensor::scaled(double factor) const {
  SymmetricTensor out = *this;
  for (auto& [key, v] : out.values_) v *= factor;
  return out;
}

void SymmetricTensor::prune(double tol) {
  std::erase_if(values_, [tol](const auto& kv) { return std::fabs(kv.second) <= tol; });
}

SymmetricTensor SymmetricTensor::unit(std::size_t dim, std::uint32_t i) {
  SymmetricTensor t(1, dim);
  t.set({i}, 1.0);
  return t;
}

SymmetricTensor SymmetricTensor::outer(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw std::invalid_argument("SymmetricTensor::outer: no factors");
  Tensor t;
  t.order = static_cast<unsigned>(vectors.size());
  t.dim = vectors[0].size();
  std::vector<std::uint32_t> idx(t.order, 0);
  for (;;) {
    double v = 1.0;
    for (unsigned a = 0; a < t.order; ++a) v *= vectors[a][idx[a]];
    if (v != 0.0) t.entries[idx] = v;
    unsigned a = 0;
    for (; a < t.order; ++a) {
      if (++idx[a] < t.dim) break;
      idx[a] = 0;
    }
    if (a == t.order) break;
  }
  return symmetrize(t);
}

double Tensor::get(const OrderedIndex& idx) const {
  auto it = entries.find(idx);
  return it == entries.end() ? 0.0 : it->second;
}

double Tensor::frobenius_sq() const {
  double s = 0.0;
  for (const auto& [idx, v] : entries) s += v * v;
  return s;
}

double Tensor::frobenius() const { return std::sqrt(frobenius_sq()); }

Tensor to_ordered(const SymmetricTensor& f) {
  Tensor t;
  t.order = f.order();
  t.dim = f.dim();
  t.symmetric = true;
  for (const auto& [key, v] : f.entries()) {
    OrderedIndex idx = key;
    do {
      t.entries[idx] = v;
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  return t;
}

Tensor contract(const SymmetricTensor& f, const SymmetricTensor& g, unsigned r) {
  if (f.dim() != g.dim()) throw std::invalid_argument("contract: dimension mismatch");
  if (r > std::min(f.order(), g.order())) throw std::invalid_argument("contract: r out of range");
  const unsigned p = f.order();
  const unsigned q = g.order();

  // Group each operand's ordered entries by the trailing r contracted slots.
  using Group = std::map<OrderedIndex, std::vector<std::pair<OrderedIndex, double>>>;
  auto group = [r](const Tensor& t) {
    Group out;
    for (const auto& [idx, v] : t.entries) {
      OrderedIndex head(idx.begin(), idx.end() - r);
      OrderedIndex tail(idx.end() - r, idx.end());
      out[std::move(tail)].emplace_back(std::move(head), v);
    }
    return out;
  };
  const Group gf = group(to_ordered(f));
  const Group gg = group(to_ordered(g));

  Tensor out;
  out.order = p + q - 2 * r;
  out.dim = f.dim();
  out.symmetric = false;
  for (const auto& [z, fs] : gf) {
    auto it = gg.find(z);
    if (it == gg.end()) continue;
    for (const auto& [fh, fv] : fs) {
      for (const auto& [gh, gv] : it->second) {
        OrderedIndex idx = fh;
        idx.insert(idx.end(), gh.begin(), gh.end());
        out.entries[idx] += fv * gv;
      }
    }
  }
  std::erase_if(out.entries, [](const auto& kv) { return kv.second == 0.0; });
  return out;
}

SymmetricTensor symmetrize(const Tensor& t) {
  SymmetricTensor out(t.order, t.dim);
  std::map<Multiset, double> sums;
  for (const auto& [idx, v] : t.entries) {
    Multiset key = idx;
    std::sort(key.begin(), key.end());
    sums[key] += v;
  }
  for (auto& [key, s] : sums) {
    const double v = s / multiset_orderings(key);
    if (v != 0.0) out.set(key, v);
  }
  return out;
}

double inner(const SymmetricTensor& f, const SymmetricTensor& g) {
  if (f.order() != g.order()) return 0.0;
  if (f.dim() != g.dim()) throw std::invalid_argument("inner: dimension mismatch");
  const auto& small = f.entries().size() <= g.entries().size() ? f : g;
  const auto& large = &small == &f ? g : f;
  double s = 0.0;
  for (const auto& [key, v] : small.entries()) {
    auto it = large.entries().find(key);
    if (it != large.entries().end()) s += multiset_orderings(key) * v * it->second;
  }
  return s;
}

double ito_eval(const SymmetricTensor& h, std::span<const double> x) {
  if (x.size() != h.dim()) throw std::invalid_argument("ito_eval: dimension mismatch");
  if (h.order() == 0) return h.get({});
  double total = 0.0;
  for (const auto& [key, v] : h.entries()) {
    double term = v * std::sqrt(multiset_orderings(key));
    for (const auto& [elem, count] : multiplicities(key)) term *= hermite_eval(count, x[elem]);
    total += term;
  }
  return total;
}

double ito_product_weight(unsigned p, unsigned q, unsigned r) {
  return factorial(r) * binomial(p, r) * binomial(q, r) * std::sqrt(factorial(p + q - 2 * r)) /
         std::sqrt(factorial(p) * factorial(q));
}

std::map<unsigned, SymmetricTensor> ito_product(const SymmetricTensor& f,
                                                const SymmetricTensor& g) {
  if (f.dim() != g.dim()) throw std::invalid_argument("ito_product: dimension mismatch");
  std::map<unsigned, SymmetricTensor> out;
  const unsigned p = f.order();
  const unsigned q = g.order();
  for (unsigned r = 0; r <= std::min(p, q); ++r) {
    SymmetricTensor term = symmetrize(contract(f, g, r)).scaled(ito_product_weight(p, q, r));
    const unsigned order = p + q - 2 * r;
    auto [it, inserted] = out.try_emplace(order, order, f.dim());
    for (const auto& [key, v] : term.entries()) it->second.add(key, v);
  }
  for (auto& [order, t] : out) t.prune(0.0);
  return out;
}

}  // namespace nstab
