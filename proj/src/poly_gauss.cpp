#include "nstab/poly_gauss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace nstab {

unsigned PolyGauss::degree() const {
  unsigned d = 0;
  for (const auto& [q, t] : chaos)
    if (!t.entries().empty()) d = std::max(d, q);
  return d;
}

double PolyGauss::variance() const {
  double v = 0.0;
  for (const auto& [q, t] : chaos)
    if (q >= 1) v += t.frobenius_sq();
  return v;
}

void PolyGauss::add_component(const SymmetricTensor& t) {
  if (t.dim() != dim) throw std::invalid_argument("PolyGauss: component dimension mismatch");
  if (t.order() == 0) {
    constant += t.get({});
    return;
  }
  auto [it, inserted] = chaos.try_emplace(t.order(), t.order(), dim);
  for (const auto& [key, v] : t.entries()) it->second.add(key, v);
}

double PolyGauss::eval(std::span<const double> x) const {
  if (x.size() != dim) throw std::invalid_argument("PolyGauss::eval: dimension mismatch");
  double s = constant;
  for (const auto& [q, t] : chaos) s += ito_eval(t, x);
  return s;
}

PolyGauss PolyGauss::scaled(double factor) const {
  PolyGauss out(dim, constant * factor);
  for (const auto& [q, t] : chaos) out.chaos.emplace(q, t.scaled(factor));
  return out;
}

PolyGauss PolyGauss::shifted(double c) const {
  PolyGauss out = *this;
  out.constant += c;
  return out;
}

void PolyGauss::prune(double tol) {
  for (auto& [q, t] : chaos) t.prune(tol);
  std::erase_if(chaos, [](const auto& kv) { return kv.second.entries().empty(); });
}

PolyGauss operator+(const PolyGauss& a, const PolyGauss& b) {
  if (a.dim != b.dim) throw std::invalid_argument("PolyGauss: dimension mismatch");
  PolyGauss out = a;
  out.constant += b.constant;
  for (const auto& [q, t] : b.chaos) out.add_component(t);
  return out;
}

PolyGauss operator-(const PolyGauss& a, const PolyGauss& b) { return a + b.scaled(-1.0); }

PolyGauss multiply(const PolyGauss& a, const PolyGauss& b) {
  if (a.dim != b.dim) throw std::invalid_argument("multiply: dimension mismatch");
  PolyGauss out(a.dim, a.constant * b.constant);
  for (const auto& [q, t] : b.chaos) out.add_component(t.scaled(a.constant));
  for (const auto& [p, f] : a.chaos) {
    out.add_component(f.scaled(b.constant));
    for (const auto& [q, g] : b.chaos)
      for (const auto& [order, comp] : ito_product(f, g)) out.add_component(comp);
  }
  out.prune(0.0);
  return out;
}

double poly_inner(const PolyGauss& a, const PolyGauss& b) {
  if (a.dim != b.dim) throw std::invalid_argument("poly_inner: dimension mismatch");
  double s = a.constant * b.constant;
  for (const auto& [q, f] : a.chaos) {
    auto it = b.chaos.find(q);
    if (it != b.chaos.end()) s += inner(f, it->second);
  }
  return s;
}

PolyGauss linear_poly(std::span<const double> coeffs, double c0) {
  PolyGauss p(coeffs.size(), c0);
  SymmetricTensor t(1, coeffs.size());
  for (std::uint32_t i = 0; i < coeffs.size(); ++i)
    if (coeffs[i] != 0.0) t.set({i}, coeffs[i]);
  if (!t.entries().empty()) p.chaos.emplace(1, std::move(t));
  return p;
}

PolyGauss hermite_poly(std::size_t dim, std::uint32_t coord, unsigned q) {
  PolyGauss p(dim);
  if (q == 0) {
    p.constant = 1.0;
    return p;
  }
  SymmetricTensor t(q, dim);
  t.set(Multiset(q, coord), 1.0);  // rank-one e^{(x)q} gives H_q(x_coord)
  p.chaos.emplace(q, std::move(t));
  return p;
}

PolyEvaluator::PolyEvaluator(const PolyGauss& p) : dim_(p.dim), constant_(p.constant) {
  std::unordered_map<std::uint32_t, std::uint32_t> slot_of;
  offset_.push_back(0);
  for (const auto& [q, t] : p.chaos) {
    max_degree_ = std::max(max_degree_, q);
    for (const auto& [key, v] : t.entries()) {
      if (v == 0.0) continue;
      coeff_.push_back(v * std::sqrt(multiset_orderings(key)));
      for (const auto& [elem, count] : multiplicities(key)) {
        auto [it, inserted] = slot_of.try_emplace(elem, static_cast<std::uint32_t>(coords_.size()));
        if (inserted) coords_.push_back(elem);
        factors_.push_back({it->second, count});
      }
      offset_.push_back(static_cast<std::uint32_t>(factors_.size()));
    }
  }
}

double PolyEvaluator::operator()(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("PolyEvaluator: dimension mismatch");
  const std::size_t width = max_degree_ + 1;
  thread_local std::vector<double> table;
  table.resize(coords_.size() * width);
  for (std::size_t s = 0; s < coords_.size(); ++s)
    hermite_all(x[coords_[s]], std::span<double>(table.data() + s * width, width));
  double total = constant_;
  for (std::size_t i = 0; i < coeff_.size(); ++i) {
    double term = coeff_[i];
    for (std::uint32_t f = offset_[i]; f < offset_[i + 1]; ++f)
      term *= table[factors_[f].slot * width + factors_[f].degree];
    total += term;
  }
  return total;
}

double MonomialForm::eval(std::span<const double> x) const {
  if (x.size() != dim) throw std::invalid_argument("MonomialForm::eval: dimension mismatch");
  double s = 0.0;
  for (const auto& [alpha, c] : terms) {
    double term = c;
    for (std::size_t i = 0; i < dim; ++i)
      for (unsigned e = 0; e < alpha[i]; ++e) term *= x[i];
    s += term;
  }
  return s;
}

std::vector<double> hermite_monomial_coefficients(unsigned q) {
  // Probabilists' He_{m+1} = x He_m - m He_{m-1}, then H_q = He_q / sqrt(q!).
  std::vector<double> prev{1.0};
  std::vector<double> cur{1.0};
  if (q >= 1) cur = {0.0, 1.0};
  for (unsigned m = 1; m < q; ++m) {
    std::vector<double> next(m + 2, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= m * prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  double fact = 1.0;
  for (unsigned i = 2; i <= q; ++i) fact *= i;
  for (double& c : cur) c /= std::sqrt(fact);
  return cur;
}

MonomialForm to_monomials(const PolyGauss& p) {
  MonomialForm m;
  m.dim = p.dim;
  if (p.constant != 0.0) m.terms[std::vector<unsigned>(p.dim, 0)] += p.constant;
  for (const auto& [q, t] : p.chaos) {
    for (const auto& [key, v] : t.entries()) {
      // Product over distinct coordinates of the H_{m_i} monomial expansions.
      std::map<std::vector<unsigned>, double> partial{{std::vector<unsigned>(p.dim, 0),
                                                       v * std::sqrt(multiset_orderings(key))}};
      for (const auto& [elem, count] : multiplicities(key)) {
        const auto coeffs = hermite_monomial_coefficients(count);
        std::map<std::vector<unsigned>, double> next;
        for (const auto& [alpha, c] : partial) {
          for (unsigned power = 0; power < coeffs.size(); ++power) {
            if (coeffs[power] == 0.0) continue;
            auto beta = alpha;
            beta[elem] += power;
            next[beta] += c * coeffs[power];
          }
        }
        partial = std::move(next);
      }
      for (const auto& [alpha, c] : partial) m.terms[alpha] += c;
    }
  }
  return m;
}

PolyGauss poly_from_hermite(const HermiteExpansion& e, std::size_t label) {
  if (label >= e.k) throw std::out_of_range("poly_from_hermite: label out of range");
  PolyGauss p(e.n);
  for (const auto& [idx, c] : e.coefficients) {
    const double value = c[label];
    if (value == 0.0) continue;
    Multiset key;
    for (std::uint32_t i = 0; i < idx.entries.size(); ++i)
      key.insert(key.end(), idx.entries[i], i);
    if (key.empty()) {
      p.constant += value;
      continue;
    }
    const unsigned q = static_cast<unsigned>(key.size());
    auto [it, inserted] = p.chaos.try_emplace(q, q, e.n);
    it->second.set(key, value / std::sqrt(multiset_orderings(key)));
  }
  return p;
}

}  // namespace nstab
