#include "nstab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace nstab {

namespace {

std::size_t max_label(const std::vector<unsigned>& labels) {
  unsigned m = 0;
  for (auto l : labels) m = std::max(m, l);
  return static_cast<std::size_t>(m) + 1;
}

void check_breakpoints(const std::vector<double>& bp) {
  for (std::size_t i = 1; i < bp.size(); ++i)
    if (!(bp[i] > bp[i - 1])) throw std::invalid_argument("breakpoints must be strictly increasing");
  for (double b : bp)
    if (!std::isfinite(b)) throw std::invalid_argument("breakpoints must be finite");
}

std::size_t interval_of(const std::vector<double>& bp, double x) {
  return static_cast<std::size_t>(std::lower_bound(bp.begin(), bp.end(), x) - bp.begin());
}

}  // namespace

PartitionFn::PartitionFn(Variant v, std::size_t k, std::size_t n)
    : v_(std::move(v)), k_(k), n_(n) {
  if (k_ < 1) throw std::invalid_argument("PartitionFn: k must be >= 1");
  if (n_ < 1) throw std::invalid_argument("PartitionFn: n must be >= 1");
  if (auto* h = std::get_if<Halfspace>(&v_)) {
    if (k_ != 2 || h->a.size() != n_ || h->b.size() != n_)
      throw std::invalid_argument("Halfspace: needs k = 2 and vectors of length n");
  } else if (auto* s = std::get_if<Slabs>(&v_)) {
    check_breakpoints(s->breakpoints);
    if (s->axis >= n_) throw std::invalid_argument("Slabs: axis out of range");
    if (s->labels.size() != s->breakpoints.size() + 1)
      throw std::invalid_argument("Slabs: need one label per interval");
    if (max_label(s->labels) > k_) throw std::invalid_argument("Slabs: label out of range");
  } else if (auto* c = std::get_if<Cells>(&v_)) {
    if (c->breakpoints.size() != n_) throw std::invalid_argument("Cells: one grid per axis");
    std::size_t count = 1;
    for (const auto& bp : c->breakpoints) {
      check_breakpoints(bp);
      count *= bp.size() + 1;
    }
    if (c->labels.size() != count) throw std::invalid_argument("Cells: need one label per cell");
    if (max_label(c->labels) > k_) throw std::invalid_argument("Cells: label out of range");
  } else if (auto* p = std::get_if<MultiPTF>(&v_)) {
    if (p->polys.size() != k_) throw std::invalid_argument("MultiPTF: need k polynomials");
    auto evals = std::make_shared<std::vector<PolyEvaluator>>();
    for (const auto& poly : p->polys) {
      if (poly.dim != n_) throw std::invalid_argument("MultiPTF: polynomial dimension mismatch");
      evals->emplace_back(poly);
    }
    evaluators_ = std::move(evals);
  } else if (auto* t = std::get_if<Tabulated>(&v_)) {
    t->table.validate();
    if (t->table.n != n_ || t->table.k != k_) throw std::invalid_argument("Tabulated: shape mismatch");
  } else if (auto* cb = std::get_if<Callback>(&v_)) {
    if (!cb->fn) throw std::invalid_argument("Callback: empty function");
  }
}

PartitionFn PartitionFn::halfspace(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  return PartitionFn(Halfspace{std::move(a), std::move(b)}, 2, n);
}

PartitionFn PartitionFn::slabs(std::size_t n, std::size_t axis, std::vector<double> breakpoints,
                               std::vector<unsigned> labels, std::size_t k) {
  const std::size_t kk = k == 0 ? max_label(labels) : k;
  return PartitionFn(Slabs{axis, std::move(breakpoints), std::move(labels)}, kk, n);
}

PartitionFn PartitionFn::cells(std::vector<std::vector<double>> breakpoints,
                               std::vector<unsigned> labels, std::size_t k) {
  const std::size_t n = breakpoints.size();
  const std::size_t kk = k == 0 ? max_label(labels) : k;
  return PartitionFn(Cells{std::move(breakpoints), std::move(labels)}, kk, n);
}

PartitionFn PartitionFn::ptf(std::vector<PolyGauss> polys) {
  if (polys.empty()) throw std::invalid_argument("MultiPTF: no polynomials");
  const std::size_t k = polys.size();
  const std::size_t n = polys.front().dim;
  return PartitionFn(MultiPTF{std::move(polys)}, k, n);
}

PartitionFn PartitionFn::tabulated(CubeFn table) {
  const std::size_t k = table.k;
  const std::size_t n = table.n;
  return PartitionFn(Tabulated{std::move(table)}, k, n);
}

PartitionFn PartitionFn::callback(std::size_t k, std::size_t n,
                                  std::function<unsigned(std::span<const double>)> fn,
                                  std::string name) {
  return PartitionFn(Callback{std::move(fn), std::move(name)}, k, n);
}

PartitionFn PartitionFn::constant(std::size_t k, std::size_t n, unsigned label) {
  if (label >= k) throw std::invalid_argument("constant partition: label out of range");
  return slabs(n, 0, {}, {label}, k);
}

std::string PartitionFn::kind() const {
  switch (v_.index()) {
    case 0: return "halfspace";
    case 1: return "slabs";
    case 2: return "cells";
    case 3: return "ptf";
    case 4: return "tabulated";
    default: return "callback";
  }
}

unsigned PartitionFn::label_unchecked(std::span<const double> x) const {
  switch (v_.index()) {
    case 0: {
      const auto& h = std::get<Halfspace>(v_);
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += (x[i] - h.a[i]) * h.b[i];
      return s <= 0.0 ? 0u : 1u;
    }
    case 1: {
      const auto& s = std::get<Slabs>(v_);
      return s.labels[interval_of(s.breakpoints, x[s.axis])];
    }
    case 2: {
      const auto& c = std::get<Cells>(v_);
      std::size_t idx = 0, stride = 1;
      for (std::size_t i = 0; i < n_; ++i) {
        idx += interval_of(c.breakpoints[i], x[i]) * stride;
        stride *= c.breakpoints[i].size() + 1;
      }
      return c.labels[idx];
    }
    case 3: {
      unsigned positive = 0, which = 0;
      for (std::size_t j = 0; j < k_; ++j) {
        if ((*evaluators_)[j](x) > 0.0) {
          ++positive;
          which = static_cast<unsigned>(j);
        }
      }
      return positive == 1 ? which : 0u;
    }
    case 4: {
      const auto& t = std::get<Tabulated>(v_);
      std::uint32_t b = 0;
      for (std::size_t i = 0; i < n_; ++i)
        if (x[i] < 0.0) b |= 1u << i;
      return t.table(b);
    }
    default: {
      const unsigned l = std::get<Callback>(v_).fn(x);
      if (l >= k_) throw std::out_of_range("Callback: label out of range");
      return l;
    }
  }
}

unsigned PartitionFn::operator()(std::span<const double> x) const {
  if (x.size() != n_) throw std::invalid_argument("eval_partition: dimension mismatch");
  return label_unchecked(x);
}

std::size_t PartitionFn::positive_count(std::span<const double> x) const {
  if (!evaluators_) throw std::invalid_argument("positive_count: partition is not a PTF");
  std::size_t positive = 0;
  for (const auto& e : *evaluators_)
    if (e(x) > 0.0) ++positive;
  return positive;
}

unsigned eval_partition(const PartitionFn& f, std::span<const double> x) { return f(x); }

VectorFunction indicator_function(const PartitionFn& f) {
  VectorFunction v;
  v.n = f.n();
  v.k = f.k();
  v.eval = [f](std::span<const double> x, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    out[f.label_unchecked(x)] = 1.0;
  };
  return v;
}

double interval_hermite_moment(unsigned q, double lo, double hi) {
  if (!(lo <= hi)) return 0.0;
  if (q == 0) return normal_cdf(hi) - normal_cdf(lo);
  // d/dx [H_{q-1}(x) phi(x)] = -sqrt(q) H_q(x) phi(x).
  auto edge = [q](double x) {
    if (std::isinf(x)) return 0.0;
    return hermite_eval(q - 1, x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  };
  return (edge(lo) - edge(hi)) / std::sqrt(static_cast<double>(q));
}

namespace {

constexpr std::size_t kMaxExpansionTerms = 1u << 21;

/// Multi-indices of total degree <= d in n variables, axis 0 fastest.
std::vector<HermiteIndex> indices_up_to(std::size_t n, unsigned d) {
  std::vector<HermiteIndex> out;
  std::vector<unsigned> digit(n, 0);
  while (true) {
    out.push_back(HermiteIndex{digit});
    if (out.size() > kMaxExpansionTerms)
      throw std::length_error("expand_partition: too many expansion terms");
    std::size_t i = 0;
    for (; i < n; ++i) {
      unsigned total = 0;
      for (auto v : digit) total += v;
      if (total < d) {
        ++digit[i];
        break;
      }
      digit[i] = 0;
    }
    if (i == n) return out;
  }
}

/// Moments of every interval of an axis cut at the breakpoints, [interval][degree].
std::vector<std::vector<double>> axis_moments(const std::vector<double>& bp, unsigned d) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> m(bp.size() + 1, std::vector<double>(d + 1));
  for (std::size_t j = 0; j <= bp.size(); ++j) {
    const double lo = j == 0 ? -inf : bp[j - 1];
    const double hi = j == bp.size() ? inf : bp[j];
    for (unsigned q = 0; q <= d; ++q) m[j][q] = interval_hermite_moment(q, lo, hi);
  }
  return m;
}

double log_factorial(unsigned q) { return std::lgamma(static_cast<double>(q) + 1.0); }

}  // namespace

HermiteExpansion expand_partition(const PartitionFn& f, unsigned max_degree, unsigned quad_order,
                                  Exec exec) {
  const std::size_t n = f.n(), k = f.k();
  const auto& v = f.variant();
  const bool exact = std::holds_alternative<Halfspace>(v) || std::holds_alternative<Slabs>(v) ||
                     std::holds_alternative<Cells>(v);
  if (!exact) return expand(indicator_function(f), max_degree, quad_order, exec);

  HermiteExpansion e;
  e.n = n;
  e.k = k;
  e.max_degree = max_degree;
  e.quad_order = 0;
  e.quadrature_mass = 1.0;
  const auto indices = indices_up_to(n, max_degree);
  auto store = [&](const HermiteIndex& idx, std::vector<double> c) {
    bool keep = false;
    for (double& x : c) {
      if (std::fabs(x) < kCoefficientDropTol) x = 0.0;
      else keep = true;
    }
    if (keep) e.coefficients.emplace(idx, std::move(c));
  };

  if (const auto* h = std::get_if<Halfspace>(&v)) {
    double norm = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      norm += h->b[i] * h->b[i];
      ab += h->a[i] * h->b[i];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      std::vector<double> c(k, 0.0);
      c[0] = 1.0;
      store(HermiteIndex{std::vector<unsigned>(n, 0)}, c);
    } else {
      // Label 0 is {<x, u> <= c}; H_q(<u, x>) spreads over |S| = q by the rank-one rule.
      const double cut = ab / norm;
      constexpr double inf = std::numeric_limits<double>::infinity();
      std::vector<double> g(max_degree + 1);
      for (unsigned q = 0; q <= max_degree; ++q) g[q] = interval_hermite_moment(q, -inf, cut);
      for (const auto& idx : indices) {
        const unsigned q = idx.degree();
        double w = g[q] * std::exp(0.5 * log_factorial(q));
        for (std::size_t i = 0; i < n; ++i) {
          w *= std::pow(h->b[i] / norm, static_cast<double>(idx.entries[i]));
          w /= std::exp(0.5 * log_factorial(idx.entries[i]));
        }
        std::vector<double> c(k, 0.0);
        c[0] = w;
        c[1] = (q == 0 ? 1.0 : 0.0) - w;
        store(idx, c);
      }
    }
  } else if (const auto* s = std::get_if<Slabs>(&v)) {
    const auto m = axis_moments(s->breakpoints, max_degree);
    for (const auto& idx : indices) {
      bool on_axis = true;
      for (std::size_t i = 0; i < n; ++i)
        if (i != s->axis && idx.entries[i] != 0) on_axis = false;
      if (!on_axis) continue;
      std::vector<double> c(k, 0.0);
      for (std::size_t j = 0; j < s->labels.size(); ++j) c[s->labels[j]] += m[j][idx.entries[s->axis]];
      store(idx, c);
    }
  } else {
    const auto& cells = std::get<Cells>(v);
    std::vector<std::vector<std::vector<double>>> m;
    for (const auto& bp : cells.breakpoints) m.push_back(axis_moments(bp, max_degree));
    for (const auto& idx : indices) {
      std::vector<double> c(k, 0.0);
      for (std::size_t cell = 0; cell < cells.labels.size(); ++cell) {
        std::size_t rest = cell;
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t pieces = cells.breakpoints[i].size() + 1;
          w *= m[i][rest % pieces][idx.entries[i]];
          rest /= pieces;
        }
        c[cells.labels[cell]] += w;
      }
      store(idx, c);
    }
  }
  e.tail_by_degree.assign(max_degree + 2, 0.0);
  e.tail_by_degree[max_degree + 1] = std::max(0.0, 1.0 - e.coefficient_mass());
  return e;
}

unsigned default_ou_order(std::size_t n) {
  switch (n) {
    case 1: return 48;
    case 2: return 24;
    default: return 12;
  }
}

VectorFunction ou_partition(const PartitionFn& f, double t, unsigned quad_order) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_partition: t must be >= 0");
  if (t == 0.0) return indicator_function(f);
  const double rho = std::exp(-t);
  const double s = std::sqrt(-std::expm1(-2.0 * t));
  VectorFunction v;
  v.n = f.n();
  v.k = f.k();
  // Probability that rho * c + s * Z lies in (lo, hi].
  auto interval_prob = [rho, s](double c, double lo, double hi) {
    const double a = std::isinf(lo) ? 0.0 : normal_cdf((lo - rho * c) / s);
    const double b = std::isinf(hi) ? 1.0 : normal_cdf((hi - rho * c) / s);
    return std::max(0.0, b - a);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();

  switch (f.variant().index()) {
    case 0: {
      const auto h = std::get<Halfspace>(f.variant());
      double bnorm = 0.0, ab = 0.0;
      for (std::size_t i = 0; i < h.b.size(); ++i) {
        bnorm += h.b[i] * h.b[i];
        ab += h.a[i] * h.b[i];
      }
      bnorm = std::sqrt(bnorm);
      v.eval = [h, rho, s, bnorm, ab](std::span<const double> x, std::span<double> out) {
        double xb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) xb += x[i] * h.b[i];
        out[0] = bnorm > 0.0 ? normal_cdf((ab - rho * xb) / (s * bnorm)) : 1.0;
        out[1] = 1.0 - out[0];
      };
      return v;
    }
    case 1: {
      const auto sl = std::get<Slabs>(f.variant());
      v.eval = [sl, interval_prob](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double c = x[sl.axis];
        for (std::size_t j = 0; j < sl.labels.size(); ++j) {
          const double lo = j == 0 ? -inf : sl.breakpoints[j - 1];
          const double hi = j == sl.breakpoints.size() ? inf : sl.breakpoints[j];
          out[sl.labels[j]] += interval_prob(c, lo, hi);
        }
      };
      return v;
    }
    case 2: {
      const auto cells = std::get<Cells>(f.variant());
      v.eval = [cells, interval_prob](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t n = cells.breakpoints.size();
        std::vector<std::vector<double>> axis_prob(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& bp = cells.breakpoints[i];
          for (std::size_t j = 0; j <= bp.size(); ++j) {
            const double lo = j == 0 ? -inf : bp[j - 1];
            const double hi = j == bp.size() ? inf : bp[j];
            axis_prob[i].push_back(interval_prob(x[i], lo, hi));
          }
        }
        std::vector<std::size_t> digit(n, 0);
        for (std::size_t cell = 0; cell < cells.labels.size(); ++cell) {
          double p = 1.0;
          for (std::size_t i = 0; i < n; ++i) p *= axis_prob[i][digit[i]];
          out[cells.labels[cell]] += p;
          for (std::size_t i = 0; i < n; ++i) {
            if (++digit[i] <= cells.breakpoints[i].size()) break;
            digit[i] = 0;
          }
        }
      };
      return v;
    }
    default: {
      if (f.n() > kMaxQuadratureDim)
        throw std::invalid_argument("ou_partition: quadrature fallback limited to n <= 3");
      auto op = std::make_shared<OuOperator>(f.n(), quad_order ? quad_order : default_ou_order(f.n()));
      const VectorFunction ind = indicator_function(f);
      v.eval = [op, ind, t](std::span<const double> x, std::span<double> out) {
        op->apply(ind, t, x, out);
      };
      return v;
    }
  }
}

namespace {

struct LabelCounts {
  std::vector<std::uint64_t> count;
};

void check_samples(std::size_t samples) {
  if (samples == 0) throw std::invalid_argument("estimator: samples must be >= 1");
}

double binomial_se(double p, std::size_t n) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

}  // namespace

MeasureVector estimate_measures(const PartitionFn& f, std::size_t samples, std::uint64_t seed,
                                Exec exec) {
  if (samples < 100) throw std::invalid_argument("estimate_measures: samples must be >= 100");
  const std::size_t n = f.n(), k = f.k();
  auto parts = map_chunks<LabelCounts>(samples, exec, [&](std::size_t c, std::size_t b, std::size_t e) {
    CounterRng rng(seed, c);
    std::vector<double> x(n);
    LabelCounts out{std::vector<std::uint64_t>(k, 0)};
    for (std::size_t s = b; s < e; ++s) {
      draw_gaussian(rng, x);
      ++out.count[f.label_unchecked(x)];
    }
    return out;
  });
  MeasureVector m;
  m.samples = samples;
  m.mu.assign(k, 0.0);
  m.std_error.assign(k, 0.0);
  std::vector<std::uint64_t> total(k, 0);
  for (const auto& p : parts)
    for (std::size_t j = 0; j < k; ++j) total[j] += p.count[j];
  for (std::size_t j = 0; j < k; ++j) {
    m.mu[j] = static_cast<double>(total[j]) / static_cast<double>(samples);
    m.std_error[j] = binomial_se(m.mu[j], samples);
  }
  return m;
}

StabEstimate estimate_cross_stability_rho(const PartitionFn& f, const PartitionFn& g, double rho,
                                          std::size_t samples, std::uint64_t seed, Exec exec) {
  check_samples(samples);
  if (f.k() != g.k() || f.n() != g.n())
    throw std::invalid_argument("estimate_cross_stability: shape mismatch");
  const CorrelatedSampler sampler(f.n(), rho, seed);
  const std::size_t n = f.n(), k = f.k();
  auto parts = map_chunks<LabelCounts>(samples, exec, [&](std::size_t c, std::size_t b, std::size_t e) {
    CounterRng rng = sampler.stream(c);
    std::vector<double> x(n), y(n);
    LabelCounts out{std::vector<std::uint64_t>(k, 0)};
    for (std::size_t s = b; s < e; ++s) {
      sampler.draw(rng, x, y);
      const unsigned lx = f.label_unchecked(x);
      if (lx == g.label_unchecked(y)) ++out.count[lx];
    }
    return out;
  });
  StabEstimate est;
  est.samples = samples;
  est.rho = rho;
  est.t = rho > 0.0 ? -std::log(rho) : std::numeric_limits<double>::infinity();
  est.seed = seed;
  est.per_label.assign(k, 0.0);
  est.per_label_std_error.assign(k, 0.0);
  std::uint64_t agree = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::uint64_t c = 0;
    for (const auto& p : parts) c += p.count[j];
    agree += c;
    est.per_label[j] = static_cast<double>(c) / static_cast<double>(samples);
    est.per_label_std_error[j] = binomial_se(est.per_label[j], samples);
  }
  est.value = static_cast<double>(agree) / static_cast<double>(samples);
  est.std_error = binomial_se(est.value, samples);
  return est;
}

StabEstimate estimate_stability_rho(const PartitionFn& f, double rho, std::size_t samples,
                                    std::uint64_t seed, Exec exec) {
  return estimate_cross_stability_rho(f, f, rho, samples, seed, exec);
}

StabEstimate estimate_cross_stability(const PartitionFn& f, const PartitionFn& g, double t,
                                      std::size_t samples, std::uint64_t seed, Exec exec) {
  if (!(t >= 0.0)) throw std::invalid_argument("estimate_stability: t must be >= 0");
  StabEstimate e = estimate_cross_stability_rho(f, g, std::exp(-t), samples, seed, exec);
  e.t = t;
  return e;
}

StabEstimate estimate_stability(const PartitionFn& f, double t, std::size_t samples,
                                std::uint64_t seed, Exec exec) {
  return estimate_cross_stability(f, f, t, samples, seed, exec);
}

namespace {

template <class Predicate>
StabEstimate estimate_event(std::size_t n, std::size_t samples, std::uint64_t seed, Exec exec,
                            Predicate&& event) {
  check_samples(samples);
  auto parts = map_chunks<std::uint64_t>(samples, exec, [&](std::size_t c, std::size_t b, std::size_t e) {
    CounterRng rng(seed, c);
    std::vector<double> x(n);
    std::uint64_t hits = 0;
    for (std::size_t s = b; s < e; ++s) {
      draw_gaussian(rng, x);
      if (event(std::span<const double>(x))) ++hits;
    }
    return hits;
  });
  std::uint64_t hits = 0;
  for (auto h : parts) hits += h;
  StabEstimate est;
  est.samples = samples;
  est.seed = seed;
  est.value = static_cast<double>(hits) / static_cast<double>(samples);
  est.std_error = binomial_se(est.value, samples);
  return est;
}

}  // namespace

StabEstimate estimate_disagreement(const PartitionFn& f, const PartitionFn& g,
                                   std::size_t samples, std::uint64_t seed, Exec exec) {
  if (f.n() != g.n()) throw std::invalid_argument("estimate_disagreement: dimension mismatch");
  return estimate_event(f.n(), samples, seed, exec, [&](std::span<const double> x) {
    return f.label_unchecked(x) != g.label_unchecked(x);
  });
}

StabEstimate collision_probability(const PartitionFn& f, std::size_t samples, std::uint64_t seed,
                                   Exec exec) {
  if (!std::holds_alternative<MultiPTF>(f.variant()))
    throw std::invalid_argument("collision_probability: partition is not a PTF");
  return estimate_event(f.n(), samples, seed, exec,
                        [&](std::span<const double> x) { return f.positive_count(x) != 1; });
}

double balance_bound(std::size_t k, unsigned d, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("balance: delta must be > 0");
  if (d == 0) return 1.0;
  const double base = std::log(static_cast<double>(k) * d / delta);
  return std::pow(std::max(base, 0.0), 0.5 * d);
}

PartitionFn balance(const PartitionFn& f, double delta) {
  const auto* ptf = std::get_if<MultiPTF>(&f.variant());
  if (!ptf) throw std::invalid_argument("balance: partition is not a PTF");
  unsigned d = 0;
  for (const auto& p : ptf->polys) d = std::max(d, p.degree());
  const double bound = balance_bound(f.k(), d, delta);
  std::vector<PolyGauss> out;
  for (const auto& p : ptf->polys) {
    const double var = p.variance();
    if (!(var > 0.0)) throw std::invalid_argument("balance: zero-variance polynomial");
    PolyGauss q = p.scaled(1.0 / std::sqrt(var));
    if (std::fabs(q.constant) > bound) q.constant = std::copysign(bound, q.constant);
    out.push_back(std::move(q));
  }
  return PartitionFn::ptf(std::move(out));
}

double sheppard_orthant(double rho) {
  if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("sheppard_orthant: |rho| > 1");
  return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
}

double bivariate_normal_cdf(double a, double b, double rho) {
  if (!(std::fabs(rho) < 1.0)) throw std::invalid_argument("bivariate_normal_cdf: |rho| must be < 1");
  const double s = std::sqrt(1.0 - rho * rho);
  // Pr[X <= a, Y <= b] = int_{-inf}^{a} phi(x) Phi((b - rho x) / s) dx.
  auto integrand = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * normal_cdf((b - rho * x) / s);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, -std::numeric_limits<double>::infinity(), a, 15, 1e-13, &err);
}

double halfspace_stability(double mu, double rho) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("halfspace_stability: mu must lie in [0,1]");
  if (mu == 0.0 || mu == 1.0) return 1.0;
  const double a = normal_quantile(mu);
  return 1.0 - 2.0 * mu + 2.0 * bivariate_normal_cdf(a, a, rho);
}

}  // namespace nstab
