#include "nstab/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>

namespace nstab {

void ThresholdVector::normalize() {
  if (z.empty()) return;
  const double last = z.back();
  for (double& v : z) v -= last;
}

unsigned round_label(std::span<const double> F, std::span<const double> z) {
  unsigned best = 0;
  double best_value = F[0] - z[0];
  for (std::size_t j = 1; j < F.size(); ++j) {
    const double v = F[j] - z[j];
    if (v > best_value) {
      best_value = v;
      best = static_cast<unsigned>(j);
    }
  }
  return best;
}

namespace {

void check_simplex(std::span<const double> F, double tol) {
  double s = 0.0;
  for (double v : F) {
    if (!(v >= -tol)) throw std::domain_error("threshold_round: value outside the simplex");
    s += v;
  }
  if (!(std::fabs(s - 1.0) <= tol)) throw std::domain_error("threshold_round: value outside the simplex");
}

}  // namespace

PartitionFn threshold_round(const VectorFunction& F, const ThresholdVector& z, double simplex_tol) {
  if (z.z.size() != F.k) throw std::invalid_argument("threshold_round: threshold length != k");
  for (double v : z.z)
    if (!std::isfinite(v)) throw std::invalid_argument("threshold_round: non-finite threshold");
  auto fn = [F, zz = z.z, simplex_tol](std::span<const double> x) {
    thread_local std::vector<double> value;
    value.resize(F.k);
    F.eval(x, value);
    check_simplex(value, simplex_tol);
    return round_label(value, zz);
  };
  return PartitionFn::callback(F.k, F.n, std::move(fn), "threshold-round");
}

PartitionFn argmax_round(const VectorFunction& F, const ThresholdVector& z, std::string name) {
  if (z.z.size() != F.k) throw std::invalid_argument("argmax_round: threshold length != k");
  auto fn = [F, zz = z.z](std::span<const double> x) {
    thread_local std::vector<double> value;
    value.resize(F.k);
    F.eval(x, value);
    return round_label(value, zz);
  };
  return PartitionFn::callback(F.k, F.n, std::move(fn), std::move(name));
}

namespace {

// Flattened expansion for fast repeated evaluation.
struct CompiledExpansion {
  std::size_t n = 0, k = 0;
  unsigned max_degree = 0;
  std::vector<std::uint32_t> index;  // n entries per term
  std::vector<double> coeff;         // k entries per term

  void eval(std::span<const double> x, std::span<double> out) const {
    thread_local std::vector<double> h;
    const std::size_t stride = max_degree + 1;
    h.resize(n * stride);
    for (std::size_t i = 0; i < n; ++i) hermite_all(x[i], std::span<double>(h.data() + i * stride, stride));
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t terms = coeff.size() / k;
    for (std::size_t t = 0; t < terms; ++t) {
      double basis = 1.0;
      for (std::size_t i = 0; i < n; ++i) basis *= h[i * stride + index[t * n + i]];
      for (std::size_t j = 0; j < k; ++j) out[j] += coeff[t * k + j] * basis;
    }
  }
};

}  // namespace

VectorFunction ou_spectral(const PartitionFn& f, double t, unsigned max_degree, unsigned quad_order,
                           Exec exec) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_spectral: t must be >= 0");
  const HermiteExpansion e = apply_ou(expand_partition(f, max_degree, quad_order, exec), t);
  auto c = std::make_shared<CompiledExpansion>();
  c->n = e.n;
  c->k = e.k;
  for (const auto& [idx, coeff] : e.coefficients) {
    for (auto v : idx.entries) {
      c->index.push_back(v);
      c->max_degree = std::max(c->max_degree, v);
    }
    c->coeff.insert(c->coeff.end(), coeff.begin(), coeff.end());
  }
  VectorFunction F;
  F.n = e.n;
  F.k = e.k;
  F.eval = [c](std::span<const double> x, std::span<double> out) { c->eval(x, out); };
  return F;
}

ThresholdSearch match_threshold_values(const std::vector<double>& values, std::size_t k,
                                       const std::vector<double>& target, double tol,
                                       unsigned max_iter) {
  if (target.size() != k) throw std::invalid_argument("find_matching_threshold: target length != k");
  if (!(tol > 0.0)) throw std::invalid_argument("find_matching_threshold: tol must be > 0");
  double total = 0.0;
  for (double t : target) {
    if (t < 0.0) throw std::invalid_argument("find_matching_threshold: negative target");
    total += t;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("find_matching_threshold: target must sum to 1");
  const std::size_t samples = values.size() / k;
  if (samples == 0) throw std::invalid_argument("find_matching_threshold: no samples");

  auto measure = [&](const std::vector<double>& z, std::vector<double>& m) {
    std::fill(m.begin(), m.end(), 0.0);
    for (std::size_t s = 0; s < samples; ++s)
      m[round_label(std::span<const double>(values.data() + s * k, k), z)] += 1.0;
    double err = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      m[j] /= static_cast<double>(samples);
      err += std::fabs(m[j] - target[j]);
    }
    return err;
  };

  ThresholdSearch best;
  best.z.z.assign(k, 0.0);
  best.measures.assign(k, 0.0);
  best.l1_error = measure(best.z.z, best.measures);
  best.converged = best.l1_error <= tol;
  if (best.converged) return best;

  // Gauss-Seidel sweeps: with the other thresholds fixed, label j wins exactly when
  // F_j - max_{i != j}(F_i - z_i) > z_j, so z_j is a quantile of that margin.
  std::vector<double> z = best.z.z, m(k), margin(samples), scratch(samples);
  for (unsigned it = 1; it <= max_iter; ++it) {
    const std::vector<double> previous = z;
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t s = 0; s < samples; ++s) {
        const double* F = values.data() + s * k;
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i)
          if (i != j) other = std::max(other, F[i] - z[i]);
        margin[s] = F[j] - other;
      }
      const auto wins = static_cast<std::size_t>(std::llround(target[j] * static_cast<double>(samples)));
      scratch = margin;
      if (wins == 0) {
        z[j] = *std::max_element(scratch.begin(), scratch.end()) + 1.0;
      } else if (wins >= samples) {
        z[j] = *std::min_element(scratch.begin(), scratch.end()) - 1.0;
      } else {
        // Descending order: the wins-th largest and the next one bracket the threshold.
        auto upper = scratch.begin() + static_cast<std::ptrdiff_t>(wins - 1);
        std::nth_element(scratch.begin(), upper, scratch.end(), std::greater<>());
        const double hi = *upper;
        const double lo = *std::max_element(upper + 1, scratch.end());
        z[j] = 0.5 * (hi + lo);
      }
    }
    ThresholdVector tv{z};
    tv.normalize();
    z = tv.z;
    const double err = measure(z, m);
    best.iterations = it;
    if (err < best.l1_error) {
      best.z.z = z;
      best.measures = m;
      best.l1_error = err;
    }
    if (err <= tol) {
      best.converged = true;
      break;
    }
    if (z == previous) break;  // fixed point that misses the target
  }
  return best;
}

ThresholdSearch find_matching_threshold(const VectorFunction& F, const std::vector<double>& target,
                                        double tol, unsigned max_iter, std::size_t samples,
                                        std::uint64_t seed, Exec exec) {
  if (samples == 0) throw std::invalid_argument("find_matching_threshold: samples must be >= 1");
  const std::size_t k = F.k;
  std::vector<double> values(samples * k);
  auto bad = map_chunks<int>(samples, exec, [&](std::size_t c, std::size_t b, std::size_t e) {
    CounterRng rng(seed, c);
    std::vector<double> x(F.n);
    for (std::size_t s = b; s < e; ++s) {
      draw_gaussian(rng, x);
      F.eval(x, std::span<double>(values.data() + s * k, k));
      for (std::size_t j = 0; j < k; ++j)
        if (!std::isfinite(values[s * k + j])) return 1;
    }
    return 0;
  });
  for (int b : bad)
    if (b) throw std::domain_error("find_matching_threshold: non-finite function value");
  return match_threshold_values(values, k, target, tol, max_iter);
}

RoundingReport stability_of_rounding(const PartitionFn& f, double t, double tol,
                                     std::size_t samples, std::uint64_t seed, unsigned quad_order,
                                     Exec exec) {
  if (!(t > 0.0)) throw std::invalid_argument("stability_of_rounding: t must be > 0");
  const VectorFunction F = ou_partition(f, t, quad_order);
  const MeasureVector target = estimate_measures(f, samples, seed ^ 0x7a11ULL, exec);
  const std::size_t search_samples = std::min<std::size_t>(samples, 200000);
  ThresholdSearch search =
      find_matching_threshold(F, target.mu, tol, 2000, search_samples, seed ^ 0x5eedULL, exec);
  PartitionFn g = threshold_round(F, search.z);

  RoundingReport r{.stab_f = estimate_stability(f, t, samples, seed, exec),
                   .stab_g = estimate_stability(g, t, samples, seed, exec),
                   .cross = estimate_cross_stability(g, f, t, samples, seed, exec),
                   .search = std::move(search),
                   .measures_f = target,
                   .measures_g = estimate_measures(g, samples, seed ^ 0x7a11ULL, exec),
                   .slack = 0.0,
                   .rounded = std::move(g)};
  for (std::size_t j = 0; j < f.k(); ++j)
    r.slack += std::fabs(r.measures_g.mu[j] - r.measures_f.mu[j]);
  return r;
}

TruncationReport ptf_from_truncation(const PartitionFn& h, unsigned d, unsigned quad_order,
                                     std::size_t samples, std::uint64_t seed, Exec exec) {
  if (h.n() > kMaxQuadratureDim)
    throw std::invalid_argument("ptf_from_truncation: quadrature mode limited to n <= 3");
  const std::size_t k = h.k();
  const double centre = 1.0 / static_cast<double>(k);
  // The centred embedding differs from the one-hot one only in the constant term.
  HermiteExpansion e = expand_partition(h, d, quad_order, exec);
  auto& constant = e.coefficients[HermiteIndex{std::vector<unsigned>(h.n(), 0)}];
  constant.resize(k, 0.0);
  for (double& c : constant) c -= centre;
  std::vector<PolyGauss> polys;
  for (std::size_t j = 0; j < k; ++j) {
    PolyGauss p = poly_from_hermite(e, j);
    p.prune(0.0);
    polys.push_back(std::move(p));
  }
  // Every point of the centred embedding has squared norm (k - 1)/k.
  const double total = (static_cast<double>(k) - 1.0) / static_cast<double>(k);
  TruncationReport r{.ptf = PartitionFn::ptf(polys), .polys = polys, .disagreement = {}, .collision = {}};
  r.tail = std::max(0.0, total - e.coefficient_mass());
  r.bound = static_cast<double>(k * k) * r.tail;
  r.disagreement = estimate_disagreement(r.ptf, h, samples, seed, exec);
  r.collision = collision_probability(r.ptf, samples, seed, exec);
  return r;
}

}  // namespace nstab
