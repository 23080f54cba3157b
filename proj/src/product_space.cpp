#include "nstab/product_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace nstab {

JointDist::JointDist(Eigen::MatrixXd p) : P(std::move(p)) {
  if (P.rows() == 0 || P.cols() == 0) throw std::invalid_argument("JointDist: empty alphabet");
  if ((P.array() < 0.0).any()) throw std::invalid_argument("JointDist: negative probability");
  if (!P.allFinite()) throw std::invalid_argument("JointDist: non-finite probability");
  if (std::fabs(P.sum() - 1.0) > 1e-12) throw std::invalid_argument("JointDist: total mass != 1");
  if ((marginal_a().array() <= 0.0).any() || (marginal_b().array() <= 0.0).any())
    throw std::invalid_argument("JointDist: zero-probability symbol");
}

JointDist binary_symmetric(double rho) {
  if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("binary_symmetric: |rho| > 1");
  Eigen::MatrixXd p(2, 2);
  p << (1 + rho) / 4, (1 - rho) / 4, (1 - rho) / 4, (1 + rho) / 4;
  return JointDist(p);
}

JointDist product_dist(const Eigen::VectorXd& pa, const Eigen::VectorXd& pb) {
  return JointDist(pa * pb.transpose());
}

namespace {

// Orthonormal basis of the complement of unit vector u.
Eigen::MatrixXd complement_basis(const Eigen::VectorXd& u) {
  const Eigen::Index m = u.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  return q.rightCols(m - 1);
}

}  // namespace

CorrelationBasis correlation_basis(const JointDist& joint) {
  const Eigen::VectorXd pa = joint.marginal_a();
  const Eigen::VectorXd pb = joint.marginal_b();
  const Eigen::Index ma = pa.size(), mb = pb.size();
  const Eigen::VectorXd sa = pa.cwiseSqrt();
  const Eigen::VectorXd sb = pb.cwiseSqrt();
  const Eigen::MatrixXd M = sa.cwiseInverse().asDiagonal() * joint.P * sb.cwiseInverse().asDiagonal();

  // The trivial pair (sqrt P_A, sqrt P_B) has singular value 1; it is split off
  // explicitly so that ties with other unit singular values cannot mix it in.
  Eigen::MatrixXd U(ma, ma), V(mb, mb);
  U.col(0) = sa;
  V.col(0) = sb;
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(std::max(ma, mb));
  sigma[0] = 1.0;
  if (ma > 1 && mb > 1) {
    const Eigen::MatrixXd qa = complement_basis(sa);
    const Eigen::MatrixXd qb = complement_basis(sb);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * M * qb,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    U.rightCols(ma - 1) = qa * svd.matrixU();
    V.rightCols(mb - 1) = qb * svd.matrixV();
    for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j)
      sigma[j + 1] = svd.singularValues()[j];
  } else {
    if (ma > 1) U.rightCols(ma - 1) = complement_basis(sa);
    if (mb > 1) V.rightCols(mb - 1) = complement_basis(sb);
  }
  // Sign convention: the first non-negligible entry of each U column is positive.
  for (Eigen::Index j = 1; j < ma; ++j) {
    for (Eigen::Index a = 0; a < ma; ++a) {
      if (std::fabs(U(a, j)) > 1e-12) {
        if (U(a, j) < 0.0) {
          U.col(j) *= -1.0;
          if (j < mb) V.col(j) *= -1.0;
        }
        break;
      }
    }
  }
  CorrelationBasis basis;
  basis.X = sa.cwiseInverse().asDiagonal() * U;
  basis.Y = sb.cwiseInverse().asDiagonal() * V;
  basis.rho = sigma;
  return basis;
}

std::vector<std::size_t> ProductFourier::digits(std::size_t index) const {
  std::vector<std::size_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = index % m;
    index /= m;
  }
  return d;
}

std::size_t ProductFourier::degree(std::size_t index) const {
  std::size_t deg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (index % m != 0) ++deg;
    index /= m;
  }
  return deg;
}

double ProductFourier::norm_sq(std::size_t index) const {
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += coeffs[index * k + j] * coeffs[index * k + j];
  return s;
}

namespace {

std::size_t checked_points(std::size_t n, std::size_t m) {
  std::size_t p = 1;
  for (std::size_t i = 0; i < n; ++i) {
    p *= m;
    if (p > kMaxProductPoints) throw std::invalid_argument("product space: enumeration budget exceeded");
  }
  return p;
}

// Applies out[.., s, ..] = sum_a T(s, a) in[.., a, ..] along every axis.
void transform_axes(std::vector<double>& values, std::size_t n, std::size_t m, std::size_t k,
                    const Eigen::MatrixXd& T) {
  const std::size_t points = values.size() / k;
  std::vector<double> scratch(values.size());
  std::size_t stride = 1;
  for (std::size_t axis = 0; axis < n; ++axis) {
    for (std::size_t base = 0; base < points; ++base) {
      if ((base / stride) % m != 0) continue;
      for (std::size_t s = 0; s < m; ++s) {
        for (std::size_t j = 0; j < k; ++j) {
          double acc = 0.0;
          for (std::size_t a = 0; a < m; ++a)
            acc += T(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) *
                   values[(base + a * stride) * k + j];
          scratch[(base + s * stride) * k + j] = acc;
        }
      }
    }
    values.swap(scratch);
    stride *= m;
  }
}

}  // namespace

ProductFourier tensor_fourier(const ProductTable& f, const Eigen::MatrixXd& basis,
                              const Eigen::VectorXd& marginal) {
  const std::size_t m = f.m;
  if (static_cast<std::size_t>(basis.rows()) != m || static_cast<std::size_t>(basis.cols()) != m ||
      static_cast<std::size_t>(marginal.size()) != m)
    throw std::invalid_argument("tensor_fourier: basis/alphabet mismatch");
  if (f.values.size() != checked_points(f.n, m) * f.k)
    throw std::invalid_argument("tensor_fourier: table size mismatch");
  // T(sigma, a) = P_A(a) X_sigma(a).
  const Eigen::MatrixXd T = (marginal.asDiagonal() * basis).transpose();
  ProductFourier out;
  out.n = f.n;
  out.k = f.k;
  out.m = m;
  out.coeffs = f.values;
  transform_axes(out.coeffs, f.n, m, f.k, T);
  return out;
}

double influence(const ProductFourier& f, std::size_t i) {
  if (i >= f.n) throw std::out_of_range("influence: coordinate out of range");
  double s = 0.0;
  std::size_t stride = 1;
  for (std::size_t a = 0; a < i; ++a) stride *= f.m;
  for (std::size_t idx = 0; idx < f.size(); ++idx)
    if ((idx / stride) % f.m != 0) s += f.norm_sq(idx);
  return s;
}

ProductFourier smooth(const ProductFourier& f, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("smooth: delta must lie in [0,1]");
  ProductFourier out = f;
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const double factor = std::pow(1.0 - delta, static_cast<double>(f.degree(idx)));
    for (std::size_t j = 0; j < f.k; ++j) out.coeffs[idx * f.k + j] *= factor;
  }
  return out;
}

double correlation(const ProductFourier& f, const ProductFourier& g, const Eigen::VectorXd& rho) {
  if (f.n != g.n || f.k != g.k) throw std::invalid_argument("correlation: shape mismatch");
  // Only sigma with every digit below min(|A|, |B|) can carry a nonzero rho weight.
  const std::size_t m = std::min(f.m, g.m);
  if (static_cast<std::size_t>(rho.size()) < m) throw std::invalid_argument("correlation: rho too short");
  std::size_t count = 1;
  for (std::size_t i = 0; i < f.n; ++i) count *= m;
  double s = 0.0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t fi = 0, gi = 0, fs = 1, gs = 1, rest = idx;
    double weight = 1.0;
    for (std::size_t i = 0; i < f.n; ++i) {
      const std::size_t d = rest % m;
      rest /= m;
      weight *= rho[static_cast<Eigen::Index>(d)];
      fi += d * fs;
      gi += d * gs;
      fs *= f.m;
      gs *= g.m;
    }
    if (weight == 0.0) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < f.k; ++j) dot += f.coeffs[fi * f.k + j] * g.coeffs[gi * g.k + j];
    s += dot * weight;
  }
  return s;
}

double correlation_enumerate(const ProductTable& f, const ProductTable& g, const JointDist& P) {
  if (f.n != g.n || f.k != g.k) throw std::invalid_argument("correlation_enumerate: shape mismatch");
  if (f.m != P.size_a() || g.m != P.size_b())
    throw std::invalid_argument("correlation_enumerate: alphabet mismatch");
  const std::size_t pf = checked_points(f.n, f.m), pg = checked_points(g.n, g.m);
  double s = 0.0;
  for (std::size_t x = 0; x < pf; ++x) {
    for (std::size_t y = 0; y < pg; ++y) {
      double w = 1.0;
      std::size_t rx = x, ry = y;
      for (std::size_t i = 0; i < f.n; ++i) {
        w *= P.P(static_cast<Eigen::Index>(rx % f.m), static_cast<Eigen::Index>(ry % g.m));
        rx /= f.m;
        ry /= g.m;
      }
      if (w == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < f.k; ++j) dot += f.values[x * f.k + j] * g.values[y * f.k + j];
      s += w * dot;
    }
  }
  return s;
}

ProductTable noise_convolve(const ProductTable& f, const Eigen::VectorXd& marginal, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("noise_convolve: delta in [0,1]");
  const std::size_t m = f.m;
  if (static_cast<std::size_t>(marginal.size()) != m) throw std::invalid_argument("noise_convolve: marginal size");
  checked_points(f.n, m);
  // K(a, a') = (1 - delta) [a = a'] + delta P_A(a').
  Eigen::MatrixXd K = (1.0 - delta) * Eigen::MatrixXd::Identity(m, m);
  K.rowwise() += delta * marginal.transpose();
  ProductTable out = f;
  transform_axes(out.values, f.n, m, f.k, K);
  return out;
}

DiscreteStrategy block_strategy(const PartitionFn& g, const std::vector<double>& basis_values,
                                std::size_t ell) {
  if (ell == 0) throw std::invalid_argument("block_strategy: ell must be >= 1");
  if (basis_values.empty()) throw std::invalid_argument("block_strategy: empty basis function");
  DiscreteStrategy s;
  s.k = g.k();
  s.n_coords = g.n() * ell;
  s.alphabet = basis_values.size();
  s.description = "block(" + g.kind() + ", ell=" + std::to_string(ell) + ", H=empty)";
  const double scale = 1.0 / std::sqrt(static_cast<double>(ell));
  // Sums are formed from symbol counts in alphabet order, so every word with the
  // same composition lands on the same lattice point; sums within rounding of
  // zero are snapped to zero so exact ties do not depend on the basis rounding.
  const double snap = 1e-9 * static_cast<double>(ell);
  s.eval = [g, basis_values, ell, scale, snap](std::span<const std::uint32_t> symbols) {
    thread_local std::vector<double> z;
    thread_local std::vector<std::size_t> counts;
    z.assign(g.n(), 0.0);
    for (std::size_t i = 0; i < g.n(); ++i) {
      counts.assign(basis_values.size(), 0);
      for (std::size_t b = 0; b < ell; ++b) ++counts[symbols[i * ell + b]];
      double acc = 0.0;
      for (std::size_t a = 0; a < counts.size(); ++a) acc += static_cast<double>(counts[a]) * basis_values[a];
      z[i] = std::fabs(acc) <= snap ? 0.0 : acc * scale;
    }
    return g.label_unchecked(z);
  };
  return s;
}

DiscreteStrategy table_strategy(std::vector<unsigned> table, std::size_t k, std::size_t alphabet,
                                std::size_t n_coords) {
  std::size_t points = 1;
  for (std::size_t i = 0; i < n_coords; ++i) points *= alphabet;
  if (table.size() != points) throw std::invalid_argument("table_strategy: table size mismatch");
  for (auto l : table)
    if (l >= k) throw std::invalid_argument("table_strategy: label out of range");
  DiscreteStrategy s;
  s.k = k;
  s.n_coords = n_coords;
  s.alphabet = alphabet;
  s.description = "table";
  s.eval = [table = std::move(table), alphabet](std::span<const std::uint32_t> symbols) {
    std::size_t idx = 0, stride = 1;
    for (auto v : symbols) {
      idx += v * stride;
      stride *= alphabet;
    }
    return table[idx];
  };
  return s;
}

namespace {

struct CorrCounts {
  std::vector<std::uint64_t> f, g, diag;
};

void check_pair(const DiscreteStrategy& f, const DiscreteStrategy& g, const JointDist& P) {
  if (f.k != g.k) throw std::invalid_argument("discrete_corr: label count mismatch");
  if (f.n_coords != g.n_coords) throw std::invalid_argument("discrete_corr: coordinate count mismatch");
  if (f.alphabet != P.size_a() || g.alphabet != P.size_b())
    throw std::invalid_argument("discrete_corr: alphabet mismatch");
}

double binomial_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

}  // namespace

DiscreteCorr estimate_discrete_corr(const DiscreteStrategy& f, const DiscreteStrategy& g,
                                    const JointDist& P, std::size_t samples, std::uint64_t seed,
                                    Exec exec) {
  check_pair(f, g, P);
  if (samples == 0) throw std::invalid_argument("estimate_discrete_corr: samples must be >= 1");
  const std::size_t ma = P.size_a(), mb = P.size_b(), k = f.k, N = f.n_coords;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (std::size_t a = 0; a < ma; ++a)
    for (std::size_t b = 0; b < mb; ++b) {
      acc += P.P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      cumulative.push_back(acc);
    }
  cumulative.back() = 1.0;

  auto parts = map_chunks<CorrCounts>(samples, exec, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    CounterRng rng(seed, c);
    std::vector<std::uint32_t> xs(N), ys(N);
    CorrCounts out{std::vector<std::uint64_t>(k), std::vector<std::uint64_t>(k), std::vector<std::uint64_t>(k)};
    for (std::size_t s = lo; s < hi; ++s) {
      for (std::size_t i = 0; i < N; ++i) {
        const double u = rng.uniform();
        const std::size_t cell = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const std::size_t cl = std::min(cell, cumulative.size() - 1);
        xs[i] = static_cast<std::uint32_t>(cl / mb);
        ys[i] = static_cast<std::uint32_t>(cl % mb);
      }
      const unsigned lf = f.eval(xs), lg = g.eval(ys);
      ++out.f[lf];
      ++out.g[lg];
      if (lf == lg) ++out.diag[lf];
    }
    return out;
  });
  DiscreteCorr r;
  r.marginals_f.mu.assign(k, 0.0);
  r.marginals_g.mu.assign(k, 0.0);
  r.agreement.per_label.assign(k, 0.0);
  std::vector<std::uint64_t> tf(k), tg(k), td(k);
  for (const auto& p : parts)
    for (std::size_t j = 0; j < k; ++j) {
      tf[j] += p.f[j];
      tg[j] += p.g[j];
      td[j] += p.diag[j];
    }
  const double n = static_cast<double>(samples);
  std::uint64_t agree = 0;
  for (std::size_t j = 0; j < k; ++j) {
    r.marginals_f.mu[j] = tf[j] / n;
    r.marginals_g.mu[j] = tg[j] / n;
    r.agreement.per_label[j] = td[j] / n;
    r.marginals_f.std_error.push_back(binomial_se(r.marginals_f.mu[j], samples));
    r.marginals_g.std_error.push_back(binomial_se(r.marginals_g.mu[j], samples));
    r.agreement.per_label_std_error.push_back(binomial_se(r.agreement.per_label[j], samples));
    agree += td[j];
  }
  r.marginals_f.samples = r.marginals_g.samples = samples;
  r.agreement.samples = samples;
  r.agreement.seed = seed;
  r.agreement.value = agree / n;
  r.agreement.std_error = binomial_se(r.agreement.value, samples);
  return r;
}

DiscreteCorr exact_discrete_corr(const DiscreteStrategy& f, const DiscreteStrategy& g,
                                 const JointDist& P) {
  check_pair(f, g, P);
  const std::size_t ma = P.size_a(), mb = P.size_b(), k = f.k, N = f.n_coords;
  double pairs = std::pow(static_cast<double>(ma * mb), static_cast<double>(N));
  if (pairs > static_cast<double>(1u << 24)) throw std::invalid_argument("exact_discrete_corr: enumeration guard");
  std::size_t pa = 1, pb = 1;
  for (std::size_t i = 0; i < N; ++i) {
    pa *= ma;
    pb *= mb;
  }
  auto decode = [N](std::size_t idx, std::size_t m, std::vector<std::uint32_t>& out) {
    for (std::size_t i = 0; i < N; ++i) {
      out[i] = static_cast<std::uint32_t>(idx % m);
      idx /= m;
    }
  };
  std::vector<std::uint32_t> sym(N);
  std::vector<unsigned> lf(pa), lg(pb);
  for (std::size_t x = 0; x < pa; ++x) {
    decode(x, ma, sym);
    lf[x] = f.eval(sym);
  }
  for (std::size_t y = 0; y < pb; ++y) {
    decode(y, mb, sym);
    lg[y] = g.eval(sym);
  }
  DiscreteCorr r;
  r.exact = true;
  r.marginals_f.mu.assign(k, 0.0);
  r.marginals_g.mu.assign(k, 0.0);
  r.marginals_f.std_error.assign(k, 0.0);
  r.marginals_g.std_error.assign(k, 0.0);
  r.agreement.per_label.assign(k, 0.0);
  r.agreement.per_label_std_error.assign(k, 0.0);
  for (std::size_t x = 0; x < pa; ++x) {
    for (std::size_t y = 0; y < pb; ++y) {
      double w = 1.0;
      std::size_t rx = x, ry = y;
      for (std::size_t i = 0; i < N; ++i) {
        w *= P.P(static_cast<Eigen::Index>(rx % ma), static_cast<Eigen::Index>(ry % mb));
        rx /= ma;
        ry /= mb;
      }
      r.marginals_f.mu[lf[x]] += w;
      r.marginals_g.mu[lg[y]] += w;
      if (lf[x] == lg[y]) r.agreement.per_label[lf[x]] += w;
    }
  }
  for (double v : r.agreement.per_label) r.agreement.value += v;
  return r;
}

}  // namespace nstab
