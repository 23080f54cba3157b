#include "nstab/gauss_core.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/erf.hpp>

#include <array>
#include <cmath>
#include <numeric>

namespace nstab {

double hermite_eval(unsigned q, double x) {
  if (q == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (unsigned j = 1; j < q; ++j) {
    const double next = (x * cur - std::sqrt(static_cast<double>(j)) * prev) /
                        std::sqrt(static_cast<double>(j + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

void hermite_all(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  static const auto roots = [] {
    std::array<double, 64> r{};
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = std::sqrt(static_cast<double>(j));
    return r;
  }();
  for (std::size_t j = 1; j + 1 < out.size(); ++j) {
    const double a = j < roots.size() ? roots[j] : std::sqrt(static_cast<double>(j));
    const double b = j + 1 < roots.size() ? roots[j + 1] : std::sqrt(static_cast<double>(j + 1));
    out[j + 1] = (x * out[j] - a * out[j - 1]) / b;
  }
}

unsigned HermiteIndex::degree() const {
  return std::accumulate(entries.begin(), entries.end(), 0u);
}

double hermite_multi_eval(const HermiteIndex& index, std::span<const double> x) {
  if (index.entries.size() != x.size())
    throw std::invalid_argument("hermite_multi_eval: index/point dimension mismatch");
  double value = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) value *= hermite_eval(index.entries[i], x[i]);
  return value;
}

QuadratureRule gauss_hermite_rule(unsigned order) {
  if (order == 0) throw std::invalid_argument("gauss_hermite_rule: order must be >= 1");
  QuadratureRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (unsigned i = 0; i + 1 < order; ++i) sub[i] = std::sqrt(static_cast<double>(i + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_rule: eigen solver failed");

  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (unsigned i = 0; i < order; ++i) rule.nodes[i] = solver.eigenvalues()[i];
  // Symmetrize about zero; the exact rule is symmetric.
  for (unsigned i = 0; i < order / 2; ++i) {
    const unsigned j = order - 1 - i;
    const double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -node;
    rule.nodes[j] = node;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  // Christoffel weights 1 / sum_j H_j(x)^2 keep relative accuracy at the outer
  // nodes, where squared eigenvector entries underflow to noise.
  // The recurrence is rescaled on the fly so far nodes underflow to zero weight.
  for (unsigned i = 0; i < order; ++i) {
    const double x = rule.nodes[i];
    double prev = 0.0, cur = 1.0, sum = 1.0, log_scale = 0.0;
    for (unsigned j = 0; j + 1 < order; ++j) {
      const double next = (x * cur - std::sqrt(static_cast<double>(j)) * prev) / std::sqrt(j + 1.0);
      prev = cur;
      cur = next;
      sum += cur * cur;
      if (sum > 1e200) {
        prev *= 1e-100;
        cur *= 1e-100;
        sum *= 1e-200;
        log_scale += 200.0 * std::log(10.0);
      }
    }
    rule.weights[i] = std::exp(-std::log(sum) - log_scale);
  }
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

TensorGrid tensor_grid(const QuadratureRule& rule, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("tensor_grid: dimension must be >= 1");
  if (dim > kMaxQuadratureDim)
    throw std::invalid_argument("tensor_grid: tensor-product quadrature limited to n <= 3");
  const std::size_t q = rule.order;
  std::size_t count = 1;
  for (std::size_t i = 0; i < dim; ++i) count *= q;

  TensorGrid grid;
  grid.dim = dim;
  grid.points.resize(count * dim);
  grid.weights.resize(count);
  std::vector<std::size_t> digit(dim, 0);
  for (std::size_t p = 0; p < count; ++p) {
    double w = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      grid.points[p * dim + i] = rule.nodes[digit[i]];
      w *= rule.weights[digit[i]];
    }
    grid.weights[p] = w;
    for (std::size_t i = 0; i < dim; ++i) {
      if (++digit[i] < q) break;
      digit[i] = 0;
    }
  }
  return grid;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

CorrelatedSampler::CorrelatedSampler(std::size_t dimension, double rho, std::uint64_t seed)
    : dimension_(dimension), rho_(rho), mix_(0.0), seed_(seed) {
  if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("CorrelatedSampler: |rho| > 1");
  mix_ = std::sqrt(std::max(0.0, 1.0 - rho * rho));
}

std::vector<SamplePair> sample_pairs(const CorrelatedSampler& sampler, std::size_t count) {
  if (count == 0) throw std::invalid_argument("sample_pairs: count must be >= 1");
  const std::size_t n = sampler.dimension();
  std::vector<SamplePair> out(count, SamplePair(std::vector<double>(n), std::vector<double>(n)));
  for (std::size_t c = 0; c < chunk_count(count); ++c) {
    CounterRng rng = sampler.stream(c);
    const std::size_t end = std::min(count, (c + 1) * kChunkSize);
    for (std::size_t s = c * kChunkSize; s < end; ++s)
      sampler.draw(rng, out[s].first, out[s].second);
  }
  return out;
}

}  // namespace nstab
