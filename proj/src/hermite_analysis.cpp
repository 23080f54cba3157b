#include "nstab/hermite_analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nstab {

double HermiteExpansion::coefficient_mass() const {
  double s = 0.0;
  for (const auto& [idx, c] : coefficients)
    for (double v : c) s += v * v;
  return s;
}

double HermiteExpansion::explicit_tail() const {
  double s = 0.0;
  for (double v : tail_by_degree) s += v;
  return s;
}

std::vector<double> HermiteExpansion::coefficient(const HermiteIndex& s) const {
  auto it = coefficients.find(s);
  return it == coefficients.end() ? std::vector<double>(k, 0.0) : it->second;
}

std::vector<double> HermiteExpansion::evaluate(std::span<const double> x) const {
  if (x.size() != n) throw std::invalid_argument("HermiteExpansion::evaluate: dimension mismatch");
  std::vector<std::vector<double>> h(n, std::vector<double>(max_degree + 1));
  for (std::size_t i = 0; i < n; ++i) hermite_all(x[i], h[i]);
  std::vector<double> out(k, 0.0);
  for (const auto& [idx, c] : coefficients) {
    double basis = 1.0;
    for (std::size_t i = 0; i < n; ++i) basis *= h[i][idx.entries[i]];
    for (std::size_t j = 0; j < k; ++j) out[j] += c[j] * basis;
  }
  return out;
}

HermiteExpansion expand(const VectorFunction& f, unsigned max_degree, unsigned quad_order,
                        Exec exec) {
  const std::size_t n = f.n;
  const std::size_t k = f.k;
  if (k == 0) throw std::invalid_argument("expand: k must be >= 1");
  if (n == 0 || n > kMaxQuadratureDim)
    throw std::invalid_argument("expand: quadrature mode requires 1 <= n <= 3");
  const QuadratureRule rule = gauss_hermite_rule(quad_order);
  const TensorGrid grid = tensor_grid(rule, n);
  const std::size_t points = grid.size();
  const std::size_t q = quad_order;

  // Weighted function values, laid out as [output][grid point].
  std::vector<double> values(k * points);
  auto chunks = map_chunks<double>(points, exec, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> out(k);
    double mass = 0.0;
    for (std::size_t p = b; p < e; ++p) {
      f.eval(grid.point(p), out);
      for (std::size_t j = 0; j < k; ++j) {
        if (!std::isfinite(out[j])) return std::numeric_limits<double>::quiet_NaN();
        values[j * points + p] = grid.weights[p] * out[j];
        mass += grid.weights[p] * out[j] * out[j];
      }
    }
    return mass;
  });
  double quadrature_mass = 0.0;
  for (double m : chunks) {
    if (std::isnan(m)) throw std::domain_error("expand: non-finite function value");
    quadrature_mass += m;
  }

  // Separable transform: apply the node-to-degree matrix along each axis.
  std::vector<double> basis(q * q);  // basis[deg * q + node]
  {
    std::vector<double> h(q);
    for (std::size_t node = 0; node < q; ++node) {
      hermite_all(rule.nodes[node], h);
      for (std::size_t deg = 0; deg < q; ++deg) basis[deg * q + node] = h[deg];
    }
  }
  std::vector<double> scratch(points);
  std::size_t stride = 1;
  for (std::size_t axis = 0; axis < n; ++axis) {
    for (std::size_t j = 0; j < k; ++j) {
      double* data = values.data() + j * points;
      for (std::size_t base = 0; base < points; ++base) {
        if ((base / stride) % q != 0) continue;
        for (std::size_t deg = 0; deg < q; ++deg) {
          double s = 0.0;
          for (std::size_t node = 0; node < q; ++node)
            s += basis[deg * q + node] * data[base + node * stride];
          scratch[base + deg * stride] = s;
        }
      }
      std::copy(scratch.begin(), scratch.end(), data);
    }
    stride *= q;
  }

  HermiteExpansion e;
  e.n = n;
  e.k = k;
  e.max_degree = max_degree;
  e.quad_order = quad_order;
  e.quadrature_mass = quadrature_mass;
  e.tail_by_degree.assign(n * (q - 1) + 1, 0.0);
  std::vector<unsigned> digit(n, 0);
  for (std::size_t p = 0; p < points; ++p) {
    unsigned degree = 0;
    for (auto d : digit) degree += d;
    std::vector<double> c(k);
    double norm_sq = 0.0;
    bool keep = false;
    for (std::size_t j = 0; j < k; ++j) {
      c[j] = values[j * points + p];
      norm_sq += c[j] * c[j];
      if (std::fabs(c[j]) >= kCoefficientDropTol) keep = true;
    }
    if (degree > max_degree) {
      e.tail_by_degree[degree] += norm_sq;
    } else if (keep) {
      for (double& v : c)
        if (std::fabs(v) < kCoefficientDropTol) v = 0.0;
      e.coefficients.emplace(HermiteIndex{digit}, std::move(c));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (++digit[i] < q) break;
      digit[i] = 0;
    }
  }
  return e;
}

SpectralWeights spectral_weights(const HermiteExpansion& e, double total_mass) {
  SpectralWeights w;
  w.by_degree.assign(e.max_degree + 1, 0.0);
  for (const auto& [idx, c] : e.coefficients) {
    double s = 0.0;
    for (double v : c) s += v * v;
    w.by_degree[idx.degree()] += s;
  }
  const double captured = e.coefficient_mass();
  const double residual = total_mass - captured;
  if (residual < -1e-8)
    throw std::domain_error("spectral_weights: negative Parseval residual (quadrature failure)");
  w.tail = std::max(0.0, residual);
  w.explicit_tail = e.explicit_tail();
  w.tails_agree = std::fabs(w.tail - w.explicit_tail) <= 1e-6;
  return w;
}

SpectralWeights spectral_weights(const HermiteExpansion& e) {
  return spectral_weights(e, e.quadrature_mass);
}

HermiteExpansion apply_ou(const HermiteExpansion& e, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("apply_ou: t must be >= 0");
  HermiteExpansion out = e;
  for (std::size_t d = 0; d < out.tail_by_degree.size(); ++d)
    out.tail_by_degree[d] *= std::exp(-2.0 * t * static_cast<double>(d));
  out.quadrature_mass = out.explicit_tail();
  for (auto& [idx, c] : out.coefficients) {
    const double factor = std::exp(-t * idx.degree());
    for (double& v : c) v *= factor;
  }
  out.quadrature_mass += out.coefficient_mass();
  return out;
}

double coefficient_inner(const HermiteExpansion& a, const HermiteExpansion& b) {
  if (a.k != b.k || a.n != b.n) throw std::invalid_argument("coefficient_inner: shape mismatch");
  double s = 0.0;
  for (const auto& [idx, c] : a.coefficients) {
    auto it = b.coefficients.find(idx);
    if (it == b.coefficients.end()) continue;
    for (std::size_t j = 0; j < a.k; ++j) s += c[j] * it->second[j];
  }
  return s;
}

OuOperator::OuOperator(std::size_t n, unsigned quad_order)
    : grid_(tensor_grid(gauss_hermite_rule(quad_order), n)) {}

void OuOperator::apply(const VectorFunction& f, double t, std::span<const double> x,
                       std::span<double> out) const {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_pointwise: t must be >= 0");
  if (x.size() != grid_.dim || f.n != grid_.dim)
    throw std::invalid_argument("ou_pointwise: dimension mismatch");
  if (t == 0.0) {
    f.eval(x, out);
    return;
  }
  const double rho = std::exp(-t);
  const double mix = std::sqrt(-std::expm1(-2.0 * t));
  std::vector<double> point(grid_.dim);
  std::vector<double> value(f.k);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    auto z = grid_.point(p);
    for (std::size_t i = 0; i < grid_.dim; ++i) point[i] = rho * x[i] + mix * z[i];
    f.eval(point, value);
    for (std::size_t j = 0; j < f.k; ++j) {
      if (!std::isfinite(value[j])) throw std::domain_error("ou_pointwise: non-finite value");
      out[j] += grid_.weights[p] * value[j];
    }
  }
}

std::vector<double> ou_pointwise(const VectorFunction& f, double t, std::span<const double> x,
                                 unsigned quad_order) {
  OuOperator op(f.n, quad_order);
  std::vector<double> out(f.k);
  op.apply(f, t, x, out);
  return out;
}

double gradient_tail_bound(double grad_l1, unsigned d, double constant) {
  if (grad_l1 < 0.0) throw std::invalid_argument("gradient_tail_bound: grad_l1 must be >= 0");
  if (d == 0) throw std::invalid_argument("gradient_tail_bound: d must be >= 1");
  return constant * grad_l1 / std::sqrt(static_cast<double>(d));
}

ParsevalReport parseval_check(const HermiteExpansion& e, double tol) {
  ParsevalReport r;
  r.coefficient_mass = e.coefficient_mass();
  r.quadrature_mass = e.quadrature_mass;
  r.residual_tail = r.quadrature_mass - r.coefficient_mass;
  r.explicit_tail = e.explicit_tail();
  r.residual = std::fabs(r.residual_tail - r.explicit_tail);
  r.ok = r.residual <= tol;
  return r;
}

}  // namespace nstab
