#include "nstab/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "nstab/rng.hpp"

namespace nstab {

std::vector<Bipartition> bipartitions(unsigned q) {
  std::vector<Bipartition> out;
  if (q < 2) return out;
  // Slot 0 always sits on the row side, which picks one of each complementary pair.
  const unsigned full = (1u << q) - 1u;
  for (unsigned mask = 1; mask < full; mask += 2) {
    Bipartition b;
    b.order = q;
    for (unsigned s = 0; s < q; ++s)
      if (mask & (1u << s)) b.row_slots.push_back(s);
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

struct SparseFlattening {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> row;
  std::vector<std::uint32_t> col;
  std::vector<double> value;
};

SparseFlattening flatten_sparse(const SymmetricTensor& t, const Bipartition& part) {
  if (part.order != t.order()) throw std::invalid_argument("flatten: order mismatch");
  std::vector<bool> is_row(t.order(), false);
  for (auto s : part.row_slots) is_row.at(s) = true;

  std::map<OrderedIndex, std::uint32_t> row_id;
  std::map<OrderedIndex, std::uint32_t> col_id;
  SparseFlattening m;
  const Tensor ordered = to_ordered(t);
  for (const auto& [idx, v] : ordered.entries) {
    OrderedIndex r, c;
    for (unsigned s = 0; s < t.order(); ++s) (is_row[s] ? r : c).push_back(idx[s]);
    auto ri = row_id.try_emplace(std::move(r), static_cast<std::uint32_t>(row_id.size())).first;
    auto ci = col_id.try_emplace(std::move(c), static_cast<std::uint32_t>(col_id.size())).first;
    m.row.push_back(ri->second);
    m.col.push_back(ci->second);
    m.value.push_back(v);
  }
  m.rows = row_id.size();
  m.cols = col_id.size();
  return m;
}

std::size_t int_pow(std::size_t base, unsigned e) {
  std::size_t r = 1;
  for (unsigned i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

Eigen::MatrixXd flatten_dense(const SymmetricTensor& t, const Bipartition& part) {
  const std::size_t n = t.dim();
  const unsigned rs = static_cast<unsigned>(part.row_slots.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(int_pow(n, rs), int_pow(n, t.order() - rs));
  std::vector<bool> is_row(t.order(), false);
  for (auto s : part.row_slots) is_row.at(s) = true;
  for (const auto& [idx, v] : to_ordered(t).entries) {
    std::size_t r = 0, c = 0;
    for (unsigned s = 0; s < t.order(); ++s) {
      if (is_row[s])
        r = r * n + idx[s];
      else
        c = c * n + idx[s];
    }
    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
  }
  return m;
}

SingularValue flattening_top_singular(const SymmetricTensor& t, const Bipartition& part,
                                      double tol, unsigned max_iter) {
  const SparseFlattening m = flatten_sparse(t, part);
  SingularValue out;
  if (m.value.empty()) return out;

  std::vector<double> v(m.cols), u(m.rows), w(m.cols);
  CounterRng rng(0x51a9e1ULL, m.cols);
  for (double& x : v) x = 0.5 + rng.uniform();
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& e : x) e /= s;
    return s;
  };
  normalize(v);

  double sigma = 0.0;
  out.converged = false;
  for (unsigned it = 1; it <= max_iter; ++it) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t e = 0; e < m.value.size(); ++e) u[m.row[e]] += m.value[e] * v[m.col[e]];
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t e = 0; e < m.value.size(); ++e) w[m.col[e]] += m.value[e] * u[m.row[e]];
    // ||M^T M v|| with unit v converges to sigma^2.
    const double lambda = normalize(w);
    const double next = std::sqrt(lambda);
    v.swap(w);
    out.iterations = it;
    if (std::fabs(next - sigma) <= tol * std::max(1.0, next)) {
      sigma = next;
      out.converged = true;
      break;
    }
    sigma = next;
    if (lambda == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.value = sigma;
  return out;
}

EigenReport eigenregularity(const PolyGauss& p, double tol, unsigned max_iter) {
  EigenReport report;
  bool any = false;
  for (const auto& [q, t] : p.chaos) {
    if (q < 2) continue;
    any = true;
    for (const auto& part : bipartitions(q)) {
      const SingularValue sv = flattening_top_singular(t, part, tol, max_iter);
      report.per_partition[{q, part}] = sv.value;
      report.lambda_max = std::max(report.lambda_max, sv.value);
      report.converged = report.converged && sv.converged;
    }
  }
  if (!any) throw std::invalid_argument("eigenregularity: no component of order >= 2");
  report.variance = p.variance();
  report.ratio = report.variance > 0.0 ? report.lambda_max / std::sqrt(report.variance) : 0.0;
  return report;
}

double schedule_lower_bound(unsigned d, double second_moment_max) {
  const double L = 4.0 * second_moment_max * std::pow(9.0, d + 1.0) * (d + 1.0) * (d + 1.0);
  // Gamma(2d) = L^{1 - 2^{2d}}; bound = (Gamma(2d) / 2)^2.
  const double log_gamma = (1.0 - std::ldexp(1.0, static_cast<int>(2 * d))) * std::log(L);
  return std::exp(2.0 * (log_gamma - std::log(2.0)));
}

VarianceBounds variance_bounds(const PolyGauss& p, const PolyGauss& q) {
  if (p.dim != q.dim) throw std::invalid_argument("variance_bounds: dimension mismatch");
  const unsigned dp = p.degree();
  const unsigned dq = q.degree();
  if (dp == 0 || dq == 0) throw std::invalid_argument("variance_bounds: constant polynomial");
  VarianceBounds b;
  b.d = std::max(dp, dq);
  b.product_variance = multiply(p, q).variance();
  b.lower_top = p.chaos.at(dp).frobenius_sq() * q.chaos.at(dq).frobenius_sq();
  // E[q] = 0 is the textbook precondition; hypercontractivity gives the same bound
  // without it, so it is reported for every pair.
  b.upper = std::pow(9.0, b.d) * p.second_moment() * q.second_moment();
  if (std::fabs(p.variance() - 1.0) <= 1e-9 && std::fabs(q.variance() - 1.0) <= 1e-9)
    b.lower_schedule = schedule_lower_bound(b.d, std::max(p.second_moment(), q.second_moment()));
  return b;
}

namespace {

// All multisets of size m over {base, ..., base + T - 1}, sorted.
void lifted_multisets(std::uint32_t base, std::size_t T, unsigned m, Multiset& cur,
                      std::uint32_t start, std::vector<Multiset>& out) {
  if (cur.size() == m) {
    out.push_back(cur);
    return;
  }
  for (std::uint32_t s = start; s < T; ++s) {
    cur.push_back(base + s);
    lifted_multisets(base, T, m, cur, s, out);
    cur.pop_back();
  }
}

bool has_repeat(const Multiset& s) {
  return std::adjacent_find(s.begin(), s.end()) != s.end();
}

}  // namespace

MultilinearLift multilinear_lift(const PolyGauss& p, std::size_t T) {
  if (T == 0) throw std::invalid_argument("multilinear_lift: T must be >= 1");
  MultilinearLift lift;
  lift.block = T;
  const std::size_t big = p.dim * T;
  lift.r = PolyGauss(big, p.constant);
  lift.w = PolyGauss(big, p.constant);
  for (const auto& [q, f] : p.chaos) {
    SymmetricTensor rt(q, big), wt(q, big);
    const double scale = std::pow(static_cast<double>(T), -0.5 * q);
    for (const auto& [key, v] : f.entries()) {
      // Cartesian product over distinct source coordinates of lifted multisets.
      std::vector<Multiset> partial{Multiset{}};
      for (const auto& [elem, count] : multiplicities(key)) {
        std::vector<Multiset> choices;
        Multiset cur;
        lifted_multisets(static_cast<std::uint32_t>(elem * T), T, count, cur, 0, choices);
        std::vector<Multiset> next;
        next.reserve(partial.size() * choices.size());
        for (const auto& a : partial)
          for (const auto& c : choices) {
            Multiset m = a;
            m.insert(m.end(), c.begin(), c.end());
            next.push_back(std::move(m));
          }
        partial = std::move(next);
      }
      for (auto& m : partial) {
        rt.add(m, v * scale);
        if (!has_repeat(m)) wt.add(m, v * scale);
      }
    }
    if (!rt.entries().empty()) lift.r.chaos.emplace(q, std::move(rt));
    if (!wt.entries().empty()) lift.w.chaos.emplace(q, std::move(wt));
  }
  lift.var_gap = (lift.r - lift.w).variance();
  const double d = p.degree();
  lift.gap_bound = lift.r.variance() * d * d / static_cast<double>(T);
  return lift;
}

Eigen::MatrixXd gram_factor(const Eigen::MatrixXd& g) {
  if (g.rows() != g.cols()) throw std::invalid_argument("gram_factor: matrix not square");
  if (!g.isApprox(g.transpose(), 1e-12) && (g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("gram_factor: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
  if (solver.info() != Eigen::Success) throw std::runtime_error("gram_factor: eigen solver failed");
  Eigen::VectorXd lambda = solver.eigenvalues();
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-10)
    throw std::invalid_argument("gram_factor: matrix is not positive semidefinite");
  lambda = lambda.cwiseMax(0.0);
  return lambda.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

MatchedFamily matched_family(const GramSpec& spec, double delta) {
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& level : spec.levels) factors.push_back(gram_factor(level.gram));
  return matched_family_with_factors(spec, delta, factors);
}

MatchedFamily matched_family_with_factors(const GramSpec& spec, double delta,
                                          const std::vector<Eigen::MatrixXd>& factors) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("matched_family: delta in (0,1]");
  if (factors.size() != spec.levels.size())
    throw std::invalid_argument("matched_family: one factor per level required");
  MatchedFamily out;
  out.kappa = static_cast<std::size_t>(std::ceil(1.0 / (delta * delta) - 1e-12));
  std::size_t per_block = 0;
  std::vector<std::size_t> level_offset;
  for (std::size_t i = 0; i < spec.levels.size(); ++i) {
    const auto& level = spec.levels[i];
    const auto& v = factors[i];
    if (level.level == 0) throw std::invalid_argument("matched_family: level must be >= 1");
    if (v.cols() != level.gram.rows() || v.rows() != level.gram.rows())
      throw std::invalid_argument("matched_family: factor shape mismatch");
    if ((v.transpose() * v - level.gram).cwiseAbs().maxCoeff() > 1e-9)
      throw std::invalid_argument("matched_family: factor does not reproduce the Gram matrix");
    level_offset.push_back(per_block);
    per_block += static_cast<std::size_t>(level.level) * static_cast<std::size_t>(v.rows());
  }
  out.n0 = out.kappa * per_block;
  out.factors = factors;

  const double block_scale = 1.0 / std::sqrt(static_cast<double>(out.kappa));
  for (std::size_t i = 0; i < spec.levels.size(); ++i) {
    const unsigned q = spec.levels[i].level;
    const auto& v = factors[i];
    double fact = 1.0;
    for (unsigned a = 2; a <= q; ++a) fact *= a;
    const double mono = 1.0 / std::sqrt(fact);  // tensor value of a multilinear monomial
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      PolyGauss r(out.n0);
      SymmetricTensor t(q, out.n0);
      for (std::size_t b = 0; b < out.kappa; ++b) {
        for (Eigen::Index l = 0; l < v.rows(); ++l) {
          const double c = v(l, j);
          if (c == 0.0) continue;
          Multiset key(q);
          const std::size_t start = b * per_block + level_offset[i] + static_cast<std::size_t>(l) * q;
          std::iota(key.begin(), key.end(), static_cast<std::uint32_t>(start));
          t.set(key, c * mono * block_scale);
        }
      }
      r.add_component(t);
      out.family.push_back(std::move(r));
      out.level_of.push_back(q);
    }
  }
  return out;
}

namespace {

// Shared Hermite table across a family; each member keeps its own term list.
class FamilyEvaluator {
 public:
  explicit FamilyEvaluator(const std::vector<PolyGauss>& family) {
    if (family.empty()) throw std::invalid_argument("product_expectation: empty family");
    dim_ = family.front().dim;
    std::vector<std::int64_t> slot_of(dim_, -1);
    for (const auto& p : family) {
      if (p.dim != dim_) throw std::invalid_argument("product_expectation: dimension mismatch");
      Member m;
      m.constant = p.constant;
      m.offset.push_back(0);
      for (const auto& [q, t] : p.chaos) {
        width_ = std::max(width_, static_cast<std::size_t>(q) + 1);
        for (const auto& [key, v] : t.entries()) {
          m.coeff.push_back(v * std::sqrt(multiset_orderings(key)));
          for (const auto& [elem, count] : multiplicities(key)) {
            if (slot_of[elem] < 0) {
              slot_of[elem] = static_cast<std::int64_t>(coords_.size());
              coords_.push_back(elem);
            }
            m.slot.push_back(static_cast<std::uint32_t>(slot_of[elem]));
            m.degree.push_back(count);
          }
          m.offset.push_back(static_cast<std::uint32_t>(m.slot.size()));
        }
      }
      members_.push_back(std::move(m));
    }
    for (auto& m : members_) {
      m.pos.resize(m.slot.size());
      for (std::size_t f = 0; f < m.slot.size(); ++f) m.pos[f] = m.slot[f] * static_cast<std::uint32_t>(width_) + m.degree[f];
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }

  /// Product of all members at x; `table` is caller scratch.
  double product(std::span<const double> x, std::vector<double>& table) const {
    fill_table(x, table);
    return product_range(table, 0, members_.size());
  }

  void fill_table(std::span<const double> x, std::vector<double>& table) const {
    table.resize(coords_.size() * width_);
    for (std::size_t s = 0; s < coords_.size(); ++s)
      hermite_all(x[coords_[s]], std::span<double>(table.data() + s * width_, width_));
  }

  /// Product of members [begin, end) from a filled table.
  double product_range(const std::vector<double>& table, std::size_t begin, std::size_t end) const {
    double prod = 1.0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& m = members_[k];
      double total = m.constant;
      for (std::size_t i = 0; i < m.coeff.size(); ++i) {
        double term = m.coeff[i];
        for (std::uint32_t f = m.offset[i]; f < m.offset[i + 1]; ++f)
          term *= table[m.pos[f]];
        total += term;
      }
      prod *= total;
    }
    return prod;
  }

 private:
  struct Member {
    double constant = 0.0;
    std::vector<double> coeff;
    std::vector<std::uint32_t> offset;
    std::vector<std::uint32_t> slot;
    std::vector<unsigned> degree;
    std::vector<std::uint32_t> pos;  // slot * width + degree
  };
  std::size_t dim_ = 0;
  std::size_t width_ = 1;
  std::vector<std::uint32_t> coords_;
  std::vector<Member> members_;
};

struct Moments {
  double sum_a = 0.0, sq_a = 0.0;
  double sum_b = 0.0, sq_b = 0.0;
  double sum_d = 0.0, sq_d = 0.0;
};

ProductEstimate finish(double sum, double sq, std::size_t n) {
  ProductEstimate e;
  e.samples = n;
  e.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - e.value * e.value);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  return e;
}

}  // namespace

ProductEstimate product_expectation_mc(const std::vector<PolyGauss>& family, std::size_t samples,
                                       std::uint64_t seed, Exec exec) {
  if (samples == 0) throw std::invalid_argument("product_expectation_mc: samples must be >= 1");
  const FamilyEvaluator eval(family);
  auto parts = map_chunks<Moments>(samples, exec, [&](std::size_t c, std::size_t b, std::size_t e) {
    CounterRng rng(seed, c);
    std::vector<double> x(eval.dim()), table;
    Moments m;
    for (std::size_t s = b; s < e; ++s) {
      draw_gaussian(rng, x);
      const double v = eval.product(x, table);
      m.sum_a += v;
      m.sq_a += v * v;
    }
    return m;
  });
  double sum = 0.0, sq = 0.0;
  for (const auto& m : parts) {
    sum += m.sum_a;
    sq += m.sq_a;
  }
  return finish(sum, sq, samples);
}

PairedProductEstimate product_expectation_paired(const std::vector<PolyGauss>& a,
                                                 const std::vector<PolyGauss>& b,
                                                 std::size_t samples, std::uint64_t seed,
                                                 Exec exec) {
  if (samples == 0) throw std::invalid_argument("product_expectation_paired: samples must be >= 1");
  if (a.empty() || b.empty() || a.front().dim != b.front().dim)
    throw std::invalid_argument("product_expectation_paired: dimension mismatch");
  // One evaluator over both families so each draw fills a single Hermite table.
  std::vector<PolyGauss> both = a;
  both.insert(both.end(), b.begin(), b.end());
  const FamilyEvaluator eval(both);
  auto parts = map_chunks<Moments>(samples, exec, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    CounterRng rng(seed, c);
    std::vector<double> x(eval.dim()), table;
    Moments m;
    for (std::size_t s = lo; s < hi; ++s) {
      draw_gaussian(rng, x);
      eval.fill_table(x, table);
      const double va = eval.product_range(table, 0, a.size());
      const double vb = eval.product_range(table, a.size(), both.size());
      m.sum_a += va;
      m.sq_a += va * va;
      m.sum_b += vb;
      m.sq_b += vb * vb;
      m.sum_d += va - vb;
      m.sq_d += (va - vb) * (va - vb);
    }
    return m;
  });
  Moments t;
  for (const auto& m : parts) {
    t.sum_a += m.sum_a;
    t.sq_a += m.sq_a;
    t.sum_b += m.sum_b;
    t.sq_b += m.sq_b;
    t.sum_d += m.sum_d;
    t.sq_d += m.sq_d;
  }
  return {finish(t.sum_a, t.sq_a, samples), finish(t.sum_b, t.sq_b, samples),
          finish(t.sum_d, t.sq_d, samples)};
}

}  // namespace nstab
