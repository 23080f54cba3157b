#include "nstab/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <stdexcept>

#include "nstab/rounding.hpp"

namespace nstab {

std::string to_string(SearchMode mode) {
  return mode == SearchMode::grid_cover ? "grid-cover" : "random-restart-local";
}

SearchMode parse_search_mode(const std::string& name) {
  if (name == "grid-cover" || name == "grid") return SearchMode::grid_cover;
  if (name == "random-restart-local" || name == "local") return SearchMode::local;
  throw std::invalid_argument("unknown search mode: " + name);
}

void SearchConfig::validate() const {
  if (k < 1) throw std::invalid_argument("SearchConfig: k must be >= 1");
  if (n0 < 1) throw std::invalid_argument("SearchConfig: n0 must be >= 1");
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("SearchConfig: t must be > 0");
  if (target_mu.size() != k) throw std::invalid_argument("SearchConfig: target_mu must have k entries");
  double s = 0.0;
  for (double m : target_mu) {
    if (!(m >= 0.0)) throw std::invalid_argument("SearchConfig: negative target measure");
    s += m;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument("SearchConfig: target_mu must sum to 1");
  if (!(measure_tol > 0.0)) throw std::invalid_argument("SearchConfig: measure_tol must be > 0");
  if (budget < 1) throw std::invalid_argument("SearchConfig: budget must be >= 1");
  if (samples < 1 || measure_samples < 1) throw std::invalid_argument("SearchConfig: sample counts must be >= 1");
  if (!(grid.coeff_bound > 0.0) || !(grid.step > 0.0))
    throw std::invalid_argument("SearchConfig: grid bound and step must be > 0");
  if (mode == SearchMode::local && n0 > kMaxQuadratureDim)
    throw std::invalid_argument("SearchConfig: local mode smooths by quadrature, n0 <= 3");
}

std::vector<HermiteIndex> poly_basis(std::size_t n, unsigned d) {
  std::vector<HermiteIndex> out;
  for (unsigned deg = 0; deg <= d; ++deg) {
    std::vector<HermiteIndex> level;
    std::vector<unsigned> e(n, 0);
    // All exponent vectors with sum deg, in lexicographic order.
    auto rec = [&](auto&& self, std::size_t i, unsigned left) -> void {
      if (i + 1 == n) {
        e[i] = left;
        level.push_back(HermiteIndex{e});
        return;
      }
      for (unsigned v = left + 1; v-- > 0;) {
        e[i] = v;
        self(self, i + 1, left - v);
      }
    };
    rec(rec, 0, deg);
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

PolyGauss poly_from_params(std::size_t n, unsigned d, std::span<const double> params) {
  const auto basis = poly_basis(n, d);
  if (params.size() != basis.size()) throw std::invalid_argument("poly_from_params: parameter count mismatch");
  HermiteExpansion e;
  e.n = n;
  e.k = 1;
  e.max_degree = d;
  for (std::size_t i = 0; i < basis.size(); ++i)
    if (params[i] != 0.0) e.coefficients[basis[i]] = {params[i]};
  return poly_from_hermite(e, 0);
}

namespace {

// Divides by the standard deviation (norm of the non-constant part); empty when zero.
std::optional<std::vector<double>> unit_variance(std::vector<double> c) {
  double var = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) var += c[i] * c[i];
  if (!(var > 0.0)) return std::nullopt;
  const double s = 1.0 / std::sqrt(var);
  for (double& v : c) v *= s;
  return c;
}

std::vector<std::vector<double>> normalized_grid(std::size_t m, const CoverGrid& grid) {
  const auto steps = static_cast<std::size_t>(std::llround(2.0 * grid.coeff_bound / grid.step));
  const std::size_t values = steps + 1;
  double raw = std::pow(static_cast<double>(values), static_cast<double>(m));
  if (raw > static_cast<double>(grid.max_candidates))
    throw std::length_error("enumerate_cover: grid exceeds the candidate guard");
  std::vector<std::size_t> digit(m, 0);
  std::set<std::vector<long long>> seen;
  std::vector<std::vector<double>> out;
  for (;;) {
    std::vector<double> c(m);
    for (std::size_t i = 0; i < m; ++i) c[i] = -grid.coeff_bound + static_cast<double>(digit[i]) * grid.step;
    if (auto u = unit_variance(c)) {
      std::vector<long long> key(m);
      for (std::size_t i = 0; i < m; ++i) key[i] = std::llround((*u)[i] * 1e9);
      if (seen.insert(key).second) out.push_back(std::move(*u));
    }
    std::size_t i = 0;
    while (i < m && ++digit[i] == values) digit[i++] = 0;
    if (i == m) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<CoverCandidate> enumerate_cover(std::size_t k, std::size_t n0, unsigned d,
                                            const CoverGrid& grid) {
  if (k < 1 || n0 < 1) throw std::invalid_argument("enumerate_cover: k and n0 must be >= 1");
  if (!(grid.coeff_bound > 0.0) || !(grid.step > 0.0))
    throw std::invalid_argument("enumerate_cover: bound and step must be > 0");
  std::vector<CoverCandidate> out;
  if (d == 0) {
    for (unsigned j = 0; j < k; ++j) out.push_back(CoverCandidate{{}, j});
    return out;
  }
  const std::size_t m = poly_basis(n0, d).size();
  const auto polys = normalized_grid(m, grid);
  if (k <= 2) {
    for (const auto& p : polys) out.push_back(CoverCandidate{{p}, std::nullopt});
    return out;
  }
  const double total = std::pow(static_cast<double>(polys.size()), static_cast<double>(k));
  if (total > static_cast<double>(grid.max_candidates))
    throw std::length_error("enumerate_cover: cover exceeds the candidate guard");
  std::vector<std::size_t> digit(k, 0);
  for (;;) {
    CoverCandidate c;
    for (std::size_t j = 0; j < k; ++j) c.params.push_back(polys[digit[k - 1 - j]]);
    out.push_back(std::move(c));
    std::size_t i = 0;
    while (i < k && ++digit[i] == polys.size()) digit[i++] = 0;
    if (i == k) break;
  }
  return out;
}

PartitionFn cover_partition(const CoverCandidate& c, std::size_t k, std::size_t n0, unsigned d) {
  if (c.constant_label) return PartitionFn::constant(k, n0, *c.constant_label);
  if (k == 2 && c.params.size() == 1) {
    const PolyGauss p = poly_from_params(n0, d, c.params[0]);
    return PartitionFn::ptf({p.scaled(-1.0), p});
  }
  if (c.params.size() != k) throw std::invalid_argument("cover_partition: expected k polynomials");
  std::vector<PolyGauss> polys;
  for (const auto& v : c.params) polys.push_back(poly_from_params(n0, d, v));
  return PartitionFn::ptf(std::move(polys));
}

std::uint64_t params_hash(const std::vector<double>& params) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ params.size();
  for (double v : params) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

namespace {

std::vector<double> flatten(const CoverCandidate& c) {
  std::vector<double> out;
  if (c.constant_label) out.push_back(static_cast<double>(*c.constant_label));
  for (const auto& v : c.params) out.insert(out.end(), v.begin(), v.end());
  return out;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

// Seeds derived from the configuration seed; every candidate sees the same draws.
std::uint64_t measure_seed(std::uint64_t seed) { return mix64(seed ^ 0x6d656173ULL); }
std::uint64_t stability_seed(std::uint64_t seed) { return mix64(seed ^ 0x73746162ULL); }

// Feasible beats infeasible; then larger objective; exact ties go to the
// lexicographically smaller parameter vector.
struct Ranked {
  bool feasible = false;
  double objective = -std::numeric_limits<double>::infinity();
  double measure_error = std::numeric_limits<double>::infinity();
  std::vector<double> params;

  bool better_than(const Ranked& o) const {
    if (feasible != o.feasible) return feasible;
    if (!feasible) {
      if (measure_error != o.measure_error) return measure_error < o.measure_error;
      return params < o.params;
    }
    if (objective != o.objective) return objective > o.objective;
    return params < o.params;
  }
};

SearchResult grid_search(const SearchConfig& cfg, Exec exec) {
  std::vector<CoverCandidate> cands = enumerate_cover(cfg.k, cfg.n0, cfg.d, cfg.grid);
  if (cfg.d > 0)
    for (unsigned j = 0; j < cfg.k; ++j) cands.push_back(CoverCandidate{{}, j});
  if (cands.size() > cfg.budget) {
    // Seeded shuffle; a larger budget evaluates a superset of candidates.
    CounterRng rng(cfg.seed, 0x5u);
    for (std::size_t i = cands.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(cands[i], cands[j]);
    }
    cands.resize(cfg.budget);
  }
  const std::uint64_t ms = measure_seed(cfg.seed), ss = stability_seed(cfg.seed);
  SearchResult result;
  Ranked best;
  std::optional<std::size_t> best_index;
  MeasureVector best_measures;
  StabEstimate best_stab;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const PartitionFn f = cover_partition(cands[i], cfg.k, cfg.n0, cfg.d);
    const MeasureVector m = estimate_measures(f, cfg.measure_samples, ms, exec);
    ++result.evaluations;
    Ranked r;
    r.params = flatten(cands[i]);
    r.measure_error = l1_distance(m.mu, cfg.target_mu);
    r.feasible = r.measure_error <= cfg.measure_tol;
    TracePoint tp{result.evaluations, r.params, 0.0, 0.0, r.feasible};
    StabEstimate s;
    if (r.feasible) {
      s = estimate_stability(f, cfg.t, cfg.samples, ss, exec);
      r.objective = s.value;
      tp.objective = s.value;
      tp.std_error = s.std_error;
    }
    result.trace.push_back(std::move(tp));
    if (!best_index || r.better_than(best)) {
      best = r;
      best_index = i;
      best_measures = m;
      best_stab = s;
    }
  }
  result.best = cover_partition(cands[*best_index], cfg.k, cfg.n0, cfg.d);
  result.feasible = best.feasible;
  result.best_params = best.params;
  result.measures = best_measures;
  result.stability = best.feasible ? best_stab : estimate_stability(result.best, cfg.t, cfg.samples, ss, exec);
  result.description = cands[*best_index].constant_label ? "constant" : "grid-cover PTF";
  return result;
}

unsigned spectral_quad_order(std::size_t n) { return n == 1 ? 100 : (n == 2 ? 48 : 20); }

struct LocalEval {
  Ranked rank;
  StabEstimate stab;
  std::vector<double> measures;
  std::optional<PartitionFn> g;
};

// Smooths f by P_t, rounds with thresholds matched to the target on the common
// sample, and scores the rounded partition.
LocalEval round_and_score(const PartitionFn& f, const SearchConfig& cfg, Exec exec) {
  const VectorFunction F = ou_spectral(f, cfg.t, cfg.spectral_degree, spectral_quad_order(cfg.n0), exec);
  const ThresholdSearch ts =
      find_matching_threshold(F, cfg.target_mu, cfg.measure_tol / 2.0, 2000, cfg.measure_samples,
                              measure_seed(cfg.seed), exec);
  LocalEval out;
  out.g = argmax_round(F, ts.z, "rounded-smoothed-ptf");
  out.measures = ts.measures;
  out.rank.measure_error = ts.l1_error;
  out.rank.feasible = ts.l1_error <= cfg.measure_tol;
  out.stab = estimate_stability(*out.g, cfg.t, cfg.samples, stability_seed(cfg.seed), exec);
  out.rank.objective = out.stab.value;
  return out;
}

SearchResult local_search(const SearchConfig& cfg, Exec exec) {
  const std::size_t m = poly_basis(cfg.n0, cfg.d).size();
  const std::size_t polys = cfg.k == 2 ? 1 : cfg.k;
  const std::size_t dims = m * polys;
  SearchResult result;
  std::optional<LocalEval> best;

  auto to_candidate = [&](const std::vector<double>& flat) -> std::optional<CoverCandidate> {
    CoverCandidate c;
    for (std::size_t j = 0; j < polys; ++j) {
      auto u = unit_variance(std::vector<double>(flat.begin() + j * m, flat.begin() + (j + 1) * m));
      if (!u) return std::nullopt;
      c.params.push_back(std::move(*u));
    }
    return c;
  };
  auto evaluate = [&](const std::vector<double>& flat) -> LocalEval {
    ++result.evaluations;
    LocalEval e;
    e.rank.params = flat;
    if (auto c = to_candidate(flat)) {
      const PartitionFn f = cover_partition(*c, cfg.k, cfg.n0, cfg.d);
      e = round_and_score(f, cfg, exec);
      e.rank.params = flat;
    }
    result.trace.push_back(
        TracePoint{result.evaluations, flat, e.stab.value, e.stab.std_error, e.rank.feasible});
    return e;
  };
  auto consider = [&](LocalEval& e) {
    if (e.g && (!best || e.rank.better_than(best->rank))) best = e;
  };

  const std::size_t reserve = std::min<std::size_t>(cfg.polish_rounds, cfg.budget - 1);
  const std::size_t descent_budget = cfg.budget - reserve;
  const unsigned restarts = std::max(1u, cfg.restarts);
  for (unsigned r = 0; r < restarts && result.evaluations < descent_budget; ++r) {
    const std::size_t stop = std::min(descent_budget, result.evaluations +
                                                          std::max<std::size_t>(1, descent_budget / restarts));
    CounterRng rng(cfg.seed, 0x1000u + r);
    std::vector<double> x(dims);
    for (double& v : x) v = rng.normal();
    LocalEval cur = evaluate(x);
    consider(cur);
    double step = cfg.initial_step;
    while (result.evaluations < stop && step > 1e-3) {
      bool improved = false;
      for (std::size_t i = 0; i < dims && result.evaluations < stop && !improved; ++i) {
        for (double sign : {1.0, -1.0}) {
          if (result.evaluations >= stop) break;
          std::vector<double> trial = x;
          trial[i] += sign * step;
          LocalEval e = evaluate(trial);
          consider(e);
          if (e.g && e.rank.better_than(cur.rank)) {
            x = std::move(trial);
            cur = std::move(e);
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }
  if (!best) throw std::runtime_error("optimize_stability: no valid candidate evaluated");

  // Iterated rounding of the incumbent; each round re-smooths the previous partition.
  result.description = "rounded smoothed PTF";
  for (std::size_t r = 0; r < reserve && result.evaluations < cfg.budget; ++r) {
    ++result.evaluations;
    LocalEval e = round_and_score(*best->g, cfg, exec);
    e.rank.params = best->rank.params;
    result.trace.push_back(
        TracePoint{result.evaluations, e.rank.params, e.stab.value, e.stab.std_error, e.rank.feasible});
    if (e.rank.feasible && e.rank.better_than(best->rank)) {
      best = std::move(e);
      result.description = "rounded smoothed PTF, polished by " + std::to_string(r + 1) + " rounding(s)";
    }
  }
  result.best = *best->g;
  result.stability = best->stab;
  result.feasible = best->rank.feasible;
  result.best_params = best->rank.params;
  result.measures = estimate_measures(result.best, cfg.measure_samples, measure_seed(cfg.seed), exec);
  return result;
}

}  // namespace

SearchResult optimize_stability(const SearchConfig& cfg, Exec exec) {
  cfg.validate();
  return cfg.mode == SearchMode::grid_cover ? grid_search(cfg, exec) : local_search(cfg, exec);
}

// ---------------------------------------------------------------------------
// Non-interactive correlation.

namespace {

void check_distribution(const std::vector<double>& p, std::size_t k, const char* what) {
  if (p.size() != k) throw std::invalid_argument(std::string(what) + ": expected k entries");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": must sum to 1");
}

std::size_t ipow(std::size_t base, std::size_t e, std::size_t guard) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (r > guard / std::max<std::size_t>(base, 1)) return guard + 1;
    r *= base;
  }
  return r;
}

// Probability of each point of A^n under the product marginal.
std::vector<double> product_marginal(const Eigen::VectorXd& p, std::size_t n) {
  const std::size_t m = static_cast<std::size_t>(p.size());
  std::size_t points = 1;
  for (std::size_t i = 0; i < n; ++i) points *= m;
  std::vector<double> out(points, 1.0);
  for (std::size_t x = 0; x < points; ++x) {
    std::size_t r = x;
    for (std::size_t i = 0; i < n; ++i) {
      out[x] *= p[static_cast<Eigen::Index>(r % m)];
      r /= m;
    }
  }
  return out;
}

void decode_table(std::size_t code, std::size_t k, std::vector<unsigned>& table) {
  for (auto& v : table) {
    v = static_cast<unsigned>(code % k);
    code /= k;
  }
}

struct TableRoute {
  double best = -1.0;
  std::vector<unsigned> f, g;
  std::vector<double> mf, mg;
  std::size_t pairs = 0;
};

// For each marginal-feasible f, the agreement with g is sum_y w_f(y, g(y)),
// where w_f(y, j) = Pr[Y = y, f(X) = j].
TableRoute table_route(const JointDist& P, const std::vector<double>& mu, const std::vector<double>& nu,
                       std::size_t k, std::size_t n, double delta, std::size_t guard) {
  const std::size_t ma = P.size_a(), mb = P.size_b();
  const std::size_t pa = ipow(ma, n, guard), pb = ipow(mb, n, guard);
  const std::size_t tf = ipow(k, pa, guard), tg = ipow(k, pb, guard);
  TableRoute out;
  if (pa > guard || pb > guard || tf > guard || tg > guard || tf * 1.0 * tg > static_cast<double>(guard))
    return out;
  const auto wa = product_marginal(P.marginal_a(), n);
  const auto wb = product_marginal(P.marginal_b(), n);
  std::vector<double> joint(pa * pb, 1.0);
  for (std::size_t x = 0; x < pa; ++x)
    for (std::size_t y = 0; y < pb; ++y) {
      std::size_t rx = x, ry = y;
      for (std::size_t i = 0; i < n; ++i) {
        joint[x * pb + y] *= P.P(static_cast<Eigen::Index>(rx % ma), static_cast<Eigen::Index>(ry % mb));
        rx /= ma;
        ry /= mb;
      }
    }
  const double slack = 1e-12;
  auto marginal_of = [k](const std::vector<unsigned>& table, const std::vector<double>& w) {
    std::vector<double> m(k, 0.0);
    for (std::size_t i = 0; i < table.size(); ++i) m[table[i]] += w[i];
    return m;
  };
  std::vector<std::vector<unsigned>> g_tables;
  std::vector<std::vector<double>> g_marg;
  std::vector<unsigned> table(pb);
  for (std::size_t code = 0; code < tg; ++code) {
    decode_table(code, k, table);
    auto m = marginal_of(table, wb);
    if (l1_distance(m, nu) <= delta + slack) {
      g_tables.push_back(table);
      g_marg.push_back(std::move(m));
    }
  }
  std::vector<unsigned> ftab(pa);
  std::vector<double> w(pb * k);
  for (std::size_t code = 0; code < tf; ++code) {
    decode_table(code, k, ftab);
    auto m = marginal_of(ftab, wa);
    if (l1_distance(m, mu) > delta + slack) continue;
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t x = 0; x < pa; ++x)
      for (std::size_t y = 0; y < pb; ++y) w[y * k + ftab[x]] += joint[x * pb + y];
    for (std::size_t gi = 0; gi < g_tables.size(); ++gi) {
      ++out.pairs;
      double agree = 0.0;
      for (std::size_t y = 0; y < pb; ++y) agree += w[y * k + g_tables[gi][y]];
      if (agree > out.best) {
        out.best = agree;
        out.f = ftab;
        out.g = g_tables[gi];
        out.mf = m;
        out.mg = g_marg[gi];
      }
    }
  }
  return out;
}

// Compositions of `total` into `parts` non-negative integers.
template <class Fn>
void for_each_composition(std::size_t total, std::size_t parts, Fn&& fn) {
  std::vector<std::size_t> c(parts, 0);
  auto rec = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == parts) {
      c[i] = left;
      fn(c);
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, total);
}

double composition_count(std::size_t total, std::size_t parts) {
  return std::exp(std::lgamma(total + parts) - std::lgamma(total + 1.0) - std::lgamma(static_cast<double>(parts)));
}

// log of the multinomial probability of counts c under cell probabilities p.
double log_multinomial(const std::vector<std::size_t>& c, const std::vector<double>& p, std::size_t total) {
  double s = std::lgamma(total + 1.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0) continue;
    if (p[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    s += static_cast<double>(c[i]) * std::log(p[i]) - std::lgamma(c[i] + 1.0);
  }
  return s;
}

// Cut points on the atoms of z so that cumulative masses track the target.
PartitionFn quantile_slabs(std::vector<std::pair<double, double>> atoms, const std::vector<double>& target) {
  std::sort(atoms.begin(), atoms.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& a : atoms) {
    if (!merged.empty() && std::fabs(merged.back().first - a.first) <= 1e-12) merged.back().second += a.second;
    else merged.push_back(a);
  }
  const std::size_t k = target.size();
  std::vector<double> cum(merged.size());
  double running = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) cum[i] = running += merged[i].second;
  // cut c means atoms [0, c) fall at or below the breakpoint.
  std::vector<double> breakpoints;
  std::vector<unsigned> labels{0};
  double goal = 0.0;
  std::size_t prev_cut = 0;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    goal += target[j];
    std::size_t cut = prev_cut;
    double err = std::fabs((cut == 0 ? 0.0 : cum[cut - 1]) - goal);
    for (std::size_t c = prev_cut + 1; c <= merged.size(); ++c) {
      const double e = std::fabs(cum[c - 1] - goal);
      if (e < err) {
        err = e;
        cut = c;
      }
    }
    double bp;
    if (cut == 0) bp = merged.front().first - 1.0;
    else if (cut == merged.size()) bp = merged.back().first + 1.0;
    else bp = 0.5 * (merged[cut - 1].first + merged[cut].first);
    if (!breakpoints.empty() && !(bp > breakpoints.back())) {
      labels.back() = static_cast<unsigned>(j + 1);
    } else {
      breakpoints.push_back(bp);
      labels.push_back(static_cast<unsigned>(j + 1));
    }
    prev_cut = cut;
  }
  return PartitionFn::slabs(1, 0, breakpoints, labels, k);
}

std::vector<double> column_values(const Eigen::MatrixXd& M, Eigen::Index col) {
  std::vector<double> v(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) v[static_cast<std::size_t>(i)] = M(i, col);
  return v;
}

struct BlockRoute {
  bool evaluated = false;
  DiscreteCorr corr;
  PartitionFn gf = PartitionFn::constant(1, 1, 0);
  PartitionFn gg = PartitionFn::constant(1, 1, 0);
};

// Sum-of-block strategies along the top correlated basis pair. Thresholds are
// quantiles of the exact law of the block sum; agreement is exact by
// enumerating joint symbol counts when that fits the guard.
BlockRoute block_route(const JointDist& P, const CorrelationBasis& basis, const std::vector<double>& mu,
                       const std::vector<double>& nu, std::size_t ell, const NcdConfig& cfg, Exec exec) {
  BlockRoute out;
  const std::size_t ma = P.size_a(), mb = P.size_b(), k = cfg.k;
  if (ma < 2 || mb < 2) return out;
  const auto xa = column_values(basis.X, 1), yb = column_values(basis.Y, 1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ell));
  std::vector<double> pa(ma), pb(mb), pj(ma * mb);
  for (std::size_t a = 0; a < ma; ++a) pa[a] = P.marginal_a()[static_cast<Eigen::Index>(a)];
  for (std::size_t b = 0; b < mb; ++b) pb[b] = P.marginal_b()[static_cast<Eigen::Index>(b)];
  for (std::size_t a = 0; a < ma; ++a)
    for (std::size_t b = 0; b < mb; ++b)
      pj[a * mb + b] = P.P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  const double guard = static_cast<double>(cfg.enumeration_guard);
  if (composition_count(ell, ma) > guard || composition_count(ell, mb) > guard) return out;

  auto atoms_of = [&](const std::vector<double>& vals, const std::vector<double>& p) {
    std::vector<std::pair<double, double>> atoms;
    for_each_composition(ell, vals.size(), [&](const std::vector<std::size_t>& c) {
      double z = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) z += static_cast<double>(c[i]) * vals[i];
      const double lp = log_multinomial(c, p, ell);
      if (std::isfinite(lp)) atoms.emplace_back(z * scale, std::exp(lp));
    });
    return atoms;
  };
  out.gf = quantile_slabs(atoms_of(xa, pa), mu);
  out.gg = quantile_slabs(atoms_of(yb, pb), nu);
  out.evaluated = true;
  const DiscreteStrategy sf = block_strategy(out.gf, xa, ell);
  const DiscreteStrategy sg = block_strategy(out.gg, yb, ell);

  if (composition_count(ell, ma * mb) > guard) {
    out.corr = estimate_discrete_corr(sf, sg, P, cfg.samples, mix64(cfg.seed ^ ell), exec);
    return out;
  }
  DiscreteCorr& r = out.corr;
  r.exact = true;
  r.marginals_f.mu.assign(k, 0.0);
  r.marginals_g.mu.assign(k, 0.0);
  r.marginals_f.std_error.assign(k, 0.0);
  r.marginals_g.std_error.assign(k, 0.0);
  r.agreement.per_label.assign(k, 0.0);
  r.agreement.per_label_std_error.assign(k, 0.0);
  std::vector<double> zf(1), zg(1);
  for_each_composition(ell, ma * mb, [&](const std::vector<std::size_t>& c) {
    const double lp = log_multinomial(c, pj, ell);
    if (!std::isfinite(lp)) return;
    const double w = std::exp(lp);
    double sx = 0.0, sy = 0.0;
    for (std::size_t a = 0; a < ma; ++a)
      for (std::size_t b = 0; b < mb; ++b) {
        sx += static_cast<double>(c[a * mb + b]) * xa[a];
        sy += static_cast<double>(c[a * mb + b]) * yb[b];
      }
    zf[0] = sx * scale;
    zg[0] = sy * scale;
    const unsigned lf = out.gf.label_unchecked(zf), lg = out.gg.label_unchecked(zg);
    r.marginals_f.mu[lf] += w;
    r.marginals_g.mu[lg] += w;
    if (lf == lg) r.agreement.per_label[lf] += w;
  });
  for (double v : r.agreement.per_label) r.agreement.value += v;
  return out;
}

}  // namespace

NcdResult ncd_decide(const JointDist& P, const std::vector<double>& mu, const std::vector<double>& nu,
                     double kappa, double delta, std::size_t n_max, const NcdConfig& cfg, Exec exec) {
  if (cfg.k < 1) throw std::invalid_argument("ncd_decide: k must be >= 1");
  check_distribution(mu, cfg.k, "ncd_decide: mu");
  check_distribution(nu, cfg.k, "ncd_decide: nu");
  if (!(delta > 0.0)) throw std::invalid_argument("ncd_decide: delta must be > 0");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("ncd_decide: kappa must lie in [0,1]");
  if (n_max < 1) throw std::invalid_argument("ncd_decide: n_max must be >= 1");

  NcdResult res;
  res.achieved = 0.0;
  double best = -1.0;
  // Route (i): exhaustive tables.
  for (std::size_t n = 1; n <= std::min(cfg.n_brute, n_max); ++n) {
    TableRoute t = table_route(P, mu, nu, cfg.k, n, delta, cfg.enumeration_guard);
    res.pairs_examined += t.pairs;
    if (t.best > best) {
      best = t.best;
      res.std_error = 0.0;
      res.marginals_f = t.mf;
      res.marginals_g = t.mg;
      res.witness = NcdWitness{table_strategy(t.f, cfg.k, P.size_a(), n),
                               table_strategy(t.g, cfg.k, P.size_b(), n), n, "table"};
    }
  }
  // Route (ii): block-embedded Gaussian slabs along the top correlated pair.
  const CorrelationBasis basis = correlation_basis(P);
  for (std::size_t ell : cfg.block_lengths) {
    if (ell < 1 || ell > n_max) continue;
    BlockRoute b = block_route(P, basis, mu, nu, ell, cfg, exec);
    if (!b.evaluated) continue;
    ++res.pairs_examined;
    const double slack = b.corr.exact ? 1e-12 : 0.0;
    if (l1_distance(b.corr.marginals_f.mu, mu) > delta + slack ||
        l1_distance(b.corr.marginals_g.mu, nu) > delta + slack)
      continue;
    if (b.corr.agreement.value > best) {
      best = b.corr.agreement.value;
      res.std_error = b.corr.agreement.std_error;
      res.marginals_f = b.corr.marginals_f.mu;
      res.marginals_g = b.corr.marginals_g.mu;
      res.witness = NcdWitness{block_strategy(b.gf, column_values(basis.X, 1), ell),
                               block_strategy(b.gg, column_values(basis.Y, 1), ell), ell, "block"};
    }
  }
  res.any_feasible_pair = best >= 0.0;
  res.achieved = std::max(best, 0.0);
  res.feasible = res.any_feasible_pair && res.achieved >= kappa - delta;
  if (!res.feasible) {
    res.note = "not-found: no strategy pair examined meets the marginals and agreement >= kappa - delta; "
               "this is a search outcome, not a proof that none exists";
    if (!res.any_feasible_pair) res.witness.reset();
  }
  return res;
}

OracleResult ncd_brute_oracle(const JointDist& P, const std::vector<double>& mu,
                              const std::vector<double>& nu, std::size_t k, std::size_t n,
                              double delta, std::size_t guard) {
  if (k < 1) throw std::invalid_argument("ncd_brute_oracle: k must be >= 1");
  check_distribution(mu, k, "ncd_brute_oracle: mu");
  check_distribution(nu, k, "ncd_brute_oracle: nu");
  if (n < 1 || n > 2) throw std::invalid_argument("ncd_brute_oracle: n must be 1 or 2");
  if (!(delta >= 0.0)) throw std::invalid_argument("ncd_brute_oracle: delta must be >= 0");
  const std::size_t ma = P.size_a(), mb = P.size_b();
  const std::size_t pa = ipow(ma, n, guard), pb = ipow(mb, n, guard);
  const std::size_t tf = ipow(k, pa, guard), tg = ipow(k, pb, guard);
  if (tf > guard || tg > guard || static_cast<double>(tf) * static_cast<double>(tg) > static_cast<double>(guard))
    throw std::length_error("ncd_brute_oracle: enumeration guard");

  // Joint law of (X^n, Y^n) in extended precision.
  std::vector<long double> joint(pa * pb);
  for (std::size_t x = 0; x < pa; ++x)
    for (std::size_t y = 0; y < pb; ++y) {
      long double w = 1.0L;
      std::size_t rx = x, ry = y;
      for (std::size_t i = 0; i < n; ++i) {
        w *= static_cast<long double>(P.P(static_cast<Eigen::Index>(rx % ma), static_cast<Eigen::Index>(ry % mb)));
        rx /= ma;
        ry /= mb;
      }
      joint[x * pb + y] = w;
    }
  OracleResult out;
  std::vector<unsigned> f(pa), g(pb);
  std::vector<long double> mf(k), mg(k);
  for (std::size_t cf = 0; cf < tf; ++cf) {
    decode_table(cf, k, f);
    for (std::size_t cg = 0; cg < tg; ++cg) {
      decode_table(cg, k, g);
      ++out.pairs;
      std::fill(mf.begin(), mf.end(), 0.0L);
      std::fill(mg.begin(), mg.end(), 0.0L);
      long double agree = 0.0L;
      for (std::size_t x = 0; x < pa; ++x)
        for (std::size_t y = 0; y < pb; ++y) {
          const long double w = joint[x * pb + y];
          mf[f[x]] += w;
          mg[g[y]] += w;
          if (f[x] == g[y]) agree += w;
        }
      long double ef = 0.0L, eg = 0.0L;
      for (std::size_t j = 0; j < k; ++j) {
        ef += std::fabs(mf[j] - static_cast<long double>(mu[j]));
        eg += std::fabs(mg[j] - static_cast<long double>(nu[j]));
      }
      if (ef > delta + 1e-12L || eg > delta + 1e-12L) continue;
      if (!out.feasible || agree > out.value) out.value = static_cast<double>(agree);
      out.feasible = true;
    }
  }
  return out;
}

}  // namespace nstab
