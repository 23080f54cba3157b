// Command-line front end: reproducible experiments with JSON/CSV output.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nstab/cube.hpp"
#include "nstab/gauss_core.hpp"
#include "nstab/hermite_analysis.hpp"
#include "nstab/json_io.hpp"
#include "nstab/partition.hpp"
#include "nstab/product_space.hpp"
#include "nstab/rounding.hpp"
#include "nstab/search.hpp"
#include "nstab/tensor_ops.hpp"

#ifndef NSTAB_GIT_DESCRIBE
#define NSTAB_GIT_DESCRIBE "unknown"
#endif

namespace {

using nstab::json;

// Raised for numeric failures that leave no report (exit code 3).
struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Set by commands whose report is still emitted before exiting with code 3.
std::string g_soft_failure;

struct Common {
  std::uint64_t seed = 1;
  std::size_t samples = 200000;
  std::optional<double> t;
  std::optional<double> rho;
  std::string out;
  std::string format = "json";
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--samples", c.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
  auto* t = sub->add_option("--t", c.t, "Ornstein-Uhlenbeck time (rho = e^-t)");
  auto* rho = sub->add_option("--rho", c.rho, "correlation in (-1, 1)");
  t->excludes(rho);
  sub->add_option("--out", c.out, "output file (stdout when omitted)");
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--config", c.config, "JSON file whose keys fill unset options");
}

double rho_of(const Common& c) {
  if (c.t) {
    if (!(*c.t > 0.0)) throw std::invalid_argument("--t must be > 0");
    return std::exp(-*c.t);
  }
  const double r = c.rho.value_or(0.5);
  if (!(std::fabs(r) < 1.0)) throw std::invalid_argument("--rho must lie in (-1, 1)");
  return r;
}

double t_of(const Common& c) {
  const double r = rho_of(c);
  if (!(r > 0.0)) throw std::invalid_argument("this command needs rho in (0, 1)");
  return -std::log(r);
}

nstab::Exec exec_mode(bool serial) { return serial ? nstab::Exec::serial : nstab::Exec::parallel; }

// ---------------------------------------------------------------------------

json cmd_stability(const Common& c, const std::string& partition_path, bool serial) {
  const nstab::PartitionFn f = nstab::partition_from_json(nstab::read_json_file(partition_path));
  const double rho = rho_of(c);
  const auto s = nstab::estimate_stability_rho(f, rho, c.samples, c.seed, exec_mode(serial));
  json out = {{"partition", {{"kind", f.kind()}, {"k", f.k()}, {"n", f.n()}}},
              {"rho", rho},
              {"value", s.value},
              {"std_error", s.std_error},
              {"per_label", s.per_label},
              {"per_label_std_error", s.per_label_std_error},
              {"samples", s.samples},
              {"seed", s.seed}};
  if (f.kind() == "halfspace") {
    const auto& h = std::get<nstab::Halfspace>(f.variant());
    bool through_origin = true;
    for (std::size_t i = 0; i < h.a.size(); ++i) through_origin = through_origin && h.a[i] * h.b[i] == 0.0;
    if (through_origin) out["orthant_reference"] = nstab::sheppard_orthant(rho);
  }
  return out;
}

json cmd_borell(const Common& c, std::size_t count, bool serial) {
  const double rho = rho_of(c);
  nstab::CounterRng rng(c.seed, 0xb0e11ULL);
  json rows = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < count; ++i) {
    // Random two-label cell partition of the plane.
    std::vector<std::vector<double>> bp(2);
    std::size_t cells = 1;
    for (auto& axis : bp) {
      const std::size_t m = 1 + rng() % 3;
      for (std::size_t j = 0; j < m; ++j) axis.push_back(rng.normal());
      std::sort(axis.begin(), axis.end());
      cells *= axis.size() + 1;
    }
    std::vector<unsigned> labels(cells);
    for (auto& l : labels) l = static_cast<unsigned>(rng() & 1u);
    labels[0] = 0;
    labels[cells - 1] = 1;
    const auto f = nstab::PartitionFn::cells(bp, labels, 2);
    double mu0 = 0.0;
    for (std::size_t cidx = 0; cidx < cells; ++cidx) {
      if (labels[cidx] != 0) continue;
      double p = 1.0;
      std::size_t rest = cidx;
      for (const auto& axis : bp) {
        const std::size_t j = rest % (axis.size() + 1);
        rest /= axis.size() + 1;
        const double lo = j == 0 ? 0.0 : nstab::normal_cdf(axis[j - 1]);
        const double hi = j == axis.size() ? 1.0 : nstab::normal_cdf(axis[j]);
        p *= hi - lo;
      }
      mu0 += p;
    }
    const auto s = nstab::estimate_stability_rho(f, rho, c.samples, c.seed + i, exec_mode(serial));
    const double h = nstab::halfspace_stability(mu0, rho);
    const bool ok = s.value <= h + 3.0 * s.std_error;
    all_ok = all_ok && ok;
    rows.push_back({{"index", i},
                    {"mu0", mu0},
                    {"stability", s.value},
                    {"std_error", s.std_error},
                    {"halfspace", h},
                    {"margin", h - s.value},
                    {"ok", ok}});
  }
  return {{"rho", rho}, {"rows", rows}, {"all_ok", all_ok}};
}

json cmd_round(const Common& c, const std::string& partition_path, double tol, std::optional<unsigned> degree,
               bool serial) {
  const nstab::PartitionFn f = nstab::partition_from_json(nstab::read_json_file(partition_path));
  const double t = t_of(c);
  const auto r = nstab::stability_of_rounding(f, t, tol, c.samples, c.seed, 0, exec_mode(serial));
  json out = {{"z", r.search.z.z},
              {"target", r.measures_f.mu},
              {"measures", r.measures_g.mu},
              {"stab_before", r.stab_f.value},
              {"stab_before_se", r.stab_f.std_error},
              {"stab_after", r.stab_g.value},
              {"stab_after_se", r.stab_g.std_error},
              {"cross", r.cross.value},
              {"slack", r.slack},
              {"search", {{"iterations", r.search.iterations}, {"l1_error", r.search.l1_error}, {"converged", r.search.converged}}},
              {"disagreement", nullptr},
              {"collision", nullptr}};
  if (degree) {
    const auto tr = nstab::ptf_from_truncation(f, *degree, nstab::kDefaultQuadOrder, c.samples, c.seed, exec_mode(serial));
    out["disagreement"] = tr.disagreement.value;
    out["collision"] = tr.collision.value;
    out["tail"] = tr.tail;
    out["bound"] = tr.bound;
    out["ptf"] = nstab::to_json(tr.ptf);
  }
  if (!r.search.converged) g_soft_failure = "threshold search did not reach the tolerance";
  return out;
}

json cmd_hermite(const Common& c, const std::string& partition_path, unsigned degree, unsigned quad,
                 bool weights_only, bool serial) {
  const nstab::PartitionFn f = nstab::partition_from_json(nstab::read_json_file(partition_path));
  nstab::HermiteExpansion e = nstab::expand_partition(f, degree, quad, exec_mode(serial));
  if (c.t || c.rho) e = nstab::apply_ou(e, t_of(c));
  const auto w = nstab::spectral_weights(e);
  const auto p = nstab::parseval_check(e);
  json out = {{"weights", {{"by_degree", w.by_degree}, {"tail", w.tail}, {"explicit_tail", w.explicit_tail}}},
              {"parseval", {{"residual", p.residual}, {"ok", p.ok}}}};
  if (!weights_only) out["expansion"] = nstab::to_json(e);
  return out;
}

json eigen_json(const nstab::EigenReport& r) {
  json parts = json::array();
  for (const auto& [key, v] : r.per_partition)
    parts.push_back({{"order", key.first}, {"row_slots", key.second.row_slots}, {"value", v}});
  return {{"lambda_max", r.lambda_max}, {"variance", r.variance}, {"ratio", r.ratio},
          {"converged", r.converged}, {"per_partition", parts}};
}

json cmd_tensor(const std::string& poly_path, const std::string& op, const std::string& other_path,
                std::size_t T) {
  const nstab::PolyGauss p = nstab::poly_from_json(nstab::read_json_file(poly_path));
  if (op == "eigen") {
    const auto r = nstab::eigenregularity(p);
    if (!r.converged) throw NumericFailure("power iteration did not converge");
    return eigen_json(r);
  }
  if (op == "lift") {
    const auto l = nstab::multilinear_lift(p, T);
    return {{"T", l.block}, {"var_gap", l.var_gap}, {"gap_bound", l.gap_bound}, {"w", nstab::to_json(l.w)}};
  }
  if (other_path.empty()) throw std::invalid_argument("--other is required for op " + op);
  const nstab::PolyGauss q = nstab::poly_from_json(nstab::read_json_file(other_path));
  if (op == "product") return {{"product", nstab::to_json(nstab::multiply(p, q))}};
  if (op == "variance") {
    const auto b = nstab::variance_bounds(p, q);
    return {{"product_variance", b.product_variance},
            {"lower_top", b.lower_top},
            {"upper", b.upper ? json(*b.upper) : json(nullptr)},
            {"lower_schedule", b.lower_schedule ? json(*b.lower_schedule) : json(nullptr)},
            {"d", b.d}};
  }
  throw std::invalid_argument("unknown tensor op " + op);
}

std::vector<double> column(const Eigen::MatrixXd& M, Eigen::Index j) {
  std::vector<double> v(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) v[static_cast<std::size_t>(i)] = M(i, j);
  return v;
}

json cmd_simulate(const Common& c, const std::string& dist_path, std::size_t ell, const std::string& partition_path,
                  bool serial) {
  const nstab::JointDist P = nstab::joint_from_json(nstab::read_json_file(dist_path));
  const auto basis = nstab::correlation_basis(P);
  if (basis.X.cols() < 2 || basis.Y.cols() < 2) throw std::invalid_argument("simulate: alphabets need >= 2 symbols");
  const nstab::PartitionFn g = partition_path.empty()
                                   ? nstab::PartitionFn::halfspace({0.0}, {1.0})
                                   : nstab::partition_from_json(nstab::read_json_file(partition_path));
  if (g.n() != 1) throw std::invalid_argument("simulate: the Gaussian partition must be one-dimensional");
  const auto sf = nstab::block_strategy(g, column(basis.X, 1), ell);
  const auto sg = nstab::block_strategy(g, column(basis.Y, 1), ell);
  const auto r = nstab::estimate_discrete_corr(sf, sg, P, c.samples, c.seed, exec_mode(serial));
  const double rho1 = basis.maximal_correlation();
  json out = {{"ell", ell},
              {"rho1", rho1},
              {"agreement", r.agreement.value},
              {"agreement_se", r.agreement.std_error},
              {"per_label", r.agreement.per_label},
              {"marginals_f", r.marginals_f.mu},
              {"marginals_g", r.marginals_g.mu},
              {"strategy", sf.description}};
  if (g.kind() == "halfspace") {
    const auto& h = std::get<nstab::Halfspace>(g.variant());
    const double below = nstab::normal_cdf(h.a[0]);
    out["gaussian_reference"] = nstab::halfspace_stability(h.b[0] > 0 ? below : 1.0 - below, rho1);
  }
  return out;
}

json cmd_cube(const Common& c, const std::string& rule, unsigned n, unsigned k) {
  const double rho = rho_of(c);
  const auto f = nstab::make_voting_rule(nstab::parse_voting_rule(rule), n, k);
  const auto spec = nstab::walsh_transform(f);
  const auto inf = nstab::cube_influences(spec);
  double total = 0.0;
  for (double v : inf) total += v;
  json out = {{"rule", rule},
              {"n", n},
              {"k", k},
              {"rho", rho},
              {"stability", nstab::cube_stability(spec, rho)},
              {"influences", inf},
              {"total_influence", total},
              {"variance", nstab::cube_variance(f)},
              {"table", nstab::to_json(f)}};
  if (n <= 8) out["stability_bruteforce"] = nstab::cube_stability_bruteforce(f, rho);
  return out;
}

json cmd_search(const Common& c, const std::string& trace_path, bool serial, bool seed_set, bool samples_set) {
  nstab::SearchConfig cfg;
  if (!c.config.empty()) cfg = nstab::search_config_from_json(nstab::read_json_file(c.config));
  if (seed_set) cfg.seed = c.seed;
  if (samples_set) cfg.samples = c.samples;
  if (c.t || c.rho) cfg.t = t_of(c);
  cfg.validate();
  const auto r = nstab::optimize_stability(cfg, exec_mode(serial));
  if (!trace_path.empty()) {
    std::ofstream os(trace_path);
    if (!os) throw std::runtime_error("cannot write " + trace_path);
    os << "iteration,params_hash,objective,std_error,feasible\n";
    for (const auto& tp : r.trace)
      os << tp.iteration << ',' << nstab::params_hash(tp.params) << ',' << nstab::format_double(tp.objective)
         << ',' << nstab::format_double(tp.std_error) << ',' << (tp.feasible ? 1 : 0) << '\n';
  }
  json out = {{"config", nstab::to_json(cfg)}, {"result", nstab::to_json(r)}};
  if (!r.feasible) g_soft_failure = "no candidate met the measure constraint within the budget";
  return out;
}

json cmd_ncd(const Common& c, const std::string& dist_path, std::size_t k, std::vector<double> mu,
             std::vector<double> nu, double kappa, double delta, std::size_t n_max, std::size_t oracle_n,
             bool serial) {
  const nstab::JointDist P = nstab::joint_from_json(nstab::read_json_file(dist_path));
  if (mu.empty()) mu.assign(k, 1.0 / static_cast<double>(k));
  if (nu.empty()) nu.assign(k, 1.0 / static_cast<double>(k));
  nstab::NcdConfig cfg;
  cfg.k = k;
  cfg.samples = c.samples;
  cfg.seed = c.seed;
  const auto r = nstab::ncd_decide(P, mu, nu, kappa, delta, n_max, cfg, exec_mode(serial));
  json out = {{"verdict", r.feasible ? "feasible" : "not-found"},
              {"achieved", r.achieved},
              {"std_error", r.std_error},
              {"any_feasible_pair", r.any_feasible_pair},
              {"marginals_f", r.marginals_f},
              {"marginals_g", r.marginals_g},
              {"pairs_examined", r.pairs_examined},
              {"note", r.note}};
  if (r.witness)
    out["witness"] = {{"route", r.witness->route}, {"n", r.witness->n},
                      {"f", r.witness->f.description}, {"g", r.witness->g.description}};
  if (oracle_n > 0) {
    const auto o = nstab::ncd_brute_oracle(P, mu, nu, k, oracle_n, delta);
    out["oracle"] = {{"n", oracle_n}, {"value", o.value}, {"feasible", o.feasible}, {"pairs", o.pairs}};
  }
  return out;
}

// ---------------------------------------------------------------------------

// Injects "--key value" pairs from a JSON config ahead of the user's
// arguments, so explicit flags take precedence.
std::vector<std::string> with_config(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  std::string path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") path = args[i + 1];
  if (path.empty()) return args;
  CLI::App* sub = nullptr;
  for (auto* s : app.get_subcommands({})) {
    if (s->get_name() == args[0]) sub = s;
  }
  if (!sub || sub->get_name() == "search") return args;
  const json cfg = nstab::read_json_file(path);
  if (!cfg.is_object()) throw std::invalid_argument("--config must hold a JSON object");
  std::vector<std::string> out{args[0]};
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const std::string name = "--" + it.key();
    if (!sub->get_option_no_throw(name)) {
      std::cerr << "config: ignoring unknown key '" << it.key() << "'\n";
      continue;
    }
    if (it->is_boolean()) {
      if (it->get<bool>()) out.push_back(name);
    } else if (it->is_array()) {
      for (const auto& v : *it) {
        out.push_back(name);
        out.push_back(v.is_string() ? v.get<std::string>() : nstab::format_double(v.get<double>()));
      }
    } else {
      out.push_back(name);
      out.push_back(it->is_string() ? it->get<std::string>()
                    : it->is_number_integer() ? it->dump()
                                              : nstab::format_double(it->get<double>()));
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void emit(const Common& c, const std::string& command, const json& result) {
  nstab::RunManifest m{command, c.config, c.seed, NSTAB_GIT_DESCRIBE, {}};
  std::ostringstream body;
  json doc = result;
  if (c.format == "csv") {
    nstab::write_csv(body, result);
  } else {
    if (c.out.empty()) doc["manifest"] = nstab::to_json(m);
    body << doc.dump(2) << '\n';
  }
  if (c.out.empty()) {
    std::cout << body.str();
    if (c.format == "csv") std::cerr << nstab::to_json(m).dump() << '\n';
    return;
  }
  std::ofstream os(c.out);
  if (!os) throw std::runtime_error("cannot write " + c.out);
  os << body.str();
  m.outputs.push_back(c.out);
  nstab::write_json_file(c.out + ".manifest.json", nstab::to_json(m));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise stability of Gaussian partitions: estimation, rounding, search and correlation tools"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Common common;
  bool serial = false;

  std::string partition, dist, rule = "majority", op = "eigen", other, trace;
  std::size_t count = 20, ell = 64, k = 2, n_max = 2, oracle_n = 0, T = 4;
  unsigned n_cube = 3, k_cube = 2, degree = 4, quad = nstab::kDefaultQuadOrder;
  std::optional<unsigned> round_degree;
  double tol = 0.01, kappa = 0.75, delta = 0.02;
  bool weights_only = false;
  std::vector<double> mu, nu;

  auto* stability = app.add_subcommand("stability", "estimate the noise stability of a partition file");
  stability->add_option("--partition", partition, "partition JSON")->required();

  auto* borell = app.add_subcommand("borell-check", "random two-label partitions against the same-measure halfspace");
  borell->add_option("--count", count, "number of random partitions");

  auto* round = app.add_subcommand("round", "smooth, threshold-round and report the stability change");
  round->add_option("--partition", partition, "partition JSON")->required();
  round->add_option("--tol", tol, "l1 tolerance of the measure matching");
  round->add_option("--degree", round_degree, "also extract a PTF of this degree from the expansion");

  auto* hermite = app.add_subcommand("hermite", "Hermite expansion and spectral weights of a partition");
  hermite->add_option("--partition", partition, "partition JSON")->required();
  hermite->add_option("--degree", degree, "maximum stored total degree");
  hermite->add_option("--quad", quad, "Gauss-Hermite order per axis");
  hermite->add_flag("--weights", weights_only, "omit the coefficient list");

  auto* tensor = app.add_subcommand("tensor", "eigenregularity, products, variance bounds and lifts of polynomials");
  tensor->add_option("--poly", partition, "polynomial JSON")->required();
  tensor->add_option("--op", op, "eigen, product, variance or lift")
      ->check(CLI::IsMember({"eigen", "product", "variance", "lift"}));
  tensor->add_option("--other", other, "second polynomial JSON");
  tensor->add_option("--T", T, "block size of the multilinear lift")->check(CLI::PositiveNumber);

  auto* basis = app.add_subcommand("basis", "maximal-correlation basis of a joint distribution");
  basis->add_option("--dist", dist, "joint distribution JSON")->required();

  auto* simulate = app.add_subcommand("simulate", "block strategies on a correlated source");
  simulate->add_option("--dist", dist, "joint distribution JSON")->required();
  simulate->add_option("--ell", ell, "symbols per block")->check(CLI::PositiveNumber);
  simulate->add_option("--partition", partition, "one-dimensional Gaussian partition (median halfspace by default)");

  auto* cube = app.add_subcommand("cube", "voting-rule stability and influences on the cube");
  cube->add_option("--rule", rule, "dictator, majority, plurality, slab-embedding or parity");
  cube->add_option("--n", n_cube, "number of voters");
  cube->add_option("--k", k_cube, "number of labels");

  auto* search = app.add_subcommand("search", "maximize noise stability over a PTF family");
  search->add_option("--trace", trace, "CSV file for the search trace");

  auto* ncd = app.add_subcommand("ncd", "non-interactive correlation decider and exhaustive oracle");
  ncd->add_option("--dist", dist, "joint distribution JSON")->required();
  ncd->add_option("--k", k, "number of labels");
  ncd->add_option("--mu", mu, "target marginal of the first party");
  ncd->add_option("--nu", nu, "target marginal of the second party");
  ncd->add_option("--kappa", kappa, "agreement target");
  ncd->add_option("--delta", delta, "slack");
  ncd->add_option("--n-max", n_max, "largest block length searched");
  ncd->add_option("--oracle-n", oracle_n, "also run the exhaustive oracle at this n (1 or 2)");

  for (auto* s : {stability, borell, round, hermite, tensor, basis, simulate, cube, search, ncd}) {
    add_common(s, common);
    s->add_flag("--serial", serial, "run the serial reference path");
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = with_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    json result;
    if (name == "stability") result = cmd_stability(common, partition, serial);
    else if (name == "borell-check") result = cmd_borell(common, count, serial);
    else if (name == "round") result = cmd_round(common, partition, tol, round_degree, serial);
    else if (name == "hermite") result = cmd_hermite(common, partition, degree, quad, weights_only, serial);
    else if (name == "tensor") result = cmd_tensor(partition, op, other, T);
    else if (name == "basis")
      result = nstab::to_json(nstab::correlation_basis(nstab::joint_from_json(nstab::read_json_file(dist))));
    else if (name == "simulate") result = cmd_simulate(common, dist, ell, partition, serial);
    else if (name == "cube") result = cmd_cube(common, rule, n_cube, k_cube);
    else if (name == "search") {
      result = cmd_search(common, trace, serial, sub->count("--seed") > 0, sub->count("--samples") > 0);
      common.seed = result["config"]["seed"].get<std::uint64_t>();  // the config file may set it
    }
    else result = cmd_ncd(common, dist, k, mu, nu, kappa, delta, n_max, oracle_n, serial);
    emit(common, name, result);
    if (!g_soft_failure.empty()) {
      std::cerr << "numeric failure: " << g_soft_failure << '\n';
      return 3;
    }
    return 0;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  }
}
