#include "nstab/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace nstab {

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("json: missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

json to_json(const HermiteExpansion& e) {
  json entries = json::array();
  for (const auto& [idx, c] : e.coefficients) entries.push_back({{"index", idx.entries}, {"coeff", c}});
  return {{"n", e.n},
          {"k", e.k},
          {"max_degree", e.max_degree},
          {"quad_order", e.quad_order},
          {"quadrature_mass", e.quadrature_mass},
          {"tail_by_degree", e.tail_by_degree},
          {"entries", entries}};
}

HermiteExpansion expansion_from_json(const json& j) {
  HermiteExpansion e;
  e.n = field(j, "n").get<std::size_t>();
  e.k = field(j, "k").get<std::size_t>();
  e.max_degree = field(j, "max_degree").get<unsigned>();
  e.quad_order = j.value("quad_order", 0u);
  e.quadrature_mass = j.value("quadrature_mass", 0.0);
  e.tail_by_degree = j.value("tail_by_degree", std::vector<double>{});
  for (const auto& entry : field(j, "entries")) {
    HermiteIndex idx{field(entry, "index").get<std::vector<unsigned>>()};
    auto c = field(entry, "coeff").get<std::vector<double>>();
    if (idx.size() != e.n || c.size() != e.k) throw std::invalid_argument("json: expansion entry shape mismatch");
    e.coefficients[idx] = std::move(c);
  }
  return e;
}

json to_json(const SymmetricTensor& t) {
  json entries = json::array();
  for (const auto& [key, v] : t.entries()) entries.push_back({{"multiset", key}, {"value", v}});
  return {{"order", t.order()}, {"dim", t.dim()}, {"entries", entries}};
}

SymmetricTensor tensor_from_json(const json& j) {
  SymmetricTensor t(field(j, "order").get<unsigned>(), field(j, "dim").get<std::size_t>());
  for (const auto& entry : field(j, "entries"))
    t.set(field(entry, "multiset").get<Multiset>(), field(entry, "value").get<double>());
  return t;
}

json to_json(const PolyGauss& p) {
  json chaos = json::array();
  for (const auto& [q, t] : p.chaos) chaos.push_back(to_json(t));
  return {{"dim", p.dim}, {"constant", p.constant}, {"chaos", chaos}};
}

PolyGauss poly_from_json(const json& j) {
  PolyGauss p(field(j, "dim").get<std::size_t>(), j.value("constant", 0.0));
  for (const auto& t : field(j, "chaos")) {
    SymmetricTensor s = tensor_from_json(t);
    if (s.dim() != p.dim) throw std::invalid_argument("json: chaos component dimension mismatch");
    p.add_component(s);
  }
  return p;
}

json to_json(const CubeFn& f) {
  return {{"n", f.n}, {"k", f.k}, {"labels", base64_encode(f.labels)}};
}

CubeFn cube_from_json(const json& j) {
  CubeFn f;
  f.n = field(j, "n").get<unsigned>();
  f.k = field(j, "k").get<unsigned>();
  f.labels = base64_decode(field(j, "labels").get<std::string>());
  f.validate();
  return f;
}

json to_json(const PartitionFn& f) {
  json payload;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Halfspace>) {
          payload = {{"a", v.a}, {"b", v.b}};
        } else if constexpr (std::is_same_v<T, Slabs>) {
          payload = {{"axis", v.axis}, {"breakpoints", v.breakpoints}, {"labels", v.labels}};
        } else if constexpr (std::is_same_v<T, Cells>) {
          payload = {{"breakpoints", v.breakpoints}, {"labels", v.labels}};
        } else if constexpr (std::is_same_v<T, MultiPTF>) {
          json polys = json::array();
          for (const auto& p : v.polys) polys.push_back(to_json(p));
          payload = {{"polys", polys}};
        } else if constexpr (std::is_same_v<T, Tabulated>) {
          payload = to_json(v.table);
        } else {
          throw std::invalid_argument("json: callback partition '" + v.name + "' is not serializable");
        }
      },
      f.variant());
  return {{"kind", f.kind()}, {"k", f.k()}, {"n", f.n()}, {"payload", payload}};
}

PartitionFn partition_from_json(const json& j) {
  const auto kind = field(j, "kind").get<std::string>();
  const auto k = field(j, "k").get<std::size_t>();
  const auto n = field(j, "n").get<std::size_t>();
  const json& p = field(j, "payload");
  if (kind == "halfspace")
    return PartitionFn(Halfspace{field(p, "a").get<std::vector<double>>(), field(p, "b").get<std::vector<double>>()}, k, n);
  if (kind == "slabs")
    return PartitionFn(Slabs{field(p, "axis").get<std::size_t>(), field(p, "breakpoints").get<std::vector<double>>(),
                             field(p, "labels").get<std::vector<unsigned>>()},
                       k, n);
  if (kind == "cells")
    return PartitionFn(Cells{field(p, "breakpoints").get<std::vector<std::vector<double>>>(),
                             field(p, "labels").get<std::vector<unsigned>>()},
                       k, n);
  if (kind == "ptf") {
    MultiPTF m;
    for (const auto& q : field(p, "polys")) m.polys.push_back(poly_from_json(q));
    return PartitionFn(std::move(m), k, n);
  }
  if (kind == "tabulated") return PartitionFn(Tabulated{cube_from_json(p)}, k, n);
  throw std::invalid_argument("json: unknown partition kind '" + kind + "'");
}

json to_json(const JointDist& P) {
  json rows = json::array();
  for (Eigen::Index a = 0; a < P.P.rows(); ++a) {
    std::vector<double> row(static_cast<std::size_t>(P.P.cols()));
    for (Eigen::Index b = 0; b < P.P.cols(); ++b) row[static_cast<std::size_t>(b)] = P.P(a, b);
    rows.push_back(row);
  }
  return {{"A", P.size_a()}, {"B", P.size_b()}, {"rows", rows}};
}

JointDist joint_from_json(const json& j) {
  const auto rows = field(j, "rows").get<std::vector<std::vector<double>>>();
  const auto a = j.value("A", rows.size());
  if (rows.size() != a || rows.empty()) throw std::invalid_argument("json: joint distribution row count");
  const auto b = j.value("B", rows.front().size());
  Eigen::MatrixXd P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < a; ++i) {
    if (rows[i].size() != b) throw std::invalid_argument("json: ragged joint distribution");
    for (std::size_t c = 0; c < b; ++c) P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return JointDist(P);
}

json to_json(const SearchConfig& c) {
  return {{"k", c.k},
          {"n0", c.n0},
          {"d", c.d},
          {"t", c.t},
          {"target_mu", c.target_mu},
          {"measure_tol", c.measure_tol},
          {"budget", c.budget},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"grid", {{"coeff_bound", c.grid.coeff_bound}, {"step", c.grid.step}, {"max_candidates", c.grid.max_candidates}}},
          {"samples", c.samples},
          {"measure_samples", c.measure_samples},
          {"restarts", c.restarts},
          {"initial_step", c.initial_step},
          {"spectral_degree", c.spectral_degree},
          {"polish_rounds", c.polish_rounds}};
}

SearchConfig search_config_from_json(const json& j) {
  SearchConfig c;
  c.k = j.value("k", c.k);
  c.n0 = j.value("n0", c.n0);
  c.d = j.value("d", c.d);
  if (j.contains("rho")) {
    const double rho = j.at("rho").get<double>();
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("json: rho must lie in (0,1)");
    c.t = -std::log(rho);
  }
  c.t = j.value("t", c.t);
  c.target_mu = j.value("target_mu", std::vector<double>(c.k, 1.0 / static_cast<double>(c.k)));
  c.measure_tol = j.value("measure_tol", c.measure_tol);
  c.budget = j.value("budget", c.budget);
  if (j.contains("mode")) c.mode = parse_search_mode(j.at("mode").get<std::string>());
  c.seed = j.value("seed", c.seed);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    c.grid.coeff_bound = g.value("coeff_bound", c.grid.coeff_bound);
    c.grid.step = g.value("step", c.grid.step);
    c.grid.max_candidates = g.value("max_candidates", c.grid.max_candidates);
  }
  c.samples = j.value("samples", c.samples);
  c.measure_samples = j.value("measure_samples", c.measure_samples);
  c.restarts = j.value("restarts", c.restarts);
  c.initial_step = j.value("initial_step", c.initial_step);
  c.spectral_degree = j.value("spectral_degree", c.spectral_degree);
  c.polish_rounds = j.value("polish_rounds", c.polish_rounds);
  c.validate();
  return c;
}

json to_json(const StabEstimate& s) {
  return {{"value", s.value},
          {"std_error", s.std_error},
          {"samples", s.samples},
          {"t", s.t},
          {"rho", s.rho},
          {"seed", s.seed},
          {"per_label", s.per_label},
          {"per_label_std_error", s.per_label_std_error}};
}

json to_json(const MeasureVector& m) {
  return {{"mu", m.mu}, {"std_error", m.std_error}, {"samples", m.samples}};
}

json to_json(const SearchResult& r) {
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"iteration", t.iteration},
                     {"params_hash", params_hash(t.params)},
                     {"objective", t.objective},
                     {"std_error", t.std_error},
                     {"feasible", t.feasible}});
  json best;
  try {
    best = to_json(r.best);
  } catch (const std::invalid_argument&) {
    best = {{"kind", r.best.kind()}, {"k", r.best.k()}, {"n", r.best.n()}, {"payload", nullptr}};
  }
  return {{"best", best},
          {"description", r.description},
          {"best_params", r.best_params},
          {"feasible", r.feasible},
          {"stability", to_json(r.stability)},
          {"measures", to_json(r.measures)},
          {"evaluations", r.evaluations},
          {"trace", trace}};
}

json to_json(const CorrelationBasis& b) {
  auto matrix = [](const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(M.cols()));
      for (Eigen::Index c = 0; c < M.cols(); ++c) row[static_cast<std::size_t>(c)] = M(i, c);
      rows.push_back(row);
    }
    return rows;
  };
  std::vector<double> rho(static_cast<std::size_t>(b.rho.size()));
  for (Eigen::Index i = 0; i < b.rho.size(); ++i) rho[static_cast<std::size_t>(i)] = b.rho[i];
  return {{"rho", rho}, {"X", matrix(b.X)}, {"Y", matrix(b.Y)}, {"maximal_correlation", b.maximal_correlation()}};
}

json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_path", m.config_path},
          {"seed", m.seed},
          {"git_describe", m.git_describe},
          {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.command = field(j, "command").get<std::string>();
  m.config_path = j.value("config_path", std::string{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.git_describe = j.value("git_describe", std::string{});
  m.outputs = j.value("outputs", std::vector<std::string>{});
  return m;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }
  return v.dump();
}

void flatten_into(const json& v, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      flatten_into(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else if (v.is_array() && !v.empty() && !v.front().is_object()) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten_into(v[i], prefix + "." + std::to_string(i), out);
  } else if (v.is_array()) {
    out.emplace_back(prefix, v.empty() ? "" : std::to_string(v.size()) + " records");
  } else {
    out.emplace_back(prefix, csv_cell(v));
  }
}

void write_rows(std::ostream& os, const std::vector<std::vector<std::pair<std::string, std::string>>>& rows) {
  if (rows.empty()) return;
  for (std::size_t i = 0; i < rows.front().size(); ++i) os << (i ? "," : "") << rows.front()[i].first;
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i].second;
    os << '\n';
  }
}

}  // namespace

void write_csv(std::ostream& os, const json& j) {
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  if (j.is_array() && !j.empty() && j.front().is_object()) {
    for (const auto& rec : j) {
      rows.emplace_back();
      flatten_into(rec, "", rows.back());
    }
  } else {
    rows.emplace_back();
    flatten_into(j, "", rows.back());
  }
  write_rows(os, rows);
}

}  // namespace nstab
