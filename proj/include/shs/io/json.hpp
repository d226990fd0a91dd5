#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include "shs/analysis/test_function.hpp"
#include "shs/core/error.hpp"
#include "shs/swarm/config.hpp"

namespace shs::io {

using Json = nlohmann::ordered_json;

namespace json_detail {

/// Reads one JSON object, tracking its path and rejecting keys it never asked for.
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_.contains(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ParseError(at(key) + ": missing");
    return j_.at(key);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError((path_.empty() ? std::string("scenario") : path_) + ": " + what);
  }

  double number(const std::string& key) { return as_number(raw(key), at(key)); }

  std::uint64_t count(const std::string& key) { return as_count(raw(key), at(key)); }
  std::uint64_t count(const std::string& key, std::uint64_t dflt) { return has(key) ? count(key) : dflt; }

  std::string string(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw ParseError(at(key) + ": expected a string");
    return v.get<std::string>();
  }

  Vec vec(const std::string& key) { return as_vec(raw(key), at(key)); }
  Matrix matrix(const std::string& key) { return as_matrix(raw(key), at(key)); }

  Obj object(const std::string& key) { return Obj(raw(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ParseError(at(it.key()) + ": unknown key");
  }

  static double as_number(const Json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    // Non-finite values travel as strings.
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
      if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    }
    throw ParseError(where + ": expected a number");
  }

  static std::uint64_t as_count(const Json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ParseError(where + ": expected a non-negative integer");
  }

  static Vec as_vec(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + ": expected an array of numbers");
    Vec out;
    for (std::size_t r = 0; r < v.size(); ++r) out.push_back(as_number(v[r], where + "[" + std::to_string(r) + "]"));
    return out;
  }

  static Matrix as_matrix(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + ": expected an array of rows");
    Matrix out;
    for (std::size_t r = 0; r < v.size(); ++r) out.push_back(as_vec(v[r], where + "[" + std::to_string(r) + "]"));
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Json number_json(double x) {
  if (std::isfinite(x)) return x;
  return x > 0 ? "inf" : "-inf";
}

inline Json vec_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

inline Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (const auto& row : m) a.push_back(vec_json(row));
  return a;
}

}  // namespace json_detail

// --- catalog ---------------------------------------------------------------------

inline Json to_json(const VectorField& f) {
  using json_detail::matrix_json;
  using json_detail::vec_json;
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantField>) return {{"type", "constant"}, {"c", vec_json(v.c)}};
        else if constexpr (std::is_same_v<T, LinearField>)
          return {{"type", "linear"}, {"a", matrix_json(v.a)}, {"c", vec_json(v.c)}};
        else return {{"type", "ou"}, {"theta", v.theta}, {"mean", vec_json(v.mean)}};
      },
      f.variant());
}

inline VectorField field_from_json(const Json& j, const std::string& path) {
  json_detail::Obj o(j, path);
  const auto type = o.string("type");
  VectorField out = VectorField::zero(1);
  if (type == "constant") out = VectorField::constant(o.vec("c"));
  else if (type == "linear") out = VectorField::linear(o.matrix("a"), o.vec("c"));
  else if (type == "ou") out = VectorField::ou(o.number("theta"), o.vec("mean"));
  else throw ParseError(o.at("type") + ": unknown vector field '" + type + "'");
  o.finish();
  return out;
}

inline Json to_json(const Diffusion& d) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ZeroDiffusion>) return {{"type", "zero"}};
        else return {{"type", "matrix"}, {"sigma", json_detail::matrix_json(v.sigma)}};
      },
      d.variant());
}

inline Diffusion diffusion_from_json(const Json& j, const std::string& path, std::size_t d) {
  json_detail::Obj o(j, path);
  const auto type = o.string("type");
  Diffusion out = Diffusion::zero();
  if (type == "zero") out = Diffusion::zero();
  else if (type == "matrix") out = Diffusion::matrix(o.matrix("sigma"));
  else if (type == "scalar") out = Diffusion::scalar(d, o.number("sigma"));
  else throw ParseError(o.at("type") + ": unknown diffusion '" + type + "'");
  o.finish();
  return out;
}

inline Json to_json(const Rate& r) {
  return std::visit(
      [&](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConstantRate>) return {{"type", "constant"}, {"lambda", v.lambda0}};
        else return {{"type", "affine_norm"}, {"lambda0", v.lambda0}, {"a", v.a}, {"bound", r.bound()}};
      },
      r.variant());
}

inline Rate rate_from_json(const Json& j, const std::string& path) {
  json_detail::Obj o(j, path);
  const auto type = o.string("type");
  Rate out;
  if (type == "constant") out = Rate::constant(o.number("lambda"));
  else if (type == "affine_norm") out = Rate::affine_norm(o.number("lambda0"), o.number("a"), o.number("bound"));
  else throw ParseError(o.at("type") + ": unknown rate '" + type + "'");
  o.finish();
  return out;
}

inline Json to_json(const ResetKernel& k) {
  using json_detail::matrix_json;
  using json_detail::vec_json;
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PointMass>)
          return {{"type", "point"}, {"mode", v.target.mode.value}, {"position", vec_json(v.target.position)}};
        else if constexpr (std::is_same_v<T, UniformBox>)
          return {{"type", "uniform"}, {"mode", v.mode.value}, {"lo", vec_json(v.lo)}, {"hi", vec_json(v.hi)}};
        else
          return {{"type", "gaussian"},  {"mode", v.mode.value}, {"mean", vec_json(v.mean)},
                  {"covariance", matrix_json(v.covariance)}, {"lo", vec_json(v.lo)}, {"hi", vec_json(v.hi)}};
      },
      k.variant());
}

inline ResetKernel kernel_from_json(const Json& j, const std::string& path) {
  json_detail::Obj o(j, path);
  const auto type = o.string("type");
  const ModeId mode{static_cast<int>(o.count("mode", 0))};
  ResetKernel out = ResetKernel::point(mode, {0.0});
  if (type == "point") {
    out = ResetKernel::point(mode, o.vec("position"));
  } else if (type == "uniform") {
    out = ResetKernel::uniform(mode, o.vec("lo"), o.vec("hi"));
  } else if (type == "gaussian") {
    auto mean = o.vec("mean");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const Vec lo = o.has("lo") ? o.vec("lo") : Vec(mean.size(), -inf);
    const Vec hi = o.has("hi") ? o.vec("hi") : Vec(mean.size(), inf);
    auto cov = o.matrix("covariance");
    out = ResetKernel::gaussian(mode, std::move(mean), std::move(cov), lo, hi);
  } else {
    throw ParseError(o.at("type") + ": unknown kernel '" + type + "'");
  }
  o.finish();
  return out;
}

// --- scenario ------------------------------------------------------------------

namespace json_detail {

inline Json agent_json(const AgentSpec& a) {
  Json modes = Json::array();
  for (const auto& m : a.modes)
    modes.push_back({{"label", m.label}, {"drift", to_json(m.drift)}, {"diffusion", to_json(m.diffusion)}});
  Json guard = {{"k", a.guard.k}, {"reset", to_json(a.guard.reset)}};
  if (a.guard.field) guard["field"] = to_json(*a.guard.field);
  Json out = {{"id", a.id}, {"modes", modes}, {"initial", to_json(a.initial)}, {"guard", guard}};
  if (!a.transition_weights.empty()) out["transition_weights"] = vec_json(a.transition_weights);
  if (a.abstract_rate) out["abstract_rate"] = to_json(*a.abstract_rate);
  return out;
}

inline AgentSpec agent_from_json(const Json& j, const std::string& path, std::size_t d) {
  Obj o(j, path);
  AgentSpec a;
  a.id = o.count("id");
  a.dim = d;
  const auto& modes = o.raw("modes");
  if (!modes.is_array() || modes.empty()) throw ParseError(o.at("modes") + ": expected a non-empty array");
  for (std::size_t q = 0; q < modes.size(); ++q) {
    Obj m(modes[q], o.at("modes") + "[" + std::to_string(q) + "]");
    AgentMode mode;
    mode.label = m.has("label") ? m.string("label") : "q" + std::to_string(q);
    mode.drift = field_from_json(m.raw("drift"), m.at("drift"));
    mode.diffusion = m.has("diffusion") ? diffusion_from_json(m.raw("diffusion"), m.at("diffusion"), d) : Diffusion::zero();
    m.finish();
    a.modes.push_back(std::move(mode));
  }
  a.initial = kernel_from_json(o.raw("initial"), o.at("initial"));
  Obj g = o.object("guard");
  a.guard.k = g.number("k");
  a.guard.reset = kernel_from_json(g.raw("reset"), g.at("reset"));
  if (g.has("field")) a.guard.field = field_from_json(g.raw("field"), g.at("field"));
  g.finish();
  if (o.has("transition_weights")) {
    const Vec w = o.vec("transition_weights");
    a.transition_weights.assign(w.begin(), w.end());
  }
  if (o.has("abstract_rate")) a.abstract_rate = rate_from_json(o.raw("abstract_rate"), o.at("abstract_rate"));
  o.finish();
  return a;
}

/// A coupling weight is either one number (every component) or a d-vector.
inline Vec weight_from_json(const Json& v, const std::string& where, std::size_t d) {
  if (v.is_array()) return Obj::as_vec(v, where);
  return Vec(d, Obj::as_number(v, where));
}

inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace json_detail

/// Builds and validates a scenario from parsed JSON. Structural problems
/// raise ParseError naming the field; invariant violations are collected
/// into one ValidationError.
inline ScenarioConfig scenario_from_json(const Json& j) {
  using json_detail::Obj;
  Obj o(j, "");
  ScenarioConfig cfg;
  cfg.n_agents = o.count("n_agents");
  cfg.dim = o.count("dim", 1);
  const std::size_t n = cfg.n_agents, d = cfg.dim;
  if (d == 0) throw ValidationError({"dim must be at least 1"});
  const double threshold = o.number("threshold");
  cfg.seed = o.count("seed", 0);

  if (o.has("numerics")) {
    Obj num = o.object("numerics");
    if (num.has("dt")) cfg.numerics.dt = num.number("dt");
    if (num.has("horizon")) cfg.numerics.horizon = num.number("horizon");
    cfg.numerics.stride = num.count("stride", cfg.numerics.stride);
    cfg.numerics.max_jumps = num.count("max_jumps", cfg.numerics.max_jumps);
    num.finish();
  }

  const auto& agents = o.raw("agents");
  if (!agents.is_array() || agents.empty()) throw ParseError("agents: expected a non-empty array");
  if (agents.size() == 1 && n > 1) {
    // One entry serves as a template; copies take consecutive ids.
    const auto base = json_detail::agent_from_json(agents[0], "agents[0]", d);
    for (std::size_t i = 0; i < n; ++i) {
      auto a = base;
      a.id = base.id + i;
      cfg.agents.push_back(std::move(a));
    }
  } else {
    for (std::size_t i = 0; i < agents.size(); ++i)
      cfg.agents.push_back(json_detail::agent_from_json(agents[i], "agents[" + std::to_string(i) + "]", d));
  }

  std::vector<std::string> problems;
  std::vector<CouplingEdge> edges;
  if (o.has("coupling")) {
    Obj c = o.object("coupling");
    int forms = 0;
    if (c.has("weights")) {
      ++forms;
      const auto& rows = c.raw("weights");
      if (!rows.is_array()) throw ParseError("coupling.weights: expected an array of rows");
      if (rows.size() != n)
        problems.push_back("coupling.weights: expected " + std::to_string(n) + " rows, got " +
                           std::to_string(rows.size()));
      for (std::size_t to = 0; to < rows.size(); ++to) {
        const std::string where = "coupling.weights[" + std::to_string(to) + "]";
        if (!rows[to].is_array()) throw ParseError(where + ": expected an array");
        if (rows[to].size() != n) {
          problems.push_back(where + ": row has " + std::to_string(rows[to].size()) + " entries, expected " +
                             std::to_string(n));
          continue;
        }
        for (std::size_t from = 0; from < n; ++from) {
          auto w = json_detail::weight_from_json(rows[to][from], where + "[" + std::to_string(from) + "]", d);
          if (std::any_of(w.begin(), w.end(), [](double x) { return x != 0.0; })) edges.push_back({to, from, w});
        }
      }
    }
    if (c.has("edges")) {
      ++forms;
      const auto& list = c.raw("edges");
      if (!list.is_array()) throw ParseError("coupling.edges: expected an array");
      for (std::size_t e = 0; e < list.size(); ++e) {
        Obj edge(list[e], "coupling.edges[" + std::to_string(e) + "]");
        const auto to = edge.count("to"), from = edge.count("from");
        edges.push_back({to, from, json_detail::weight_from_json(edge.raw("weight"), edge.at("weight"), d)});
        edge.finish();
      }
    }
    if (c.has("random_graph")) {
      ++forms;
      Obj g = c.object("random_graph");
      RandomGraph rg;
      rg.mean_degree = g.number("mean_degree");
      rg.weight_lo = g.number("weight_lo");
      rg.weight_hi = g.number("weight_hi");
      g.finish();
      cfg.random_graph = rg;
    }
    c.finish();
    if (forms > 1) throw ParseError("coupling: give exactly one of weights, edges, random_graph");
  }
  o.finish();

  if (cfg.random_graph && cfg.random_graph->mean_degree >= 0.0 && cfg.random_graph->weight_lo >= 0.0 &&
      cfg.random_graph->weight_lo <= cfg.random_graph->weight_hi)
    edges = materialize_random_graph(*cfg.random_graph, n, d, cfg.seed);
  cfg.coupling = CouplingSpec(n, d, threshold, std::move(edges));

  for (auto& p : cfg.problems()) problems.push_back(std::move(p));
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return cfg;
}

inline ScenarioConfig parse_scenario(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = json_detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": malformed JSON");
  }
  return scenario_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_scenario(const std::string& path) {
  const auto text = read_file(path);
  try {
    return parse_scenario(text);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Canonical form: every agent listed, defaults spelled out, coupling as an
/// explicit edge list unless it came from a random graph.
inline Json scenario_to_json(const ScenarioConfig& cfg) {
  Json agents = Json::array();
  for (const auto& a : cfg.agents) agents.push_back(json_detail::agent_json(a));
  Json coupling;
  if (cfg.random_graph) {
    coupling["random_graph"] = {{"mean_degree", cfg.random_graph->mean_degree},
                                {"weight_lo", cfg.random_graph->weight_lo},
                                {"weight_hi", cfg.random_graph->weight_hi}};
  } else {
    Json edges = Json::array();
    for (const auto& e : cfg.coupling.edges())
      edges.push_back({{"to", e.to}, {"from", e.from}, {"weight", json_detail::vec_json(e.weight)}});
    coupling["edges"] = edges;
  }
  return {{"n_agents", cfg.n_agents},
          {"dim", cfg.dim},
          {"threshold", cfg.coupling.threshold()},
          {"seed", cfg.seed},
          {"numerics",
           {{"dt", cfg.numerics.dt},
            {"horizon", cfg.numerics.horizon},
            {"stride", cfg.numerics.stride},
            {"max_jumps", cfg.numerics.max_jumps}}},
          {"agents", agents},
          {"coupling", coupling}};
}

inline std::string serialize_scenario(const ScenarioConfig& cfg, int indent = 2) {
  return scenario_to_json(cfg).dump(indent) + (indent >= 0 ? "\n" : "");
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hex FNV-1a of the compact canonical serialization.
inline std::string config_digest(const ScenarioConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_scenario(cfg, -1))));
  return buf;
}

}  // namespace shs::io
