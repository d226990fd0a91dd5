#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shs/agent/agent.hpp"
#include "shs/agent/coupling.hpp"
#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"

namespace shs {

struct Numerics {
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t stride = 1;
  std::size_t max_jumps = 1000000;
  friend bool operator==(const Numerics&, const Numerics&) = default;
};

/// Erdos-Renyi coupling: each ordered pair is linked with probability
/// mean_degree / (N - 1); magnitudes are uniform on [weight_lo, weight_hi]
/// and spread evenly over the d components.
struct RandomGraph {
  double mean_degree = 0.0;
  double weight_lo = 0.0;
  double weight_hi = 0.0;
  friend bool operator==(const RandomGraph&, const RandomGraph&) = default;
};

struct ScenarioConfig {
  std::size_t n_agents = 0;
  std::size_t dim = 1;
  std::vector<AgentSpec> agents;
  CouplingSpec coupling;
  /// When set, `coupling` holds the materialised graph.
  std::optional<RandomGraph> random_graph;
  Numerics numerics;
  std::uint64_t seed = 0;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (n_agents < 1) out.emplace_back("n_agents must be at least 1");
    if (dim < 1) out.emplace_back("dim must be at least 1");
    if (agents.size() != n_agents)
      out.push_back("expected " + std::to_string(n_agents) + " agents, got " + std::to_string(agents.size()));
    std::set<std::uint64_t> ids;
    for (const auto& a : agents) {
      if (!ids.insert(a.id).second) out.push_back("duplicate agent id " + std::to_string(a.id));
      if (a.dim != dim) out.push_back("agent " + std::to_string(a.id) + " has dimension " + std::to_string(a.dim) +
                                      " but dim is " + std::to_string(dim));
      for (auto& p : a.problems()) out.push_back(std::move(p));
    }
    if (coupling.size() != n_agents) out.emplace_back("coupling table must be N x N");
    if (coupling.dim() != dim) out.emplace_back("coupling weights must have dimension dim");
    for (auto& p : coupling.problems()) out.push_back(std::move(p));
    if (!(numerics.dt > 0.0)) out.emplace_back("numerics.dt must be positive");
    if (!(numerics.horizon > 0.0)) out.emplace_back("numerics.horizon must be positive");
    if (numerics.stride < 1) out.emplace_back("numerics.stride must be at least 1");
    if (numerics.max_jumps < 1) out.emplace_back("numerics.max_jumps must be at least 1");
    if (random_graph) {
      if (!(random_graph->mean_degree >= 0.0)) out.emplace_back("random_graph.mean_degree must be non-negative");
      if (!(random_graph->weight_lo <= random_graph->weight_hi) || random_graph->weight_lo < 0.0)
        out.emplace_back("random_graph needs 0 <= weight_lo <= weight_hi");
    }
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ValidationError(std::move(p));
  }

  std::size_t index_of(std::uint64_t id) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].id == id) return i;
    throw UnknownAgent("no agent with id " + std::to_string(id));
  }
};

/// Deterministic sparse Erdos-Renyi edges drawn from the master seed.
inline std::vector<CouplingEdge> materialize_random_graph(const RandomGraph& g, std::size_t n, std::size_t d,
                                                          std::uint64_t seed) {
  std::vector<CouplingEdge> edges;
  if (n < 2 || g.mean_degree <= 0.0) return edges;
  const double p = std::min(1.0, g.mean_degree / static_cast<double>(n - 1));
  RandomStream rng(splitmix64(seed ^ 0xC0FFEE5EED5EEDULL));
  const double spread = 1.0 / std::sqrt(static_cast<double>(d));
  edges.reserve(static_cast<std::size_t>(g.mean_degree * static_cast<double>(n) * 1.1));
  for (std::size_t to = 0; to < n; ++to) {
    // Geometric skips over the n - 1 candidate senders.
    std::size_t pos = 0;
    for (;;) {
      if (p < 1.0) {
        const double skip = std::floor(std::log(rng.uniform_open()) / std::log1p(-p));
        if (skip >= static_cast<double>(n - 1 - pos)) break;
        pos += static_cast<std::size_t>(skip);
      }
      if (pos >= n - 1) break;
      const std::size_t from = pos < to ? pos : pos + 1;
      const double mag = rng.uniform(g.weight_lo, g.weight_hi);
      edges.push_back({to, from, Vec(d, mag * spread)});
      ++pos;
    }
  }
  return edges;
}

}  // namespace shs
