#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "shs/core/error.hpp"
#include "shs/swarm/config.hpp"

namespace shs {

/// Link from an output agent of the upstream collective to an input agent
/// of the downstream one (indices within their own scenarios).
struct Wire {
  std::size_t output_agent = 0;
  std::size_t input_agent = 0;
  Vec weight;
};

/// Sequential composition: a's agents followed by b's, block-diagonal
/// coupling plus the one-way wires from a to b. Numerics and seed come from
/// `a`. b's ids are shifted past a's when the two id sets overlap.
inline ScenarioConfig compose_collectives(const ScenarioConfig& a, const ScenarioConfig& b,
                                          const std::vector<Wire>& wiring) {
  if (a.dim != b.dim) throw DimensionMismatch("compose: collectives have different dimensions");
  if (a.coupling.threshold() != b.coupling.threshold())
    throw Error("compose: collectives use different interaction thresholds");
  for (const auto& w : wiring) {
    if (w.output_agent >= a.n_agents) throw UnknownAgent("compose: wire from unknown agent " + std::to_string(w.output_agent));
    if (w.input_agent >= b.n_agents) throw UnknownAgent("compose: wire to unknown agent " + std::to_string(w.input_agent));
    if (w.weight.size() != a.dim) throw DimensionMismatch("compose: wire weight dimension differs from d");
  }

  ScenarioConfig out;
  out.n_agents = a.n_agents + b.n_agents;
  out.dim = a.dim;
  out.numerics = a.numerics;
  out.seed = a.seed;
  out.agents = a.agents;

  std::set<std::uint64_t> ids;
  std::uint64_t max_id = 0;
  for (const auto& ag : a.agents) {
    ids.insert(ag.id);
    max_id = std::max(max_id, ag.id);
  }
  const bool overlap = std::any_of(b.agents.begin(), b.agents.end(), [&](const AgentSpec& s) { return ids.count(s.id) > 0; });
  for (auto ag : b.agents) {
    if (overlap) ag.id += max_id + 1;
    out.agents.push_back(std::move(ag));
  }

  std::vector<CouplingEdge> edges = a.coupling.edges();
  for (auto e : b.coupling.edges()) {
    e.to += a.n_agents;
    e.from += a.n_agents;
    edges.push_back(std::move(e));
  }
  for (const auto& w : wiring) edges.push_back({a.n_agents + w.input_agent, w.output_agent, w.weight});
  out.coupling = CouplingSpec(out.n_agents, out.dim, a.coupling.threshold(), std::move(edges));
  return out;
}

}  // namespace shs
