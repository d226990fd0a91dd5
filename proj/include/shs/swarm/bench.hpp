#pragma once

#include "shs/swarm/config.hpp"

namespace shs {

/// Large sparse collective for throughput runs: identical one-mode OU agents
/// in d dimensions with an Erdos-Renyi coupling graph.
inline ScenarioConfig benchmark_scenario(std::size_t n, double mean_degree, std::uint64_t seed, double dt = 1e-3,
                                         double horizon = 10.0, std::size_t d = 1) {
  ScenarioConfig cfg;
  cfg.n_agents = n;
  cfg.dim = d;
  cfg.seed = seed;
  cfg.numerics.dt = dt;
  cfg.numerics.horizon = horizon;
  cfg.numerics.stride = 1000;
  cfg.numerics.max_jumps = 100 * n + 1000;
  AgentSpec a;
  a.dim = d;
  a.modes.push_back({"ou", VectorField::ou(1.0, Vec(d, 1.5)), Diffusion::scalar(d, 0.4)});
  a.initial = ResetKernel::uniform({0}, Vec(d, -0.2), Vec(d, 0.2));
  a.guard.k = 0.5;
  a.guard.reset = ResetKernel::uniform({0}, Vec(d, 0.8), Vec(d, 1.2));
  for (std::size_t i = 0; i < n; ++i) {
    a.id = i;
    cfg.agents.push_back(a);
  }
  cfg.random_graph = RandomGraph{mean_degree, 0.05, 0.2};
  cfg.coupling = CouplingSpec(n, d, 0.1, materialize_random_graph(*cfg.random_graph, n, d, seed));
  return cfg;
}

}  // namespace shs
