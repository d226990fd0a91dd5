// Small scenario builders shared by the test suites.
#pragma once

#include <cmath>
#include <vector>

#include "shs/agent/agent.hpp"
#include "shs/analysis/abstraction_model.hpp"
#include "shs/hybrid/process.hpp"
#include "shs/core/rng.hpp"
#include "shs/swarm/config.hpp"

namespace shs::testing {

/// One-mode, one-dimensional agent: dz = drift dt + sigma dW, barrier gamma e^{-k t}.
inline AgentSpec scalar_agent(std::uint64_t id, double drift, double sigma, ResetKernel z0, ResetKernel gamma,
                              double k) {
  AgentSpec a;
  a.id = id;
  a.dim = 1;
  a.modes.push_back({"coord", VectorField::constant({drift}),
                     sigma == 0.0 ? Diffusion::zero() : Diffusion::scalar(1, sigma)});
  a.initial = std::move(z0);
  a.guard.k = k;
  a.guard.reset = std::move(gamma);
  return a;
}

/// Two-mode OU agent with a uniformly drawn guard, used for generic scenarios.
inline AgentSpec ou_agent(std::uint64_t id, double theta, double mean, double sigma, double k) {
  AgentSpec a;
  a.id = id;
  a.dim = 1;
  a.modes.push_back({"navigate", VectorField::ou(theta, {mean}), Diffusion::scalar(1, sigma)});
  a.modes.push_back({"rest", VectorField::ou(theta, {0.5 * mean}), Diffusion::scalar(1, sigma)});
  a.initial = ResetKernel::uniform({0}, {-0.2}, {0.2});
  a.guard.k = k;
  a.guard.reset = ResetKernel::uniform({0}, {0.8}, {1.2});
  return a;
}

inline ScenarioConfig scenario(std::vector<AgentSpec> agents, std::vector<CouplingEdge> edges, double threshold,
                               double dt, double horizon, std::uint64_t seed, std::size_t stride = 1) {
  ScenarioConfig c;
  c.n_agents = agents.size();
  c.dim = agents.empty() ? 1 : agents.front().dim;
  c.agents = std::move(agents);
  c.coupling = CouplingSpec(c.n_agents, c.dim, threshold, std::move(edges));
  c.numerics.dt = dt;
  c.numerics.horizon = horizon;
  c.numerics.stride = stride;
  c.numerics.max_jumps = 100000;
  c.seed = seed;
  return c;
}

/// A small randomly drawn coupled collective with frequent jumps.
inline ScenarioConfig random_scenario(std::uint64_t seed, std::size_t max_agents = 10) {
  RandomStream rng(splitmix64(seed));
  const auto n = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_agents - 1));
  const std::size_t d = rng.uniform() < 0.3 ? 2 : 1;
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < n; ++i) {
    AgentSpec a;
    a.id = 10 * i + 3;
    a.dim = d;
    const Vec drift(d, rng.uniform(0.3, 1.5));
    a.modes.push_back({"a", VectorField::constant(drift), Diffusion::scalar(d, rng.uniform(0.1, 0.8))});
    a.modes.push_back({"b", VectorField::ou(rng.uniform(0.5, 2.0), Vec(d, 2.0)), Diffusion::scalar(d, 0.3)});
    a.initial = ResetKernel::uniform({0}, Vec(d, -0.3), Vec(d, 0.3));
    a.guard.k = rng.uniform(0.0, 0.6);
    a.guard.reset = ResetKernel::uniform({0}, Vec(d, 0.6), Vec(d, 1.4));
    agents.push_back(std::move(a));
  }
  std::vector<CouplingEdge> edges;
  for (std::size_t to = 0; to < n; ++to)
    for (std::size_t from = 0; from < n; ++from)
      if (to != from && rng.uniform() < 0.5) {
        Vec w(d);
        for (auto& x : w) x = rng.uniform(-0.4, 0.6);
        edges.push_back({to, from, w});
      }
  return scenario(std::move(agents), std::move(edges), 0.1, 1e-3, 4.0, seed, 7);
}

/// One abstract agent with guard kernel uniform on [lo, hi] and constant rate.
inline AbstractionModel single_abstract_agent(double k, double lambda, std::uint64_t seed, double lo = 0.5,
                                              double hi = 1.5) {
  AbstractionModel m;
  m.layout = Layout::abstraction(1, 1);
  m.agents.push_back({0, k, std::nullopt, ResetKernel::uniform({0}, {lo}, {hi}), Rate::constant(lambda)});
  m.seed = seed;
  return m;
}

inline PdmpSpec one_mode_pdmp(VectorField field, Rate rate, ResetKernel reset, Box domain = Box::unbounded(1)) {
  PdmpSpec s;
  s.modes.push_back({"m0", std::move(field), std::move(domain), Diffusion::zero()});
  s.rate = std::move(rate);
  s.reset = std::move(reset);
  return s;
}

}  // namespace shs::testing
