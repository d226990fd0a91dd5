#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "shs/swarm/abstraction.hpp"
#include "shs/swarm/compose.hpp"
#include "shs/swarm/simulate.hpp"

namespace {

using namespace shs;
using shs::testing::random_scenario;
using shs::testing::scalar_agent;
using shs::testing::scenario;

// One agent's slice of a trace, independent of its index and recipients.
struct AgentView {
  std::vector<int> mode;
  std::vector<double> z, beta, upsilon;
  std::vector<std::tuple<double, std::uint64_t, Vec, Vec, Vec, int>> jumps;
  friend bool operator==(const AgentView&, const AgentView&) = default;
};

AgentView view(const SwarmTrace& tr, std::size_t i) {
  AgentView v;
  for (std::size_t m = 0; m < tr.samples(); ++m) {
    v.mode.push_back(tr.mode_at(m, i));
    auto z = tr.z_at(m, i), b = tr.beta_at(m, i);
    v.z.insert(v.z.end(), z.begin(), z.end());
    v.beta.insert(v.beta.end(), b.begin(), b.end());
    v.upsilon.push_back(tr.upsilon_at(m, i));
  }
  for (const auto& j : tr.jumps)
    if (j.agent == i) v.jumps.emplace_back(j.time, j.agent_id, j.pre_z, j.post_z, j.post_gamma, j.post_mode.value);
  return v;
}

ScenarioConfig pair(double w21, double k, std::uint64_t seed, double horizon = 20.0) {
  // Upstream agent 0 drives downstream agent 1 through w21 (one way).
  auto a0 = scalar_agent(0, 1.0, 0.3, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {0.8}, {1.2}), k);
  auto a1 = scalar_agent(1, 0.5, 0.3, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {0.8}, {1.2}), k);
  std::vector<CouplingEdge> edges;
  if (w21 != 0.0) edges.push_back({1, 0, {w21}});
  return scenario({a0, a1}, edges, 0.1, 1e-2, horizon, seed);
}

double mean_interjump(const std::vector<double>& t) {
  if (t.size() < 2) return std::nan("");
  return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

// --- simulate_swarm --------------------------------------------------------------

TEST(SimulateSwarm, SingleAgentReducesToStepLoop) {
  auto a = scalar_agent(7, 0.9, 0.4, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {0.5}, {1.5}), 0.2);
  const auto cfg = scenario({a}, {}, 0.1, 1e-3, 5.0, 99);
  const auto tr = simulate_swarm(cfg);

  RandomStream rng(SeedPolicy{99}.stream(7, 0));
  auto st = init_agent(a, cfg.coupling, 0, rng);
  AgentStep step;
  std::vector<AgentJump> jumps;
  ASSERT_EQ(tr.samples(), 5001u);
  for (std::size_t k = 0; k < 5000; ++k) {
    const double t0 = static_cast<double>(k) * 1e-3;
    if (auto j = step_agent(st, a, step, {}, t0, step_end(cfg.numerics, k, 5000) - t0, rng)) jumps.push_back(*j);
    ASSERT_EQ(tr.z_at(k + 1, 0)[0], st.z[0]);
    ASSERT_EQ(tr.beta_at(k + 1, 0)[0], st.beta[0]);
  }
  ASSERT_EQ(jumps.size(), tr.jumps.size());
  ASSERT_GT(jumps.size(), 2u);
  for (std::size_t r = 0; r < jumps.size(); ++r) {
    EXPECT_EQ(jumps[r].time, tr.jumps[r].time);
    EXPECT_EQ(jumps[r].post_gamma, tr.jumps[r].post_gamma);
  }
}

TEST(SimulateSwarm, ZeroWeightsDecouple) {
  const auto both = simulate_swarm(pair(0.0, 0.3, 5));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto full = pair(0.0, 0.3, 5);
    const auto alone = scenario({full.agents[i]}, {}, 0.1, 1e-2, 20.0, 5);
    EXPECT_EQ(view(both, i), view(simulate_swarm(alone), 0));
  }
}

TEST(SimulateSwarm, StrongCouplingSpeedsUpDownstream) {
  std::vector<double> diff;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const double coupled = mean_interjump(simulate_swarm(pair(0.6, 0.3, 11), r).jump_times(1));
    const double alone = mean_interjump(simulate_swarm(pair(0.0, 0.3, 11), r).jump_times(1));
    diff.push_back(alone - coupled);
  }
  const auto ms = shs::testing::mean_se(diff);
  EXPECT_GT(ms.mean, 3.0 * ms.se) << ms.mean << " +- " << ms.se;
}

TEST(SimulateSwarm, Deterministic) {
  const auto cfg = random_scenario(3);
  EXPECT_EQ(simulate_swarm(cfg), simulate_swarm(cfg));
  EXPECT_NE(simulate_swarm(cfg, 0).jumps, simulate_swarm(cfg, 1).jumps);
}

TEST(SimulateSwarm, JumpLogOrderingAndOneJumpPerStep) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto cfg = random_scenario(100 + s);
    const auto tr = simulate_swarm(cfg);
    ASSERT_GT(tr.jumps.size(), 5u);
    for (std::size_t r = 1; r < tr.jumps.size(); ++r) {
      const auto& a = tr.jumps[r - 1];
      const auto& b = tr.jumps[r];
      ASSERT_TRUE(std::tie(a.time, a.agent_id) < std::tie(b.time, b.agent_id));
    }
    // Two jumps of one agent strictly inside the same step are never allowed.
    // A re-hit after a mid-step reset waits for the next step's start.
    const double dt = cfg.numerics.dt;
    const auto on_grid = [&](double t) { return std::abs(t / dt - std::round(t / dt)) < 1e-9; };
    for (std::size_t i = 0; i < tr.n; ++i) {
      const auto t = tr.jump_times(i);
      for (std::size_t r = 1; r < t.size(); ++r) {
        ASSERT_LT(t[r - 1], t[r]);
        if (!on_grid(t[r - 1]) && !on_grid(t[r])) {
          ASSERT_NE(std::floor(t[r - 1] / dt), std::floor(t[r] / dt));
        }
      }
    }
  }
}

TEST(SimulateSwarm, PermutationEquivariance) {
  // Bidirectional ring: two neighbours each, so input sums commute exactly.
  std::vector<AgentSpec> agents;
  std::vector<CouplingEdge> edges;
  const std::size_t n = 6;
  for (std::size_t i = 0; i < n; ++i) {
    agents.push_back(scalar_agent(100 + i, 0.6 + 0.1 * static_cast<double>(i), 0.4, ResetKernel::point({0}, {0.0}),
                                  ResetKernel::uniform({0}, {0.7}, {1.3}), 0.25));
    edges.push_back({i, (i + 1) % n, {0.2}});
    edges.push_back({i, (i + n - 1) % n, {0.15}});
  }
  const auto cfg = scenario(agents, edges, 0.1, 1e-3, 6.0, 21);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};  // new index -> old index
  std::vector<std::size_t> inv(n);
  for (std::size_t r = 0; r < n; ++r) inv[perm[r]] = r;
  std::vector<AgentSpec> pa;
  for (std::size_t r = 0; r < n; ++r) pa.push_back(agents[perm[r]]);
  std::vector<CouplingEdge> pe;
  for (const auto& e : edges) pe.push_back({inv[e.to], inv[e.from], e.weight});
  const auto permuted = scenario(pa, pe, 0.1, 1e-3, 6.0, 21);

  const auto a = simulate_swarm(cfg), b = simulate_swarm(permuted);
  ASSERT_GT(a.jumps.size(), 20u);
  for (std::size_t r = 0; r < n; ++r) EXPECT_EQ(view(b, r), view(a, perm[r]));
  ASSERT_EQ(a.jumps.size(), b.jumps.size());
  for (std::size_t r = 0; r < a.jumps.size(); ++r) {
    EXPECT_EQ(a.jumps[r].agent_id, b.jumps[r].agent_id);
    EXPECT_EQ(a.jumps[r].time, b.jumps[r].time);
  }
}

TEST(SimulateSwarm, HitPredicatesAgree) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto cfg = random_scenario(200 + s, 2);
    const auto a = simulate_swarm(cfg, 0, {HitPredicate::CoupledState, false});
    const auto b = simulate_swarm(cfg, 0, {HitPredicate::ModifiedGuard, false});
    ASSERT_FALSE(a.jumps.empty());
    EXPECT_EQ(a.jumps, b.jumps);
  }
}

TEST(SimulateSwarm, ZenoMonitor) {
  // Guard re-drawn at the starting position: every step jumps.
  auto a = scalar_agent(0, 1.0, 0.0, ResetKernel::point({0}, {0.0}), ResetKernel::point({0}, {1e-9}), 0.0);
  auto cfg = scenario({a}, {}, 0.1, 1e-3, 10.0, 1);
  cfg.numerics.max_jumps = 50;
  try {
    simulate_swarm(cfg);
    FAIL() << "expected ZenoSuspected";
  } catch (const ZenoSuspected& e) {
    EXPECT_EQ(e.jumps(), 51);
    EXPECT_NEAR(e.time(), 0.05, 1e-6);
  }
}

TEST(SimulateSwarm, StrideKeepsEveryJump) {
  auto cfg = random_scenario(9);
  const auto fine = simulate_swarm(cfg);
  cfg.numerics.stride = 250;
  const auto coarse = simulate_swarm(cfg);
  EXPECT_EQ(fine.jumps, coarse.jumps);
  EXPECT_EQ(coarse.samples(), 1 + (4000 + 249) / 250);
  EXPECT_EQ(coarse.times.back(), 4.0);
}

// --- abstraction -----------------------------------------------------------------

TEST(Abstraction, SingleAgentWithoutJumps) {
  auto a = scalar_agent(0, 0.0, 0.0, ResetKernel::point({0}, {0.0}), ResetKernel::point({0}, {2.0}), 0.5);
  const auto abs = extract_abstraction(simulate_swarm(scenario({a}, {}, 0.1, 0.01, 3.0, 1)));
  for (std::size_t m = 0; m < abs.samples(); ++m) {
    EXPECT_EQ(abs.tau(m, 0), abs.times[m]);
    EXPECT_NEAR(abs.beta(m, 0)[0], 2.0 * std::exp(-0.5 * abs.times[m]), 1e-12);
  }
  EXPECT_TRUE(reconstruct_jump_times(abs)[0].empty());
  EXPECT_TRUE(reconstruct_jump_times_from_grid(abs)[0].empty());
}

TEST(Abstraction, BetaFollowsGuardLawBetweenJumps) {
  const auto cfg = random_scenario(4);
  const auto tr = simulate_swarm(cfg);
  const auto abs = extract_abstraction(tr);
  for (std::size_t i = 0; i < abs.n; ++i) {
    const auto b0 = tr.beta_at(0, i);
    Vec gamma(b0.begin(), b0.end());
    std::size_t e = 0;
    std::vector<const SwarmJump*> own;
    for (const auto& j : tr.jumps)
      if (j.agent == i) own.push_back(&j);
    for (std::size_t m = 0; m < abs.samples(); ++m) {
      const double t = abs.times[m];
      while (e < own.size() && (own[e]->time < t || (own[e]->time == t && abs.tau(m, i) == 0.0)))
        gamma = own[e++]->post_gamma;
      const auto expected = guard_value(gamma, abs.guard_k[i], abs.tau(m, i));
      for (std::size_t p = 0; p < abs.d; ++p) ASSERT_NEAR(abs.beta(m, i)[p], expected[p], 1e-12);
    }
  }
}

TEST(Abstraction, SelfContainedBetweenSamples) {
  // Where no reset falls between samples, (beta, tau) advance by the guard ODE and unit-slope clocks alone.
  const auto abs = extract_abstraction(simulate_swarm(random_scenario(5)));
  std::vector<std::vector<double>> resets = reconstruct_jump_times(abs);
  for (std::size_t m = 0; m + 1 < abs.samples(); ++m) {
    const double h = abs.times[m + 1] - abs.times[m];
    for (std::size_t i = 0; i < abs.n; ++i) {
      const bool reset = std::any_of(resets[i].begin(), resets[i].end(),
                                     [&](double t) { return t > abs.times[m] && t <= abs.times[m + 1]; });
      if (reset) continue;
      ASSERT_NEAR(abs.tau(m + 1, i), abs.tau(m, i) + h, 1e-12);
      for (std::size_t p = 0; p < abs.d; ++p)
        ASSERT_NEAR(abs.beta(m + 1, i)[p], abs.beta(m, i)[p] * std::exp(-abs.guard_k[i] * h), 1e-12);
    }
  }
}

TEST(Abstraction, RoundTripIsExact) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto cfg = random_scenario(300 + s);
    cfg.numerics.stride = 1;
    const auto tr = simulate_swarm(cfg);
    const auto abs = extract_abstraction(tr);
    const auto rec = reconstruct_jump_times(abs);
    for (std::size_t i = 0; i < tr.n; ++i) ASSERT_EQ(rec[i], tr.jump_times(i));
    // The grid alone agrees up to its resolution.
    const auto grid = reconstruct_jump_times_from_grid(abs);
    for (std::size_t i = 0; i < tr.n; ++i) {
      const auto exact = tr.jump_times(i);
      ASSERT_EQ(grid[i].size(), exact.size());
      for (std::size_t r = 0; r < exact.size(); ++r) ASSERT_NEAR(grid[i][r], exact[r], 1e-9);
    }
  }
}

TEST(Abstraction, ExtractionIsIdempotent) {
  const auto tr = simulate_swarm(random_scenario(6));
  const auto abs = extract_abstraction(tr);
  EXPECT_EQ(abs, extract_abstraction(tr));
  EXPECT_EQ(abs.width(), tr.n * (tr.d + 1));
}

AbstractionTrace hand_built() {
  // One scalar agent with resets at t = 1 and t = 2.5, sampled every 0.5.
  AbstractionTrace abs;
  abs.n = 1;
  abs.d = 1;
  abs.guard_k = {0.0};
  for (int m = 0; m <= 8; ++m) {
    const double t = 0.5 * m;
    const double tau = t < 1.0 ? t : (t < 2.5 ? t - 1.0 : t - 2.5);
    abs.times.push_back(t);
    abs.state.insert(abs.state.end(), {1.0, tau});
  }
  abs.events = {{1.0, 0, {1.0}}, {2.5, 0, {1.0}}};
  return abs;
}

TEST(Abstraction, HandBuiltResets) {
  auto abs = hand_built();
  EXPECT_EQ(reconstruct_jump_times(abs)[0], (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(reconstruct_jump_times_from_grid(abs)[0], (std::vector<double>{1.0, 2.5}));
  abs.events.pop_back();
  EXPECT_THROW(reconstruct_jump_times(abs), CorruptInput);
}

TEST(Abstraction, CorruptClocksDetected) {
  auto abs = hand_built();
  abs.state[2 * 4 + 1] = 0.2;  // clock falls at t = 2 with no reset
  EXPECT_THROW(reconstruct_jump_times(abs), CorruptInput);
  auto fast = hand_built();
  fast.state[2 * 7 + 1] = 3.0;
  EXPECT_THROW(reconstruct_jump_times_from_grid(fast), CorruptInput);
}

// --- composition -----------------------------------------------------------------

ScenarioConfig collective(std::uint64_t first_id, double drift, std::uint64_t seed) {
  std::vector<AgentSpec> agents;
  for (std::uint64_t r = 0; r < 3; ++r)
    agents.push_back(scalar_agent(first_id + r, drift, 0.4, ResetKernel::point({0}, {0.0}),
                                  ResetKernel::uniform({0}, {0.8}, {1.2}), 0.3));
  return scenario(agents, {{1, 0, {0.2}}, {2, 1, {0.2}}}, 0.1, 1e-2, 20.0, seed);
}

TEST(Compose, EmptyWiringKeepsBlocksIndependent) {
  const auto a = collective(0, 1.0, 8), b = collective(50, 0.4, 8);
  const auto both = simulate_swarm(compose_collectives(a, b, {}));
  const auto ta = simulate_swarm(a), tb = simulate_swarm(b);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(view(both, i), view(ta, i));
    EXPECT_EQ(view(both, 3 + i), view(tb, i));
  }
}

TEST(Compose, WeakWireIsInert) {
  const auto a = collective(0, 1.0, 8), b = collective(50, 0.4, 8);
  EXPECT_EQ(simulate_swarm(compose_collectives(a, b, {{2, 0, {0.05}}})).jumps.size(),
            simulate_swarm(compose_collectives(a, b, {})).jumps.size());
  const auto wa = simulate_swarm(compose_collectives(a, b, {{2, 0, {0.05}}}));
  const auto wb = simulate_swarm(compose_collectives(a, b, {}));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(view(wa, i), view(wb, i));
}

TEST(Compose, StrongWireAddsDownstreamJumps) {
  const auto a = collective(0, 1.0, 8), b = collective(50, 0.4, 8);
  const auto wired = compose_collectives(a, b, {{2, 0, {0.6}}});
  const auto plain = compose_collectives(a, b, {});
  std::vector<double> diff;
  for (std::uint64_t r = 0; r < 200; ++r)
    diff.push_back(static_cast<double>(simulate_swarm(wired, r).jump_times(3).size()) -
                   static_cast<double>(simulate_swarm(plain, r).jump_times(3).size()));
  const auto ms = shs::testing::mean_se(diff);
  EXPECT_GT(ms.mean, 3.0 * ms.se) << ms.mean << " +- " << ms.se;
}

TEST(Compose, StructureAndErrors) {
  const auto a = collective(0, 1.0, 8), b = collective(1, 0.4, 9);
  const auto c = compose_collectives(a, b, {{2, 0, {0.6}}});
  EXPECT_EQ(c.n_agents, 6u);
  EXPECT_TRUE(c.problems().empty());
  EXPECT_EQ(c.seed, 8u);
  EXPECT_EQ(c.agents[3].id, 4u);  // overlapping ids shifted by max id + 1
  for (const auto& e : c.coupling.edges()) EXPECT_FALSE(e.to < 3 && e.from >= 3);  // no back-edges
  EXPECT_THROW(compose_collectives(a, b, {{3, 0, {0.6}}}), UnknownAgent);
  EXPECT_THROW(compose_collectives(a, b, {{0, 3, {0.6}}}), UnknownAgent);
  EXPECT_THROW(compose_collectives(a, b, {{0, 0, {0.6, 0.1}}}), DimensionMismatch);
}

TEST(RandomGraph, MeanDegreeAndDeterminism) {
  const RandomGraph g{8.0, 0.1, 0.3};
  const auto e1 = materialize_random_graph(g, 2000, 1, 5);
  EXPECT_EQ(e1, materialize_random_graph(g, 2000, 1, 5));
  const double deg = static_cast<double>(e1.size()) / 2000.0;
  EXPECT_NEAR(deg, 8.0, 0.2);
  for (const auto& e : e1) {
    ASSERT_NE(e.to, e.from);
    ASSERT_GE(e.weight[0], 0.1);
    ASSERT_LE(e.weight[0], 0.3);
  }
}

}  // namespace
