#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "shs/agent/agent.hpp"

namespace {

using namespace shs;
using shs::testing::scalar_agent;

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- guards ------------------------------------------------------------------

TEST(GuardValue, Examples) {
  EXPECT_EQ(guard_value(Vec{1.0}, 0.0, 5.0), Vec{1.0});
  EXPECT_EQ(guard_value(Vec{2.0}, 1.0, 0.0), Vec{2.0});
  EXPECT_NEAR(guard_value(Vec{1.0}, 1.0, 1.0)[0], 0.367879441171442, 1e-15);
}

TEST(GuardValue, GeneralFieldIntegratesDecay) {
  GuardSpec g;
  g.k = 0.7;
  g.field = VectorField::decay(2, 0.7);
  const Vec gamma{1.5, 0.2};
  const auto rk = guard_value(g, gamma, 2.3, 1e-3);
  const auto exact = guard_value(gamma, 0.7, 2.3);
  for (std::size_t p = 0; p < 2; ++p) EXPECT_NEAR(rk[p], exact[p], 1e-8);
}

// --- neighborhood and coupling ------------------------------------------------------

CouplingSpec three_agents(double w12, double w13) {
  return CouplingSpec(3, 1, 0.1, {{0, 1, {w12}}, {0, 2, {w13}}});
}

TEST(Neighborhood, WeakLinksAreIgnored) {
  const auto c = three_agents(0.05, -0.09);
  EXPECT_TRUE(neighborhood(0, c, std::vector<double>{1.0, 0.0, 0.0}).empty());
}

TEST(Neighborhood, ClockConditionExcludesStaleNeighbours) {
  const auto c = three_agents(0.5, 0.0);
  EXPECT_TRUE(neighborhood(0, c, std::vector<double>{1.0, 2.0, 0.0}).empty());
  EXPECT_EQ(neighborhood(0, c, std::vector<double>{1.0, 1.0, 0.0}), (std::vector<std::size_t>{1}));
}

TEST(Neighborhood, HandEnumeratedThreeAgentCase) {
  // Agent 3 (index 2) last jumped 7 time units ago, before agent 1 did (5 ago): excluded.
  const auto c = three_agents(0.5, -0.6);
  EXPECT_EQ(neighborhood(0, c, std::vector<double>{5.0, 1.0, 7.0}), (std::vector<std::size_t>{1}));
}

TEST(Neighborhood, UnknownAgent) {
  const auto c = three_agents(0.5, 0.5);
  EXPECT_THROW(neighborhood(3, c, std::vector<double>{0.0, 0.0, 0.0}), UnknownAgent);
}

TEST(CouplingInput, Examples) {
  EXPECT_EQ(coupling_input(0, three_agents(0.0, 0.0), 1.0, std::vector<double>{1.0, 0.0, 0.0}), Vec{0.0});
  EXPECT_EQ(coupling_input(0, CouplingSpec(2, 1, 0.1, {{0, 1, {0.5}}}), 3.0, std::vector<double>{1.0, 0.0}),
            Vec{0.5});
  const CouplingSpec two(3, 1, 0.1, {{0, 1, {0.3}}, {0, 2, {0.4}}});
  EXPECT_NEAR(coupling_input(0, two, 1.0, std::vector<double>{1.0, 0.0, std::log(2.0)})[0], 0.5, 1e-15);
}

TEST(EffectivePosition, Examples) {
  EXPECT_EQ(effective_position(Vec{0.2}, Vec{0.0}), Vec{0.2});
  EXPECT_NEAR(effective_position(Vec{0.2}, Vec{0.5})[0], 0.7, 1e-15);
  // Increments applied one neighbour at a time add up to the single call.
  const std::vector<double> w{0.3, -0.1, 0.25}, clocks{0.0, 0.4, 1.3};
  Vec z{0.2}, total{0.0};
  for (std::size_t r = 0; r < w.size(); ++r) {
    const Vec inc{w[r] * std::exp(-0.8 * clocks[r])};
    z = effective_position(z, inc);
    total[0] += inc[0];
  }
  EXPECT_NEAR(z[0], effective_position(Vec{0.2}, total)[0], 1e-15);
}

TEST(ModifiedGuard, Examples) {
  EXPECT_EQ(modified_guard(Vec{1.0}, Vec{0.0}), Vec{1.0});
  EXPECT_EQ(modified_guard(Vec{1.0}, Vec{0.25}), Vec{0.75});
  EXPECT_THROW(modified_guard(Vec{1.0}, Vec{0.25, 0.1}), DimensionMismatch);
}

TEST(ModifiedGuard, BothHitPredicatesAgreeBitwise) {
  RandomStream rng(17);
  for (int k = 0; k < 200000; ++k) {
    const double beta = std::ldexp(rng.uniform(0.0, 2.0), static_cast<int>(rng.uniform(-8, 4)));
    const double z = rng.uniform(-2.0, 2.0);
    const double in = rng.uniform(-1.0, 1.0) * std::ldexp(1.0, static_cast<int>(rng.uniform(-30, 2)));
    const double a = guard_gap_coupled(beta, z, in), b = guard_gap_modified(beta, z, in);
    ASSERT_EQ(a, b) << beta << " " << z << " " << in;
    ASSERT_EQ(a, gap_detail::wide(beta, z, in));
    ASSERT_EQ(a <= 0.0, b <= 0.0);
  }
}

// --- step_agent ------------------------------------------------------------------

TEST(StepAgent, LinearCrossingAtUnitTime) {
  const auto spec = scalar_agent(0, 1.0, 0.0, ResetKernel::point({0}, {0.0}), ResetKernel::point({0}, {1.0}), 0.0);
  RandomStream rng(1);
  auto st = init_agent(spec, rng);
  AgentStep step;
  const double dt = 0.013;
  std::optional<AgentJump> first;
  for (int k = 0; k < 200 && !first; ++k) first = step_agent(st, spec, step, {}, k * dt, dt, rng);
  ASSERT_TRUE(first.has_value());
  EXPECT_NEAR(first->time, 1.0, dt);
  EXPECT_NEAR(first->time, 1.0, 1e-12);  // exact for linear paths
  EXPECT_EQ(first->pre_z, first->pre_beta);
  EXPECT_EQ(st.upsilon, st.time - first->time);
}

TEST(StepAgent, NoDriftNoJump) {
  const auto spec = scalar_agent(0, 0.0, 0.0, ResetKernel::point({0}, {0.3}), ResetKernel::point({0}, {1.0}), 0.0);
  RandomStream rng(1);
  auto st = init_agent(spec, rng);
  AgentStep step;
  for (int k = 0; k < 5000; ++k) ASSERT_FALSE(step_agent(st, spec, step, {}, k * 0.01, 0.01, rng));
  EXPECT_EQ(st.jump_count, 0u);
  EXPECT_EQ(st.upsilon, st.time);
}

AgentSpec receiver_spec() {
  return scalar_agent(0, 0.0, 0.0, ResetKernel::point({0}, {0.6}), ResetKernel::point({0}, {1.0}), 0.0);
}

TEST(StepAgent, MessageTriggersImmediateJump) {
  // Neighbour's jump delivers I = 0.5 while beta - z = 0.4.
  const auto spec = receiver_spec();
  const CouplingSpec coupling(2, 1, 0.1, {{0, 1, {0.5}}});
  RandomStream rng(1);
  auto st = init_agent(spec, coupling, 0, rng);
  AgentStep step;
  for (int k = 0; k < 10; ++k) ASSERT_FALSE(step_agent(st, spec, step, {}, k * 0.01, 0.01, rng));
  const Message msg{1, 0.1037};
  const auto jump = step_agent(st, spec, step, std::span<const Message>(&msg, 1), 0.1, 0.01, rng);
  ASSERT_TRUE(jump.has_value());
  EXPECT_EQ(jump->time, msg.time);
  EXPECT_NEAR(jump->pre_z_tilde[0], 1.1, 1e-15);
  EXPECT_EQ(st.upsilon, 0.11 - msg.time);
}

TEST(StepAgent, WeakMessageIsIgnored) {
  const auto spec = receiver_spec();
  const CouplingSpec coupling(2, 1, 0.6, {{0, 1, {0.5}}});
  RandomStream rng(1);
  auto st = init_agent(spec, coupling, 0, rng);
  AgentStep step;
  const Message msg{1, 0.005};
  EXPECT_FALSE(step_agent(st, spec, step, std::span<const Message>(&msg, 1), 0.0, 0.01, rng));
  EXPECT_EQ(st.input, Vec{0.0});
}

TEST(StepAgent, ClockAndSelfDecoupling) {
  auto spec = scalar_agent(0, 0.8, 0.5, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {0.5}, {1.5}), 0.4);
  const CouplingSpec coupling(3, 1, 0.1, {{0, 1, {0.2}}, {0, 2, {0.3}}});
  RandomStream rng(5);
  auto st = init_agent(spec, coupling, 0, rng);
  AgentStep step;
  const double dt = 0.01;
  std::size_t jumps = 0;
  for (int k = 0; k < 4000; ++k) {
    std::vector<Message> inbox;
    if (k % 37 == 0) inbox.push_back({1, k * dt + 0.004});
    if (k % 53 == 0) inbox.push_back({2, k * dt + 0.007});
    const auto j = step_agent(st, spec, step, inbox, k * dt, dt, rng);
    ASSERT_EQ(st.upsilon, st.time - st.last_jump);
    for (double b : st.beta) ASSERT_GT(b, 0.0);
    if (j) {
      ++jumps;
      // Messages later in the same step may have re-entered the neighbourhood.
      const bool later_message = std::any_of(inbox.begin(), inbox.end(), [&](const Message& m) { return m.time >= j->time; });
      if (!later_message) {
        ASSERT_EQ(st.input, Vec{0.0});
      }
    } else {
      ASSERT_LT(st.z[0] + st.input[0], st.beta[0]);
    }
  }
  EXPECT_GT(jumps, 10u);
}

TEST(StepAgent, IncrementalInputMatchesClosedForm) {
  auto spec = scalar_agent(0, 0.0, 0.0, ResetKernel::point({0}, {-5.0}), ResetKernel::point({0}, {1.0}), 0.9);
  const CouplingSpec coupling(4, 1, 0.1, {{0, 1, {0.2}}, {0, 2, {-0.35}}, {0, 3, {0.15}}});
  RandomStream rng(5);
  auto st = init_agent(spec, coupling, 0, rng);
  AgentStep step;
  const double dt = 0.01;
  std::vector<double> heard(4, kInf);
  for (int k = 0; k < 300; ++k) {
    std::vector<Message> inbox;
    if (k % 29 == 3) inbox.push_back({1, k * dt + 0.002});
    if (k % 41 == 7) inbox.push_back({2, k * dt + 0.006});
    if (k == 150) inbox.push_back({3, k * dt + 0.001});
    ASSERT_FALSE(step_agent(st, spec, step, inbox, k * dt, dt, rng));
    for (const auto& m : inbox) heard[m.from] = m.time;
    std::vector<double> clocks(4);
    clocks[0] = st.upsilon;
    for (std::size_t j = 1; j < 4; ++j) clocks[j] = std::isinf(heard[j]) ? kInf : st.time - heard[j];
    const auto closed = coupling_input(0, coupling, spec.guard.k, clocks);
    ASSERT_NEAR(st.input[0], closed[0], 1e-13) << "step " << k;
  }
}

TEST(StepAgent, HitPredicatesGiveIdenticalJumps) {
  auto spec = scalar_agent(0, 1.0, 0.7, ResetKernel::uniform({0}, {-0.5}, {0.5}), ResetKernel::uniform({0}, {0.5}, {1.5}), 0.3);
  const CouplingSpec coupling(2, 1, 0.1, {{0, 1, {0.37}}});
  std::vector<AgentJump> logs[2];
  for (int mode = 0; mode < 2; ++mode) {
    const auto hit = mode == 0 ? HitPredicate::CoupledState : HitPredicate::ModifiedGuard;
    RandomStream rng(8);
    auto st = init_agent(spec, coupling, 0, rng);
    AgentStep step;
    for (int k = 0; k < 20000; ++k) {
      std::vector<Message> inbox;
      if (k % 101 == 0) inbox.push_back({1, k * 1e-3 + 3e-4});
      if (auto j = step_agent(st, spec, step, inbox, k * 1e-3, 1e-3, rng, hit)) logs[mode].push_back(*j);
    }
  }
  ASSERT_GT(logs[0].size(), 20u);
  EXPECT_EQ(logs[0], logs[1]);
}

TEST(StepAgent, CyclicAndWeightedModeTransitions) {
  auto spec = scalar_agent(0, 5.0, 0.0, ResetKernel::point({0}, {0.0}), ResetKernel::point({0}, {1.0}), 0.0);
  spec.modes.push_back({"b", VectorField::constant({5.0}), Diffusion::zero()});
  spec.modes.push_back({"c", VectorField::constant({5.0}), Diffusion::zero()});
  RandomStream rng(2);
  auto st = init_agent(spec, rng);
  AgentStep step;
  std::vector<int> modes;
  for (int k = 0; k < 200; ++k)
    if (auto j = step_agent(st, spec, step, {}, k * 0.01, 0.01, rng)) modes.push_back(j->post_mode.value);
  ASSERT_GE(modes.size(), 6u);
  for (std::size_t r = 0; r < modes.size(); ++r) EXPECT_EQ(modes[r], static_cast<int>((r + 1) % 3));

  spec.transition_weights = {0.0, 0.0, 1.0};
  st = init_agent(spec, rng);
  for (int k = 0; k < 200; ++k)
    if (auto j = step_agent(st, spec, step, {}, k * 0.01, 0.01, rng)) {
      EXPECT_EQ(j->post_mode.value, 2);
    }
}

TEST(StepAgent, GeneralGuardFieldMatchesClosedForm) {
  auto closed = scalar_agent(0, 0.4, 0.3, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {0.8}, {1.2}), 0.5);
  auto general = closed;
  general.guard.field = VectorField::decay(1, 0.5);
  RandomStream r1(4), r2(4);
  auto s1 = init_agent(closed, r1), s2 = init_agent(general, r2);
  AgentStep a, b;
  for (int k = 0; k < 5000; ++k) {
    auto j1 = step_agent(s1, closed, a, {}, k * 1e-3, 1e-3, r1);
    auto j2 = step_agent(s2, general, b, {}, k * 1e-3, 1e-3, r2);
    ASSERT_EQ(j1.has_value(), j2.has_value()) << "step " << k;
    if (j1) {
      ASSERT_NEAR(j1->time, j2->time, 1e-9);
    }
    ASSERT_NEAR(s1.beta[0], s2.beta[0], 1e-9);
  }
}

TEST(AgentSpec, ValidationCatchesBadGuardKernel) {
  auto spec = scalar_agent(3, 0.0, 0.0, ResetKernel::point({0}, {0.0}), ResetKernel::uniform({0}, {-1.0}, {1.0}), -1.0);
  const auto p = spec.problems();
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NE(p[0].find("k must be non-negative"), std::string::npos);
  EXPECT_NE(p[1].find("positive support"), std::string::npos);
}

}  // namespace
