#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "shs/agent/agent.hpp"
#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/swarm/config.hpp"

namespace shs {

struct SwarmJump {
  double time = 0.0;
  std::size_t agent = 0;     // index into the scenario
  std::uint64_t agent_id = 0;
  std::size_t component = 0;
  ModeId pre_mode;
  Vec pre_z;
  Vec pre_z_tilde;
  Vec pre_beta;
  ModeId post_mode;
  Vec post_z;
  Vec post_gamma;
  std::vector<std::size_t> recipients;
  friend bool operator==(const SwarmJump&, const SwarmJump&) = default;
};

/// Gridded per-agent samples plus the exact jump log.
///
/// Sample m of agent i is stored at offset (m * n + i) for scalar fields and
/// (m * n + i) * d for vector fields.
struct SwarmTrace {
  std::size_t n = 0;
  std::size_t d = 1;
  std::vector<std::uint64_t> ids;
  std::vector<double> guard_k;
  std::vector<double> times;
  std::vector<int> mode;
  std::vector<double> z;
  std::vector<double> z_tilde;
  std::vector<double> beta;
  std::vector<double> upsilon;
  std::vector<SwarmJump> jumps;

  friend bool operator==(const SwarmTrace&, const SwarmTrace&) = default;

  std::size_t samples() const noexcept { return times.size(); }
  std::span<const double> z_at(std::size_t m, std::size_t i) const { return {z.data() + (m * n + i) * d, d}; }
  std::span<const double> z_tilde_at(std::size_t m, std::size_t i) const {
    return {z_tilde.data() + (m * n + i) * d, d};
  }
  std::span<const double> beta_at(std::size_t m, std::size_t i) const { return {beta.data() + (m * n + i) * d, d}; }
  double upsilon_at(std::size_t m, std::size_t i) const { return upsilon[m * n + i]; }
  int mode_at(std::size_t m, std::size_t i) const { return mode[m * n + i]; }

  /// Jump times of one agent, in order.
  std::vector<double> jump_times(std::size_t agent) const {
    std::vector<double> out;
    for (const auto& j : jumps)
      if (j.agent == agent) out.push_back(j.time);
    return out;
  }
};

struct SwarmOptions {
  HitPredicate hit = HitPredicate::CoupledState;
  /// Keep gridded samples; the jump log is always kept.
  bool record_samples = true;
};

namespace swarm_detail {

inline void record(SwarmTrace& tr, double t, const std::vector<AgentState>& states) {
  tr.times.push_back(t);
  for (const auto& st : states) {
    tr.mode.push_back(st.mode.value);
    tr.z.insert(tr.z.end(), st.z.begin(), st.z.end());
    for (std::size_t p = 0; p < st.z.size(); ++p) tr.z_tilde.push_back(st.z[p] + st.input[p]);
    tr.beta.insert(tr.beta.end(), st.beta.begin(), st.beta.end());
    tr.upsilon.push_back(st.upsilon);
  }
}

}  // namespace swarm_detail

/// Number of synchronous steps covering [0, horizon].
inline std::size_t step_count(const Numerics& num) {
  return static_cast<std::size_t>(std::ceil(num.horizon / num.dt - 1e-9));
}

inline double step_end(const Numerics& num, std::size_t k, std::size_t steps) {
  return k + 1 == steps ? num.horizon : static_cast<double>(k + 1) * num.dt;
}

/// Synchronous simulation of the communicating agents.
///
/// Each step moves every agent, then resolves forced transitions in order of
/// their interpolated times (ties by agent id). A jump announces itself to the
/// coupled receivers, whose remaining step is re-examined with the new input.
/// Agent i draws from SeedPolicy{seed}.stream(id_i, replication).
inline SwarmTrace simulate_swarm(const ScenarioConfig& cfg, std::uint64_t replication = 0,
                                 const SwarmOptions& opt = {}) {
  const std::size_t n = cfg.n_agents;
  const SeedPolicy seeds{cfg.seed};
  std::vector<RandomStream> rngs;
  std::vector<AgentState> states;
  rngs.reserve(n);
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rngs.emplace_back(seeds.stream(cfg.agents[i].id, replication));
    states.push_back(init_agent(cfg.agents[i], cfg.coupling, i, rngs.back()));
  }
  std::vector<AgentStep> steps(n);
  std::vector<std::uint64_t> version(n, 0);

  SwarmTrace tr;
  tr.n = n;
  tr.d = cfg.dim;
  for (const auto& a : cfg.agents) {
    tr.ids.push_back(a.id);
    tr.guard_k.push_back(a.guard.k);
  }
  if (opt.record_samples) swarm_detail::record(tr, 0.0, states);

  using Entry = std::tuple<double, std::uint64_t, std::size_t, std::uint64_t>;  // time, id, index, version
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

  const std::size_t total = step_count(cfg.numerics);
  for (std::size_t k = 0; k < total; ++k) {
    const double t0 = static_cast<double>(k) * cfg.numerics.dt;
    const double t1 = step_end(cfg.numerics, k, total);
    for (std::size_t i = 0; i < n; ++i) {
      begin_step(states[i], cfg.agents[i], steps[i], t0, t1, rngs[i], opt.hit);
      if (steps[i].has_candidate) queue.emplace(steps[i].candidate_time, cfg.agents[i].id, i, ++version[i]);
    }
    const std::size_t log_start = tr.jumps.size();
    while (!queue.empty()) {
      const auto [when, id, i, ver] = queue.top();
      queue.pop();
      if (ver != version[i] || steps[i].jumped || !steps[i].has_candidate) continue;
      AgentJump ev = execute_jump(states[i], cfg.agents[i], steps[i], rngs[i]);
      if (states[i].jump_count > cfg.numerics.max_jumps)
        throw ZenoSuspected("agent " + std::to_string(id) + " exceeded " +
                                std::to_string(cfg.numerics.max_jumps) + " jumps",
                            ev.time, static_cast<long>(states[i].jump_count));
      const auto& receivers = cfg.coupling.receivers(i);
      const Message msg{i, ev.time};
      for (std::size_t r : receivers) {
        const bool pending = !steps[r].jumped;
        deliver(states[r], cfg.agents[r], steps[r], msg, opt.hit);
        if (pending && steps[r].has_candidate)
          queue.emplace(steps[r].candidate_time, cfg.agents[r].id, r, ++version[r]);
        else if (pending)
          ++version[r];
      }
      tr.jumps.push_back({ev.time, i, id, ev.component, ev.pre_mode, std::move(ev.pre_z), std::move(ev.pre_z_tilde),
                          std::move(ev.pre_beta), ev.post_mode, std::move(ev.post_z), std::move(ev.post_gamma),
                          receivers});
    }
    std::stable_sort(tr.jumps.begin() + static_cast<std::ptrdiff_t>(log_start), tr.jumps.end(),
                     [](const SwarmJump& a, const SwarmJump& b) {
                       return std::tie(a.time, a.agent_id) < std::tie(b.time, b.agent_id);
                     });
    for (std::size_t i = 0; i < n; ++i) end_step(states[i], cfg.agents[i], steps[i], cfg.numerics.dt);
    if (opt.record_samples && ((k + 1) % cfg.numerics.stride == 0 || k + 1 == total))
      swarm_detail::record(tr, t1, states);
  }
  return tr;
}

}  // namespace shs
