#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shs/agent/coupling.hpp"
#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/core/vec.hpp"
#include "shs/hybrid/catalog.hpp"
#include "shs/hybrid/process.hpp"

namespace shs {

// ---------------------------------------------------------------------------
// Guards

/// Dynamic guard of one agent. Between forced jumps beta follows
/// d beta / dt = -k beta (or `field` when set), started from gamma ~ `reset`.
struct GuardSpec {
  double k = 0.0;
  ResetKernel reset;
  std::optional<VectorField> field;

  bool closed_form() const noexcept { return !field.has_value(); }
};

/// beta = gamma * exp(-k * upsilon), componentwise.
inline Vec guard_value(std::span<const double> gamma, double k, double upsilon) {
  const double decay = std::exp(-k * upsilon);
  Vec out(gamma.size());
  for (std::size_t p = 0; p < gamma.size(); ++p) out[p] = gamma[p] * decay;
  return out;
}

inline Vec guard_value(const GuardSpec& guard, std::span<const double> gamma, double upsilon, double dt) {
  if (guard.field) return flow(*guard.field, gamma, upsilon, dt);
  return guard_value(gamma, guard.k, upsilon);
}

// ---------------------------------------------------------------------------
// Agent description and state

struct AgentMode {
  std::string label;
  VectorField drift;
  Diffusion diffusion;
};

struct AgentSpec {
  std::uint64_t id = 0;
  std::size_t dim = 1;
  std::vector<AgentMode> modes;
  /// Law of (q, z) at start and of z after each forced jump.
  ResetKernel initial;
  GuardSpec guard;
  /// Next-mode distribution on forced jumps; empty means cyclic order.
  std::vector<double> transition_weights;
  /// Jump hazard used when the agent is analysed through its abstraction.
  std::optional<Rate> abstract_rate;

  const AgentMode& mode(ModeId q) const {
    if (q.value < 0 || static_cast<std::size_t>(q.value) >= modes.size())
      throw Error("agent " + std::to_string(id) + ": unknown mode " + std::to_string(q.value));
    return modes[static_cast<std::size_t>(q.value)];
  }

  ModeId next_mode(ModeId current, RandomStream& rng) const {
    if (transition_weights.empty())
      return ModeId{static_cast<int>((static_cast<std::size_t>(current.value) + 1) % modes.size())};
    return ModeId{static_cast<int>(rng.discrete(transition_weights))};
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    const std::string tag = "agent " + std::to_string(id) + ": ";
    if (dim == 0) out.push_back(tag + "dimension must be at least 1");
    if (modes.empty()) out.push_back(tag + "at least one mode is required");
    for (std::size_t q = 0; q < modes.size(); ++q) {
      const auto& m = modes[q];
      if (auto e = m.drift.check()) out.push_back(tag + "mode " + std::to_string(q) + ": " + *e);
      else if (m.drift.dim() != dim) out.push_back(tag + "mode " + std::to_string(q) + " drift dimension differs from d");
      if (auto e = m.diffusion.check(dim)) out.push_back(tag + "mode " + std::to_string(q) + ": " + *e);
    }
    if (auto e = initial.check()) out.push_back(tag + "initial kernel: " + *e);
    else {
      if (initial.dim() != dim) out.push_back(tag + "initial kernel dimension differs from d");
      if (initial.mode().value < 0 || static_cast<std::size_t>(initial.mode().value) >= modes.size())
        out.push_back(tag + "initial kernel targets an unknown mode");
    }
    if (!(guard.k >= 0.0)) out.push_back(tag + "guard decay rate k must be non-negative");
    if (auto e = guard.reset.check()) out.push_back(tag + "guard kernel: " + *e);
    else {
      if (guard.reset.dim() != dim) out.push_back(tag + "guard kernel dimension differs from d");
      if (!positive_support(guard.reset)) out.push_back(tag + "guard kernel must have strictly positive support");
    }
    if (guard.field) {
      if (auto e = guard.field->check()) out.push_back(tag + "guard field: " + *e);
      else if (guard.field->dim() != dim) out.push_back(tag + "guard field dimension differs from d");
    }
    if (!transition_weights.empty()) {
      if (transition_weights.size() != modes.size())
        out.push_back(tag + "transition weights must list one weight per mode");
      double total = 0.0;
      for (double w : transition_weights) {
        if (!(w >= 0.0)) out.push_back(tag + "transition weights must be non-negative");
        total += w;
      }
      if (!(total > 0.0)) out.push_back(tag + "transition weights must not all be zero");
    }
    if (abstract_rate)
      if (auto e = abstract_rate->check()) out.push_back(tag + "abstract rate: " + *e);
    return out;
  }

  static bool positive_support(const ResetKernel& k) {
    return std::visit(
        [](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          auto positive = [](const Vec& lo) {
            return std::all_of(lo.begin(), lo.end(), [](double x) { return x >= 0.0; });
          };
          if constexpr (std::is_same_v<T, PointMass>)
            return std::all_of(v.target.position.begin(), v.target.position.end(),
                               [](double x) { return x > 0.0; });
          else return positive(v.lo);
        },
        k.variant());
  }
};

/// Last jump time of a coupled neighbour as learned from its messages.
struct NeighborSlot {
  std::size_t agent = 0;
  Vec weight;
  double last_jump = std::numeric_limits<double>::quiet_NaN();  // NaN: never heard from
};

/// exp(-k x) for the last argument seen. Step ends and the next step's
/// start share arguments exactly, so most evaluations are repeats.
struct DecayMemo {
  double arg = std::numeric_limits<double>::quiet_NaN();
  double value = 1.0;

  double operator()(double k, double x) {
    if (k == 0.0) return 1.0;
    if (x != arg) {
      arg = x;
      value = std::exp(-k * x);
    }
    return value;
  }
};

struct AgentState {
  ModeId mode;
  Vec z;
  Vec gamma;
  Vec beta;
  Vec input;
  double time = 0.0;
  double upsilon = 0.0;
  double last_jump = 0.0;
  std::size_t jump_count = 0;
  std::vector<NeighborSlot> neighbors;
  // Coupling input evaluated in closed form at `input_ref_time`; it only
  // decays (by exp(-k dt)) until the next message or own jump.
  double input_ref_time = 0.0;
  Vec input_ref;
  mutable DecayMemo guard_decay;
  mutable DecayMemo input_decay;

  Vec z_tilde() const { return effective_position(z, input); }
};

struct Message {
  std::size_t from = 0;
  double time = 0.0;
};

/// Which description of the forced-transition condition is evaluated.
enum class HitPredicate {
  CoupledState,   ///< z~ = z + I reaches beta
  ModifiedGuard,  ///< z reaches beta_bar = beta - I
};

struct AgentJump {
  double time = 0.0;
  std::size_t component = 0;
  ModeId pre_mode;
  Vec pre_z;
  Vec pre_z_tilde;
  Vec pre_beta;
  ModeId post_mode;
  Vec post_z;
  Vec post_gamma;
  friend bool operator==(const AgentJump&, const AgentJump&) = default;
};

/// Scratch for one synchronous step [t0, t1] of one agent.
struct AgentStep {
  double t0 = 0.0;
  double t1 = 0.0;
  Vec z0;
  Vec z1;
  Vec beta1;  // guard at t1 (general guard fields only)
  Vec noise;
  Vec drift;
  bool jumped = false;
  bool has_candidate = false;
  double candidate_time = 0.0;
  std::size_t candidate_component = 0;
};

namespace agent_detail {

inline void refresh_input(AgentState& st, const AgentSpec& spec, double at) {
  st.input_ref_time = at;
  std::fill(st.input_ref.begin(), st.input_ref.end(), 0.0);
  for (const auto& n : st.neighbors) {
    // j in N^i  <=>  upsilon_j <= upsilon_i  <=>  T_j >= T_i
    if (!(n.last_jump >= st.last_jump)) continue;
    const double decay = std::exp(-spec.guard.k * (at - n.last_jump));
    for (std::size_t p = 0; p < st.input_ref.size(); ++p) st.input_ref[p] += n.weight[p] * decay;
  }
}

inline bool input_is_zero(const AgentState& st) {
  return std::all_of(st.input_ref.begin(), st.input_ref.end(), [](double x) { return x == 0.0; });
}

inline double input_decay(const AgentState& st, const AgentSpec& spec, double s) {
  return st.input_decay(spec.guard.k, s - st.input_ref_time);
}

inline double guard_decay(const AgentState& st, const AgentSpec& spec, double s) {
  return st.guard_decay(spec.guard.k, s - st.last_jump);
}

inline double gap(HitPredicate hit, double beta, double z, double input) {
  return hit == HitPredicate::CoupledState ? guard_gap_coupled(beta, z, input)
                                           : guard_gap_modified(beta, z, input);
}

/// Guard at time s inside the current step.
inline double beta_at(const AgentState& st, const AgentSpec& spec, const AgentStep& step, std::size_t p,
                      double s, double decay_from_jump) {
  if (spec.guard.closed_form()) return st.gamma[p] * decay_from_jump;
  if (s <= step.t0) return st.beta[p];
  if (s >= step.t1) return step.beta1[p];
  const double f = (s - step.t0) / (step.t1 - step.t0);
  return st.beta[p] + f * (step.beta1[p] - st.beta[p]);
}

inline double lerp_z(const AgentStep& step, std::size_t p, double s) {
  if (s <= step.t0) return step.z0[p];
  if (s >= step.t1) return step.z1[p];
  const double f = (s - step.t0) / (step.t1 - step.t0);
  return step.z0[p] + f * (step.z1[p] - step.z0[p]);
}

/// Looks for the first violation of z~ < beta on [from, t1], linearly
/// interpolating the gap between its values at `from` and at t1.
inline void find_crossing(const AgentState& st, const AgentSpec& spec, AgentStep& step, double from,
                          HitPredicate hit) {
  step.has_candidate = false;
  const std::size_t d = step.z1.size();
  const bool zero_input = input_is_zero(st);
  const double guard_decay_from = guard_decay(st, spec, from);
  const double guard_decay_end = guard_decay(st, spec, step.t1);
  const double in_from = zero_input ? 0.0 : input_decay(st, spec, from);
  const double in_end = zero_input ? 0.0 : input_decay(st, spec, step.t1);

  double best = 2.0;
  std::size_t comp = 0;
  for (std::size_t p = 0; p < d; ++p) {
    const double g0 = gap(hit, beta_at(st, spec, step, p, from, guard_decay_from), lerp_z(step, p, from),
                          st.input_ref[p] * in_from);
    if (!(g0 > 0.0)) {
      if (best > 0.0 || p < comp) {
        best = 0.0;
        comp = p;
      }
      continue;
    }
    const double g1 = gap(hit, beta_at(st, spec, step, p, step.t1, guard_decay_end), step.z1[p],
                          st.input_ref[p] * in_end);
    if (!std::isfinite(g1)) throw NonFiniteState("agent " + std::to_string(spec.id) + ": non-finite state");
    if (g1 > 0.0) continue;
    const double f = g0 / (g0 - g1);
    if (f < best) {
      best = f;
      comp = p;
    }
  }
  if (best <= 1.0) {
    step.has_candidate = true;
    step.candidate_component = comp;
    const double when = from + best * (step.t1 - from);
    step.candidate_time = std::min(std::max(when, from), step.t1);
  }
}

}  // namespace agent_detail

/// Draws the initial (q, z, gamma) of an agent and sizes its neighbour table.
inline AgentState init_agent(const AgentSpec& spec, const CouplingSpec& coupling, std::size_t index,
                             RandomStream& rng) {
  AgentState st;
  HybridState x0 = spec.initial.sample(rng);
  st.mode = x0.mode;
  st.z = std::move(x0.position);
  st.gamma = spec.guard.reset.sample(rng).position;
  for (double g : st.gamma)
    if (!(g > 0.0)) throw SpecViolation("agent " + std::to_string(spec.id) + ": guard not positive");
  st.beta = st.gamma;
  st.input.assign(spec.dim, 0.0);
  st.input_ref.assign(spec.dim, 0.0);
  if (index < coupling.size())
    for (const auto& e : coupling.incoming(index)) st.neighbors.push_back({e.from, e.weight});
  return st;
}

/// Standalone agent with no coupled neighbours.
inline AgentState init_agent(const AgentSpec& spec, RandomStream& rng) {
  return init_agent(spec, CouplingSpec::none(0, spec.dim), 0, rng);
}

/// Starts a step: one Euler-Maruyama move of z and the first candidate crossing.
inline void begin_step(AgentState& st, const AgentSpec& spec, AgentStep& step, double t0, double t1,
                       RandomStream& rng, HitPredicate hit) {
  const auto& m = spec.mode(st.mode);
  const std::size_t d = spec.dim;
  const double h = t1 - t0;
  step.t0 = t0;
  step.t1 = t1;
  step.jumped = false;
  step.z0 = st.z;
  step.drift.resize(d);
  step.z1.resize(d);
  m.drift.eval_into(st.z, step.drift);
  for (std::size_t p = 0; p < d; ++p) step.z1[p] = st.z[p] + step.drift[p] * h;
  if (!m.diffusion.is_zero()) {
    step.noise.resize(m.diffusion.wiener_dim());
    for (auto& n : step.noise) n = rng.normal();
    m.diffusion.add_noise(step.noise, std::sqrt(h), step.z1);
  }
  if (!all_finite(step.z1)) throw NonFiniteState("agent " + std::to_string(spec.id) + ": non-finite state");
  if (!spec.guard.closed_form()) {
    step.beta1 = st.beta;
    Vec k1(d), k2(d), k3(d), k4(d), tmp(d);
    rk4_step(*spec.guard.field, step.beta1, h, k1, k2, k3, k4, tmp);
  }
  agent_detail::find_crossing(st, spec, step, t0, hit);
}

/// Records a message from a neighbour; re-examines the rest of the step when
/// the agent has not jumped yet. Messages from unknown senders are ignored.
inline void deliver(AgentState& st, const AgentSpec& spec, AgentStep& step, const Message& msg,
                    HitPredicate hit) {
  auto it = std::lower_bound(st.neighbors.begin(), st.neighbors.end(), msg.from,
                             [](const NeighborSlot& n, std::size_t v) { return n.agent < v; });
  if (it == st.neighbors.end() || it->agent != msg.from) return;
  it->last_jump = msg.time;
  agent_detail::refresh_input(st, spec, msg.time);
  if (!step.jumped) agent_detail::find_crossing(st, spec, step, msg.time, hit);
}

/// Executes the pending forced transition at its candidate time.
inline AgentJump execute_jump(AgentState& st, const AgentSpec& spec, AgentStep& step, RandomStream& rng) {
  using namespace agent_detail;
  const double s = step.candidate_time;
  const std::size_t d = spec.dim;
  AgentJump ev;
  ev.time = s;
  ev.component = step.candidate_component;
  ev.pre_mode = st.mode;
  ev.pre_z.resize(d);
  ev.pre_beta.resize(d);
  ev.pre_z_tilde.resize(d);
  const double g_decay = guard_decay(st, spec, s);
  const double in_decay = input_decay(st, spec, s);
  for (std::size_t p = 0; p < d; ++p) {
    ev.pre_z[p] = lerp_z(step, p, s);
    ev.pre_beta[p] = beta_at(st, spec, step, p, s, g_decay);
    ev.pre_z_tilde[p] = ev.pre_z[p] + st.input_ref[p] * in_decay;
  }

  st.last_jump = s;
  st.jump_count += 1;
  st.gamma = spec.guard.reset.sample(rng).position;
  for (double g : st.gamma)
    if (!(g > 0.0) || !std::isfinite(g))
      throw SpecViolation("agent " + std::to_string(spec.id) + ": guard not positive after resample");
  st.mode = spec.next_mode(st.mode, rng);
  st.z = spec.initial.sample(rng).position;
  refresh_input(st, spec, s);

  ev.post_mode = st.mode;
  ev.post_z = st.z;
  ev.post_gamma = st.gamma;
  step.jumped = true;
  step.has_candidate = false;
  return ev;
}

/// Closes the step at t1: z, clock, guard and coupling input are brought to t1.
inline void end_step(AgentState& st, const AgentSpec& spec, AgentStep& step, double guard_dt) {
  const double t1 = step.t1;
  if (!step.jumped) st.z = step.z1;
  st.time = t1;
  st.upsilon = t1 - st.last_jump;
  if (spec.guard.closed_form()) {
    const double decay = agent_detail::guard_decay(st, spec, t1);
    for (std::size_t p = 0; p < spec.dim; ++p) st.beta[p] = st.gamma[p] * decay;
  } else if (step.jumped) {
    st.beta = flow(*spec.guard.field, st.gamma, st.upsilon, guard_dt);
  } else {
    st.beta = step.beta1;
  }
  const double in_decay = agent_detail::input_decay(st, spec, t1);
  for (std::size_t p = 0; p < spec.dim; ++p) st.input[p] = st.input_ref[p] * in_decay;
}

/// Advances one isolated agent by one step of length dt, delivering `inbox`
/// messages (sorted by time, within the step) in time order.
inline std::optional<AgentJump> step_agent(AgentState& st, const AgentSpec& spec, AgentStep& step,
                                           std::span<const Message> inbox, double t0, double dt,
                                           RandomStream& rng, HitPredicate hit = HitPredicate::CoupledState) {
  if (!(dt > 0.0)) throw Error("step_agent: dt must be positive");
  std::optional<AgentJump> out;
  begin_step(st, spec, step, t0, t0 + dt, rng, hit);
  for (const auto& msg : inbox) {
    if (step.has_candidate && step.candidate_time <= msg.time) out = execute_jump(st, spec, step, rng);
    deliver(st, spec, step, msg, hit);
  }
  if (step.has_candidate) out = execute_jump(st, spec, step, rng);
  end_step(st, spec, step, dt);
  return out;
}

}  // namespace shs
