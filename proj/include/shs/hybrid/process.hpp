#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/core/vec.hpp"
#include "shs/hybrid/catalog.hpp"

namespace shs {

struct ModeSpec {
  std::string label;
  VectorField field;
  Box domain;
  Diffusion diffusion;  // ignored by PDMP simulation

  std::size_t dim() const { return field.dim(); }
};

/// Piecewise deterministic Markov process: flows, a jump rate and one reset kernel.
struct PdmpSpec {
  std::vector<ModeSpec> modes;
  Rate rate;
  ResetKernel reset;

  const ModeSpec& mode(ModeId q) const {
    if (q.value < 0 || static_cast<std::size_t>(q.value) >= modes.size())
      throw Error("unknown mode " + std::to_string(q.value));
    return modes[static_cast<std::size_t>(q.value)];
  }

  bool interior(const HybridState& x) const {
    if (x.mode.value < 0 || static_cast<std::size_t>(x.mode.value) >= modes.size()) return false;
    const auto& m = modes[static_cast<std::size_t>(x.mode.value)];
    return x.position.size() == m.dim() && m.domain.contains(x.position);
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (modes.empty()) out.emplace_back("at least one mode is required");
    for (std::size_t q = 0; q < modes.size(); ++q) {
      const auto& m = modes[q];
      const std::string tag = "mode " + std::to_string(q) + ": ";
      if (auto e = m.field.check()) out.push_back(tag + *e);
      if (m.domain.dim() != m.dim() || m.domain.hi.size() != m.dim())
        out.push_back(tag + "domain dimension differs from field dimension");
      if (auto e = m.diffusion.check(m.dim())) out.push_back(tag + *e);
    }
    if (auto e = rate.check()) out.push_back(*e);
    check_kernel(reset, "reset kernel", out);
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ValidationError(std::move(p));
  }

 protected:
  void check_kernel(const ResetKernel& k, const std::string& name, std::vector<std::string>& out) const {
    if (auto e = k.check()) {
      out.push_back(name + ": " + *e);
      return;
    }
    const ModeId q = k.mode();
    if (q.value < 0 || static_cast<std::size_t>(q.value) >= modes.size()) {
      out.push_back(name + " targets an unknown mode");
      return;
    }
    if (k.dim() != modes[static_cast<std::size_t>(q.value)].dim())
      out.push_back(name + " dimension differs from its target mode");
    if (const auto* pm = std::get_if<PointMass>(&k.variant()))
      if (!interior(pm->target)) out.push_back(name + " point target is not interior");
  }
};

/// Diffusion-type stochastic hybrid system. `reset` plays the role of the
/// interior (spontaneous) kernel; `boundary_reset` is used for forced exits.
struct ShsSpec : PdmpSpec {
  ResetKernel boundary_reset;

  std::vector<std::string> problems() const {
    auto out = PdmpSpec::problems();
    check_kernel(boundary_reset, "boundary reset kernel", out);
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ValidationError(std::move(p));
  }
};

enum class JumpCause { Spontaneous, Forced };

struct JumpRecord {
  double time = 0.0;
  HybridState pre;
  HybridState post;
  JumpCause cause = JumpCause::Spontaneous;
  friend bool operator==(const JumpRecord&, const JumpRecord&) = default;
};

struct TrajectorySample {
  double time = 0.0;
  HybridState state;
  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<JumpRecord> jumps;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

  /// Sample recorded at `t` (within `tol`), if any.
  const HybridState* state_at(double t, double tol = 1e-9) const {
    auto it = std::lower_bound(samples.begin(), samples.end(), t - tol,
                               [](const TrajectorySample& s, double v) { return s.time < v; });
    if (it != samples.end() && std::abs(it->time - t) <= tol) return &it->state;
    return nullptr;
  }
};

struct SimulationOptions {
  /// Record every stride-th grid sample (the initial and final sample are always kept).
  std::size_t record_stride = 1;
  /// Stop after this many jumps; 0 means run to the horizon.
  std::size_t stop_after_jumps = 0;
  /// Brownian-bridge correction for boundary crossings missed between grid points.
  bool bridge_correction = false;
};

// ---------------------------------------------------------------------------
// Deterministic flow

inline void rk4_step(const VectorField& field, Vec& y, double h, Vec& k1, Vec& k2, Vec& k3, Vec& k4,
                     Vec& tmp) {
  const std::size_t d = y.size();
  field.eval_into(y, k1);
  for (std::size_t p = 0; p < d; ++p) tmp[p] = y[p] + 0.5 * h * k1[p];
  field.eval_into(tmp, k2);
  for (std::size_t p = 0; p < d; ++p) tmp[p] = y[p] + 0.5 * h * k2[p];
  field.eval_into(tmp, k3);
  for (std::size_t p = 0; p < d; ++p) tmp[p] = y[p] + h * k3[p];
  field.eval_into(tmp, k4);
  for (std::size_t p = 0; p < d; ++p) y[p] += h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
}

/// phi(y0, t) by classical RK4 with step dt; the last step is shortened.
inline Vec flow(const VectorField& field, std::span<const double> y0, double t, double dt) {
  require_dim(y0, field.dim(), "flow");
  if (!(t >= 0.0) || !(dt > 0.0)) throw Error("flow: need t >= 0 and dt > 0");
  Vec y(y0.begin(), y0.end());
  if (const auto* c = std::get_if<ConstantField>(&field.variant())) {
    for (std::size_t p = 0; p < y.size(); ++p) y[p] += t * c->c[p];
  } else {
    const std::size_t d = y.size();
    Vec k1(d), k2(d), k3(d), k4(d), tmp(d);
    const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
    double done = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const double h = std::min(dt, t - done);
      if (h <= 0.0) break;
      rk4_step(field, y, h, k1, k2, k3, k4, tmp);
      done = (s + 1 == steps) ? t : done + h;
    }
  }
  if (!all_finite(y)) throw NonFiniteState("flow: non-finite value");
  return y;
}

inline Vec flow(const PdmpSpec& spec, ModeId mode, std::span<const double> y0, double t, double dt) {
  return flow(spec.mode(mode).field, y0, t, dt);
}

// ---------------------------------------------------------------------------
// Diffusion step

/// One Euler-Maruyama step; the mode is left unchanged.
inline HybridState sde_step(const ShsSpec& spec, const HybridState& state, double dt,
                            std::span<const double> noise) {
  const auto& m = spec.mode(state.mode);
  require_dim(state.position, m.dim(), "sde_step state");
  require_dim(noise, m.diffusion.wiener_dim(), "sde_step noise");
  if (!(dt > 0.0)) throw Error("sde_step: dt must be positive");
  HybridState out{state.mode, Vec(m.dim())};
  m.field.eval_into(state.position, out.position);
  for (std::size_t p = 0; p < out.position.size(); ++p)
    out.position[p] = state.position[p] + out.position[p] * dt;
  m.diffusion.add_noise(noise, std::sqrt(dt), out.position);
  return out;
}

// ---------------------------------------------------------------------------
// Jumps

/// Sojourn time with survival exp(-int lambda) along the flow, by thinning
/// against the declared bound. Returns nullopt when no jump occurs before `horizon`.
inline std::optional<double> sample_sojourn(const PdmpSpec& spec, const HybridState& start,
                                            RandomStream& rng, double horizon, double dt) {
  const double bound = spec.rate.bound();
  if (!(bound > 0.0)) return std::nullopt;
  const auto& field = spec.mode(start.mode).field;
  Vec y = start.position;
  double s = 0.0;
  for (;;) {
    const double proposal = s + rng.exponential(bound);
    if (proposal > horizon) return std::nullopt;
    y = flow(field, y, proposal - s, dt);
    s = proposal;
    const double lambda = spec.rate(y);
    if (lambda > bound)
      throw SpecViolation("rate " + std::to_string(lambda) + " exceeds declared bound " +
                          std::to_string(bound));
    if (lambda >= bound || rng.uniform() * bound < lambda) return s;
  }
}

inline HybridState sample_reset(const PdmpSpec& spec, const ResetKernel& kernel, RandomStream& rng) {
  return kernel.sample(rng, [&](ModeId q, std::span<const double> y) {
    return spec.interior(HybridState{q, Vec(y.begin(), y.end())});
  });
}

namespace detail {

/// Fraction of the segment y0 -> y1 at which it first leaves `box`, and the exit component.
inline std::pair<double, std::size_t> exit_fraction(const Box& box, std::span<const double> y0,
                                                    std::span<const double> y1) {
  double best = 2.0;
  std::size_t comp = 0;
  for (std::size_t p = 0; p < y1.size(); ++p) {
    double f = 2.0;
    if (y1[p] >= box.hi[p]) f = (box.hi[p] - y0[p]) / (y1[p] - y0[p]);
    else if (y1[p] <= box.lo[p]) f = (box.lo[p] - y0[p]) / (y1[p] - y0[p]);
    if (f < best) {
      best = f;
      comp = p;
    }
  }
  best = std::clamp(best, 0.0, 1.0);
  return {best, comp};
}

inline Vec crossing_point(const Box& box, std::span<const double> y0, std::span<const double> y1,
                          double frac, std::size_t comp) {
  Vec y(y0.size());
  for (std::size_t p = 0; p < y.size(); ++p) y[p] = y0[p] + frac * (y1[p] - y0[p]);
  y[comp] = y1[comp] >= box.hi[comp] ? box.hi[comp] : box.lo[comp];
  return y;
}

inline void zeno_check(std::size_t jumps, std::size_t max_jumps, double t) {
  if (jumps > max_jumps)
    throw ZenoSuspected("jump count exceeded " + std::to_string(max_jumps) + " before the horizon", t,
                        static_cast<long>(jumps));
}

}  // namespace detail

/// Flows between jumps; jumps at the thinned sojourn time or at a domain exit,
/// whichever comes first.
inline Trajectory simulate_pdmp(const PdmpSpec& spec, const HybridState& x0, double horizon, double dt,
                                RandomStream& rng, std::size_t max_jumps,
                                const SimulationOptions& opt = {}) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw Error("simulate_pdmp: need horizon > 0 and dt > 0");
  if (!spec.interior(x0)) throw Error("simulate_pdmp: initial state is not interior");
  const double bound = spec.rate.bound();
  constexpr double inf = std::numeric_limits<double>::infinity();

  Trajectory traj;
  HybridState x = x0;
  double t = 0.0;
  std::size_t k = 0;
  traj.samples.push_back({0.0, x});
  double next_proposal = bound > 0.0 ? rng.exponential(bound) : inf;

  const std::size_t d_max = [&] {
    std::size_t d = 0;
    for (const auto& m : spec.modes) d = std::max(d, m.dim());
    return d;
  }();
  Vec k1(d_max), k2(d_max), k3(d_max), k4(d_max), tmp(d_max);

  auto do_jump = [&](double when, HybridState pre, JumpCause cause) {
    HybridState post = sample_reset(spec, spec.reset, rng);
    traj.jumps.push_back({when, std::move(pre), post, cause});
    detail::zeno_check(traj.jumps.size(), max_jumps, when);
    x = std::move(post);
    t = when;
    next_proposal = bound > 0.0 ? t + rng.exponential(bound) : inf;
  };

  while (t < horizon) {
    if (opt.stop_after_jumps && traj.jumps.size() >= opt.stop_after_jumps) break;
    const double grid_next = std::min(static_cast<double>(k + 1) * dt, horizon);
    const double target = std::min(grid_next, next_proposal);
    const auto& m = spec.mode(x.mode);
    const std::size_t d = m.dim();
    k1.resize(d), k2.resize(d), k3.resize(d), k4.resize(d), tmp.resize(d);
    Vec y = x.position;
    const double h = target - t;
    if (const auto* c = std::get_if<ConstantField>(&m.field.variant())) {
      for (std::size_t p = 0; p < d; ++p) y[p] += h * c->c[p];
    } else {
      rk4_step(m.field, y, h, k1, k2, k3, k4, tmp);
    }
    if (!all_finite(y)) throw NonFiniteState("simulate_pdmp: non-finite state");

    if (!m.domain.contains(y)) {
      auto [frac, comp] = detail::exit_fraction(m.domain, x.position, y);
      do_jump(t + frac * h, HybridState{x.mode, detail::crossing_point(m.domain, x.position, y, frac, comp)},
              JumpCause::Forced);
      continue;
    }
    x.position = std::move(y);
    t = target;
    if (target == next_proposal) {
      const double lambda = spec.rate(x.position);
      if (lambda > bound) throw SpecViolation("simulate_pdmp: rate exceeds declared bound");
      if (lambda >= bound || rng.uniform() * bound < lambda) {
        do_jump(t, x, JumpCause::Spontaneous);
      } else {
        next_proposal = t + rng.exponential(bound);
      }
    }
    if (target == grid_next) {
      ++k;
      if (k % opt.record_stride == 0 || t >= horizon) traj.samples.push_back({t, x});
    }
  }
  if (traj.samples.back().time < t) traj.samples.push_back({t, x});
  return traj;
}

/// Euler-Maruyama between jumps; spontaneous jumps by per-step Bernoulli
/// trials with p = 1 - exp(-lambda dt), forced jumps at the interpolated exit.
inline Trajectory simulate_shs(const ShsSpec& spec, const HybridState& x0, double horizon, double dt,
                               RandomStream& rng, std::size_t max_jumps, const SimulationOptions& opt = {}) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw Error("simulate_shs: need horizon > 0 and dt > 0");
  if (!spec.interior(x0)) throw Error("simulate_shs: initial state is not interior");

  Trajectory traj;
  HybridState x = x0;
  double t = 0.0;
  std::size_t k = 0;
  traj.samples.push_back({0.0, x});
  Vec noise;
  Vec y;

  auto do_jump = [&](double when, HybridState pre, JumpCause cause) {
    const ResetKernel& kernel = cause == JumpCause::Forced ? spec.boundary_reset : spec.reset;
    HybridState post = sample_reset(spec, kernel, rng);
    traj.jumps.push_back({when, std::move(pre), post, cause});
    detail::zeno_check(traj.jumps.size(), max_jumps, when);
    x = std::move(post);
    t = when;
  };

  while (t < horizon) {
    if (opt.stop_after_jumps && traj.jumps.size() >= opt.stop_after_jumps) break;
    const double grid_next = std::min(static_cast<double>(k + 1) * dt, horizon);
    const double h = grid_next - t;
    const auto& m = spec.mode(x.mode);
    const std::size_t d = m.dim();

    y.resize(d);
    m.field.eval_into(x.position, y);
    for (std::size_t p = 0; p < d; ++p) y[p] = x.position[p] + y[p] * h;
    if (!m.diffusion.is_zero()) {
      noise.resize(m.diffusion.wiener_dim());
      for (auto& n : noise) n = rng.normal();
      m.diffusion.add_noise(noise, std::sqrt(h), y);
    }
    if (!all_finite(y)) throw NonFiniteState("simulate_shs: non-finite state");

    if (!m.domain.contains(y)) {
      auto [frac, comp] = detail::exit_fraction(m.domain, x.position, y);
      do_jump(t + frac * h, HybridState{x.mode, detail::crossing_point(m.domain, x.position, y, frac, comp)},
              JumpCause::Forced);
      continue;
    }

    if (opt.bridge_correction && !m.diffusion.is_zero()) {
      bool crossed = false;
      for (std::size_t p = 0; p < d && !crossed; ++p) {
        const double v = m.diffusion.variance_rate(p) * h;
        if (v <= 0.0) continue;
        for (const bool upper : {true, false}) {
          if (upper ? !m.domain.bounded_above(p) : !m.domain.bounded_below(p)) continue;
          const double face = upper ? m.domain.hi[p] : m.domain.lo[p];
          const double prob = std::exp(-2.0 * (face - x.position[p]) * (face - y[p]) / v);
          if (rng.uniform() < prob) {
            Vec pre(d);
            for (std::size_t r = 0; r < d; ++r) pre[r] = 0.5 * (x.position[r] + y[r]);
            pre[p] = face;
            do_jump(t + 0.5 * h, HybridState{x.mode, std::move(pre)}, JumpCause::Forced);
            crossed = true;
            break;
          }
        }
      }
      if (crossed) continue;
    }

    const double lambda = spec.rate(x.position);
    x.position = y;
    t = grid_next;
    ++k;
    if (spec.rate.bound() > 0.0) {
      const double u = rng.uniform();
      if (lambda > 0.0 && u < -std::expm1(-lambda * h)) do_jump(t, x, JumpCause::Spontaneous);
    }
    if (k % opt.record_stride == 0 || t >= horizon) traj.samples.push_back({t, x});
  }
  if (traj.samples.back().time < t) traj.samples.push_back({t, x});
  return traj;
}

}  // namespace shs
