#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "shs/core/error.hpp"
#include "shs/swarm/simulate.hpp"

namespace shs {

/// Reset of one agent's guard and clock in the abstraction.
struct AbstractionEvent {
  double time = 0.0;
  std::size_t agent = 0;
  Vec gamma;
  friend bool operator==(const AbstractionEvent&, const AbstractionEvent&) = default;
};

/// The (beta, tau) process on the sampling grid, laid out per sample as
/// (beta^1, ..., beta^N, tau^1, ..., tau^N), together with its reset events.
struct AbstractionTrace {
  std::size_t n = 0;
  std::size_t d = 1;
  std::vector<double> guard_k;
  std::vector<double> times;
  std::vector<double> state;  // samples() rows of n * (d + 1) values
  std::vector<AbstractionEvent> events;

  friend bool operator==(const AbstractionTrace&, const AbstractionTrace&) = default;

  std::size_t width() const noexcept { return n * (d + 1); }
  std::size_t samples() const noexcept { return times.size(); }
  std::span<const double> row(std::size_t m) const { return {state.data() + m * width(), width()}; }
  std::span<const double> beta(std::size_t m, std::size_t i) const { return {state.data() + m * width() + i * d, d}; }
  double tau(std::size_t m, std::size_t i) const { return state[m * width() + n * d + i]; }
};

/// Projects a swarm trace onto (beta, tau); modes and positions are dropped.
inline AbstractionTrace extract_abstraction(const SwarmTrace& tr) {
  AbstractionTrace abs;
  abs.n = tr.n;
  abs.d = tr.d;
  abs.guard_k = tr.guard_k;
  abs.times = tr.times;
  abs.state.reserve(tr.samples() * abs.width());
  for (std::size_t m = 0; m < tr.samples(); ++m) {
    for (std::size_t i = 0; i < tr.n; ++i) {
      const auto b = tr.beta_at(m, i);
      abs.state.insert(abs.state.end(), b.begin(), b.end());
    }
    for (std::size_t i = 0; i < tr.n; ++i) abs.state.push_back(tr.upsilon_at(m, i));
  }
  abs.events.reserve(tr.jumps.size());
  for (const auto& j : tr.jumps) abs.events.push_back({j.time, j.agent, j.post_gamma});
  return abs;
}

namespace abstraction_detail {

inline void check_clocks(const AbstractionTrace& abs, const std::vector<std::vector<double>>& resets) {
  for (std::size_t i = 0; i < abs.n; ++i) {
    const auto& ev = resets[i];
    std::size_t e = 0;
    double last = 0.0;
    for (std::size_t m = 0; m < abs.samples(); ++m) {
      const double t = abs.times[m];
      while (e < ev.size() && ev[e] < t) last = ev[e++];
      const double tau = abs.tau(m, i);
      // A reset dated exactly at a sample time may belong to the next step.
      if (e < ev.size() && ev[e] == t && tau == 0.0) last = ev[e++];
      const double expected = t - last;
      if (!(std::abs(tau - expected) <= 1e-9 * std::max(1.0, std::abs(t))))
        throw CorruptInput("agent " + std::to_string(i) + ": clock " + std::to_string(tau) + " at t=" +
                           std::to_string(t) + " disagrees with reset log (expected " + std::to_string(expected) +
                           ")");
    }
  }
}

}  // namespace abstraction_detail

/// Jump times per agent as the reset points of each clock, read from the
/// embedded event log and checked against the gridded clocks.
inline std::vector<std::vector<double>> reconstruct_jump_times(const AbstractionTrace& abs) {
  std::vector<std::vector<double>> out(abs.n);
  for (const auto& e : abs.events) {
    if (e.agent >= abs.n) throw CorruptInput("reset event for unknown agent " + std::to_string(e.agent));
    auto& v = out[e.agent];
    if (!v.empty() && !(e.time > v.back()))
      throw CorruptInput("non-monotone reset times for agent " + std::to_string(e.agent));
    v.push_back(e.time);
  }
  for (std::size_t m = 1; m < abs.samples(); ++m)
    if (!(abs.times[m] > abs.times[m - 1])) throw CorruptInput("sample times are not increasing");
  abstraction_detail::check_clocks(abs, out);
  return out;
}

/// Jump times read from the gridded clocks alone: a reset is detected where
/// tau falls, and dated t - tau. Resets closer together than one sample
/// interval collapse onto the last one.
inline std::vector<std::vector<double>> reconstruct_jump_times_from_grid(const AbstractionTrace& abs,
                                                                         double tol = 1e-9) {
  std::vector<std::vector<double>> out(abs.n);
  for (std::size_t m = 0; m < abs.samples(); ++m) {
    if (m > 0 && !(abs.times[m] > abs.times[m - 1])) throw CorruptInput("sample times are not increasing");
    for (std::size_t i = 0; i < abs.n; ++i) {
      const double tau = abs.tau(m, i);
      if (!(tau >= 0.0) || tau > abs.times[m] + tol) throw CorruptInput("clock outside [0, t]");
      if (m == 0) {
        continue;
      }
      const double advance = abs.times[m] - abs.times[m - 1];
      const double prev = abs.tau(m - 1, i);
      if (std::abs(tau - (prev + advance)) <= tol * std::max(1.0, abs.times[m])) continue;
      if (tau > prev + advance) throw CorruptInput("agent " + std::to_string(i) + ": clock runs faster than time");
      if (tau > advance + tol * std::max(1.0, abs.times[m]))
        throw CorruptInput("agent " + std::to_string(i) + ": non-monotone clock without a reset");
      out[i].push_back(abs.times[m] - tau);
    }
  }
  return out;
}

}  // namespace shs
