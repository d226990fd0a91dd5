#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "shs/analysis/first_passage.hpp"
#include "shs/analysis/test_function.hpp"
#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/hybrid/process.hpp"
#include "shs/swarm/config.hpp"

namespace shs {

/// Jump rate of one agent in the abstraction: a catalog rate over its own
/// guard value, or an estimated hazard over its own clock.
using AgentRate = std::variant<Rate, RateEstimate>;

struct AbstractAgent {
  std::uint64_t id = 0;
  double k = 0.0;
  std::optional<VectorField> field;
  ResetKernel reset;
  AgentRate rate = Rate::none();
};

/// The (beta, tau) process as a PDMP: guard decay and unit clocks between
/// jumps, jumps of agent i at rate lambda^i resetting (beta^i, tau^i) to (theta, 0)
/// with theta drawn from that agent's guard kernel.
struct AbstractionModel {
  Layout layout;
  std::vector<AbstractAgent> agents;
  double guard_dt = 1e-3;
  std::uint64_t seed = 0;

  std::size_t n() const noexcept { return layout.n; }
  std::size_t d() const noexcept { return layout.d; }

  std::span<const double> beta(std::span<const double> x, std::size_t i) const {
    return x.subspan(layout.beta(i, 0), layout.d);
  }

  double rate(std::size_t i, std::span<const double> x) const {
    const auto& r = agents[i].rate;
    if (const auto* c = std::get_if<Rate>(&r)) return (*c)(beta(x, i));
    return std::get<RateEstimate>(r)(x[layout.tau(i)]);
  }

  /// Flow velocity at x.
  Vec velocity(std::span<const double> x) const {
    require_dim(x, layout.width, "abstraction state");
    Vec v(layout.width, 0.0);
    for (std::size_t i = 0; i < n(); ++i) {
      const auto& a = agents[i];
      if (a.field) {
        const Vec b = (*a.field)(beta(x, i));
        for (std::size_t p = 0; p < d(); ++p) v[layout.beta(i, p)] = b[p];
      } else {
        for (std::size_t p = 0; p < d(); ++p) v[layout.beta(i, p)] = -a.k * x[layout.beta(i, p)];
      }
      v[layout.tau(i)] = 1.0;
    }
    return v;
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (agents.size() != layout.n) out.emplace_back("abstraction model: agent count differs from layout");
    if (!(guard_dt > 0.0)) out.emplace_back("abstraction model: guard_dt must be positive");
    for (const auto& a : agents) {
      const std::string tag = "agent " + std::to_string(a.id) + ": ";
      if (!(a.k >= 0.0)) out.push_back(tag + "k must be non-negative");
      if (a.reset.dim() != layout.d) out.push_back(tag + "guard kernel dimension differs from d");
      if (a.field && a.field->dim() != layout.d) out.push_back(tag + "guard field dimension differs from d");
      if (const auto* r = std::get_if<Rate>(&a.rate)) {
        if (auto e = r->check()) out.push_back(tag + *e);
      } else {
        const auto& t = std::get<RateEstimate>(a.rate);
        if (t.grid.size() != t.lambda.size() + 1 || t.valid.size() != t.lambda.size())
          out.push_back(tag + "malformed rate table");
      }
    }
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ValidationError(std::move(p));
  }
};

/// Abstraction model of a scenario. Agents take `rates[i]` when given, else
/// their declared abstract rate; an agent with neither is an error.
inline AbstractionModel abstraction_model(const ScenarioConfig& cfg, const std::vector<AgentRate>& rates = {}) {
  if (!rates.empty() && rates.size() != cfg.n_agents)
    throw DimensionMismatch("abstraction_model: need one rate per agent");
  AbstractionModel m;
  m.layout = Layout::abstraction(cfg.n_agents, cfg.dim);
  m.guard_dt = cfg.numerics.dt;
  m.seed = cfg.seed;
  for (std::size_t i = 0; i < cfg.n_agents; ++i) {
    const auto& a = cfg.agents[i];
    AbstractAgent ab{a.id, a.guard.k, a.guard.field, a.guard.reset, Rate::none()};
    if (!rates.empty()) ab.rate = rates[i];
    else if (a.abstract_rate) ab.rate = *a.abstract_rate;
    else throw ValidationError({"agent " + std::to_string(a.id) + " has no abstract rate"});
    m.agents.push_back(std::move(ab));
  }
  m.validate();
  return m;
}

namespace abstraction_model_detail {

/// One agent's coordinates moving through time.
struct AgentPath {
  const AbstractionModel& model;
  std::size_t i;
  RandomStream rng;
  Vec beta;
  double tau;
  double time = 0.0;
  std::size_t jumps = 0;
  // Pending proposal for catalog rates, remaining unit-exponential hazard for tables.
  double pending = std::numeric_limits<double>::quiet_NaN();

  void flow_by(double h) {
    if (h <= 0.0) return;
    const auto& a = model.agents[i];
    if (a.field) {
      beta = flow(*a.field, beta, h, model.guard_dt);
    } else {
      const double decay = std::exp(-a.k * h);
      for (double& b : beta) b *= decay;
    }
    tau += h;
    time += h;
  }

  void reset() {
    beta = model.agents[i].reset.sample(rng).position;
    tau = 0.0;
    ++jumps;
    pending = std::numeric_limits<double>::quiet_NaN();
  }

  void advance_rate(const Rate& r, double until) {
    const double bound = r.bound();
    if (!(bound > 0.0)) {
      flow_by(until - time);
      return;
    }
    for (;;) {
      if (std::isnan(pending)) pending = time + rng.exponential(bound);
      if (pending > until) {
        flow_by(until - time);
        return;
      }
      flow_by(pending - time);
      time = pending;
      pending = std::numeric_limits<double>::quiet_NaN();
      const double lambda = r(beta);
      if (lambda > bound)
        throw SpecViolation("abstract rate " + std::to_string(lambda) + " exceeds its bound " + std::to_string(bound));
      if (lambda >= bound || rng.uniform() * bound < lambda) reset();
    }
  }

  void advance_table(const RateEstimate& r, double until) {
    for (;;) {
      if (std::isnan(pending)) pending = rng.exponential(1.0);
      if (time >= until) return;
      const std::size_t m = r.bin_of(tau);
      if (!r.valid[m]) throw OutsideValidity("clock " + std::to_string(tau) + " left the rate validity region");
      const double lambda = r.lambda[m];
      const double to_edge = r.grid[m + 1] - tau;
      const bool edge = to_edge <= until - time;
      const double span = edge ? to_edge : until - time;
      if (lambda * span >= pending) {
        flow_by(pending / lambda);
        reset();
        continue;
      }
      pending -= lambda * span;
      flow_by(span);
      if (edge) tau = r.grid[m + 1];
    }
  }

  void advance(double until) {
    if (const auto* r = std::get_if<Rate>(&model.agents[i].rate)) advance_rate(*r, until);
    else advance_table(std::get<RateEstimate>(model.agents[i].rate), until);
    time = until;
  }
};

}  // namespace abstraction_model_detail

/// Samples the abstraction from x0 at the given increasing times. Agent i of
/// replication r draws from SeedPolicy{seed}.stream(id_i, r).
inline std::vector<Vec> simulate_abstraction(const AbstractionModel& model, std::span<const double> x0,
                                             std::span<const double> times, std::uint64_t replication,
                                             std::uint64_t seed) {
  const auto& l = model.layout;
  require_dim(x0, l.width, "abstraction initial state");
  for (std::size_t m = 0; m < times.size(); ++m)
    if (!(times[m] >= 0.0) || (m > 0 && !(times[m] >= times[m - 1])))
      throw Error("simulate_abstraction: times must be non-negative and non-decreasing");
  std::vector<Vec> out(times.size(), Vec(l.width));
  const SeedPolicy seeds{seed};
  for (std::size_t i = 0; i < l.n; ++i) {
    abstraction_model_detail::AgentPath path{model,
                                             i,
                                             RandomStream(seeds.stream(model.agents[i].id, replication)),
                                             Vec(x0.begin() + l.beta(i, 0), x0.begin() + l.beta(i, 0) + l.d),
                                             x0[l.tau(i)]};
    for (std::size_t m = 0; m < times.size(); ++m) {
      path.advance(times[m]);
      for (std::size_t p = 0; p < l.d; ++p) out[m][l.beta(i, p)] = path.beta[p];
      out[m][l.tau(i)] = path.tau;
    }
  }
  return out;
}

inline Vec simulate_abstraction(const AbstractionModel& model, std::span<const double> x0, double t,
                                std::uint64_t replication, std::uint64_t seed) {
  const double times[1] = {t};
  return std::move(simulate_abstraction(model, x0, times, replication, seed)[0]);
}

}  // namespace shs
