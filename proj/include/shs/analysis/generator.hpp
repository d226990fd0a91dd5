#pragma once

#include <cmath>
#include <limits>
#include <span>

#include "shs/agent/agent.hpp"
#include "shs/analysis/abstraction_model.hpp"
#include "shs/analysis/test_function.hpp"
#include "shs/core/rng.hpp"
#include "shs/hybrid/process.hpp"

namespace shs {

/// Monte-Carlo value with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

namespace generator_detail {

// lambda * mean over reps of f(y) - f(x), y drawn by `draw` into a copy of x.
template <typename Draw>
Estimate jump_term(const TestFunction& f, std::span<const double> x, const Layout& layout, double lambda,
                   std::size_t reps, Draw&& draw) {
  if (lambda == 0.0) return {0.0, 0.0};
  if (reps == 0) throw Error("generator: reps must be positive");
  const double fx = f(x, layout);
  Vec y(x.begin(), x.end());
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    draw(y);
    const double diff = f(y, layout) - fx;
    sum += diff;
    sum2 += diff * diff;
  }
  const double n = static_cast<double>(reps);
  const double mean = sum / n;
  const double var = reps > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {lambda * mean, reps > 1 ? lambda * std::sqrt(var / n) : std::numeric_limits<double>::quiet_NaN()};
}

// Jump term of abstraction agent i: (beta^i, tau^i) <- (theta, 0).
inline Estimate agent_jump_term(const ResetKernel& kernel, double lambda, const TestFunction& f,
                                std::span<const double> x, const Layout& layout, std::size_t i, RandomStream& rng,
                                std::size_t reps) {
  return jump_term(f, x, layout, lambda, reps, [&](Vec& y) {
    const Vec theta = kernel.sample(rng).position;
    for (std::size_t p = 0; p < layout.d; ++p) y[layout.beta(i, p)] = theta[p];
    y[layout.tau(i)] = 0.0;
  });
}

}  // namespace generator_detail

/// Generator of a PDMP on f over the position: b . grad f + lambda E[f(y) - f(x)].
inline Estimate generator_pdmp(const PdmpSpec& spec, const TestFunction& f, const HybridState& x, RandomStream& rng,
                               std::size_t reps) {
  const auto& mode = spec.mode(x.mode);
  const Layout layout = Layout::plain(mode.field.dim());
  f.validate(layout);
  require_dim(x.position, layout.width, "generator_pdmp state");
  const double lie = lie_derivative(mode.field, f, x.position, layout);
  const double lambda = spec.rate(x.position);
  const auto jump = generator_detail::jump_term(f, x.position, layout, lambda, reps, [&](Vec& y) {
    y = sample_reset(spec, spec.reset, rng).position;
    require_dim(y, layout.width, "generator_pdmp reset");
  });
  return {lie + jump.value, jump.se};
}

/// Generator of one agent's (beta, tau) at a given jump rate. The point is (beta_1..beta_d, tau).
inline Estimate generator_agent(const GuardSpec& guard, double lambda, const TestFunction& f,
                                std::span<const double> point, RandomStream& rng, std::size_t reps) {
  const std::size_t d = guard.reset.dim();
  const Layout layout = Layout::abstraction(1, d);
  f.validate(layout);
  require_dim(point, layout.width, "generator_agent point");
  if (!(lambda >= 0.0)) throw Error("generator_agent: rate must be non-negative");
  AbstractionModel m{layout, {{0, guard.k, guard.field, guard.reset, Rate::none()}}};
  const Vec v = m.velocity(point);
  const double lie = dot(f.gradient(point, layout), v);
  const auto jump = generator_detail::agent_jump_term(guard.reset, lambda, f, point, layout, 0, rng, reps);
  return {lie + jump.value, jump.se};
}

/// Generator of the abstraction: flow term plus one jump term per agent.
inline Estimate generator_swarm(const AbstractionModel& model, const TestFunction& f, std::span<const double> point,
                                RandomStream& rng, std::size_t reps) {
  const auto& layout = model.layout;
  f.validate(layout);
  require_dim(point, layout.width, "generator_swarm point");
  const double lie = dot(f.gradient(point, layout), model.velocity(point));
  double value = lie, var = 0.0;
  for (std::size_t i = 0; i < model.n(); ++i) {
    const double lambda = model.rate(i, point);
    const auto jump =
        generator_detail::agent_jump_term(model.agents[i].reset, lambda, f, point, layout, i, rng, reps);
    value += jump.value;
    var += jump.se * jump.se;
  }
  return {value, std::sqrt(var)};
}

}  // namespace shs
