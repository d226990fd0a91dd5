#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "shs/analysis/abstraction_model.hpp"
#include "shs/analysis/generator.hpp"
#include "shs/analysis/test_function.hpp"
#include "shs/core/rng.hpp"

namespace shs {

/// Two estimates compared against a tolerance of bias + 3 combined SE.
struct ResidualReport {
  Estimate lhs;
  Estimate rhs;
  double residual = 0.0;
  double se = 0.0;
  double bias_bound = 0.0;
  bool pass = false;
};

struct ForwardReport {
  Vec times;
  Vec mean_f;  // P_t f(x0)
  Vec mean_f_se;
  Vec derivative;  // central differences of P_t f, interior points only
  Vec mean_lf;     // P_t Lf(x0)
  Vec residual;
  Vec residual_se;
  double max_abs_residual = 0.0;
  double bias_bound = 0.0;
  bool pass = false;
};

namespace kolmogorov_detail {

struct Accumulator {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  Estimate estimate() const {
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double m = sum / static_cast<double>(n);
    if (n == 1) return {m, std::numeric_limits<double>::quiet_NaN()};
    const double var = std::max(0.0, (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return {m, std::sqrt(var / static_cast<double>(n))};
  }
};

// Seeds of estimator-internal draws (generator kernels, nested inner runs), kept
// apart from the path streams.
inline std::uint64_t salted(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ (0xD1B54A32D192ED03ULL * (salt + 1)));
}

inline ResidualReport compare(Estimate lhs, Estimate rhs, double bias) {
  ResidualReport r{lhs, rhs};
  r.residual = std::abs(lhs.value - rhs.value);
  const double a = std::isnan(lhs.se) ? 0.0 : lhs.se, b = std::isnan(rhs.se) ? 0.0 : rhs.se;
  r.se = std::sqrt(a * a + b * b);
  r.bias_bound = bias;
  r.pass = r.residual <= bias + 3.0 * r.se;
  return r;
}

}  // namespace kolmogorov_detail

/// P_t f(x0) as the mean of f over independent runs of the abstraction.
inline Estimate semigroup_estimate(const AbstractionModel& model, const TestFunction& f, std::span<const double> x0,
                                   double t, std::size_t reps) {
  f.validate(model.layout);
  if (!(t >= 0.0)) throw Error("semigroup_estimate: t must be non-negative");
  if (reps == 0) throw Error("semigroup_estimate: reps must be positive");
  if (t == 0.0) return {f(x0, model.layout), 0.0};
  kolmogorov_detail::Accumulator acc;
  for (std::size_t r = 0; r < reps; ++r) acc.add(f(simulate_abstraction(model, x0, t, r, model.seed), model.layout));
  return acc.estimate();
}

struct ResidualOptions {
  double h = 0.01;
  /// Allowed O(h) bias per unit h (O(h^2) for the forward equation).
  double bias_budget = 1.0;
  /// Kernel draws per generator evaluation.
  std::size_t jump_reps = 1;
};

/// Compares the difference quotient (P_h f - f)/h at x0 against the generator.
inline ResidualReport generator_residual(const AbstractionModel& model, const TestFunction& f,
                                         std::span<const double> x0, std::size_t reps,
                                         const ResidualOptions& opt = {}) {
  f.validate(model.layout);
  if (!(opt.h > 0.0)) throw Error("generator_residual: h must be positive");
  if (reps == 0) throw Error("generator_residual: reps must be positive");
  const double fx = f(x0, model.layout);
  kolmogorov_detail::Accumulator quotient;
  for (std::size_t r = 0; r < reps; ++r)
    quotient.add((f(simulate_abstraction(model, x0, opt.h, r, model.seed), model.layout) - fx) / opt.h);
  RandomStream rng(kolmogorov_detail::salted(model.seed, 1));
  const Estimate gen = generator_swarm(model, f, x0, rng, std::max<std::size_t>(reps, 2));
  return kolmogorov_detail::compare(quotient.estimate(), gen, opt.bias_budget * opt.h);
}

/// P_{t+s} f(x0) against the nested estimate of P_t (P_s f)(x0).
inline ResidualReport chapman_kolmogorov_check(const AbstractionModel& model, const TestFunction& f,
                                               std::span<const double> x0, double t, double s, std::size_t outer,
                                               std::size_t inner) {
  f.validate(model.layout);
  if (!(t >= 0.0) || !(s >= 0.0)) throw Error("chapman_kolmogorov_check: t and s must be non-negative");
  if (outer == 0 || inner == 0) throw Error("chapman_kolmogorov_check: reps must be positive");
  const Estimate direct = semigroup_estimate(model, f, x0, t + s, outer);
  // With t = 0 the outer law is a point mass and the nested estimator is the direct one.
  if (t == 0.0) return kolmogorov_detail::compare(direct, direct, 0.0);
  kolmogorov_detail::Accumulator nested;
  for (std::size_t r = 0; r < outer; ++r) {
    const Vec xt = simulate_abstraction(model, x0, t, r, model.seed);
    if (s == 0.0) {
      nested.add(f(xt, model.layout));
      continue;
    }
    const std::uint64_t inner_seed = kolmogorov_detail::salted(model.seed, 2 + r);
    double sum = 0.0;
    for (std::size_t q = 0; q < inner; ++q) sum += f(simulate_abstraction(model, xt, s, q, inner_seed), model.layout);
    nested.add(sum / static_cast<double>(inner));
  }
  return kolmogorov_detail::compare(direct, nested.estimate(), 0.0);
}

/// Weak forward equation d/dt P_t f = P_t Lf on a uniform grid 0, h, ..., t_end.
///
/// Each replication is one path sampled on the grid; at interior points its
/// central difference of f is paired with a generator evaluation at the path
/// state, so the residual SE comes from per-path differences.
inline ForwardReport forward_equation_residual(const AbstractionModel& model, const TestFunction& f,
                                               std::span<const double> x0, double t_end, std::size_t reps,
                                               const ResidualOptions& opt = {.h = 0.1}) {
  f.validate(model.layout);
  if (!(opt.h > 0.0) || !(t_end >= 2.0 * opt.h)) throw Error("forward_equation_residual: need t_end >= 2h > 0");
  if (reps == 0) throw Error("forward_equation_residual: reps must be positive");
  const auto points = static_cast<std::size_t>(std::floor(t_end / opt.h + 1e-9)) + 1;
  ForwardReport rep;
  for (std::size_t m = 0; m < points; ++m) rep.times.push_back(static_cast<double>(m) * opt.h);
  using kolmogorov_detail::Accumulator;
  std::vector<Accumulator> fa(points), da(points), la(points), ra(points);
  Vec fv(points);
  const SeedPolicy kernels{kolmogorov_detail::salted(model.seed, 0)};
  for (std::size_t r = 0; r < reps; ++r) {
    const auto path = simulate_abstraction(model, x0, rep.times, r, model.seed);
    RandomStream rng(kernels.stream(0, r));
    for (std::size_t m = 0; m < points; ++m) {
      fv[m] = f(path[m], model.layout);
      fa[m].add(fv[m]);
    }
    for (std::size_t m = 1; m + 1 < points; ++m) {
      const double dq = (fv[m + 1] - fv[m - 1]) / (2.0 * opt.h);
      const double lf = generator_swarm(model, f, path[m], rng, opt.jump_reps).value;
      da[m].add(dq);
      la[m].add(lf);
      ra[m].add(dq - lf);
    }
  }
  rep.bias_bound = opt.bias_budget * opt.h * opt.h;
  rep.pass = true;
  for (std::size_t m = 0; m < points; ++m) {
    const auto e = fa[m].estimate();
    rep.mean_f.push_back(e.value);
    rep.mean_f_se.push_back(e.se);
    if (m == 0 || m + 1 == points) continue;
    rep.derivative.push_back(da[m].estimate().value);
    rep.mean_lf.push_back(la[m].estimate().value);
    const auto res = ra[m].estimate();
    rep.residual.push_back(res.value);
    rep.residual_se.push_back(res.se);
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(res.value));
    const double se = std::isnan(res.se) ? 0.0 : res.se;
    if (!(std::abs(res.value) <= rep.bias_bound + 3.0 * se)) rep.pass = false;
  }
  return rep;
}

}  // namespace shs
