#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "shs/agent/agent.hpp"
#include "shs/core/error.hpp"
#include "shs/core/rng.hpp"
#include "shs/swarm/config.hpp"

namespace shs {

/// A neighbour whose clock is held at `tau` while agent i runs.
struct FrozenNeighbor {
  std::size_t agent = 0;
  Vec weight;
  double tau = 0.0;
  friend bool operator==(const FrozenNeighbor&, const FrozenNeighbor&) = default;
};

/// Conditioning of a first passage: the agent's guard right after its reset
/// and the frozen clocks of its coupled neighbours.
struct FirstPassageConditioning {
  Vec gamma;
  std::vector<FrozenNeighbor> neighbors;
  friend bool operator==(const FirstPassageConditioning&, const FirstPassageConditioning&) = default;
};

/// Conditioning for agent i from the clocks of all agents; entries that are
/// not finite mean "never jumped" and are left out.
inline FirstPassageConditioning freeze_conditioning(const ScenarioConfig& cfg, std::size_t i, Vec gamma,
                                                    std::span<const double> clocks) {
  if (i >= cfg.n_agents) throw UnknownAgent("no agent at index " + std::to_string(i));
  require_dim(clocks, cfg.n_agents, "freeze_conditioning clocks");
  require_dim(gamma, cfg.dim, "freeze_conditioning guard");
  FirstPassageConditioning c{std::move(gamma), {}};
  for (const auto& e : cfg.coupling.incoming(i))
    if (std::isfinite(clocks[e.from])) c.neighbors.push_back({e.from, e.weight, clocks[e.from]});
  return c;
}

/// Histogram density and empirical CDF of hitting times on a grid.
struct FirstPassageEstimate {
  Vec grid;        // bin edges, grid[0] = 0
  Vec density;     // per bin, grid.size() - 1 entries
  Vec density_se;
  Vec cdf;         // at the grid points
  Vec cdf_se;
  std::size_t reps = 0;
  std::size_t hits = 0;
  bool truncated = false;  // some paths had not hit by the horizon
  std::vector<double> samples;  // sorted hitting times
  FirstPassageConditioning conditioning;

  double horizon() const { return grid.back(); }

  static void check_grid(std::span<const double> grid) {
    if (grid.size() < 2 || grid[0] != 0.0) throw Error("first passage grid must start at 0 with at least one bin");
    for (std::size_t m = 1; m < grid.size(); ++m)
      if (!(grid[m] > grid[m - 1])) throw Error("first passage grid must be increasing");
  }

  static FirstPassageEstimate from_samples(std::vector<double> samples, std::size_t reps, Vec grid) {
    check_grid(grid);
    if (reps == 0 || samples.size() > reps) throw Error("first passage: need 0 < samples <= reps");
    std::sort(samples.begin(), samples.end());
    FirstPassageEstimate est;
    const auto n = static_cast<double>(reps);
    const std::size_t bins = grid.size() - 1;
    est.density.assign(bins, 0.0);
    est.density_se.assign(bins, 0.0);
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const auto below = std::upper_bound(samples.begin(), samples.end(), grid[m]) - samples.begin();
      const double p = static_cast<double>(below) / n;
      est.cdf.push_back(p);
      est.cdf_se.push_back(std::sqrt(p * (1.0 - p) / n));
    }
    for (std::size_t m = 0; m < bins; ++m) {
      // Bin m is (grid[m], grid[m + 1]]; bin 0 also takes hits at exactly 0.
      const double lo_mass = m == 0 ? 0.0 : est.cdf[m];
      const double p = est.cdf[m + 1] - lo_mass;
      const double w = grid[m + 1] - grid[m];
      est.density[m] = p / w;
      est.density_se[m] = std::sqrt(p * (1.0 - p) / n) / w;
    }
    est.hits = static_cast<std::size_t>(std::upper_bound(samples.begin(), samples.end(), grid.back()) - samples.begin());
    est.truncated = est.hits < reps;
    est.reps = reps;
    est.samples = std::move(samples);
    est.grid = std::move(grid);
    return est;
  }

  /// Bin holding tau: (grid[m], grid[m + 1]], with 0 in the first bin.
  std::size_t bin_of(double tau) const {
    if (!(tau >= 0.0) || tau > horizon()) throw OutsideValidity("clock value outside the first passage grid");
    const auto m = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), tau) - grid.begin());
    return m == 0 ? 0 : m - 1;
  }

  /// Linear interpolation of the empirical CDF between grid points.
  double cdf_at(double tau) const {
    const std::size_t m = bin_of(tau);
    const double f = (tau - grid[m]) / (grid[m + 1] - grid[m]);
    return cdf[m] + f * (cdf[m + 1] - cdf[m]);
  }
};

/// Hazard psi / (1 - Psi) at a clock value.
inline double jump_rate_from_fp(const FirstPassageEstimate& est, double tau, double epsilon = 0.05) {
  const double survival = 1.0 - est.cdf_at(tau);
  if (survival < epsilon)
    throw SurvivalTooSmall("survival " + std::to_string(survival) + " below " + std::to_string(epsilon) +
                               " at tau=" + std::to_string(tau),
                           survival);
  return est.density[est.bin_of(tau)] / survival;
}

/// Piecewise-constant hazard over clock bins with a validity mask.
struct RateEstimate {
  Vec grid;
  Vec lambda;
  std::vector<bool> valid;
  double epsilon = 0.05;
  friend bool operator==(const RateEstimate&, const RateEstimate&) = default;

  std::size_t bin_of(double tau) const {
    if (!(tau >= 0.0) || tau >= grid.back()) throw OutsideValidity("clock " + std::to_string(tau) + " beyond rate table");
    const auto it = std::upper_bound(grid.begin(), grid.end(), tau);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
  }

  double operator()(double tau) const {
    const std::size_t m = bin_of(tau);
    if (!valid[m]) throw OutsideValidity("clock " + std::to_string(tau) + " outside the rate validity region");
    return lambda[m];
  }

  /// End of the leading run of valid bins.
  double valid_until() const {
    std::size_t m = 0;
    while (m < valid.size() && valid[m]) ++m;
    return grid[m];
  }
};

/// Hazard per bin: density over the survival at the bin midpoint. A bin is
/// valid when the survival at its right edge is at least epsilon.
inline RateEstimate rate_estimate(const FirstPassageEstimate& est, double epsilon = 0.05) {
  RateEstimate r;
  r.grid = est.grid;
  r.epsilon = epsilon;
  for (std::size_t m = 0; m < est.density.size(); ++m) {
    const double mid = 0.5 * (est.cdf[m] + est.cdf[m + 1]);
    const bool ok = 1.0 - est.cdf[m + 1] >= epsilon;
    r.valid.push_back(ok);
    r.lambda.push_back(ok ? est.density[m] / (1.0 - mid) : 0.0);
  }
  return r;
}

struct FirstPassageOptions {
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

namespace fp_detail {

inline void frozen_input(const FirstPassageConditioning& c, double k, std::size_t count, Vec& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    const double decay = std::exp(-k * c.neighbors[r].tau);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += c.neighbors[r].weight[p] * decay;
  }
}

// Smallest crossing fraction over components between gaps ga and gb; 0 when
// some component already sits on the modified guard, > 1 for no crossing.
inline double crossing_fraction(std::span<const double> ga, std::span<const double> gb) {
  double best = 2.0;
  for (std::size_t p = 0; p < ga.size(); ++p) {
    if (!(ga[p] > 0.0)) return 0.0;
    if (gb[p] > 0.0) continue;
    best = std::min(best, ga[p] / (ga[p] - gb[p]));
  }
  return best;
}

}  // namespace fp_detail

/// First hitting time of the modified guard beta - I by agent i started from
/// its initial kernel, with neighbour clocks frozen at the conditioning values.
///
/// A frozen neighbour j enters the neighbourhood once the agent's own clock
/// reaches tau^j and then contributes w^{ij} e^{-k tau^j}. Paths use
/// Euler-Maruyama steps of length dt, with linear interpolation of the gap
/// inside a step. Replication r draws from SeedPolicy{seed}.stream(id, r).
inline FirstPassageEstimate estimate_first_passage(const AgentSpec& spec, const FirstPassageConditioning& cond,
                                                   Vec grid, std::size_t reps, const FirstPassageOptions& opt = {}) {
  FirstPassageEstimate::check_grid(grid);
  if (auto p = spec.problems(); !p.empty()) throw ValidationError(std::move(p));
  if (reps == 0) throw Error("first passage: reps must be positive");
  if (!(opt.dt > 0.0)) throw Error("first passage: dt must be positive");
  const std::size_t d = spec.dim;
  require_dim(cond.gamma, d, "first passage guard");
  for (double g : cond.gamma)
    if (!(g > 0.0)) throw SpecViolation("first passage: guard must be positive");
  auto nb = cond.neighbors;
  for (const auto& n : nb) {
    require_dim(n.weight, d, "first passage neighbour weight");
    if (!(n.tau >= 0.0)) throw Error("first passage: frozen clocks must be non-negative");
  }
  std::stable_sort(nb.begin(), nb.end(), [](const FrozenNeighbor& a, const FrozenNeighbor& b) { return a.tau < b.tau; });
  const FirstPassageConditioning sorted{cond.gamma, nb};

  const double horizon = grid.back();
  const double k = spec.guard.k;
  const SeedPolicy seeds{opt.seed};
  std::vector<double> hits;
  hits.reserve(reps);
  Vec input(d), z0(d), z1(d), beta0(d), beta1(d), drift(d), ga(d), gb(d), noise, za(d), ba(d);
  Vec k1(d), k2(d), k3(d), k4(d), tmp(d);

  for (std::size_t r = 0; r < reps; ++r) {
    RandomStream rng(seeds.stream(spec.id, r));
    const HybridState x0 = spec.initial.sample(rng);
    const auto& mode = spec.mode(x0.mode);
    z0 = x0.position;
    beta0 = cond.gamma;
    std::size_t joined = 0;
    while (joined < nb.size() && nb[joined].tau <= 0.0) ++joined;
    fp_detail::frozen_input(sorted, k, joined, input);
    for (std::size_t p = 0; p < d; ++p) ga[p] = guard_gap_modified(beta0[p], z0[p], input[p]);
    double hit = std::numeric_limits<double>::quiet_NaN();
    if (fp_detail::crossing_fraction(ga, ga) == 0.0) hit = 0.0;

    double t0 = 0.0;
    for (std::size_t step = 0; std::isnan(hit) && t0 < horizon; ++step) {
      const double t1 = std::min(static_cast<double>(step + 1) * opt.dt, horizon);
      const double h = t1 - t0;
      mode.drift.eval_into(z0, drift);
      for (std::size_t p = 0; p < d; ++p) z1[p] = z0[p] + drift[p] * h;
      if (!mode.diffusion.is_zero()) {
        noise.resize(mode.diffusion.wiener_dim());
        for (auto& n : noise) n = rng.normal();
        mode.diffusion.add_noise(noise, std::sqrt(h), z1);
      }
      if (spec.guard.closed_form()) {
        const double decay = std::exp(-k * t1);
        for (std::size_t p = 0; p < d; ++p) beta1[p] = cond.gamma[p] * decay;
      } else {
        beta1 = beta0;
        rk4_step(*spec.guard.field, beta1, h, k1, k2, k3, k4, tmp);
      }
      if (!all_finite(z1) || !all_finite(beta1)) throw NonFiniteState("first passage: non-finite state");

      // (ta, ga): last examined point of the step and its gaps under the current input.
      double ta = t0;
      za = z0;
      ba = beta0;
      while (joined < nb.size() && nb[joined].tau < t1) {
        const double s = nb[joined].tau;
        const double f = (s - t0) / h;
        for (std::size_t p = 0; p < d; ++p) {
          za[p] = z0[p] + f * (z1[p] - z0[p]);
          ba[p] = beta0[p] + f * (beta1[p] - beta0[p]);
          gb[p] = guard_gap_modified(ba[p], za[p], input[p]);
        }
        if (const double c = fp_detail::crossing_fraction(ga, gb); c <= 1.0) {
          hit = ta + c * (s - ta);
          break;
        }
        while (joined < nb.size() && nb[joined].tau == s) ++joined;
        fp_detail::frozen_input(sorted, k, joined, input);
        for (std::size_t p = 0; p < d; ++p) gb[p] = guard_gap_modified(ba[p], za[p], input[p]);
        if (fp_detail::crossing_fraction(gb, gb) == 0.0) {
          hit = s;
          break;
        }
        ta = s;
        ga = gb;
      }
      if (!std::isnan(hit)) break;
      for (std::size_t p = 0; p < d; ++p) gb[p] = guard_gap_modified(beta1[p], z1[p], input[p]);
      const double c = fp_detail::crossing_fraction(ga, gb);
      if (c <= 1.0) {
        hit = std::min(ta + c * (t1 - ta), t1);
        break;
      }
      std::swap(z0, z1);
      std::swap(beta0, beta1);
      ga = gb;
      t0 = t1;
    }
    if (!std::isnan(hit)) hits.push_back(hit);
  }
  auto est = FirstPassageEstimate::from_samples(std::move(hits), reps, std::move(grid));
  est.conditioning = cond;
  return est;
}

}  // namespace shs
