#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "shs/core/error.hpp"
#include "shs/hybrid/catalog.hpp"
#include "shs/hybrid/process.hpp"
#include "shs/swarm/simulate.hpp"

namespace shs {

/// Mean number of jumps leaving a region, and its rate, on a time grid.
struct IntensityEstimate {
  Box region;
  Vec grid;
  Vec count;  // J(region x (0, t]) at the grid points
  Vec count_se;
  Vec rate;  // r_t(region) by central differences, one-sided at the ends
  Vec rate_se;
  std::size_t reps = 0;

  /// Largest gap between J(t) - J(t_0) and the trapezoid integral of r.
  double quadrature_gap() const {
    double integral = 0.0, worst = 0.0;
    for (std::size_t m = 1; m < grid.size(); ++m) {
      integral += 0.5 * (rate[m] + rate[m - 1]) * (grid[m] - grid[m - 1]);
      worst = std::max(worst, std::abs(count[m] - count[0] - integral));
    }
    return worst;
  }
};

namespace intensity_detail {

inline IntensityEstimate from_times(const std::vector<std::vector<double>>& per_rep, Box region, Vec grid) {
  if (per_rep.empty()) throw Error("mean_jump_intensity: ensemble is empty");
  if (grid.size() < 2) throw Error("mean_jump_intensity: grid needs at least two points");
  for (std::size_t m = 1; m < grid.size(); ++m)
    if (!(grid[m] > grid[m - 1])) throw Error("mean_jump_intensity: grid must be increasing");
  const std::size_t points = grid.size();
  const auto n = static_cast<double>(per_rep.size());
  Vec c_sum(points, 0.0), c_sum2(points, 0.0), r_sum(points, 0.0), r_sum2(points, 0.0);
  Vec counts(points);
  for (auto times : per_rep) {
    std::sort(times.begin(), times.end());
    for (std::size_t m = 0; m < points; ++m)
      counts[m] = static_cast<double>(std::upper_bound(times.begin(), times.end(), grid[m]) - times.begin());
    for (std::size_t m = 0; m < points; ++m) {
      c_sum[m] += counts[m];
      c_sum2[m] += counts[m] * counts[m];
      const std::size_t a = m == 0 ? 0 : m - 1, b = m + 1 == points ? m : m + 1;
      const double r = (counts[b] - counts[a]) / (grid[b] - grid[a]);
      r_sum[m] += r;
      r_sum2[m] += r * r;
    }
  }
  IntensityEstimate est;
  est.region = std::move(region);
  est.reps = per_rep.size();
  auto se = [&](double s, double s2) {
    if (per_rep.size() < 2) return 0.0;
    const double mean = s / n;
    return std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) / n);
  };
  for (std::size_t m = 0; m < points; ++m) {
    est.count.push_back(c_sum[m] / n);
    est.count_se.push_back(se(c_sum[m], c_sum2[m]));
    est.rate.push_back(r_sum[m] / n);
    est.rate_se.push_back(se(r_sum[m], r_sum2[m]));
  }
  est.grid = std::move(grid);
  return est;
}

}  // namespace intensity_detail

/// Jumps of single-process trajectories whose pre-jump position lies in the
/// region (and, when given, whose pre-jump mode is `mode`).
inline IntensityEstimate mean_jump_intensity(std::span<const Trajectory> ensemble, const Box& region, Vec grid,
                                             std::optional<ModeId> mode = std::nullopt) {
  std::vector<std::vector<double>> per_rep;
  per_rep.reserve(ensemble.size());
  for (const auto& tr : ensemble) {
    auto& times = per_rep.emplace_back();
    for (const auto& j : tr.jumps) {
      require_dim(j.pre.position, region.dim(), "mean_jump_intensity region");
      if (mode && j.pre.mode != *mode) continue;
      if (region.contains(j.pre.position)) times.push_back(j.time);
    }
  }
  return intensity_detail::from_times(per_rep, region, std::move(grid));
}

/// Jumps of any agent in swarm traces whose pre-jump z lies in the region.
inline IntensityEstimate mean_jump_intensity(std::span<const SwarmTrace> ensemble, const Box& region, Vec grid) {
  std::vector<std::vector<double>> per_rep;
  per_rep.reserve(ensemble.size());
  for (const auto& tr : ensemble) {
    auto& times = per_rep.emplace_back();
    for (const auto& j : tr.jumps) {
      require_dim(j.pre_z, region.dim(), "mean_jump_intensity region");
      if (region.contains(j.pre_z)) times.push_back(j.time);
    }
  }
  return intensity_detail::from_times(per_rep, region, std::move(grid));
}

}  // namespace shs
