#pragma once

// Stand-in for a trained traffic forecaster: realized future slice
// contributions corrupted by Gaussian error, and the allocation they suggest.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ranslice/environment.hpp"
#include "ranslice/random.hpp"

namespace ranslice {

struct ForecastConfig {
  int horizon = 1;
  int history = 10;  // carried for interface fidelity; the oracle forecaster ignores it
  double noise_std = 0.0;
  double noise_mean = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (history < 0) throw ConfigError("forecast history must be >= 0");
    if (!(noise_std >= 0)) throw ConfigError("forecast noise_std must be >= 0");
  }
};

struct Forecast {
  std::vector<ContributionVector> per_step;
  ContributionVector aggregated;
};

struct FutureContribution {
  std::vector<ContributionVector> steps;
  bool truncated = false;  // fewer than `horizon` windows remained
};

// Realized contributions of windows [window_index, window_index + horizon),
// using absolute window indices of `demand` (as produced by window_demand).
inline FutureContribution oracle_future_contribution(const std::vector<std::vector<std::int64_t>>& demand,
                                                     std::int64_t window_index, int horizon,
                                                     std::int64_t total_windows) {
  expects(horizon >= 1, "forecast horizon must be >= 1");
  expects(window_index >= 0 && window_index < total_windows, "forecast window out of range");
  total_windows = std::min<std::int64_t>(total_windows, static_cast<std::int64_t>(demand.size()));
  FutureContribution out;
  const std::int64_t end = std::min<std::int64_t>(window_index + horizon, total_windows);
  out.truncated = end < window_index + horizon;
  for (std::int64_t w = window_index; w < end; ++w)
    out.steps.push_back(compute_contribution(demand[static_cast<std::size_t>(w)]));
  return out;
}

inline FutureContribution oracle_future_contribution(const EpisodeTraffic& traffic, std::int64_t window_index,
                                                     int horizon, const EnvConfig& cfg) {
  return oracle_future_contribution(window_demand(traffic, cfg.window_slots), window_index, horizon,
                                    cfg.episode_windows + 1);
}

// Clamps to [0, 1] and rescales onto the simplex; all-zero becomes uniform.
inline ContributionVector project_to_simplex(std::vector<double> v) {
  double sum = 0.0;
  for (double& x : v) {
    x = std::clamp(x, 0.0, 1.0);
    sum += x;
  }
  ContributionVector c;
  if (sum <= 0.0) {
    c.kappa.assign(v.size(), 1.0 / static_cast<double>(v.size()));
    c.zero_demand = true;
    return c;
  }
  for (double& x : v) x /= sum;
  c.kappa = std::move(v);
  return c;
}

inline Forecast apply_noise(std::span<const ContributionVector> truth, double noise_mean, double noise_std,
                            Rng& rng) {
  expects(!truth.empty(), "apply_noise needs at least one step");
  expects(noise_std >= 0, "noise_std must be >= 0");
  Forecast f;
  const bool identity = noise_std == 0.0 && noise_mean == 0.0;
  for (const auto& step : truth) {
    if (identity) {
      f.per_step.push_back(step);
      continue;
    }
    std::vector<double> v = step.kappa;
    for (double& x : v) x += noise_mean + noise_std * standard_normal(rng);
    f.per_step.push_back(project_to_simplex(std::move(v)));
  }
  if (f.per_step.size() == 1) {
    f.aggregated = f.per_step.front();
    return f;
  }
  std::vector<double> mean(truth.front().size(), 0.0);
  for (const auto& step : f.per_step)
    for (std::size_t s = 0; s < mean.size(); ++s) mean[s] += step[s];
  for (double& x : mean) x /= static_cast<double>(f.per_step.size());
  f.aggregated = project_to_simplex(std::move(mean));
  return f;
}

// Allocation suggested purely by the forecast: aggregated shares of B,
// apportioned by largest remainder above the per-slice minimum.
inline AllocationAction forecast_to_action(const Forecast& forecast, const ActionSpace& space) {
  expects(space.size() > 0, "empty action space");
  expects(forecast.aggregated.size() == space.slice_count(), "forecast/action slice count mismatch");
  return apportion(forecast.aggregated.kappa, space.total_units(), space.min_units());
}

}  // namespace ranslice
