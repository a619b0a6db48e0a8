#pragma once

// Action selection for the four allocation approaches. ForecastAided keeps
// the policy's action unless it strays further than a threshold from the
// forecast-suggested action, in which case the feasible action nearest the
// midpoint of the two is taken instead ("distillation").

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ranslice/environment.hpp"
#include "ranslice/error.hpp"
#include "ranslice/forecasting.hpp"
#include "ranslice/ppo.hpp"

namespace ranslice {

enum class GuidanceMode { ForecastAided, ForecastState, PlainDRL, PureForecast };

inline constexpr GuidanceMode kAllModes[] = {GuidanceMode::ForecastAided, GuidanceMode::ForecastState,
                                             GuidanceMode::PlainDRL, GuidanceMode::PureForecast};

inline std::string_view to_string(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::ForecastAided: return "ForecastAided";
    case GuidanceMode::ForecastState: return "ForecastState";
    case GuidanceMode::PlainDRL: return "PlainDRL";
    case GuidanceMode::PureForecast: return "PureForecast";
  }
  return "?";
}

inline GuidanceMode parse_mode(std::string_view s) {
  for (auto m : kAllModes)
    if (s == to_string(m)) return m;
  throw ConfigError("unknown guidance mode '" + std::string(s) + "'");
}

inline bool uses_agent(GuidanceMode m) { return m != GuidanceMode::PureForecast; }
inline bool uses_forecast(GuidanceMode m) { return m != GuidanceMode::PlainDRL; }

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::ForecastAided;
  double distance_threshold_fraction = 0.07;  // of B
  int horizon = 1;

  void validate() const {
    if (!(distance_threshold_fraction >= 0 && distance_threshold_fraction <= 1))
      throw ConfigError("distance_threshold_fraction must lie in [0, 1]");
    if (horizon < 1) throw ConfigError("guidance horizon must be >= 1");
  }
  double threshold_units(int total_units) const { return distance_threshold_fraction * total_units; }
};

struct GuidanceDecision {
  AllocationAction chosen;
  AllocationAction policy_action;
  AllocationAction forecast_action;
  double distance = 0.0;
  bool distilled = false;

  // Learning-side bookkeeping; empty when the agent was not involved.
  std::vector<double> agent_state;
  std::size_t stored_index = 0;   // action index stored in the transition
  double stored_log_prob = 0.0;   // its log-probability under the current policy
  PolicySample sample;
};

// Euclidean distance between allocation vectors, in allocation units.
inline double action_distance(const AllocationAction& a, const AllocationAction& b) {
  expects(a.size() == b.size(), "action_distance: length mismatch");
  double sq = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const double d = static_cast<double>(a[s] - b[s]);
    sq += d * d;
  }
  return std::sqrt(sq);
}

namespace detail {

inline double distance_to_point(const AllocationAction& a, std::span<const double> p) {
  double sq = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const double d = static_cast<double>(a[s]) - p[s];
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace detail

// Member of `space` nearest the real midpoint of a and b; exact ties go to
// the candidate nearer `b`, then to the lower index.
inline std::size_t nearest_to_midpoint(const AllocationAction& a, const AllocationAction& b, const ActionSpace& space) {
  std::vector<double> mid(a.size());
  for (std::size_t s = 0; s < a.size(); ++s) mid[s] = 0.5 * (a[s] + b[s]);
  constexpr double kTie = 1e-12;
  std::size_t best = 0;
  double best_mid = std::numeric_limits<double>::infinity();
  double best_b = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double dm = detail::distance_to_point(space[i], mid);
    if (dm < best_mid - kTie) {
      best = i;
      best_mid = dm;
      best_b = action_distance(space[i], b);
    } else if (dm <= best_mid + kTie) {
      const double db = action_distance(space[i], b);
      if (db < best_b - kTie) {
        best = i;
        best_mid = std::min(best_mid, dm);
        best_b = db;
      }
    }
  }
  return best;
}

inline GuidanceDecision distill(const AllocationAction& a_pi, const AllocationAction& a_forecast,
                                const ActionSpace& space, double threshold) {
  expects(space.contains(a_pi) && space.contains(a_forecast), "distill: actions must belong to the action space");
  GuidanceDecision d;
  d.policy_action = a_pi;
  d.forecast_action = a_forecast;
  d.distance = action_distance(a_pi, a_forecast);
  if (d.distance <= threshold) {
    d.chosen = a_pi;
    return d;
  }
  d.distilled = true;
  d.chosen = space[nearest_to_midpoint(a_pi, a_forecast, space)];
  return d;
}

// Agent input for a mode: the last window's contribution vector, extended in
// ForecastState mode by `horizon` forecast steps (the last step repeats when
// the forecast was cut short at the episode end).
inline std::vector<double> agent_state(GuidanceMode mode, const ContributionVector& observed, const Forecast* forecast,
                                       int horizon) {
  std::vector<double> state = observed.kappa;
  if (mode != GuidanceMode::ForecastState) return state;
  expects(forecast && !forecast->per_step.empty(), "ForecastState needs a forecast");
  for (int h = 0; h < horizon; ++h) {
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(h), forecast->per_step.size() - 1);
    const auto& k = forecast->per_step[idx].kappa;
    state.insert(state.end(), k.begin(), k.end());
  }
  return state;
}

inline int agent_state_dim(GuidanceMode mode, int slices, int horizon) {
  return mode == GuidanceMode::ForecastState ? (horizon + 1) * slices : slices;
}

inline GuidanceDecision select_action(const GuidanceConfig& cfg, const ContributionVector& observed,
                                      const Forecast* forecast, const PpoAgent* agent, const ActionSpace& space,
                                      std::int64_t step, Rng& rng) {
  const double threshold = cfg.threshold_units(space.total_units());
  if (uses_forecast(cfg.mode)) expects(forecast != nullptr, "forecast mode without a forecast");
  if (uses_agent(cfg.mode)) expects(agent != nullptr, "agent mode without an agent");

  if (cfg.mode == GuidanceMode::PureForecast) {
    GuidanceDecision d;
    d.forecast_action = forecast_to_action(*forecast, space);
    d.policy_action = d.forecast_action;
    d.chosen = d.forecast_action;
    return d;
  }

  std::vector<double> state = agent_state(cfg.mode, observed, forecast, cfg.horizon);
  const PolicySample sample = agent->policy_action(state, step, rng);
  const AllocationAction& a_pi = space[sample.action_index];

  GuidanceDecision d;
  if (cfg.mode == GuidanceMode::ForecastAided) {
    d = distill(a_pi, forecast_to_action(*forecast, space), space, threshold);
  } else {
    d.policy_action = a_pi;
    d.chosen = a_pi;
  }
  d.sample = sample;
  d.stored_index = sample.action_index;
  d.stored_log_prob = sample.log_prob;
  if (d.distilled) {
    d.stored_index = *space.index_of(d.chosen);
    d.stored_log_prob = agent->log_prob(state, d.stored_index);
  }
  d.agent_state = std::move(state);
  return d;
}

inline double trigger_rate(std::span<const GuidanceDecision> decisions) {
  expects(!decisions.empty(), "trigger_rate of an empty trace");
  std::size_t hits = 0;
  for (const auto& d : decisions) hits += d.distilled ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(decisions.size());
}

}  // namespace ranslice
