#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ranslice/error.hpp"
#include "ranslice/guidance.hpp"
#include "ranslice/scenario.hpp"

namespace ranslice {

struct Convergence {
  bool converged = false;
  std::optional<std::int64_t> steps;
};

// Smallest t such that every W-window mean starting at t or later stays >= level.
inline Convergence detect_convergence(std::span<const double> rewards, int window, double level) {
  expects(window >= 1, "convergence window must be >= 1");
  expects(rewards.size() >= static_cast<std::size_t>(window), "reward trace shorter than the convergence window");
  const auto n = rewards.size();
  const auto w = static_cast<std::size_t>(window);
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + rewards[i];
  Convergence c;
  for (std::size_t t = n - w + 1; t-- > 0;) {
    const long double mean = (prefix[t + w] - prefix[t]) / static_cast<long double>(w);
    if (mean < static_cast<long double>(level)) break;
    c.converged = true;
    c.steps = static_cast<std::int64_t>(t);
  }
  return c;
}

struct RunSummary {
  double initial_reward = 0.0;
  bool converged = false;
  std::optional<std::int64_t> steps_to_converge;
  double convergence_rate = 0.0;  // 1 / max(1, steps); 0 when not converged
  std::optional<double> mean_reward_post;
  double mean_reward = 0.0;
  double trigger_rate = 0.0;
};

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline RunSummary summarize(std::span<const double> rewards, double trigger_rate_value,
                            const MetricsConfig& metrics) {
  expects(!rewards.empty(), "cannot summarize an empty run");
  RunSummary s;
  const auto k = std::min<std::size_t>(rewards.size(), static_cast<std::size_t>(metrics.initial_windows));
  s.initial_reward = mean_of(rewards.first(k));
  s.mean_reward = mean_of(rewards);
  if (rewards.size() >= static_cast<std::size_t>(metrics.convergence_window)) {
    const auto c = detect_convergence(rewards, metrics.convergence_window, metrics.convergence_level);
    s.converged = c.converged;
    s.steps_to_converge = c.steps;
  }
  if (s.converged) {
    s.convergence_rate = 1.0 / static_cast<double>(std::max<std::int64_t>(1, *s.steps_to_converge));
    s.mean_reward_post = mean_of(rewards.subspan(static_cast<std::size_t>(*s.steps_to_converge)));
  }
  s.trigger_rate = trigger_rate_value;
  return s;
}

// ---------------------------------------------------------------------------
// Aggregation over runs, per (mode, noise) cell.

struct SummaryRow {
  std::string scenario;
  std::string pattern;
  GuidanceMode mode = GuidanceMode::PlainDRL;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct AggregateCell {
  GuidanceMode mode = GuidanceMode::PlainDRL;
  double noise_std = 0.0;
  std::size_t runs = 0;
  std::size_t converged_runs = 0;
  double mean_initial_reward = 0.0;
  double mean_convergence_rate = 0.0;
  double mean_reward = 0.0;
  double mean_trigger_rate = 0.0;
  std::optional<double> mean_steps_to_converge;
};

struct Improvement {
  double noise_std = 0.0;
  std::optional<double> initial_reward;
  std::optional<double> convergence_rate;
  std::optional<double> converged_runs;
};

struct AggregateTable {
  std::vector<AggregateCell> cells;
  std::vector<Improvement> improvements;  // ForecastAided vs PlainDRL at the same noise level
  std::size_t total_runs = 0;
  std::size_t converged_runs = 0;
};

inline std::optional<double> improvement_ratio(double x, double y) {
  if (y == 0.0) return std::nullopt;
  return (x - y) / y;
}

inline AggregateTable aggregate(std::span<const SummaryRow> rows) {
  std::map<std::pair<int, double>, std::vector<const SummaryRow*>> groups;
  for (const auto& r : rows) groups[{static_cast<int>(r.mode), r.noise_std}].push_back(&r);
  AggregateTable t;
  for (const auto& [key, members] : groups) {
    AggregateCell c;
    c.mode = static_cast<GuidanceMode>(key.first);
    c.noise_std = key.second;
    c.runs = members.size();
    double steps_sum = 0.0;
    for (const auto* r : members) {
      c.mean_initial_reward += r->summary.initial_reward;
      c.mean_convergence_rate += r->summary.convergence_rate;
      c.mean_reward += r->summary.mean_reward;
      c.mean_trigger_rate += r->summary.trigger_rate;
      if (r->summary.converged) {
        ++c.converged_runs;
        steps_sum += static_cast<double>(*r->summary.steps_to_converge);
      }
    }
    const auto n = static_cast<double>(c.runs);
    c.mean_initial_reward /= n;
    c.mean_convergence_rate /= n;
    c.mean_reward /= n;
    c.mean_trigger_rate /= n;
    if (c.converged_runs) c.mean_steps_to_converge = steps_sum / static_cast<double>(c.converged_runs);
    t.total_runs += c.runs;
    t.converged_runs += c.converged_runs;
    t.cells.push_back(c);
  }
  auto find = [&](GuidanceMode m, double sigma) -> const AggregateCell* {
    for (const auto& c : t.cells)
      if (c.mode == m && c.noise_std == sigma) return &c;
    return nullptr;
  };
  for (const auto& c : t.cells) {
    if (c.mode != GuidanceMode::ForecastAided) continue;
    const auto* base = find(GuidanceMode::PlainDRL, c.noise_std);
    if (!base) continue;
    Improvement imp;
    imp.noise_std = c.noise_std;
    imp.initial_reward = improvement_ratio(c.mean_initial_reward, base->mean_initial_reward);
    imp.convergence_rate = improvement_ratio(c.mean_convergence_rate, base->mean_convergence_rate);
    imp.converged_runs =
        improvement_ratio(static_cast<double>(c.converged_runs), static_cast<double>(base->converged_runs));
    t.improvements.push_back(imp);
  }
  return t;
}

}  // namespace ranslice
