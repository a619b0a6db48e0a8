#pragma once

// Experiment execution: capacity calibration and the per-seed episode loop
// wiring traffic, environment, forecaster, guidance and agent together.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ranslice/environment.hpp"
#include "ranslice/forecasting.hpp"
#include "ranslice/guidance.hpp"
#include "ranslice/metrics.hpp"
#include "ranslice/ppo.hpp"
#include "ranslice/scenario.hpp"
#include "ranslice/traffic.hpp"

namespace ranslice {

// Capacity (bytes per allocation unit per slot) at which the mean offered
// load equals target_load_ratio times the total capacity.
inline std::int64_t capacity_for_load(double mean_bytes_per_window, int total_units, std::int64_t window_slots,
                                      double target_load_ratio) {
  if (!(target_load_ratio > 0)) throw ConfigError("target load ratio must be positive");
  if (!(mean_bytes_per_window > 0)) throw ConfigError("calibration measured zero demand");
  const double cap = mean_bytes_per_window /
                     (static_cast<double>(total_units) * static_cast<double>(window_slots) * target_load_ratio);
  return std::max<std::int64_t>(1, std::llround(cap));
}

inline double mean_bytes_per_window(const std::vector<TrafficModel>& models, const EnvConfig& env,
                                    std::span<const std::uint64_t> probe_seeds) {
  if (probe_seeds.empty()) throw ConfigError("calibration needs at least one probe seed");
  const std::int64_t horizon = env.window_slots * (env.episode_windows + 1);
  long double total = 0.0L;
  for (auto seed : probe_seeds) {
    const auto traffic = generate_episode(models, horizon, seed);
    for (const auto& slice : traffic.per_slice_requests)
      for (const auto& r : slice) total += static_cast<long double>(r.size);
  }
  return static_cast<double>(total / (static_cast<long double>(probe_seeds.size()) *
                                     static_cast<long double>(env.episode_windows + 1)));
}

inline std::int64_t calibrate_capacity(const std::vector<TrafficModel>& models, const EnvConfig& env,
                                       double target_load_ratio, std::span<const std::uint64_t> probe_seeds) {
  if (!(target_load_ratio > 0)) throw ConfigError("target load ratio must be positive");
  return capacity_for_load(mean_bytes_per_window(models, env, probe_seeds), env.total_units, env.window_slots,
                           target_load_ratio);
}

struct RunRecord {
  std::int64_t window = 0;
  std::vector<double> kappa;
  std::vector<int> action;
  double reward = 0.0;
  std::vector<double> latency_ms;
  bool distilled = false;
  double distance = 0.0;
  double epsilon = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

enum class FailureKind { None, Config, Ingestion, Runtime };

struct RunResult {
  std::string scenario;
  std::string pattern;
  GuidanceMode mode = GuidanceMode::PlainDRL;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::int64_t capacity = 0;
  RunSummary summary;
  std::vector<RunRecord> records;
  std::vector<double> rewards;  // kept when records are released after writing
  std::size_t aborted_updates = 0;
  std::string first_abort_diagnostic;
  FailureKind failure = FailureKind::None;
  std::string failure_message;

  bool ok() const { return failure == FailureKind::None; }
  SummaryRow summary_row() const { return {scenario, pattern, mode, noise_std, seed, summary}; }
};

// Observer hook called for every window, for tests that need the decisions.
using DecisionObserver = std::function<void(const GuidanceDecision&, const WindowOutcome&)>;

// Fixed or probe-calibrated capacity; 0 means "calibrate on the run's own
// traffic", which run_seed does after generating it.
inline std::int64_t resolve_capacity(const Scenario& sc) {
  if (sc.env.capacity_bytes_per_unit_slot > 0) return sc.env.capacity_bytes_per_unit_slot;
  if (sc.calibration_seeds.empty()) return 0;
  return calibrate_capacity(sc.traffic, sc.env, sc.target_load_ratio, sc.calibration_seeds);
}

inline double mean_bytes_per_window(const EpisodeTraffic& traffic, std::int64_t windows) {
  long double total = 0.0L;
  for (const auto& slice : traffic.per_slice_requests)
    for (const auto& r : slice) total += static_cast<long double>(r.size);
  return static_cast<double>(total / static_cast<long double>(windows));
}

inline RunResult run_seed(const Scenario& sc, std::uint64_t seed, std::int64_t capacity,
                          const DecisionObserver& observer = {}) {
  RunResult res;
  res.scenario = sc.name;
  res.pattern = sc.pattern;
  res.mode = sc.guidance.mode;
  res.noise_std = sc.forecast.noise_std;
  res.seed = seed;

  EnvConfig cfg = sc.env;
  const auto traffic = generate_episode(sc.traffic, cfg.window_slots * (cfg.episode_windows + 1), seed);
  if (capacity <= 0)
    capacity = capacity_for_load(mean_bytes_per_window(traffic, cfg.episode_windows + 1), cfg.total_units,
                                 cfg.window_slots, sc.target_load_ratio);
  res.capacity = capacity;
  cfg.capacity_bytes_per_unit_slot = capacity;
  RanEnvironment env(cfg, traffic);
  ContributionVector observed = env.reset();
  const ActionSpace space(cfg.total_units, static_cast<int>(cfg.slice_count()), cfg.min_units);
  const auto S = static_cast<int>(cfg.slice_count());
  const GuidanceMode mode = sc.guidance.mode;
  const int horizon = sc.forecast.horizon;

  std::optional<PpoAgent> agent;
  if (uses_agent(mode)) {
    AgentConfig ac = sc.agent;
    ac.state_dim = agent_state_dim(mode, S, horizon);
    ac.action_count = static_cast<int>(space.size());
    ac.seed = derive_seed(seed, {0xA6E7});
    agent.emplace(ac);
  }
  Rng agent_rng = make_rng(seed, {0xA6E7, 1});
  Rng forecast_rng = make_rng(sc.forecast.seed, {seed, 0xF0CA});

  GuidanceConfig gc = sc.guidance;
  gc.horizon = horizon;
  TransitionBatch batch;
  std::size_t distilled_count = 0;
  std::size_t kept_count = 0;
  res.records.reserve(static_cast<std::size_t>(cfg.episode_windows));
  res.rewards.reserve(static_cast<std::size_t>(cfg.episode_windows));

  for (std::int64_t t = 0; t < cfg.episode_windows; ++t) {
    const std::int64_t w = env.next_window();
    std::optional<Forecast> forecast;
    if (uses_forecast(mode)) {
      const auto truth = oracle_future_contribution(env.demand(), w, horizon, env.total_windows());
      forecast = apply_noise(truth.steps, sc.forecast.noise_mean, sc.forecast.noise_std, forecast_rng);
    }
    if (agent && static_cast<int>(batch.size()) == agent->config().batch_size) {
      const auto next_state = agent_state(mode, observed, forecast ? &*forecast : nullptr, horizon);
      const auto stats = agent->update(batch, agent->value_estimate(next_state));
      if (stats.aborted && res.aborted_updates++ == 0) res.first_abort_diagnostic = stats.diagnostic;
      batch.clear();
    }

    GuidanceDecision d = select_action(gc, observed, forecast ? &*forecast : nullptr, agent ? &*agent : nullptr,
                                       space, t, agent_rng);
    const WindowOutcome out = env.step(d.chosen);
    if (observer) observer(d, out);

    RunRecord rec;
    rec.window = t;
    rec.kappa = observed.kappa;
    rec.action = d.chosen.units;
    rec.reward = out.reward;
    rec.latency_ms = out.avg_latency_ms;
    rec.distilled = d.distilled;
    rec.distance = mode == GuidanceMode::ForecastAided ? d.distance : 0.0;
    rec.epsilon = agent ? exploration_rate(agent->config(), t) : 0.0;
    res.rewards.push_back(out.reward);
    (d.distilled ? distilled_count : kept_count) += 1;
    res.records.push_back(std::move(rec));

    if (agent) {
      const double v = agent->value_estimate(d.agent_state);
      batch.push(std::move(d.agent_state), d.stored_index, d.stored_log_prob, out.reward, v);
    }
    observed = env.observation();
  }

  double rate = 0.0;
  if (mode == GuidanceMode::ForecastAided && distilled_count + kept_count > 0)
    rate = static_cast<double>(distilled_count) / static_cast<double>(distilled_count + kept_count);
  res.summary = summarize(res.rewards, rate, sc.metrics);
  return res;
}

// Runs one seed, turning configuration/ingestion/runtime errors into a
// failure row instead of aborting the caller.
inline RunResult run_seed_guarded(const Scenario& sc, std::uint64_t seed, std::int64_t capacity,
                                  const DecisionObserver& observer = {}) {
  auto failed = [&](FailureKind kind, const std::string& msg) {
    RunResult r;
    r.scenario = sc.name;
    r.pattern = sc.pattern;
    r.mode = sc.guidance.mode;
    r.noise_std = sc.forecast.noise_std;
    r.seed = seed;
    r.capacity = capacity;
    r.failure = kind;
    r.failure_message = msg;
    return r;
  };
  try {
    return run_seed(sc, seed, capacity, observer);
  } catch (const ConfigError& e) {
    return failed(FailureKind::Config, e.what());
  } catch (const IngestionError& e) {
    return failed(FailureKind::Ingestion, e.what());
  } catch (const std::exception& e) {
    return failed(FailureKind::Runtime, e.what());
  }
}

inline std::vector<RunResult> run_scenario(const Scenario& sc) {
  const std::int64_t capacity = resolve_capacity(sc);
  std::vector<RunResult> out;
  for (auto seed : sc.seeds) out.push_back(run_seed_guarded(sc, seed, capacity));
  return out;
}

struct RunJob {
  const Scenario* scenario;
  std::uint64_t seed;
  std::int64_t capacity;
};

// Executes jobs on `threads` workers. `on_done` is called under a lock as each
// job finishes (in completion order); the returned vector is in job order.
inline std::vector<RunResult> run_jobs(const std::vector<RunJob>& jobs, unsigned threads,
                                       const std::function<void(RunResult&)>& on_done = {}) {
  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      RunResult r = run_seed_guarded(*jobs[i].scenario, jobs[i].seed, jobs[i].capacity);
      std::lock_guard<std::mutex> lock(mu);
      if (on_done) on_done(r);
      results[i] = std::move(r);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

// One job per (scenario, seed); capacity is calibrated once per distinct
// traffic/environment description.
inline std::vector<RunJob> plan_jobs(const std::vector<Scenario>& scenarios) {
  std::vector<RunJob> jobs;
  std::map<std::string, std::int64_t> capacity_by_pattern;
  for (const auto& sc : scenarios) {
    std::int64_t cap = sc.env.capacity_bytes_per_unit_slot;
    if (cap <= 0 && !sc.calibration_seeds.empty()) {
      const std::string key = sc.pattern + "|" + std::to_string(sc.env.episode_windows);
      auto it = capacity_by_pattern.find(key);
      if (it == capacity_by_pattern.end()) it = capacity_by_pattern.emplace(key, resolve_capacity(sc)).first;
      cap = it->second;
    }
    for (auto seed : sc.seeds) jobs.push_back({&sc, seed, cap});
  }
  return jobs;
}

}  // namespace ranslice
