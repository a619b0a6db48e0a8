#pragma once

// Downlink base-station model: per-slice FIFO queues served round-robin each
// 1 ms slot over the slice's allocated resource units, with per-window latency
// and demand accounting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ranslice/error.hpp"
#include "ranslice/traffic.hpp"

namespace ranslice {

// Allocation units per slice; entries sum to the total bandwidth B.
struct AllocationAction {
  std::vector<int> units;

  int total() const { return std::accumulate(units.begin(), units.end(), 0); }
  std::size_t size() const { return units.size(); }
  int operator[](std::size_t s) const { return units[s]; }

  friend bool operator==(const AllocationAction&, const AllocationAction&) = default;
  friend auto operator<=>(const AllocationAction&, const AllocationAction&) = default;
};

// Per-slice share of total demand. `zero_demand` marks the uniform vector
// substituted when no slice demanded anything.
struct ContributionVector {
  std::vector<double> kappa;
  bool zero_demand = false;

  std::size_t size() const { return kappa.size(); }
  double operator[](std::size_t s) const { return kappa[s]; }

  friend bool operator==(const ContributionVector&, const ContributionVector&) = default;
};

struct SliceSpec {
  std::string name;
  double weight = 0.0;
  double sigmoid_slope = 1.0;         // c1, per ms
  double latency_threshold_ms = 1.0;  // c2
};

struct WindowOutcome {
  std::vector<double> avg_latency_ms;
  std::vector<std::int64_t> served_bytes;
  std::vector<std::int64_t> queued_bytes_end;
  std::vector<std::int64_t> demand_bytes;
  double reward = 0.0;
};

struct EnvConfig {
  int total_units = 15;  // B, in allocation units
  int granularity = 2;   // PRBs per allocation unit
  int min_units = 1;
  std::int64_t capacity_bytes_per_unit_slot = 0;  // 0 = calibrate before use
  std::int64_t window_slots = 100;
  std::int64_t episode_windows = 10000;
  std::vector<SliceSpec> slices;

  std::size_t slice_count() const { return slices.size(); }

  void validate() const {
    const auto S = static_cast<int>(slices.size());
    if (S < 1) throw ConfigError("at least one slice is required");
    if (min_units < 0) throw ConfigError("min_units must be >= 0");
    if (total_units < S * min_units) {
      std::ostringstream os;
      os << "total bandwidth " << total_units << " units cannot give " << S << " slices " << min_units
         << " unit(s) each";
      throw ConfigError(os.str());
    }
    if (granularity < 1) throw ConfigError("granularity must be >= 1");
    if (window_slots < 1) throw ConfigError("window_slots must be >= 1");
    if (episode_windows < 1) throw ConfigError("episode_windows must be >= 1");
    if (capacity_bytes_per_unit_slot < 0) throw ConfigError("capacity must be >= 0");
    double weight_sum = 0.0;
    for (const auto& s : slices) {
      if (s.weight < 0) throw ConfigError("slice '" + s.name + "' has a negative weight");
      if (!(s.latency_threshold_ms > 0)) throw ConfigError("slice '" + s.name + "' needs a positive latency threshold");
      weight_sum += s.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) throw ConfigError("slice weights must sum to 1");
  }
};

// ---------------------------------------------------------------------------
// Action space

// All compositions of `total` into `slices` parts, each >= min_units, in
// lexicographic order.
inline std::vector<AllocationAction> enumerate_actions(int total, int slices, int min_units) {
  if (slices < 1 || min_units < 0 || total < slices * min_units) {
    std::ostringstream os;
    os << "no feasible allocation of " << total << " units over " << slices << " slices with minimum "
       << min_units;
    throw ConfigError(os.str());
  }
  std::vector<AllocationAction> out;
  std::vector<int> cur(static_cast<std::size_t>(slices), min_units);
  auto rec = [&](auto&& self, int slice, int remaining) -> void {
    if (slice == slices - 1) {
      cur[slice] = remaining;
      out.push_back({cur});
      return;
    }
    const int reserve = (slices - 1 - slice) * min_units;
    for (int v = min_units; v <= remaining - reserve; ++v) {
      cur[slice] = v;
      self(self, slice + 1, remaining - v);
    }
  };
  rec(rec, 0, total);
  return out;
}

class ActionSpace {
 public:
  ActionSpace(int total, int slices, int min_units)
      : total_(total), min_units_(min_units), actions_(enumerate_actions(total, slices, min_units)) {
    for (std::size_t i = 0; i < actions_.size(); ++i) index_.emplace(actions_[i].units, i);
  }

  std::size_t size() const { return actions_.size(); }
  int total_units() const { return total_; }
  int min_units() const { return min_units_; }
  std::size_t slice_count() const { return actions_.front().size(); }
  const AllocationAction& operator[](std::size_t i) const { return actions_[i]; }
  const std::vector<AllocationAction>& actions() const { return actions_; }

  std::optional<std::size_t> index_of(const AllocationAction& a) const {
    const auto it = index_.find(a.units);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const AllocationAction& a) const { return index_.count(a.units) != 0; }

 private:
  int total_;
  int min_units_;
  std::vector<AllocationAction> actions_;
  std::map<std::vector<int>, std::size_t> index_;
};

// Largest-remainder apportionment of `total` units by `shares`. Every slice is
// first given `min_units`; the rest is split in proportion to the shares, ties
// going to the lower slice index.
inline AllocationAction apportion(std::span<const double> shares, int total, int min_units) {
  const auto S = shares.size();
  expects(S >= 1, "apportion needs at least one share");
  const int free_units = total - static_cast<int>(S) * min_units;
  expects(free_units >= 0, "apportion: total too small for the minimum floor");
  double share_sum = 0.0;
  for (double x : shares) share_sum += std::max(0.0, x);
  std::vector<double> quota(S);
  for (std::size_t s = 0; s < S; ++s)
    quota[s] = share_sum > 0 ? std::max(0.0, shares[s]) / share_sum * free_units
                             : static_cast<double>(free_units) / static_cast<double>(S);

  AllocationAction a{std::vector<int>(S, min_units)};
  int assigned = 0;
  std::vector<double> remainder(S);
  for (std::size_t s = 0; s < S; ++s) {
    const int whole = std::min(free_units, static_cast<int>(std::floor(quota[s])));
    a.units[s] += whole;
    assigned += whole;
    remainder[s] = quota[s] - whole;
  }
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (std::abs(remainder[x] - remainder[y]) > 1e-12) return remainder[x] > remainder[y];
    return x < y;
  });
  for (std::size_t k = 0; assigned < free_units; ++k, ++assigned) a.units[order[k % S]] += 1;
  return a;
}

// ---------------------------------------------------------------------------
// Contribution and reward

inline ContributionVector compute_contribution(std::span<const std::int64_t> demand_bytes) {
  ContributionVector c;
  const auto S = demand_bytes.size();
  double total = 0.0;
  for (auto d : demand_bytes) {
    expects(d >= 0, "demand must be non-negative");
    total += static_cast<double>(d);
  }
  if (total <= 0.0) {
    c.kappa.assign(S, 1.0 / static_cast<double>(S));
    c.zero_demand = true;
    return c;
  }
  c.kappa.resize(S);
  for (std::size_t s = 0; s < S; ++s) c.kappa[s] = static_cast<double>(demand_bytes[s]) / total;
  return c;
}

// 1 / (1 + exp(x)) without overflow.
inline double logistic_complement(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// Weighted sum of per-slice sigmoid latency scores.
inline double compute_reward(std::span<const double> latencies_ms, std::span<const SliceSpec> specs) {
  expects(latencies_ms.size() == specs.size(), "reward: latency and slice counts differ");
  double r = 0.0;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    expects(latencies_ms[s] >= 0, "latency must be non-negative");
    r += specs[s].weight *
         logistic_complement(specs[s].sigmoid_slope * (latencies_ms[s] - specs[s].latency_threshold_ms));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Queues

struct Departure {
  int user_id;
  std::int64_t arrival_slot;
  std::int64_t departure_slot;
};

// Per-slice FIFO state: one packet queue per user, served round-robin one
// packet at a time. A packet cut off by the slot budget resumes first in the
// next slot.
class SliceQueue {
 public:
  void enqueue(const Request& r) {
    expects(r.user_id >= 0, "negative user id");
    const auto u = static_cast<std::size_t>(r.user_id);
    if (u >= per_user_.size()) per_user_.resize(u + 1);
    if (per_user_[u].empty()) ring_.push_back(r.user_id);
    per_user_[u].push_back({r.arrival_slot, r.size});
    queued_ += r.size;
  }

  // Serves up to `budget` bytes at `slot`; completed packets are appended to
  // `departures`. Returns the bytes served.
  std::int64_t serve(std::int64_t budget, std::int64_t slot, std::vector<Departure>& departures) {
    std::int64_t served = 0;
    while (budget > 0 && !ring_.empty()) {
      const int u = ring_.front();
      auto& q = per_user_[static_cast<std::size_t>(u)];
      Packet& p = q.front();
      const std::int64_t take = std::min(p.remaining, budget);
      p.remaining -= take;
      budget -= take;
      served += take;
      if (p.remaining > 0) break;
      departures.push_back({u, p.arrival_slot, slot});
      q.pop_front();
      ring_.pop_front();
      if (!q.empty()) ring_.push_back(u);
    }
    queued_ -= served;
    return served;
  }

  std::int64_t queued_bytes() const { return queued_; }
  bool empty() const { return ring_.empty(); }

  std::optional<std::int64_t> oldest_arrival() const {
    std::optional<std::int64_t> oldest;
    for (int u : ring_) {
      const auto a = per_user_[static_cast<std::size_t>(u)].front().arrival_slot;
      if (!oldest || a < *oldest) oldest = a;
    }
    return oldest;
  }

 private:
  struct Packet {
    std::int64_t arrival_slot;
    std::int64_t remaining;
  };
  std::vector<std::deque<Packet>> per_user_;
  std::deque<int> ring_;
  std::int64_t queued_ = 0;
};

// Runs one slicing window of `cfg.window_slots` slots starting at `first_slot`.
// `arrivals[s]` holds slice s's requests arriving inside the window, sorted.
inline WindowOutcome step_window(std::vector<SliceQueue>& queues, std::span<const std::span<const Request>> arrivals,
                                 const AllocationAction& action, const EnvConfig& cfg, std::int64_t first_slot,
                                 std::vector<Departure>* departure_log = nullptr) {
  const auto S = cfg.slice_count();
  expects(queues.size() == S && arrivals.size() == S && action.size() == S, "step_window: slice count mismatch");
  expects(action.total() == cfg.total_units, "step_window: action does not sum to B");
  for (int u : action.units) expects(u >= cfg.min_units, "step_window: action below minimum units");

  WindowOutcome out;
  out.avg_latency_ms.assign(S, 0.0);
  out.served_bytes.assign(S, 0);
  out.queued_bytes_end.assign(S, 0);
  out.demand_bytes.assign(S, 0);

  const std::int64_t last_slot = first_slot + cfg.window_slots - 1;
  std::vector<Departure> departures;
  for (std::size_t s = 0; s < S; ++s) {
    const std::int64_t budget = static_cast<std::int64_t>(action[s]) * cfg.capacity_bytes_per_unit_slot;
    const auto& in = arrivals[s];
    std::size_t next = 0;
    double latency_sum = 0.0;
    std::int64_t departed = 0;
    for (std::int64_t slot = first_slot; slot <= last_slot; ++slot) {
      for (; next < in.size() && in[next].arrival_slot == slot; ++next) {
        queues[s].enqueue(in[next]);
        out.demand_bytes[s] += in[next].size;
      }
      expects(next == in.size() || in[next].arrival_slot > slot, "step_window: arrivals not sorted in window");
      departures.clear();
      out.served_bytes[s] += queues[s].serve(budget, slot, departures);
      for (const auto& d : departures) {
        latency_sum += static_cast<double>(d.departure_slot - d.arrival_slot + 1);
        ++departed;
      }
      if (departure_log) departure_log->insert(departure_log->end(), departures.begin(), departures.end());
    }
    expects(next == in.size(), "step_window: arrival outside the window");
    out.queued_bytes_end[s] = queues[s].queued_bytes();
    if (departed > 0) {
      out.avg_latency_ms[s] = latency_sum / static_cast<double>(departed);
    } else if (auto oldest = queues[s].oldest_arrival()) {
      out.avg_latency_ms[s] = static_cast<double>(last_slot - *oldest + 1);
    }
  }
  out.reward = compute_reward(out.avg_latency_ms, cfg.slices);
  return out;
}

// ---------------------------------------------------------------------------
// Environment

// Episode driver over pre-generated traffic. Window 0 is a warm-up window run
// under a uniform allocation; agent windows follow it.
class RanEnvironment {
 public:
  RanEnvironment(EnvConfig cfg, const EpisodeTraffic& traffic) : cfg_(std::move(cfg)), traffic_(&traffic) {
    cfg_.validate();
    if (cfg_.capacity_bytes_per_unit_slot < 1) throw ConfigError("capacity must be calibrated (>= 1 byte/unit/slot)");
    if (traffic.slice_count() != cfg_.slice_count()) throw ConfigError("traffic and environment slice counts differ");
    demand_ = window_demand(traffic, cfg_.window_slots);
  }

  const EnvConfig& config() const { return cfg_; }
  const EpisodeTraffic& traffic() const { return *traffic_; }
  std::int64_t total_windows() const { return cfg_.episode_windows + 1; }
  // Absolute index of the window the next step() will run.
  std::int64_t next_window() const { return next_window_; }
  bool done() const { return next_window_ > cfg_.episode_windows; }
  const ContributionVector& observation() const { return observation_; }
  const std::vector<std::vector<std::int64_t>>& demand() const { return demand_; }

  ContributionVector reset() {
    if (traffic_->horizon_slots < cfg_.window_slots * total_windows())
      throw ConfigError("traffic horizon is shorter than the warm-up window plus the episode");
    queues_.assign(cfg_.slice_count(), SliceQueue{});
    cursor_.assign(cfg_.slice_count(), 0);
    arrived_.assign(cfg_.slice_count(), 0);
    served_.assign(cfg_.slice_count(), 0);
    next_window_ = 0;
    const std::vector<double> uniform(cfg_.slice_count(), 1.0);
    run_window(apportion(uniform, cfg_.total_units, cfg_.min_units));
    return observation_;
  }

  WindowOutcome step(const AllocationAction& action) {
    expects(!queues_.empty(), "step before reset");
    expects(!done(), "step past the end of the episode");
    return run_window(action);
  }

  std::span<const std::int64_t> bytes_arrived() const { return arrived_; }
  std::span<const std::int64_t> bytes_served() const { return served_; }
  std::int64_t bytes_queued(std::size_t s) const { return queues_[s].queued_bytes(); }

 private:
  WindowOutcome run_window(const AllocationAction& action) {
    const auto S = cfg_.slice_count();
    const std::int64_t first = next_window_ * cfg_.window_slots;
    const std::int64_t end = first + cfg_.window_slots;
    std::vector<std::span<const Request>> arrivals(S);
    for (std::size_t s = 0; s < S; ++s) {
      const auto& reqs = traffic_->per_slice_requests[s];
      std::size_t b = cursor_[s];
      std::size_t e = b;
      while (e < reqs.size() && reqs[e].arrival_slot < end) ++e;
      arrivals[s] = std::span<const Request>(reqs.data() + b, e - b);
      cursor_[s] = e;
    }
    WindowOutcome out = step_window(queues_, arrivals, action, cfg_, first);
    for (std::size_t s = 0; s < S; ++s) {
      arrived_[s] += out.demand_bytes[s];
      served_[s] += out.served_bytes[s];
    }
    observation_ = compute_contribution(out.demand_bytes);
    ++next_window_;
    return out;
  }

  EnvConfig cfg_;
  const EpisodeTraffic* traffic_;
  std::vector<std::vector<std::int64_t>> demand_;
  std::vector<SliceQueue> queues_;
  std::vector<std::size_t> cursor_;
  std::vector<std::int64_t> arrived_;
  std::vector<std::int64_t> served_;
  ContributionVector observation_;
  std::int64_t next_window_ = 0;
};

}  // namespace ranslice
