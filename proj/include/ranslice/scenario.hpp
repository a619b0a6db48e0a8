#pragma once

// Scenario and sweep files: line-based `dotted.key = value` text, `#`
// comments, list values comma-separated. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ranslice/environment.hpp"
#include "ranslice/error.hpp"
#include "ranslice/forecasting.hpp"
#include "ranslice/guidance.hpp"
#include "ranslice/ppo.hpp"
#include "ranslice/traffic.hpp"

namespace ranslice {

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, std::string source) {
    KeyValueFile f;
    f.source_ = std::move(source);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string_view view = detail::trim(line);
      if (view.empty()) continue;
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) f.fail(line_no, "expected 'key = value'");
      const std::string key(detail::trim(view.substr(0, eq)));
      const std::string value(detail::trim(view.substr(eq + 1)));
      if (key.empty()) f.fail(line_no, "empty key");
      if (f.entries_.count(key)) f.fail(line_no, "duplicate key '" + key + "'");
      f.entries_[key] = {value, line_no};
    }
    return f;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse(in, path);
  }

  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto* e = find(key);
    return e ? e->value : fallback;
  }
  std::string require_string(const std::string& key) const {
    const auto* e = find(key);
    if (!e) throw ConfigError(source_ + ": missing required key '" + key + "'");
    return e->value;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto* e = find(key);
    return e ? to_double(*e, key) : fallback;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto* e = find(key);
    return e ? to_int(*e, key) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    fail(e->line, "'" + key + "' expects true or false");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto* e = find(key);
    if (!e) return out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto t = detail::trim(item);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) out.push_back(to_double({s, line_of(key)}, key));
    return out;
  }
  std::vector<std::int64_t> get_int_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& s : get_list(key)) out.push_back(to_int({s, line_of(key)}, key));
    return out;
  }

  // Keys never read through a getter; a non-empty result means a typo.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }
  void reject_unused() const {
    const auto unused = unused_keys();
    if (unused.empty()) return;
    fail(entries_.at(unused.front()).line, "unknown key '" + unused.front() + "'");
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry* find(const std::string& key) const {
    used_.insert(key);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  int line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  [[noreturn]] void fail(int line, const std::string& why) const {
    std::ostringstream os;
    os << source_ << ":" << line << ": " << why;
    throw ConfigError(os.str());
  }

  double to_double(const Entry& e, const std::string& key) const {
    std::size_t pos = 0;
    try {
      const double v = std::stod(e.value, &pos);
      if (pos == e.value.size()) return v;
    } catch (const std::exception&) {
    }
    fail(e.line, "'" + key + "' expects a number, got '" + e.value + "'");
  }
  std::int64_t to_int(const Entry& e, const std::string& key) const {
    std::int64_t v = 0;
    if (!detail::parse_int64(e.value, v)) fail(e.line, "'" + key + "' expects an integer, got '" + e.value + "'");
    return v;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

struct MetricsConfig {
  int convergence_window = 200;
  double convergence_level = 0.9;
  int initial_windows = 200;
};

struct Scenario {
  std::string name;
  std::string pattern;  // grouping label for plots and aggregation
  EnvConfig env;
  double target_load_ratio = 1.2;
  std::vector<std::uint64_t> calibration_seeds;  // empty: calibrate on each run's own traffic
  std::vector<TrafficModel> traffic;
  ForecastConfig forecast;
  AgentConfig agent;
  GuidanceConfig guidance;
  MetricsConfig metrics;
  std::vector<std::uint64_t> seeds{1};

  void validate() const {
    if (seeds.empty()) throw ConfigError("scenario '" + name + "' lists no seeds");
    env.validate();
    if (traffic.size() != env.slice_count()) throw ConfigError("every slice needs a traffic model");
    for (const auto& m : traffic) {
      validate_model(m);
      if (const auto* t = std::get_if<VrTraceModel>(&m.parameters); t && !std::filesystem::exists(t->path))
        throw ConfigError("VR trace file '" + t->path + "' does not exist");
    }
    forecast.validate();
    guidance.validate();
    if (!(target_load_ratio > 0)) throw ConfigError("target_load_ratio must be positive");
    if (metrics.convergence_window < 1 || metrics.initial_windows < 1)
      throw ConfigError("metric windows must be >= 1");
  }

 private:
  static void validate_model(const TrafficModel& m) { ranslice::validate(m); }
};

namespace detail {

inline std::vector<std::uint64_t> to_seeds(const std::vector<std::int64_t>& v, const std::string& what) {
  std::vector<std::uint64_t> out;
  for (auto x : v) {
    if (x < 0) throw ConfigError(what + ": seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(x));
  }
  return out;
}

}  // namespace detail

inline Scenario parse_scenario(const KeyValueFile& f, const std::filesystem::path& base_dir = {}) {
  Scenario sc;
  sc.name = f.require_string("name");
  sc.pattern = f.get_string("pattern", sc.name);
  if (f.has("seeds")) sc.seeds = detail::to_seeds(f.get_int_list("seeds"), "seeds");

  auto& env = sc.env;
  env.total_units = static_cast<int>(f.get_int("env.total_units", env.total_units));
  env.granularity = static_cast<int>(f.get_int("env.granularity", env.granularity));
  env.min_units = static_cast<int>(f.get_int("env.min_units", env.min_units));
  env.capacity_bytes_per_unit_slot = f.get_int("env.capacity", 0);
  env.window_slots = f.get_int("env.window_slots", env.window_slots);
  env.episode_windows = f.get_int("env.episode_windows", env.episode_windows);
  sc.target_load_ratio = f.get_double("env.target_load_ratio", sc.target_load_ratio);
  if (f.has("env.calibration_seeds"))
    sc.calibration_seeds = detail::to_seeds(f.get_int_list("env.calibration_seeds"), "env.calibration_seeds");

  const auto slice_count = f.get_int("slices", 3);
  if (slice_count < 1) throw ConfigError(f.source() + ": slices must be >= 1");
  for (std::int64_t s = 0; s < slice_count; ++s) {
    const std::string p = "slice." + std::to_string(s) + ".";
    SliceSpec spec;
    spec.name = f.get_string(p + "name", "slice" + std::to_string(s));
    spec.weight = f.get_double(p + "weight", 0.0);
    spec.sigmoid_slope = f.get_double(p + "c1", 1.0);
    spec.latency_threshold_ms = f.get_double(p + "c2", 10.0);
    env.slices.push_back(spec);

    TrafficModel m;
    m.users.mean = f.get_double(p + "users.mean", 1.0);
    m.users.max = static_cast<int>(f.get_int(p + "users.max", 1));
    const std::string kind = f.require_string(p + "traffic");
    if (kind == "vonr") {
      VoNRModel v;
      v.interarrival_min_ms = f.get_double(p + "interarrival.min", v.interarrival_min_ms);
      v.interarrival_max_ms = f.get_double(p + "interarrival.max", v.interarrival_max_ms);
      v.packet_bytes = f.get_int(p + "packet_bytes", v.packet_bytes);
      m.parameters = v;
    } else if (kind == "video") {
      VideoModel v;
      v.interarrival_mean_ms = f.get_double(p + "interarrival.mean", v.interarrival_mean_ms);
      v.interarrival_max_ms = f.get_double(p + "interarrival.max", v.interarrival_max_ms);
      v.size_mean_bytes = f.get_double(p + "size.mean", v.size_mean_bytes);
      v.size_max_bytes = f.get_double(p + "size.max", v.size_max_bytes);
      v.shape = f.get_double(p + "shape", v.shape);
      m.parameters = v;
    } else if (kind == "vr_synthetic") {
      VrSyntheticModel v;
      v.frames_per_second = f.get_double(p + "fps", v.frames_per_second);
      v.frame_median_bytes = f.get_double(p + "frame.median", v.frame_median_bytes);
      v.frame_sigma = f.get_double(p + "frame.sigma", v.frame_sigma);
      m.parameters = v;
    } else if (kind == "vr_trace") {
      std::filesystem::path path = f.require_string(p + "trace");
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      m.parameters = VrTraceModel{path.string()};
    } else {
      throw ConfigError(f.source() + ": unknown traffic kind '" + kind + "' for slice " + std::to_string(s));
    }
    sc.traffic.push_back(m);
  }

  auto& fc = sc.forecast;
  fc.horizon = static_cast<int>(f.get_int("forecast.horizon", fc.horizon));
  fc.history = static_cast<int>(f.get_int("forecast.history", fc.history));
  fc.noise_std = f.get_double("forecast.noise_std", fc.noise_std);
  fc.noise_mean = f.get_double("forecast.noise_mean", fc.noise_mean);
  fc.seed = static_cast<std::uint64_t>(f.get_int("forecast.seed", 0));

  auto& ag = sc.agent;
  ag.learning_rate = f.get_double("agent.learning_rate", ag.learning_rate);
  ag.batch_size = static_cast<int>(f.get_int("agent.batch_size", ag.batch_size));
  ag.exploration_rate = f.get_double("agent.exploration_rate", ag.exploration_rate);
  ag.exploration_decay = f.get_double("agent.exploration_decay", ag.exploration_decay);
  ag.exploration_decay_interval =
      static_cast<int>(f.get_int("agent.exploration_decay_interval", ag.exploration_decay_interval));
  ag.clip_ratio = f.get_double("agent.clip_ratio", ag.clip_ratio);
  ag.discount = f.get_double("agent.discount", ag.discount);
  ag.gae_lambda = f.get_double("agent.gae_lambda", ag.gae_lambda);
  ag.epochs_per_update = static_cast<int>(f.get_int("agent.epochs_per_update", ag.epochs_per_update));
  if (f.has("agent.hidden_layers")) {
    ag.hidden_layers.clear();
    for (auto h : f.get_int_list("agent.hidden_layers")) ag.hidden_layers.push_back(static_cast<int>(h));
  }
  ag.value_coef = f.get_double("agent.value_coef", ag.value_coef);
  ag.entropy_coef = f.get_double("agent.entropy_coef", ag.entropy_coef);
  ag.max_grad_norm = f.get_double("agent.max_grad_norm", ag.max_grad_norm);
  ag.normalize_advantages = f.get_bool("agent.normalize_advantages", ag.normalize_advantages);

  sc.guidance.mode = parse_mode(f.get_string("guidance.mode", "ForecastAided"));
  sc.guidance.distance_threshold_fraction =
      f.get_double("guidance.threshold_fraction", sc.guidance.distance_threshold_fraction);
  sc.guidance.horizon = fc.horizon;

  sc.metrics.convergence_window = static_cast<int>(f.get_int("metrics.convergence_window", 200));
  sc.metrics.convergence_level = f.get_double("metrics.convergence_level", 0.9);
  sc.metrics.initial_windows = static_cast<int>(f.get_int("metrics.initial_windows", 200));

  f.reject_unused();
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  const auto f = KeyValueFile::load(path);
  return parse_scenario(f, std::filesystem::path(path).parent_path());
}

// A sweep: scenario files x modes x noise levels, optional seed override.
struct SweepSpec {
  std::vector<Scenario> scenarios;
  std::vector<GuidanceMode> modes;
  std::vector<double> noise_levels;
  std::vector<std::uint64_t> seeds;  // empty = each scenario's own seeds
  std::int64_t episode_windows = 0;  // 0 = each scenario's own
};

inline SweepSpec load_sweep(const std::string& path) {
  const auto f = KeyValueFile::load(path);
  const auto base = std::filesystem::path(path).parent_path();
  SweepSpec sw;
  for (const auto& s : f.get_list("scenarios")) {
    std::filesystem::path p = s;
    if (p.is_relative()) p = base / p;
    sw.scenarios.push_back(load_scenario(p.string()));
  }
  if (sw.scenarios.empty()) throw ConfigError(path + ": sweep lists no scenarios");
  for (const auto& m : f.get_list("modes")) sw.modes.push_back(parse_mode(m));
  if (sw.modes.empty()) sw.modes.assign(std::begin(kAllModes), std::end(kAllModes));
  sw.noise_levels = f.get_double_list("noise_std");
  for (double s : sw.noise_levels)
    if (!(s >= 0)) throw ConfigError(path + ": noise_std values must be >= 0");
  sw.seeds = detail::to_seeds(f.get_int_list("seeds"), "seeds");
  sw.episode_windows = f.get_int("episode_windows", 0);
  f.reject_unused();
  return sw;
}

inline std::string noise_label(double sigma) {
  std::ostringstream os;
  os << sigma;
  return os.str();
}

// One scenario per (scenario, mode, noise) cell, named `<name>-<mode>-s<noise>`.
inline std::vector<Scenario> expand_sweep(const SweepSpec& sw) {
  std::vector<Scenario> out;
  for (const auto& base : sw.scenarios) {
    const std::vector<double> noise = sw.noise_levels.empty() ? std::vector<double>{base.forecast.noise_std}
                                                               : sw.noise_levels;
    for (auto mode : sw.modes) {
      for (double sigma : noise) {
        Scenario sc = base;
        sc.guidance.mode = mode;
        sc.forecast.noise_std = sigma;
        if (!sw.seeds.empty()) sc.seeds = sw.seeds;
        if (sw.episode_windows > 0) sc.env.episode_windows = sw.episode_windows;
        sc.name = base.name + "-" + std::string(to_string(mode)) + "-s" + noise_label(sigma);
        out.push_back(std::move(sc));
      }
    }
  }
  return out;
}

}  // namespace ranslice
