#pragma once

// Per-slice downlink packet arrival generation (VoNR, video, VR) for a whole
// episode, plus ingestion of recorded VR traces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ranslice/error.hpp"
#include "ranslice/random.hpp"

namespace ranslice {

// One downlink packet demand. 1 slot = 1 ms.
struct Request {
  std::int64_t arrival_slot = 0;
  std::int64_t size = 1;  // bytes
  int slice_id = 0;
  int user_id = 0;

  friend bool operator==(const Request&, const Request&) = default;
};

struct UserCountLaw {
  double mean = 1.0;
  int max = 1;
};

struct VoNRModel {
  double interarrival_min_ms = 0.0;
  double interarrival_max_ms = 160.0;
  std::int64_t packet_bytes = 40;
};

struct VideoModel {
  double interarrival_mean_ms = 6.0;
  double interarrival_max_ms = 12.5;
  double size_mean_bytes = 100.0;
  double size_max_bytes = 250.0;
  double shape = 1.2;
};

// Stand-in for recorded VR gaming traffic: periodic frames with lognormal sizes.
struct VrSyntheticModel {
  double frames_per_second = 72.0;
  double frame_median_bytes = 6000.0;
  double frame_sigma = 0.3;
};

struct VrTraceModel {
  std::string path;
};

enum class TrafficKind { VoNR, Video, VRTrace, VRSynthetic };

struct TrafficModel {
  std::variant<VoNRModel, VideoModel, VrTraceModel, VrSyntheticModel> parameters;
  UserCountLaw users;

  TrafficKind kind() const {
    switch (parameters.index()) {
      case 0: return TrafficKind::VoNR;
      case 1: return TrafficKind::Video;
      case 2: return TrafficKind::VRTrace;
      default: return TrafficKind::VRSynthetic;
    }
  }
};

struct EpisodeTraffic {
  std::vector<std::vector<Request>> per_slice_requests;
  std::int64_t horizon_slots = 0;
  std::uint64_t seed = 0;

  std::size_t slice_count() const { return per_slice_requests.size(); }

  friend bool operator==(const EpisodeTraffic&, const EpisodeTraffic&) = default;
};

// ---------------------------------------------------------------------------
// Truncated Pareto

// Mean of min(X, max) for X ~ Pareto(scale, shape).
inline double clamped_pareto_mean(double scale, double max, double shape) {
  if (scale >= max) return max;
  return scale + std::pow(scale, shape) * (std::pow(max, 1.0 - shape) - std::pow(scale, 1.0 - shape)) /
                     (1.0 - shape);
}

// Pareto whose tail beyond `max` is clamped onto `max`; the scale is chosen so
// the clamped distribution has the requested mean.
class TruncatedPareto {
 public:
  TruncatedPareto(double mean, double max, double shape) : max_(max), shape_(shape) {
    if (!(shape > 1.0) || !(mean > 0.0) || !(mean < max) || !std::isfinite(max)) {
      std::ostringstream os;
      os << "truncated Pareto has no feasible scale for mean=" << mean << ", max=" << max
         << ", shape=" << shape;
      throw ConfigError(os.str());
    }
    // clamped_pareto_mean is increasing in scale, from 0 at scale 0 to max at scale max.
    double lo = 0.0;
    double hi = max;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * max; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (clamped_pareto_mean(mid, max, shape) < mean)
        lo = mid;
      else
        hi = mid;
    }
    scale_ = 0.5 * (lo + hi);
  }

  double scale() const { return scale_; }
  double max() const { return max_; }
  double shape() const { return shape_; }

  double operator()(Rng& rng) const {
    const double x = scale_ * std::pow(uniform_open01(rng), -1.0 / shape_);
    return std::min(x, max_);
  }

 private:
  double scale_ = 0.0;
  double max_;
  double shape_;
};

inline double sample_truncated_pareto(double mean, double max, double shape, Rng& rng) {
  return TruncatedPareto(mean, max, shape)(rng);
}

// Poisson draw, rejected and redrawn until it does not exceed `max`.
inline int sample_user_count(double mean, int max, Rng& rng) {
  if (!(mean > 0.0) || mean > max) {
    std::ostringstream os;
    os << "user count law needs 0 < mean <= max, got mean=" << mean << ", max=" << max;
    throw ConfigError(os.str());
  }
  std::poisson_distribution<int> poisson(mean);
  for (;;) {
    const int n = poisson(rng);
    if (n <= max) return n;
  }
}

// ---------------------------------------------------------------------------
// VR traces

struct VrTrace {
  std::vector<std::int64_t> timestamps_ms;
  std::vector<std::int64_t> sizes;

  std::size_t size() const { return sizes.size(); }
  // Gap inserted between the last frame and the first frame of the next replay.
  double seam_gap_ms() const {
    return static_cast<double>(timestamps_ms.back() - timestamps_ms.front()) /
           static_cast<double>(timestamps_ms.size() - 1);
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  std::size_t i = 0;
  bool negative = false;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    i = 1;
    if (s.size() == 1) return false;
  }
  std::int64_t v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    if (v > (INT64_MAX - (s[i] - '0')) / 10) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = negative ? -v : v;
  return true;
}

}  // namespace detail

// Parses `timestamp_ms,size_bytes` CSV. Errors carry the 1-based line number.
inline VrTrace parse_vr_trace(std::istream& in, const std::string& source = "<trace>") {
  VrTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << source << ": line " << line_no << ": " << why;
    throw IngestionError(os.str());
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    view = detail::trim(view);
    if (view.empty()) continue;
    if (!header_seen) {
      if (view != "timestamp_ms,size_bytes") fail("expected header 'timestamp_ms,size_bytes'");
      header_seen = true;
      continue;
    }
    const auto comma = view.find(',');
    if (comma == std::string_view::npos) fail("expected two comma-separated fields");
    std::int64_t ts = 0;
    std::int64_t size = 0;
    if (!detail::parse_int64(view.substr(0, comma), ts)) fail("unparsable timestamp");
    if (!detail::parse_int64(view.substr(comma + 1), size)) fail("unparsable size");
    if (ts < 0) fail("negative timestamp");
    if (size <= 0) fail("non-positive size");
    if (!trace.timestamps_ms.empty() && ts < trace.timestamps_ms.back()) fail("timestamps decrease");
    trace.timestamps_ms.push_back(ts);
    trace.sizes.push_back(size);
  }
  if (!header_seen) {
    line_no = 0;
    fail("empty trace");
  }
  if (trace.size() < 2) fail("trace needs at least two rows to replay");
  if (trace.timestamps_ms.back() == trace.timestamps_ms.front()) fail("trace spans zero time");
  return trace;
}

inline VrTrace load_vr_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open VR trace '" + path + "'");
  return parse_vr_trace(in, path);
}

struct TimedPacket {
  std::int64_t slot;
  std::int64_t size;
};

// Replays the trace from row `offset`, wrapping with the seam gap, up to `horizon_slots`.
inline std::vector<TimedPacket> replay_vr_trace(const VrTrace& trace, std::int64_t horizon_slots,
                                                std::size_t offset) {
  expects(offset < trace.size(), "trace offset out of range");
  std::vector<TimedPacket> out;
  const auto& ts = trace.timestamps_ms;
  const double gap = trace.seam_gap_ms();
  const auto h = static_cast<double>(horizon_slots);
  double cycle_start = -static_cast<double>(ts[offset] - ts.front());
  std::size_t row = offset;
  for (;;) {
    const double t = cycle_start + static_cast<double>(ts[row] - ts.front());
    if (t >= h) break;
    out.push_back({static_cast<std::int64_t>(std::floor(t)), trace.sizes[row]});
    if (++row == trace.size()) {
      row = 0;
      cycle_start += static_cast<double>(ts.back() - ts.front()) + gap;
    }
  }
  return out;
}

inline std::vector<std::vector<TimedPacket>> ingest_vr_trace(const std::string& path,
                                                             std::int64_t horizon_slots, int user_count,
                                                             Rng& rng) {
  const VrTrace trace = load_vr_trace(path);
  std::vector<std::vector<TimedPacket>> users;
  for (int u = 0; u < user_count; ++u)
    users.push_back(replay_vr_trace(trace, horizon_slots, uniform_index(rng, trace.size())));
  return users;
}

// ---------------------------------------------------------------------------
// Episode generation

inline void validate(const TrafficModel& model) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  };
  if (model.users.max < 1) throw ConfigError("user count max must be >= 1");
  positive(model.users.mean, "user count mean");
  if (model.users.mean > model.users.max) throw ConfigError("user count mean exceeds max");
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, VoNRModel>) {
          positive(p.interarrival_max_ms, "VoNR interarrival max");
          if (p.interarrival_min_ms < 0 || p.interarrival_min_ms > p.interarrival_max_ms)
            throw ConfigError("VoNR interarrival min must lie in [0, max]");
          positive(static_cast<double>(p.packet_bytes), "VoNR packet size");
        } else if constexpr (std::is_same_v<T, VideoModel>) {
          positive(p.interarrival_mean_ms, "video interarrival mean");
          positive(p.size_mean_bytes, "video size mean");
          (void)TruncatedPareto(p.interarrival_mean_ms, p.interarrival_max_ms, p.shape);
          (void)TruncatedPareto(p.size_mean_bytes, p.size_max_bytes, p.shape);
        } else if constexpr (std::is_same_v<T, VrSyntheticModel>) {
          positive(p.frames_per_second, "VR frames per second");
          positive(p.frame_median_bytes, "VR frame median");
          if (p.frame_sigma < 0) throw ConfigError("VR frame sigma must be >= 0");
        } else {
          if (p.path.empty()) throw ConfigError("VR trace model needs a path");
        }
      },
      model.parameters);
}

namespace detail {

inline std::int64_t to_bytes(double x) { return std::max<std::int64_t>(1, std::llround(x)); }

template <class Interarrival, class Size>
void renewal_stream(std::int64_t horizon, double first, Interarrival&& gap, Size&& size,
                    std::vector<TimedPacket>& out) {
  const auto h = static_cast<double>(horizon);
  for (double t = first; t < h; t += gap()) out.push_back({static_cast<std::int64_t>(t), size()});
}

}  // namespace detail

inline EpisodeTraffic generate_episode(const std::vector<TrafficModel>& models, std::int64_t horizon_slots,
                                       std::uint64_t seed) {
  if (horizon_slots < 1) throw ConfigError("episode horizon must be at least one slot");
  EpisodeTraffic episode;
  episode.horizon_slots = horizon_slots;
  episode.seed = seed;
  for (std::size_t s = 0; s < models.size(); ++s) {
    const TrafficModel& model = models[s];
    validate(model);
    Rng slice_rng = make_rng(seed, {s});
    const int users = sample_user_count(model.users.mean, model.users.max, slice_rng);

    std::vector<std::vector<TimedPacket>> streams(users);
    if (const auto* tm = std::get_if<VrTraceModel>(&model.parameters)) {
      streams = ingest_vr_trace(tm->path, horizon_slots, users, slice_rng);
    } else {
      for (int u = 0; u < users; ++u) {
        Rng rng = make_rng(seed, {s, static_cast<std::uint64_t>(u) + 1});
        auto& out = streams[u];
        std::visit(
            [&](const auto& p) {
              using T = std::decay_t<decltype(p)>;
              if constexpr (std::is_same_v<T, VoNRModel>) {
                auto gap = [&] { return uniform_real(rng, p.interarrival_min_ms, p.interarrival_max_ms); };
                detail::renewal_stream(horizon_slots, gap(), gap, [&] { return p.packet_bytes; }, out);
              } else if constexpr (std::is_same_v<T, VideoModel>) {
                const TruncatedPareto gap_law(p.interarrival_mean_ms, p.interarrival_max_ms, p.shape);
                const TruncatedPareto size_law(p.size_mean_bytes, p.size_max_bytes, p.shape);
                auto gap = [&] { return gap_law(rng); };
                detail::renewal_stream(horizon_slots, uniform_open01(rng) * gap(), gap,
                                       [&] { return detail::to_bytes(size_law(rng)); }, out);
              } else if constexpr (std::is_same_v<T, VrSyntheticModel>) {
                const double period = 1000.0 / p.frames_per_second;
                detail::renewal_stream(
                    horizon_slots, uniform_open01(rng) * period, [&] { return period; },
                    [&] { return detail::to_bytes(p.frame_median_bytes * std::exp(p.frame_sigma * standard_normal(rng))); },
                    out);
              }
            },
            model.parameters);
      }
    }

    auto& requests = episode.per_slice_requests.emplace_back();
    for (int u = 0; u < users; ++u)
      for (const auto& pkt : streams[u])
        requests.push_back({pkt.slot, pkt.size, static_cast<int>(s), u});
    std::stable_sort(requests.begin(), requests.end(),
                     [](const Request& a, const Request& b) { return a.arrival_slot < b.arrival_slot; });
  }
  return episode;
}

// Bytes arriving per slice in each window: result[window][slice].
inline std::vector<std::vector<std::int64_t>> window_demand(const EpisodeTraffic& traffic,
                                                            std::int64_t window_slots) {
  expects(window_slots >= 1, "window_slots must be >= 1");
  const auto windows = static_cast<std::size_t>((traffic.horizon_slots + window_slots - 1) / window_slots);
  std::vector<std::vector<std::int64_t>> demand(windows, std::vector<std::int64_t>(traffic.slice_count(), 0));
  for (std::size_t s = 0; s < traffic.slice_count(); ++s)
    for (const auto& r : traffic.per_slice_requests[s])
      demand[static_cast<std::size_t>(r.arrival_slot / window_slots)][s] += r.size;
  return demand;
}

}  // namespace ranslice
