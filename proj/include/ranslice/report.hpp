#pragma once

// Persistence of experiment results: per-run record CSVs, summary.json, and
// dependency-free SVG plots of reward curves and aggregate metrics.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranslice/error.hpp"
#include "ranslice/metrics.hpp"
#include "ranslice/runner.hpp"

namespace ranslice {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Record CSV

inline void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records, std::size_t slices) {
  out << "window";
  for (std::size_t s = 0; s < slices; ++s) out << ",kappa_" << s;
  for (std::size_t s = 0; s < slices; ++s) out << ",action_" << s;
  out << ",reward";
  for (std::size_t s = 0; s < slices; ++s) out << ",lat_" << s;
  out << ",distilled,distance,epsilon\n";
  for (const auto& r : records) {
    expects(r.kappa.size() == slices && r.action.size() == slices && r.latency_ms.size() == slices,
            "record width mismatch");
    out << r.window;
    for (double k : r.kappa) out << ',' << format_double(k);
    for (int a : r.action) out << ',' << a;
    out << ',' << format_double(r.reward);
    for (double l : r.latency_ms) out << ',' << format_double(l);
    out << ',' << (r.distilled ? 1 : 0) << ',' << format_double(r.distance) << ',' << format_double(r.epsilon) << '\n';
  }
}

inline std::vector<RunRecord> parse_records_csv(std::istream& in, const std::string& source = "<csv>") {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(source + ": empty records file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.emplace_back(detail::trim(cell));
  }
  // window, S kappas, S actions, reward, S latencies, distilled, distance, epsilon
  if (header.size() < 8 || (header.size() - 5) % 3 != 0 || header.front() != "window")
    throw IngestionError(source + ": unrecognized records header");
  const std::size_t S = (header.size() - 5) / 3;
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size())
      throw IngestionError(source + ": line " + std::to_string(line_no) + ": wrong field count");
    auto num = [&](std::size_t i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str()) throw IngestionError(source + ": line " + std::to_string(line_no) + ": bad number");
      return v;
    };
    RunRecord r;
    r.window = static_cast<std::int64_t>(num(0));
    std::size_t c = 1;
    for (std::size_t s = 0; s < S; ++s) r.kappa.push_back(num(c++));
    for (std::size_t s = 0; s < S; ++s) r.action.push_back(static_cast<int>(num(c++)));
    r.reward = num(c++);
    for (std::size_t s = 0; s < S; ++s) r.latency_ms.push_back(num(c++));
    r.distilled = num(c++) != 0.0;
    r.distance = num(c++);
    r.epsilon = num(c++);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string sanitize_filename(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

inline std::string records_filename(const RunResult& r) {
  return "records_" + sanitize_filename(r.scenario) + "_" + std::to_string(r.seed) + ".csv";
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw RuntimeFailure("cannot create output directory '" + dir.string() + "'");
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  return out;
}

// Writes the run's record CSV (if it still holds records) and returns its name.
inline std::string write_run_csv(const RunResult& r, const fs::path& out_dir) {
  if (r.records.empty()) return {};
  const std::string name = records_filename(r);
  auto out = open_output(out_dir / name);
  write_records_csv(out, r.records, r.records.front().kappa.size());
  if (!out) throw RuntimeFailure("failed writing '" + (out_dir / name).string() + "'");
  return name;
}

// ---------------------------------------------------------------------------
// summary.json

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json summary_json(const std::vector<RunResult>& results, const AggregateTable& table) {
  using nlohmann::json;
  json runs = json::array();
  for (const auto& r : results) {
    json j;
    j["scenario"] = r.scenario;
    j["pattern"] = r.pattern;
    j["mode"] = std::string(to_string(r.mode));
    j["noise_std"] = r.noise_std;
    j["seed"] = r.seed;
    j["capacity_bytes_per_unit_slot"] = r.capacity;
    if (!r.ok()) {
      j["failure"] = r.failure_message;
      j["failure_kind"] = r.failure == FailureKind::Config      ? "config"
                          : r.failure == FailureKind::Ingestion ? "ingestion"
                                                                : "runtime";
      runs.push_back(j);
      continue;
    }
    j["records_file"] = records_filename(r);
    j["windows"] = r.rewards.size();
    const auto& s = r.summary;
    j["initial_reward"] = s.initial_reward;
    j["converged"] = s.converged;
    j["steps_to_converge"] = s.steps_to_converge ? json(*s.steps_to_converge) : json(nullptr);
    j["convergence_rate"] = s.convergence_rate;
    j["mean_reward_post"] = optional_json(s.mean_reward_post);
    j["mean_reward"] = s.mean_reward;
    j["trigger_rate"] = s.trigger_rate;
    j["aborted_updates"] = r.aborted_updates;
    runs.push_back(j);
  }
  json cells = json::array();
  for (const auto& c : table.cells) {
    cells.push_back({{"mode", std::string(to_string(c.mode))},
                     {"noise_std", c.noise_std},
                     {"runs", c.runs},
                     {"converged_runs", c.converged_runs},
                     {"mean_initial_reward", c.mean_initial_reward},
                     {"mean_convergence_rate", c.mean_convergence_rate},
                     {"mean_reward", c.mean_reward},
                     {"mean_trigger_rate", c.mean_trigger_rate},
                     {"mean_steps_to_converge", optional_json(c.mean_steps_to_converge)}});
  }
  json imps = json::array();
  for (const auto& i : table.improvements) {
    imps.push_back({{"noise_std", i.noise_std},
                    {"initial_reward", optional_json(i.initial_reward)},
                    {"convergence_rate", optional_json(i.convergence_rate)},
                    {"converged_runs", optional_json(i.converged_runs)}});
  }
  return json{{"format", "ranslice-summary"},
              {"version", 1},
              {"runs", runs},
              {"aggregate", {{"cells", cells},
                             {"improvements_vs_plain_drl", imps},
                             {"denominator_runs", table.total_runs},
                             {"converged_runs", table.converged_runs}}}};
}

// ---------------------------------------------------------------------------
// SVG plots

struct Series {
  std::string label;
  std::vector<double> y;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::vector<double> trailing_mean(const std::vector<double>& v, std::size_t w) {
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= w) acc -= v[i - w];
    out[i] = acc / static_cast<double>(std::min(i + 1, w));
  }
  return out;
}

}  // namespace detail

// Line chart over window index; each series is smoothed by a trailing mean.
inline std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, std::size_t smooth,
                                  double y_min = 0.0, double y_max = 1.0) {
  const double W = 760, H = 420, L = 60, R = 170, T = 40, B = 50;
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.y.size());
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << detail::xml_escape(title) << "</text>\n";
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double i) { return L + (n > 1 ? i / static_cast<double>(n - 1) : 0.0) * pw; };
  auto sy = [&](double v) { return T + (1.0 - (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min)) * ph; };
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = y_min + (y_max - y_min) * k / 5.0;
    o << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << sy(v) << "\" y2=\"" << sy(v)
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << L - 6 << "\" y=\"" << sy(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << v << "</text>\n";
  }
  for (int k = 0; k <= 5 && n > 1; ++k) {
    const double i = static_cast<double>(n - 1) * k / 5.0;
    o << "<text x=\"" << sx(i) << "\" y=\"" << T + ph + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << std::setprecision(0) << i
      << std::setprecision(2) << "</text>\n";
  }
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">slicing window</text>\n";
  o << "<text x=\"16\" y=\"" << T + ph / 2 << "\" transform=\"rotate(-90 16 " << T + ph / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">reward (trailing mean of " << smooth
    << ")</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto smoothed = detail::trailing_mean(series[k].y, std::max<std::size_t>(1, smooth));
    const std::size_t stride = std::max<std::size_t>(1, smoothed.size() / 600);
    o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << detail::palette(k) << "\" points=\"";
    for (std::size_t i = 0; i < smoothed.size(); i += stride) o << sx(static_cast<double>(i)) << ',' << sy(smoothed[i]) << ' ';
    if (!smoothed.empty())
      o << sx(static_cast<double>(smoothed.size() - 1)) << ',' << sy(smoothed.back());
    o << "\"/>\n";
    const double ly = T + 14 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << L + pw + 10 << "\" x2=\"" << L + pw + 30 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"2\"/>\n<text x=\"" << L + pw + 34 << "\" y=\""
      << ly << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::xml_escape(series[k].label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct BarPanel {
  std::string title;
  std::vector<std::pair<std::string, double>> bars;
};

inline std::string bar_chart_svg(const std::string& title, const std::vector<BarPanel>& panels) {
  const double panel_w = 300, H = 460, T = 50, B = 150, L = 50;
  const double W = L + panel_w * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << detail::xml_escape(title) << "</text>\n";
  const double ph = H - T - B;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double x0 = L + panel_w * static_cast<double>(p);
    double vmax = 0.0;
    for (const auto& b : panel.bars) vmax = std::max(vmax, b.second);
    if (vmax <= 0) vmax = 1.0;
    o << "<text x=\"" << x0 + panel_w / 2 - 20 << "\" y=\"" << T - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(panel.title)
      << "</text>\n<line x1=\"" << x0 << "\" x2=\"" << x0 + panel_w - 40 << "\" y1=\"" << T + ph << "\" y2=\""
      << T + ph << "\" stroke=\"#444\"/>\n";
    const double slot = (panel_w - 40) / static_cast<double>(std::max<std::size_t>(1, panel.bars.size()));
    for (std::size_t k = 0; k < panel.bars.size(); ++k) {
      const double h = panel.bars[k].second / vmax * ph;
      const double x = x0 + slot * static_cast<double>(k) + slot * 0.15;
      o << "<rect x=\"" << x << "\" y=\"" << T + ph - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
        << "\" fill=\"" << detail::palette(k) << "\"/>\n";
      o << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << T + ph - h - 3
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" << std::setprecision(3)
        << panel.bars[k].second << std::setprecision(2) << "</text>\n";
      const double lx = x + slot * 0.35, ly = T + ph + 10;
      o << "<text x=\"" << lx << "\" y=\"" << ly << "\" transform=\"rotate(60 " << lx << ' ' << ly
        << ")\" font-family=\"sans-serif\" font-size=\"9\">" << detail::xml_escape(panel.bars[k].first)
        << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

// Minimal per-run view used by the plotters, so plots can be rebuilt from disk.
struct RunCurve {
  std::string pattern;
  GuidanceMode mode = GuidanceMode::PlainDRL;
  double noise_std = 0.0;
  std::vector<double> rewards;
};

namespace detail {

inline std::vector<double> average_curves(const std::vector<const RunCurve*>& runs) {
  std::size_t n = 0;
  for (const auto* r : runs) n = std::max(n, r->rewards.size());
  std::vector<double> sum(n, 0.0);
  std::vector<double> count(n, 0.0);
  for (const auto* r : runs)
    for (std::size_t i = 0; i < r->rewards.size(); ++i) {
      sum[i] += r->rewards[i];
      count[i] += 1.0;
    }
  for (std::size_t i = 0; i < n; ++i) sum[i] /= std::max(1.0, count[i]);
  return sum;
}

}  // namespace detail

// reward_by_mode_<pattern>.svg: seed-averaged curve per mode, each forecast
// mode at its smallest positive noise level (or 0 if only 0 was run).
// reward_by_noise_<pattern>.svg: ForecastAided curve per noise level.
// aggregate.svg: per-cell initial reward, convergence rate, converged share.
inline std::vector<std::string> write_plots(const std::vector<RunCurve>& runs, const AggregateTable& table,
                                            const fs::path& out_dir, std::size_t smooth) {
  std::vector<std::string> written;
  std::set<std::string> patterns;
  for (const auto& r : runs) patterns.insert(r.pattern);
  auto write = [&](const std::string& name, const std::string& svg) {
    auto out = open_output(out_dir / name);
    out << svg;
    written.push_back(name);
  };
  for (const auto& pattern : patterns) {
    std::vector<Series> by_mode;
    for (auto mode : kAllModes) {
      std::set<double> levels;
      for (const auto& r : runs)
        if (r.pattern == pattern && r.mode == mode) levels.insert(r.noise_std);
      if (levels.empty()) continue;
      double sigma = *levels.begin();
      for (double l : levels)
        if (l > 0) {
          sigma = l;
          break;
        }
      std::vector<const RunCurve*> members;
      for (const auto& r : runs)
        if (r.pattern == pattern && r.mode == mode && r.noise_std == sigma) members.push_back(&r);
      std::string label(to_string(mode));
      if (uses_forecast(mode)) label += " (sd " + noise_label(sigma) + ")";
      by_mode.push_back({label, detail::average_curves(members)});
    }
    write("reward_by_mode_" + sanitize_filename(pattern) + ".svg",
          line_chart_svg("Reward per approach: " + pattern, by_mode, smooth));

    std::map<double, std::vector<const RunCurve*>> by_sigma;
    for (const auto& r : runs)
      if (r.pattern == pattern && r.mode == GuidanceMode::ForecastAided) by_sigma[r.noise_std].push_back(&r);
    if (!by_sigma.empty()) {
      std::vector<Series> series;
      for (const auto& [sigma, members] : by_sigma)
        series.push_back({"ForecastAided sd " + noise_label(sigma), detail::average_curves(members)});
      write("reward_by_noise_" + sanitize_filename(pattern) + ".svg",
            line_chart_svg("ForecastAided reward per forecast error: " + pattern, series, smooth));
    }
  }
  if (!table.cells.empty()) {
    BarPanel initial{"mean initial reward", {}};
    BarPanel rate{"mean convergence rate", {}};
    BarPanel share{"converged share of runs", {}};
    for (const auto& c : table.cells) {
      const std::string label = std::string(to_string(c.mode)) + " sd " + noise_label(c.noise_std);
      initial.bars.emplace_back(label, c.mean_initial_reward);
      rate.bars.emplace_back(label, c.mean_convergence_rate);
      share.bars.emplace_back(label, static_cast<double>(c.converged_runs) / static_cast<double>(c.runs));
    }
    write("aggregate.svg", bar_chart_svg("Convergence metrics per approach and forecast error", {initial, rate, share}));
  }
  return written;
}

inline RunCurve curve_of(const RunResult& r) { return {r.pattern, r.mode, r.noise_std, r.rewards}; }

inline std::vector<SummaryRow> summary_rows(const std::vector<RunResult>& results) {
  std::vector<SummaryRow> rows;
  for (const auto& r : results)
    if (r.ok()) rows.push_back(r.summary_row());
  return rows;
}

// Writes record CSVs for runs still holding records, summary.json and plots.
inline void emit_outputs(const std::vector<RunResult>& results, const fs::path& out_dir, std::size_t smooth = 200) {
  ensure_directory(out_dir);
  for (const auto& r : results)
    if (r.ok()) write_run_csv(r, out_dir);
  const auto rows = summary_rows(results);
  const auto table = aggregate(rows);
  {
    auto out = open_output(out_dir / "summary.json");
    out << summary_json(results, table).dump(2) << '\n';
  }
  std::vector<RunCurve> curves;
  for (const auto& r : results)
    if (r.ok()) curves.push_back(curve_of(r));
  write_plots(curves, table, out_dir, smooth);
}

// Rebuilds the SVGs of an output directory from summary.json and the CSVs.
inline std::vector<std::string> replot(const fs::path& out_dir, std::size_t smooth = 200) {
  std::ifstream in(out_dir / "summary.json");
  if (!in) throw IngestionError("no summary.json in '" + out_dir.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IngestionError("summary.json: " + std::string(e.what()));
  }
  std::vector<RunCurve> curves;
  std::vector<SummaryRow> rows;
  for (const auto& run : j.at("runs")) {
    if (run.contains("failure")) continue;
    RunCurve c;
    c.pattern = run.at("pattern").get<std::string>();
    c.mode = parse_mode(run.at("mode").get<std::string>());
    c.noise_std = run.at("noise_std").get<double>();
    const auto file = out_dir / run.at("records_file").get<std::string>();
    std::ifstream csv(file);
    if (!csv) throw IngestionError("missing records file '" + file.string() + "'");
    for (const auto& rec : parse_records_csv(csv, file.string())) c.rewards.push_back(rec.reward);
    SummaryRow row;
    row.scenario = run.at("scenario").get<std::string>();
    row.pattern = c.pattern;
    row.mode = c.mode;
    row.noise_std = c.noise_std;
    row.seed = run.at("seed").get<std::uint64_t>();
    row.summary.initial_reward = run.at("initial_reward").get<double>();
    row.summary.converged = run.at("converged").get<bool>();
    if (!run.at("steps_to_converge").is_null()) row.summary.steps_to_converge = run.at("steps_to_converge").get<std::int64_t>();
    row.summary.convergence_rate = run.at("convergence_rate").get<double>();
    row.summary.mean_reward = run.at("mean_reward").get<double>();
    row.summary.trigger_rate = run.at("trigger_rate").get<double>();
    rows.push_back(row);
    curves.push_back(std::move(c));
  }
  return write_plots(curves, aggregate(rows), out_dir, smooth);
}

}  // namespace ranslice
