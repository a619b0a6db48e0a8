// Command-line front end: run, sweep, calibrate, plot.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ranslice/report.hpp"
#include "ranslice/runner.hpp"
#include "ranslice/scenario.hpp"

namespace {

constexpr const char* kVersion = "ranslice 1.0.0";

enum Exit { kOk = 0, kConfig = 2, kIngestion = 3, kRuntime = 4 };

int exit_for(const std::vector<ranslice::RunResult>& results) {
  int code = kOk;
  for (const auto& r : results) {
    if (r.ok()) continue;
    std::cerr << "run " << r.scenario << " seed " << r.seed << " failed: " << r.failure_message << '\n';
    const int c = r.failure == ranslice::FailureKind::Config      ? kConfig
                  : r.failure == ranslice::FailureKind::Ingestion ? kIngestion
                                                                  : kRuntime;
    code = std::max(code, c);
  }
  return code;
}

void report_line(const ranslice::RunResult& r) {
  if (!r.ok()) return;
  const auto& s = r.summary;
  std::fprintf(stderr, "%-40s seed %-4llu initial %.3f mean %.3f %s trigger %.3f\n", r.scenario.c_str(),
               static_cast<unsigned long long>(r.seed), s.initial_reward, s.mean_reward,
               s.converged ? ("converged@" + std::to_string(*s.steps_to_converge)).c_str() : "not-converged",
               s.trigger_rate);
}

// Writes each run's CSV as soon as it finishes and drops the records.
std::vector<ranslice::RunResult> execute(const std::vector<ranslice::Scenario>& scenarios, unsigned threads,
                                         const std::string& out_dir) {
  ranslice::ensure_directory(out_dir);
  const auto jobs = ranslice::plan_jobs(scenarios);
  return ranslice::run_jobs(jobs, threads, [&](ranslice::RunResult& r) {
    if (r.ok()) ranslice::write_run_csv(r, out_dir);
    r.records.clear();
    r.records.shrink_to_fit();
    report_line(r);
  });
}

void finish(const std::vector<ranslice::RunResult>& results, const std::string& out_dir) {
  const auto rows = ranslice::summary_rows(results);
  const auto table = ranslice::aggregate(rows);
  {
    auto out = ranslice::open_output(ranslice::fs::path(out_dir) / "summary.json");
    out << ranslice::summary_json(results, table).dump(2) << '\n';
  }
  std::vector<ranslice::RunCurve> curves;
  for (const auto& r : results)
    if (r.ok()) curves.push_back(ranslice::curve_of(r));
  ranslice::write_plots(curves, table, out_dir, 200);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAN slicing simulator with forecast-aided DRL allocation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string scenario_path, sweep_path, out_dir = "out", seeds_arg;
  unsigned parallel = 1;
  double load_ratio = 1.2;

  auto* run = app.add_subcommand("run", "run one scenario for its seeds");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--seeds", seeds_arg, "comma-separated seed list overriding the scenario's");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--parallel", parallel, "worker threads");

  auto* sweep = app.add_subcommand("sweep", "run a scenarios x modes x noise sweep");
  sweep->add_option("sweep", sweep_path, "sweep file")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--parallel", parallel, "worker threads")->check(CLI::Range(1u, 1024u));

  auto* cal = app.add_subcommand("calibrate", "print the capacity for a target load ratio");
  cal->add_option("scenario", scenario_path, "scenario file")->required();
  cal->add_option("--load-ratio", load_ratio, "offered load / capacity")->required();

  auto* plot = app.add_subcommand("plot", "rebuild SVG plots of an output directory");
  plot->add_option("out_dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto sc = ranslice::load_scenario(scenario_path);
      if (!seeds_arg.empty()) {
        sc.seeds.clear();
        for (const auto& tok : CLI::detail::split(seeds_arg, ',')) {
          const auto t = CLI::detail::trim_copy(tok);
          if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw ranslice::ConfigError("--seeds: '" + t + "' is not a non-negative integer");
          sc.seeds.push_back(std::stoull(t));
        }
        sc.validate();
      }
      const auto results = execute({sc}, parallel, out_dir);
      finish(results, out_dir);
      return exit_for(results);
    }
    if (*sweep) {
      const auto spec = ranslice::load_sweep(sweep_path);
      const auto scenarios = ranslice::expand_sweep(spec);
      std::fprintf(stderr, "sweep: %zu scenarios\n", scenarios.size());
      const auto results = execute(scenarios, parallel, out_dir);
      finish(results, out_dir);
      return exit_for(results);
    }
    if (*cal) {
      const auto sc = ranslice::load_scenario(scenario_path);
      const auto& probes = sc.calibration_seeds.empty() ? sc.seeds : sc.calibration_seeds;
      const double mean = ranslice::mean_bytes_per_window(sc.traffic, sc.env, probes);
      const auto cap = ranslice::capacity_for_load(mean, sc.env.total_units, sc.env.window_slots, load_ratio);
      std::printf("mean_bytes_per_window %.1f\ncapacity_bytes_per_unit_slot %lld\n", mean,
                  static_cast<long long>(cap));
      return kOk;
    }
    if (*plot) {
      for (const auto& f : ranslice::replot(out_dir)) std::printf("%s\n", f.c_str());
      return kOk;
    }
  } catch (const ranslice::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const ranslice::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << '\n';
    return kIngestion;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
