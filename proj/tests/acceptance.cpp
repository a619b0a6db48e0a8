// Acceptance run: the experiment-level criteria over the four traffic
// patterns plus the property suites. Prints one PASS/FAIL line per criterion
// and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ranslice/environment.hpp"
#include "ranslice/forecasting.hpp"
#include "ranslice/guidance.hpp"
#include "ranslice/metrics.hpp"
#include "ranslice/ppo.hpp"
#include "ranslice/report.hpp"
#include "ranslice/runner.hpp"
#include "ranslice/scenario.hpp"
#include "ranslice/traffic.hpp"

using namespace ranslice;

namespace {

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(const std::string& name, bool pass, const std::string& detail) {
  verdicts.push_back({name, pass, detail});
  std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Scenario text with `key = value` overrides replacing or appending lines.
Scenario load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    const std::string key(detail::trim(kv.substr(0, eq)));
    std::erase_if(lines, [&](const std::string& l) {
      const auto e = l.find('=');
      return e != std::string::npos && l[0] != '#' && detail::trim(l.substr(0, e)) == key;
    });
    lines.push_back(key + " = " + std::string(detail::trim(kv.substr(eq + 1))));
  }
  std::stringstream ss;
  for (const auto& l : lines) ss << l << '\n';
  return parse_scenario(KeyValueFile::parse(ss, path), std::filesystem::path(path).parent_path());
}

struct Key {
  std::string pattern;
  GuidanceMode mode;
  double sigma;
  auto operator<=>(const Key&) const = default;
};

double tail_mean(const std::vector<double>& r, std::size_t n) {
  n = std::min(n, r.size());
  return mean_of(std::span<const double>(r).last(n));
}

double post_mean(const std::vector<double>& r, std::size_t from) {
  if (from >= r.size()) return 0.0;
  return mean_of(std::span<const double>(r).subspan(from));
}

// ---------------------------------------------------------------------------
// Experiment criteria 1-7

struct Experiments {
  std::map<Key, std::vector<RunResult>> runs;  // seeds in order
  std::vector<std::string> patterns;
  std::size_t windows = 0;

  const std::vector<RunResult>& at(const std::string& p, GuidanceMode m, double s) const {
    static const std::vector<RunResult> none;
    const auto it = runs.find({p, m, s});
    return it == runs.end() ? none : it->second;
  }
};

void check_experiments(const Experiments& ex) {
  using M = GuidanceMode;
  const auto& P = ex.patterns;

  // 1: convergence ordering
  {
    int fa_patterns = 0, pd_patterns = 0;
    std::string detail;
    for (const auto& p : P) {
      const auto& fa = ex.at(p, M::ForecastAided, 0.1);
      const auto& pd = ex.at(p, M::PlainDRL, 0.0);
      const auto fa_conv = std::count_if(fa.begin(), fa.end(), [](auto& r) { return r.summary.converged; });
      const auto pd_conv = std::count_if(pd.begin(), pd.end(), [](auto& r) { return r.summary.converged; });
      if (2 * fa_conv > static_cast<long>(fa.size())) ++fa_patterns;
      if (2 * pd_conv > static_cast<long>(pd.size())) ++pd_patterns;
      detail += fmt(" %s FA %ld/%zu PD %ld/%zu;", p.c_str(), fa_conv, fa.size(), pd_conv, pd.size());
    }
    report("1 convergence ordering", fa_patterns >= 3 && pd_patterns <= 1,
           fmt("ForecastAided converges in %d/4 patterns (need >=3), PlainDRL in %d/4 (need <=1);", fa_patterns,
               pd_patterns) +
               detail);
  }
  // 2: initial reward advantage
  {
    double fa = 0, pd = 0;
    int n = 0, m = 0;
    for (const auto& p : P) {
      for (const auto& r : ex.at(p, M::ForecastAided, 0.1)) fa += r.summary.initial_reward, ++n;
      for (const auto& r : ex.at(p, M::PlainDRL, 0.0)) pd += r.summary.initial_reward, ++m;
    }
    fa /= std::max(1, n);
    pd /= std::max(1, m);
    const double rel = pd > 0 ? (fa - pd) / pd : 0.0;
    report("2 initial-reward advantage", rel >= 0.10,
           fmt("ForecastAided %.4f vs PlainDRL %.4f, relative %+.1f%% (need >= +10%%)", fa, pd, 100 * rel));
  }
  // 3: speed when both converge
  {
    int both = 0, faster = 0;
    std::string detail;
    for (const auto& p : P) {
      const auto& fa = ex.at(p, M::ForecastAided, 0.1);
      const auto& pd = ex.at(p, M::PlainDRL, 0.0);
      for (std::size_t i = 0; i < std::min(fa.size(), pd.size()); ++i) {
        if (!fa[i].summary.converged || !pd[i].summary.converged) continue;
        ++both;
        const auto a = *fa[i].summary.steps_to_converge, b = *pd[i].summary.steps_to_converge;
        if (a < b) ++faster;
        detail += fmt(" %s/seed%llu FA %lld PD %lld;", p.c_str(), static_cast<unsigned long long>(fa[i].seed),
                      static_cast<long long>(a), static_cast<long long>(b));
      }
    }
    report("3 speed when both converge", faster == both,
           fmt("%d of %d jointly converged runs have ForecastAided strictly faster;", faster, both) +
               (both ? detail : std::string(" (no run where both converge)")));
  }
  // 4: error robustness on pattern 1
  {
    const auto& p1 = P.front();
    bool ok = true;
    std::string detail;
    for (double s : {0.0, 0.1, 0.2, 0.25}) {
      const auto& rs = ex.at(p1, M::ForecastAided, s);
      const auto conv = std::count_if(rs.begin(), rs.end(), [](auto& r) { return r.summary.converged; });
      ok = ok && !rs.empty() && conv == static_cast<long>(rs.size());
      detail += fmt(" sd %.2f converged %ld/%zu;", s, conv, rs.size());
    }
    const auto& base = ex.at(p1, M::ForecastAided, 0.0);
    for (double s : {0.3, 0.4}) {
      const auto& rs = ex.at(p1, M::ForecastAided, s);
      for (std::size_t i = 0; i < rs.size() && i < base.size(); ++i) {
        const auto ref = base[i].summary.mean_reward_post;
        const double tail = tail_mean(rs[i].rewards, 2000);
        const bool good = ref && tail >= 0.75 * *ref;
        ok = ok && good;
        detail += fmt(" sd %.1f seed%llu last-2000 %.3f vs 0.75*%.3f;", s,
                      static_cast<unsigned long long>(rs[i].seed), tail, ref ? *ref : 0.0);
      }
    }
    report("4 error robustness (" + p1 + ")", ok, detail.substr(1));
  }
  // 5: pure-forecast failure
  {
    int converged = 0, total = 0;
    bool below = true;
    std::string detail;
    for (const auto& [k, rs] : ex.runs) {
      if (k.mode != M::PureForecast || k.sigma <= 0) continue;
      for (const auto& r : rs) {
        ++total;
        if (r.summary.converged) ++converged;
      }
    }
    for (const auto& p : P) {
      double pf = 0, fa = 0;
      const auto& a = ex.at(p, M::PureForecast, 0.1);
      const auto& b = ex.at(p, M::ForecastAided, 0.1);
      for (const auto& r : a) pf += post_mean(r.rewards, 5000) / static_cast<double>(a.size());
      for (const auto& r : b) fa += post_mean(r.rewards, 5000) / static_cast<double>(b.size());
      below = below && pf < fa;
      detail += fmt(" %s PF %.3f FA %.3f;", p.c_str(), pf, fa);
    }
    report("5 pure-forecast failure", converged == 0 && below && total > 0,
           fmt("%d of %d noisy PureForecast runs converged (need 0); post-5000 mean at sd 0.1 (need PF below FA):", converged, total) + detail);
  }
  // 6: trigger rate
  {
    double sum = 0;
    int n = 0;
    for (const auto& p : P)
      for (const auto& r : ex.at(p, M::ForecastAided, 0.1)) sum += r.summary.trigger_rate, ++n;
    const double rate = n ? sum / n : 0.0;
    report("6 trigger-rate plausibility", rate > 0.01 && rate < 0.25,
           fmt("mean ForecastAided trigger rate %.4f over %d runs (need in (0.01, 0.25))", rate, n));
  }
  // 7: ForecastState between PlainDRL and ForecastAided
  {
    double fs_init = 0, pd_init = 0;
    int fs_conv = 0, fa_conv = 0, n = 0, m = 0;
    for (const auto& p : P) {
      for (const auto& r : ex.at(p, M::ForecastState, 0.1)) fs_init += r.summary.initial_reward, ++n, fs_conv += r.summary.converged;
      for (const auto& r : ex.at(p, M::PlainDRL, 0.0)) pd_init += r.summary.initial_reward, ++m;
      for (const auto& r : ex.at(p, M::ForecastAided, 0.1)) fa_conv += r.summary.converged;
    }
    fs_init /= std::max(1, n);
    pd_init /= std::max(1, m);
    report("7 ForecastState ordering", fs_init >= pd_init && fs_conv <= fa_conv,
           fmt("ForecastState initial %.4f >= PlainDRL %.4f; converged runs ForecastState %d <= ForecastAided %d",
               fs_init, pd_init, fs_conv, fa_conv));
  }
}

// ---------------------------------------------------------------------------
// Property suites (criterion 8)

void property_conservation() {
  EnvConfig cfg;
  cfg.slices = {{"a", 0.1, 1.0, 20}, {"b", 0.7, 2.0, 10}, {"c", 0.2, 0.5, 40}};
  cfg.capacity_bytes_per_unit_slot = 60;
  cfg.episode_windows = 2000;
  std::vector<TrafficModel> models(3);
  models[0].parameters = VoNRModel{};
  models[0].users = {70, 104};
  models[1].parameters = VrSyntheticModel{};
  models[1].users = {4, 7};
  models[2].parameters = VideoModel{};
  models[2].users = {20, 43};
  const auto traffic = generate_episode(models, cfg.window_slots * (cfg.episode_windows + 1), 77);
  RanEnvironment env(cfg, traffic);
  env.reset();
  const ActionSpace space(cfg.total_units, 3, cfg.min_units);
  Rng rng = make_rng(5, {});
  while (!env.done()) env.step(space[uniform_index(rng, space.size())]);
  bool ok = true;
  std::string detail;
  for (std::size_t s = 0; s < 3; ++s) {
    std::int64_t arrived = 0;
    for (const auto& r : traffic.per_slice_requests[s])
      if (r.arrival_slot < cfg.window_slots * (cfg.episode_windows + 1)) arrived += r.size;
    ok = ok && arrived > 0 && arrived == env.bytes_arrived()[s] && env.bytes_arrived()[s] == env.bytes_served()[s] + env.bytes_queued(s);
    detail += fmt(" slice%zu %lld = %lld + %lld;", s, static_cast<long long>(env.bytes_arrived()[s]),
                  static_cast<long long>(env.bytes_served()[s]), static_cast<long long>(env.bytes_queued(s)));
  }
  report("8a byte conservation", ok, "arrived = served + queued over 2000 random windows:" + detail);
}

void property_reward() {
  const std::vector<SliceSpec> specs{{"a", 0.1, 1.0, 20}, {"b", 0.7, 2.0, 10}, {"c", 0.2, 0.5, 40}};
  const std::vector<double> at_c2{20, 10, 40};
  const double mid = compute_reward(at_c2, specs);
  Rng rng = make_rng(11, {});
  bool in_range = true, monotone = true;
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> l{uniform_real(rng, 0, 60), uniform_real(rng, 0, 60), uniform_real(rng, 0, 60)};
    const double r = compute_reward(l, specs);
    in_range = in_range && r > 0 && r < 1;
    auto l2 = l;
    l2[i % 3] += uniform_real(rng, 0, 5);
    monotone = monotone && compute_reward(l2, specs) <= r;
  }
  report("8b reward range and midpoint", std::abs(mid - 0.5) < 1e-15 && in_range && monotone,
         fmt("R(l=c2) = %.17g; 1e5 random latency vectors in (0,1) and non-increasing per slice", mid));
}

void property_distance_and_distillation() {
  const ActionSpace space(15, 3, 1);
  bool metric = true;
  for (std::size_t i = 0; i < space.size(); ++i)
    for (std::size_t j = 0; j < space.size(); ++j) {
      const double d = action_distance(space[i], space[j]);
      metric = metric && d == action_distance(space[j], space[i]) && ((d == 0) == (i == j));
    }
  report("8c distance symmetry and identity", metric, fmt("all %zu ordered pairs of the 91-action space", space.size() * space.size()));

  // Independent oracle: brute-force nearest in squared integer arithmetic
  // (midpoint doubled to stay integral).
  bool optimal = true;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < space.size(); ++i)
    for (std::size_t j = 0; j < space.size(); ++j) {
      const auto d = distill(space[i], space[j], space, 0.0);
      if (!d.distilled) continue;
      ++checked;
      long best = -1;
      for (std::size_t k = 0; k < space.size(); ++k) {
        long sq = 0;
        for (int s = 0; s < 3; ++s) {
          const long e = 2L * space[k][s] - space[i][s] - space[j][s];
          sq += e * e;
        }
        if (best < 0 || sq < best) best = sq;
      }
      long got = 0;
      for (int s = 0; s < 3; ++s) {
        const long e = 2L * d.chosen[s] - space[i][s] - space[j][s];
        got += e * e;
      }
      optimal = optimal && got == best && action_distance(d.chosen, space[j]) <= action_distance(space[i], space[j]);
    }
  report("8d distillation midpoint optimality", optimal && checked == 91 * 90,
         fmt("%zu distilled pairs checked against an exhaustive integer oracle", checked));
}

void property_noise_identity() {
  Rng rng = make_rng(3, {});
  bool ok = true;
  for (int i = 0; i < 10000; ++i) {
    std::vector<ContributionVector> truth;
    for (int h = 0; h < 1 + i % 10; ++h) {
      std::vector<double> v{uniform_open01(rng), uniform_open01(rng), uniform_open01(rng)};
      const double s = v[0] + v[1] + v[2];
      for (double& x : v) x /= s;
      truth.push_back({v, false});
    }
    const auto f = apply_noise(truth, 0.0, 0.0, rng);
    for (std::size_t h = 0; h < truth.size(); ++h) ok = ok && f.per_step[h].kappa == truth[h].kappa;
  }
  report("8e apply_noise zero-noise identity", ok, "10^4 random simplex sequences returned bit-identical");
}

void property_sampler_bounds() {
  Rng rng = make_rng(17, {});
  const TruncatedPareto inter(6, 12.5, 1.2), size(100, 250, 1.2);
  bool ok = true;
  double lo = 1e300, hi = 0, sum_i = 0, sum_s = 0;
  int users_max = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double a = inter(rng), b = size(rng);
    ok = ok && a > 0 && a <= 12.5 && b > 0 && b <= 250;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    sum_i += a;
    sum_s += b;
  }
  for (int i = 0; i < 1000000; ++i) users_max = std::max(users_max, sample_user_count(20, 43, rng));
  ok = ok && users_max <= 43 && std::abs(sum_i / 1e6 - 6) < 0.06 && std::abs(sum_s / 1e6 - 100) < 1.0;
  report("8f truncated sampler bounds", ok,
         fmt("10^6 draws each: interarrival in [%.3f, %.3f] mean %.4f, size mean %.3f, users max %d", lo, hi,
             sum_i / 1e6, sum_s / 1e6, users_max));
}

void property_gradient() {
  AgentConfig cfg;
  cfg.state_dim = 3;
  cfg.action_count = 5;
  cfg.hidden_layers = {6, 5};
  cfg.seed = 4;
  PpoAgent agent(cfg);
  Rng rng = make_rng(8, {});
  for (auto& p : agent.policy_network().parameters()) p = 0.5 * standard_normal(rng);
  for (auto& p : agent.value_network().parameters()) p = 0.5 * standard_normal(rng);
  TransitionBatch b;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> s{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    const auto a = static_cast<std::size_t>(i % 5);
    // behaviour log-prob near the current one so the ratio stays inside the clip band
    b.push(s, a, agent.log_prob(s, a) + 0.05 * standard_normal(rng), uniform_real(rng, 0, 1), 0.0);
  }
  b.advantages = {0.7, -0.4, 1.1, -0.9};
  b.returns = {0.3, -0.2, 0.8, 0.1};
  std::vector<double> gp, gv;
  agent.loss_and_gradient(b, &gp, &gv);
  double worst = 0;
  auto check = [&](std::span<double> params, const std::vector<double>& g) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i], h = 1e-6;
      params[i] = keep + h;
      const double up = agent.loss_and_gradient(b, nullptr, nullptr);
      params[i] = keep - h;
      const double down = agent.loss_and_gradient(b, nullptr, nullptr);
      params[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-3, std::abs(fd) + std::abs(g[i])));
    }
  };
  check(agent.policy_network().parameters(), gp);
  check(agent.value_network().parameters(), gv);
  report("8g PPO gradient vs finite differences", worst < 1e-4, fmt("max relative error %.3g (need < 1e-4)", worst));
}

void property_bandit() {
  // 3 contexts x 5 arms; the best arm differs per context.
  const int best[3] = {1, 4, 2};
  AgentConfig cfg;
  cfg.state_dim = 3;
  cfg.action_count = 5;
  cfg.seed = 21;
  cfg.discount = 0.0;
  cfg.gae_lambda = 0.0;
  PpoAgent agent(cfg);
  Rng rng = make_rng(22, {});
  TransitionBatch batch;
  int hits_last = 0;
  const int steps = 2000, tail = 200;
  for (int t = 0; t < steps; ++t) {
    if (static_cast<int>(batch.size()) == cfg.batch_size) {
      agent.update(batch, 0.0);
      batch.clear();
    }
    const int c = static_cast<int>(uniform_index(rng, 3));
    std::vector<double> s(3, 0.0);
    s[static_cast<std::size_t>(c)] = 1.0;
    const auto a = agent.policy_action(s, t, rng);
    const double r = static_cast<int>(a.action_index) == best[c] ? 1.0 : 0.2;
    if (t >= steps - tail && static_cast<int>(a.action_index) == best[c]) ++hits_last;
    batch.push(s, a.action_index, a.log_prob, r, agent.value_estimate(s));
  }
  double greedy = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s(3, 0.0);
    s[static_cast<std::size_t>(c)] = 1.0;
    greedy += agent.action_probabilities(s)[static_cast<std::size_t>(best[c])] / 3.0;
  }
  const double rate = static_cast<double>(hits_last) / tail;
  report("8h contextual-bandit learning", rate >= 0.95,
         fmt("optimal-action rate over the last %d of %d steps %.3f (need >= 0.95); mean policy mass on best %.3f",
             tail, steps, rate, greedy));
}

void property_replay(const Scenario& base) {
  Scenario sc = base;
  sc.env.episode_windows = 1000;
  sc.guidance.mode = GuidanceMode::ForecastAided;
  sc.forecast.noise_std = 0.2;
  auto csv_of = [&] {
    const auto r = run_seed(sc, 9, resolve_capacity(sc));
    std::ostringstream os;
    write_records_csv(os, r.records, sc.env.slice_count());
    return os.str();
  };
  const auto a = csv_of(), b = csv_of();
  report("8i seeded replay", a == b && !a.empty(), fmt("two 1000-window ForecastAided runs, CSVs of %zu bytes identical", a.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string dir = std::string(RANSLICE_SOURCE_DIR) + "/scenarios";
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::int64_t windows = 10000;
  bool skip_properties = false, skip_experiments = false, quick = false;
  std::vector<std::string> pattern_names{"pattern1", "pattern2", "pattern3", "pattern4"};
  app.add_option("--scenarios", dir, "scenario directory");
  app.add_option("--set", overrides, "key=value override applied to every scenario");
  app.add_option("--seeds", seeds, "seeds")->delimiter(',');
  app.add_option("--windows", windows, "episode windows");
  app.add_option("--patterns", pattern_names, "pattern files (without .scn)")->delimiter(',');
  app.add_flag("--skip-properties", skip_properties);
  app.add_flag("--skip-experiments", skip_experiments);
  app.add_flag("--quick", quick, "only the core cells (for exploring parameters)");
  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Scenario> bases;
  try {
    for (const auto& p : pattern_names) {
      auto sc = load_with_overrides(dir + "/" + p + ".scn", overrides);
      sc.env.episode_windows = windows;
      sc.seeds = seeds;
      bases.push_back(sc);
    }
  } catch (const std::exception& e) {
    std::printf("FAIL  setup: %s\n", e.what());
    return 1;
  }

  if (!skip_experiments) {
    using M = GuidanceMode;
    std::vector<Scenario> cells;
    auto add = [&](const Scenario& base, M mode, double sigma) {
      Scenario sc = base;
      sc.guidance.mode = mode;
      sc.forecast.noise_std = sigma;
      sc.name = base.pattern + "-" + std::string(to_string(mode)) + "-s" + noise_label(sigma);
      cells.push_back(sc);
    };
    for (const auto& b : bases) {
      add(b, M::ForecastAided, 0.1);
      add(b, M::PlainDRL, 0.0);
      if (quick) {
        add(b, M::PureForecast, 0.1);
        add(b, M::ForecastAided, 0.25);
        continue;
      }
      add(b, M::ForecastState, 0.1);
      for (double s : {0.1, 0.2, 0.23, 0.25, 0.3, 0.4}) add(b, M::PureForecast, s);
    }
    if (!quick)
      for (double s : {0.0, 0.2, 0.25, 0.3, 0.4}) add(bases.front(), M::ForecastAided, s);

    Experiments ex;
    ex.windows = static_cast<std::size_t>(windows);
    for (const auto& b : bases) ex.patterns.push_back(b.pattern);
    const auto jobs = plan_jobs(cells);
    bool sums_ok = true;
    std::size_t actions = 0, failures = 0;
    const auto results = run_jobs(jobs, 1, [&](RunResult& r) {
      if (!r.ok()) {
        ++failures;
        std::printf("  run %s seed %llu failed: %s\n", r.scenario.c_str(), static_cast<unsigned long long>(r.seed),
                    r.failure_message.c_str());
        return;
      }
      for (const auto& rec : r.records) {
        int sum = 0;
        for (int u : rec.action) sum += u;
        sums_ok = sums_ok && sum == bases.front().env.total_units &&
                  *std::min_element(rec.action.begin(), rec.action.end()) >= bases.front().env.min_units;
        ++actions;
      }
      r.records.clear();
      r.records.shrink_to_fit();
      const auto& s = r.summary;
      std::printf("  %-34s seed %-3llu initial %.3f mean %.3f last2k %.3f %s trigger %.3f\n", r.scenario.c_str(),
                  static_cast<unsigned long long>(r.seed), s.initial_reward, s.mean_reward, tail_mean(r.rewards, 2000),
                  s.converged ? fmt("conv@%lld", static_cast<long long>(*s.steps_to_converge)).c_str() : "no-conv",
                  s.trigger_rate);
      std::fflush(stdout);
    });
    for (const auto& r : results)
      if (r.ok()) ex.runs[{r.pattern, r.mode, r.noise_std}].push_back(r);
    check_experiments(ex);
    report("8j action sum over the sweep", sums_ok && failures == 0 && actions > 0,
           fmt("%zu emitted actions all sum to B with the per-slice floor; %zu failed runs", actions, failures));
  }

  if (!skip_properties) {
    property_conservation();
    property_reward();
    property_distance_and_distillation();
    property_noise_identity();
    property_sampler_bounds();
    property_gradient();
    property_bandit();
    property_replay(bases.front());
  }

  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto failed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.pass; });
  std::printf("%zu criteria checked, %ld failed, %.0f s\n", verdicts.size(), static_cast<long>(failed), secs);
  return failed == 0 ? 0 : 1;
}
