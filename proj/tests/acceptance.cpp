// Acceptance checks, one line per criterion. Exit status is nonzero if any
// criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "fixtures.hpp"
#include "hybridsim/hybridsim.hpp"
#include "oracles.hpp"

using namespace hybridsim;
using namespace hybridsim::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = HYBRIDSIM_CONFIG_DIR;

struct Outcome {
  bool pass;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hybridsim-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome experiment_shape() {
  const auto dir = scratch("fig2");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(kConfigs / "repro_fig2.json", RunOverrides{std::nullopt, dir});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto cfg = load_run_config(kConfigs / "repro_fig2.json");
  const auto& arrival = std::get<FixedCountArrivals>(cfg.workload_spec->arrival);
  const auto& s = r.summary;
  const double inside = s.at("mean_latency_in_overload_s");
  const double outside = s.at("mean_latency_outside_overload_s");
  const auto intervals = s.at("overload_intervals").size();
  const bool table = fs::exists(dir / "fig2.csv") && s.at("per_template").size() == cfg.catalog.templates().size();
  const bool pass = arrival.n == 2194 && cfg.workload_spec->horizon_s == 108000.0 && wall < 10.0 && table &&
                    intervals >= 1 && inside >= 2.0 * outside;
  return {pass, "base queries " + std::to_string(arrival.n) + ", horizon " + fmt("%.0f s", cfg.workload_spec->horizon_s) +
                    ", total " + std::to_string(s.at("query_count").get<std::size_t>()) + ", wall " +
                    fmt("%.3f s", wall) + ", overload intervals " + std::to_string(intervals) +
                    fmt(", latency inside/outside %.2f/%.2f s (x%.2f)", inside, outside, inside / outside)};
}

Outcome determinism() {
  const auto a = scratch("det-a"), b = scratch("det-b");
  const std::string cli = HYBRIDSIM_CLI;
  const auto cfg = (kConfigs / "repro_fig2.json").string();
  const int ra = std::system((cli + " run " + cfg + " --out " + a.string() + " >/dev/null").c_str());
  const int rb = std::system((cli + " run " + cfg + " --out " + b.string() + " >/dev/null").c_str());
  if (ra != 0 || rb != 0) return {false, "CLI run failed"};
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name == "manifest.json") {
      auto ma = json::parse(slurp(a / name)), mb = json::parse(slurp(b / name));
      ma.erase("created_at");
      mb.erase("created_at");
      if (ma != mb) return {false, "manifest differs beyond created_at"};
    } else if (slurp(a / name) != slurp(b / name)) {
      return {false, name.string() + " differs"};
    }
    ++compared;
  }
  return {compared > 0, std::to_string(compared) + " artifacts byte-identical across two CLI runs, trace sha256 " +
                            sha256_hex(slurp(a / "trace.csv")).substr(0, 16)};
}

Outcome queueing_oracle() {
  Rng rng(3);
  const int instances = 1000;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const auto topo = random_topology(rng, 2, 1, 2);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(3)));
    const auto placement = random_placement(rng, cat, topo);
    std::vector<QueryInstance> wl;
    double t = 0.0;
    for (auto n = 1 + rng.below(3); n > 0; --n) {
      t += rng.below(2) ? 0.0 : rng.uniform(0.0, 3.0);
      wl.push_back(query(wl.size(), cat.templates()[rng.below(cat.templates().size())].template_id.str(), t));
    }
    SimulationOptions opt;
    opt.seed = static_cast<std::uint64_t>(i);
    const auto trace = simulate(topo, placement, cat, wl, opt);
    const auto expected = oracle::replay_latencies(topo, placement, cat, wl);
    for (std::size_t q = 0; q < wl.size(); ++q) worst = std::max(worst, std::abs(trace.records[q].latency_s - expected[q]));
  }
  return {worst <= 1e-9, std::to_string(instances) + " instances, max |engine - replay| = " + fmt("%.3g s", worst)};
}

Outcome placement_oracle() {
  Rng rng(4);
  const int instances = 500;
  int order_ok = 0, optimal = 0;
  for (int i = 0; i < instances; ++i) {
    const auto topo = random_topology(rng, 4);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(6)), 4);
    const auto start = random_placement(rng, cat, topo);
    const double initial = evaluate_placement(start, cat, topo).expected_latency_s;
    const auto greedy = greedy_improve(start, cat, topo, 1000);
    const double g = evaluate_placement(greedy.placement, cat, topo).expected_latency_s;
    const double best = brute_force_optimal(cat, topo).second.expected_latency_s;
    const double tol = 1e-12 * std::max(1.0, initial);
    if (best <= g + tol && g <= initial + tol) ++order_ok;
    if (g <= best + 1e-9 * std::max(1.0, best)) ++optimal;
  }
  const double rate = static_cast<double>(optimal) / instances;
  // Required minimum is 60%; the floor sits just under the first measured
  // rate (87.0% for this seed) so regressions show up.
  return {order_ok == instances && rate >= 0.85,
          std::to_string(order_ok) + "/" + std::to_string(instances) + " ordered, greedy optimal on " +
              fmt("%.1f%% (regression floor 85%%, required 60%%)", 100.0 * rate)};
}

Outcome placement_effectiveness() {
  const auto dir = scratch("hotspot");
  const auto r = run(kConfigs / "hotspot.json", RunOverrides{std::nullopt, dir});
  const auto& opt = r.summary.at("optimizer");
  const double before = opt.at("simulated_initial_mean_latency_s");
  const double after = opt.at("simulated_final_mean_latency_s");
  const double reduction = 1.0 - after / before;
  return {reduction >= 0.20, fmt("simulated mean latency %.3f s -> %.3f s (%.1f%% reduction), analytic %.3f", before,
                                 after, 100.0 * reduction, opt.at("initial_cost_s").get<double>()) +
                                 fmt(" -> %.3f s", opt.at("final_cost_s").get<double>())};
}

Outcome control_stability() {
  // Plant y[k+1] = 0.5 y[k] + 1.0 u[k] under integral gains of both signs.
  const LinearModel plant{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, 1.0),
                          Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), 1.0};
  const double inf = std::numeric_limits<double>::infinity();
  int stable_ok = 0, unstable_ok = 0, stable_n = 0, unstable_n = 0;
  for (double k : {0.05, 0.1, 0.25, 0.4, 0.7, 1.0, 1.5, 2.0, 3.0, -0.2, -0.5}) {
    ControllerConfig cfg{Eigen::MatrixXd::Constant(1, 1, k), Eigen::VectorXd::Constant(1, 1.0),
                         Eigen::VectorXd::Constant(1, -inf), Eigen::VectorXd::Constant(1, inf), 1.0, 0.0};
    const double rho = closed_loop_spectral_radius(plant, cfg);
    LinearScenario sc;
    sc.steps = 500;
    sc.x0 = Eigen::VectorXd::Constant(1, 1.0);
    const auto trace = simulate_linear_loop(plant, cfg, sc);
    double peak = 0.0;
    for (const auto& s : trace.steps) peak = std::max(peak, std::abs(s.y(0)));
    if (rho < 1.0) {
      ++stable_n;
      stable_ok += peak < 1e3 && std::abs(trace.steps.back().y(0) - 1.0) < 1e-6 ? 1 : 0;
    } else {
      ++unstable_n;
      unstable_ok += peak > 1e3 ? 1 : 0;
    }
  }
  Rng rng(6);
  std::vector<IoSample> log;
  double y = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double u = rng.normal(0.0, 1.0);
    log.push_back({Eigen::VectorXd::Constant(1, u), Eigen::VectorXd::Constant(1, y)});
    y = 0.5 * y + 0.2 * u;
  }
  const auto fit = fit_model(log, 1);
  const double err = std::max(std::abs(fit.coefficients(0, 0) - 0.5), std::abs(fit.coefficients(0, 1) - 0.2));
  return {stable_ok == stable_n && unstable_ok == unstable_n && stable_n > 0 && unstable_n > 0 && err <= 1e-6,
          std::to_string(stable_ok) + "/" + std::to_string(stable_n) + " stable gains bounded, " +
              std::to_string(unstable_ok) + "/" + std::to_string(unstable_n) +
              " unstable gains diverged past 1e3 within 500 steps, fit error " + fmt("%.2g", err)};
}

Outcome closed_loop_benefit() {
  const auto tuned = run(kConfigs / "step_load_tune.json", RunOverrides{std::nullopt, scratch("tune")});
  const auto gain = matrix_from_json(tuned.summary.at("tune").at("best_gain"), "best_gain");
  const double rho = tuned.summary.at("tune").at("candidates").at(tuned.summary.at("tune").at("best_index").get<std::size_t>()).at("spectral_radius");

  auto cfg = load_run_config(kConfigs / "step_load.json", RunOverrides{std::nullopt, scratch("step")});
  cfg.controller->config.Ki = gain;
  const auto workload = build_workload(cfg);
  const auto binding = detail::binding_for(cfg);
  const auto& ctl = cfg.controller->config;
  auto [trace, control] = run_closed_loop(cfg.topology, cfg.placement, cfg.catalog, workload, LinearModel{}, ctl, binding);
  const double final_third = detail::final_third_mean_latency(trace);
  const double setpoint = ctl.setpoint(0);

  // Oversized static capacity: every controlled node at its maximum, no control.
  Topology big = cfg.topology;
  for (const auto& n : binding.controlled_nodes) big = big.with_vm_count(n, big.node(n).vm_max);
  ControllerConfig inert = ctl;
  inert.Ki.setZero();
  auto [base_trace, base_control] = run_closed_loop(big, cfg.placement, cfg.catalog, workload, LinearModel{}, inert, binding);

  const bool within = std::abs(final_third - setpoint) <= 0.2 * setpoint;
  const bool cheaper = ctl.lambda > 0.0 && control.J < base_control.J;
  return {rho < 1.0 && within && cheaper,
          fmt("tuned Ki %.3g (rho %.4f), final-third latency %.2f s vs setpoint %.2f s", gain(0, 0), rho, final_third,
              setpoint) +
              fmt(", J %.4g vs static-max baseline %.4g (lambda %.2g)", control.J, base_control.J, ctl.lambda)};
}

Outcome invariant_suites() {
  std::string suites = HYBRIDSIM_SUITES;
  std::stringstream ss(suites);
  std::string path;
  int passed = 0, total = 0;
  std::string failed;
  while (std::getline(ss, path, '|')) {
    ++total;
    const int raw = std::system((path + " --gtest_brief=1 >/dev/null 2>&1").c_str());
    if (WIFEXITED(raw) && WEXITSTATUS(raw) == 0) {
      ++passed;
    } else {
      failed += " " + fs::path(path).filename().string();
    }
  }
  return {total > 0 && passed == total,
          std::to_string(passed) + "/" + std::to_string(total) + " property/unit suites green" +
              (failed.empty() ? "" : ", failing:" + failed)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"experiment shape (2194 queries / 108000 s, table, bursts)", experiment_shape},
      {"determinism (byte-identical artifacts)", determinism},
      {"queueing oracle (engine vs brute-force replay)", queueing_oracle},
      {"placement oracle (brute <= greedy <= initial)", placement_oracle},
      {"placement effectiveness (hotspot, simulated)", placement_effectiveness},
      {"control stability (rho vs recurrence, fit)", control_stability},
      {"closed-loop benefit (step load, tuned gain)", closed_loop_benefit},
      {"invariant suites", invariant_suites},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("hybridsim-acceptance-" + std::to_string(::getpid())));
  return failures == 0 ? 0 : 1;
}
