#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "hybridsim/analysis.hpp"
#include "hybridsim/control.hpp"
#include "hybridsim/datamodel.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/placement.hpp"
#include "hybridsim/report.hpp"
#include "hybridsim/topology.hpp"
#include "hybridsim/workload.hpp"

namespace hybridsim {

namespace fs = std::filesystem;

enum class RunMode { kSimulate, kOptimize, kClosedLoop, kTune };

inline RunMode parse_mode(const std::string& s) {
  if (s == "simulate") return RunMode::kSimulate;
  if (s == "optimize") return RunMode::kOptimize;
  if (s == "closed_loop") return RunMode::kClosedLoop;
  if (s == "tune") return RunMode::kTune;
  throw Error(ErrorCode::kValidationError, "unknown mode '" + s + "'");
}

struct AnalysisSettings {
  double overload_window_s = 60.0;
  std::size_t overload_threshold = 10;
  std::size_t top_k = 3;
};

struct OptimizeSettings {
  std::size_t max_moves = 100;
  bool measured_weights = false;
  std::size_t offload_k = 0;  // 0 skips the public-cloud offload step
};

struct TuneSettings {
  int order = 1;
  std::vector<MatrixXd> candidates;
  std::vector<std::vector<int>> excitation_levels;
  std::size_t scenario_steps = 200;
  VectorXd initial_output_deviation;  // starting excursion of y from its mean; empty: none
};

struct ControllerFile {
  ControllerConfig config;
  std::vector<NodeId> controlled_nodes;
  std::vector<Measurement> outputs;
  VectorXd u0;
  LinearModel model;  // empty A when absent
  std::optional<TuneSettings> tune;
};

struct RunConfig {
  RunMode mode = RunMode::kSimulate;
  Topology topology;
  Catalog catalog;
  Placement placement;
  std::optional<WorkloadSpec> workload_spec;
  std::optional<std::vector<QueryInstance>> workload_replay;
  std::optional<ControllerFile> controller;
  std::vector<CapacityChange> capacity_schedule;
  std::uint64_t seed = 0;
  fs::path output_dir = "out";
  AnalysisSettings analysis;
  OptimizeSettings optimize;
  json raw;  // the config document as read, for the manifest digest
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output_dir;
};

inline ControllerFile controller_file_from_json(const json& j) {
  ControllerFile cf;
  cf.config = controller_config_from_json(j);
  cf.controlled_nodes = require<std::vector<NodeId>>(j, "controlled_nodes", "controller");
  for (const auto& name : optional_field<std::vector<std::string>>(j, "outputs", {"latency_s"}, "controller")) {
    cf.outputs.push_back(parse_measurement(name));
  }
  if (j.contains("u0")) cf.u0 = vector_from_json(j.at("u0"), "controller.u0");
  if (j.contains("model")) cf.model = linear_model_from_json(j.at("model"));
  if (j.contains("tune")) {
    const auto& t = j.at("tune");
    TuneSettings ts;
    ts.order = optional_field<int>(t, "order", 1, "tune");
    for (const auto& c : require<json>(t, "candidates", "tune")) ts.candidates.push_back(matrix_from_json(c, "tune.candidates"));
    ts.excitation_levels = require<std::vector<std::vector<int>>>(t, "excitation_levels", "tune");
    ts.scenario_steps = optional_field<std::size_t>(t, "scenario_steps", 200, "tune");
    if (t.contains("initial_output_deviation")) {
      ts.initial_output_deviation = vector_from_json(t.at("initial_output_deviation"), "tune.initial_output_deviation");
    }
    cf.tune = std::move(ts);
  }
  return cf;
}

inline RunConfig load_run_config(const fs::path& config_path, const RunOverrides& overrides = {}) {
  RunConfig cfg;
  cfg.raw = read_json_file(config_path);
  const json& doc = cfg.raw;
  if (!doc.is_object()) throw Error(ErrorCode::kValidationError, "run config: expected an object");
  const fs::path base = config_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  cfg.mode = parse_mode(optional_field<std::string>(doc, "mode", "simulate", "run config"));
  cfg.topology = load_topology_file(resolve(require<std::string>(doc, "topology", "run config")));
  cfg.catalog = load_catalog_file(resolve(require<std::string>(doc, "catalog", "run config")));
  cfg.placement = load_placement_file(resolve(require<std::string>(doc, "placement", "run config")));
  require_valid_placement(cfg.placement, cfg.catalog, cfg.topology);

  if (doc.contains("workload_csv")) {
    cfg.workload_replay = workload_from_csv(read_text_file(resolve(require<std::string>(doc, "workload_csv", "run config"))));
  } else {
    cfg.workload_spec = workload_spec_from_json(require<json>(doc, "workload", "run config"));
  }

  if (doc.contains("controller")) {
    cfg.controller = controller_file_from_json(read_json_file(resolve(require<std::string>(doc, "controller", "run config"))));
  }
  if ((cfg.mode == RunMode::kClosedLoop || cfg.mode == RunMode::kTune) && !cfg.controller) {
    throw Error(ErrorCode::kValidationError, "run config: mode requires a controller config");
  }
  if (cfg.mode == RunMode::kTune && !cfg.controller->tune) {
    throw Error(ErrorCode::kValidationError, "run config: tune mode requires a 'tune' section in the controller config");
  }

  if (doc.contains("capacity_schedule")) {
    for (const auto& c : doc.at("capacity_schedule")) {
      cfg.capacity_schedule.push_back({require<double>(c, "t_s", "capacity_schedule"),
                                       require<NodeId>(c, "node", "capacity_schedule"),
                                       require<int>(c, "vm_count", "capacity_schedule")});
    }
  }

  cfg.seed = optional_field<std::uint64_t>(doc, "seed", cfg.workload_spec ? cfg.workload_spec->seed : 0, "run config");
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (cfg.workload_spec) cfg.workload_spec->seed = cfg.seed;
  cfg.output_dir = overrides.output_dir ? *overrides.output_dir
                                        : resolve(optional_field<std::string>(doc, "output_dir", "out", "run config"));

  if (doc.contains("analysis")) {
    const auto& a = doc.at("analysis");
    cfg.analysis.overload_window_s = optional_field<double>(a, "overload_window_s", 60.0, "analysis");
    cfg.analysis.overload_threshold = optional_field<std::size_t>(a, "overload_threshold", 10, "analysis");
    cfg.analysis.top_k = optional_field<std::size_t>(a, "top_k", 3, "analysis");
  }
  if (doc.contains("optimize")) {
    const auto& o = doc.at("optimize");
    cfg.optimize.max_moves = optional_field<std::size_t>(o, "max_moves", 100, "optimize");
    const auto weights = optional_field<std::string>(o, "weights", "catalog", "optimize");
    if (weights != "catalog" && weights != "measured") {
      throw Error(ErrorCode::kValidationError, "optimize.weights must be 'catalog' or 'measured'");
    }
    cfg.optimize.measured_weights = weights == "measured";
    cfg.optimize.offload_k = optional_field<std::size_t>(o, "offload_k", 0, "optimize");
  }
  return cfg;
}

inline std::vector<QueryInstance> build_workload(const RunConfig& cfg) {
  if (cfg.workload_replay) return *cfg.workload_replay;
  return generate_workload(*cfg.workload_spec, cfg.catalog, cfg.topology.client_classes());
}

inline json stats_to_json(const Trace& trace, const AnalysisSettings& analysis) {
  json per_template = json::object();
  for (const auto& [id, s] : per_template_stats(trace)) {
    per_template[id.str()] = {{"count", s.count},
                              {"mean_latency_s", s.mean_latency_s},
                              {"p95_latency_s", s.p95_latency_s},
                              {"max_latency_s", s.max_latency_s}};
  }
  const auto intervals = detect_overload(trace, analysis.overload_window_s, analysis.overload_threshold);
  json overload = json::array();
  for (const auto& iv : intervals) {
    overload.push_back({{"start_s", iv.start_s}, {"end_s", iv.end_s}, {"peak_concurrency", iv.peak_concurrency}});
  }
  json top = json::array();
  if (!trace.records.empty()) {
    for (const auto& t : rank_demanding_templates(trace, analysis.top_k)) top.push_back(t.str());
  }
  const auto [inside, outside] = latency_inside_outside(trace, intervals);
  return {{"query_count", trace.records.size()},
          {"mean_latency_s", mean_latency(trace)},
          {"per_template", std::move(per_template)},
          {"overload_intervals", std::move(overload)},
          {"mean_latency_in_overload_s", inside},
          {"mean_latency_outside_overload_s", outside},
          {"top_demanding_templates", std::move(top)}};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects artifacts, then writes them along with a manifest that lists each
// artifact's digest. JSON artifacts carry the manifest digest themselves.
class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    digest_ = manifest_digest(manifest_);
  }

  const std::string& manifest_digest_hex() const { return digest_; }

  void add_text(const std::string& name, std::string text) { files_.emplace(name, std::move(text)); }

  void add_json(const std::string& name, json doc) {
    doc["manifest_digest"] = digest_;
    files_.emplace(name, doc.dump(2) + "\n");
  }

  std::vector<std::string> write() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kConfigNotFound, "cannot create output dir " + dir_.string());
    json manifest = to_json(manifest_);
    manifest["manifest_digest"] = digest_;
    json artifacts = json::object();
    std::vector<std::string> names;
    for (const auto& [name, text] : files_) {
      write_text_file(dir_ / name, text);
      artifacts[name] = sha256_hex(text);
      names.push_back(name);
    }
    manifest["artifacts"] = std::move(artifacts);
    write_text_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
    names.push_back("manifest.json");
    return names;
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
  std::string digest_;
  std::map<std::string, std::string> files_;
};

struct RunResult {
  fs::path output_dir;
  std::vector<std::string> artifacts;
  json summary;
};

namespace detail {

inline RunManifest make_manifest(const Trace& trace, const RunConfig& cfg) {
  RunManifest m = trace.manifest;
  m.seed = cfg.seed;
  m.digests["run_config"] = json_digest(cfg.raw);
  m.created_at = utc_timestamp();
  return m;
}

inline void add_trace_artifacts(ArtifactWriter& w, const Trace& trace, const std::vector<QueryInstance>& workload,
                                const std::string& suffix = "") {
  w.add_text("trace" + suffix + ".csv", trace_to_csv(trace));
  if (suffix.empty()) {
    w.add_text("workload.csv", workload_to_csv(workload));
    w.add_text("fig2.csv", duration_table_csv(emit_fig2_table(trace)));
  }
}

inline ControlBinding binding_for(const RunConfig& cfg) {
  ControlBinding b;
  b.controlled_nodes = cfg.controller->controlled_nodes;
  b.outputs = cfg.controller->outputs;
  b.u0 = cfg.controller->u0;
  b.seed = cfg.seed;
  return b;
}

inline double final_third_mean_latency(const Trace& trace) {
  if (trace.records.empty()) return 0.0;
  double horizon = 0.0;
  for (const auto& r : trace.records) horizon = std::max(horizon, r.arrival_s);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : trace.records) {
    if (r.arrival_s >= horizon * 2.0 / 3.0) {
      sum += r.latency_s;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline json control_summary(const ControlTrace& control, const Trace& trace) {
  return {{"J", control.J},
          {"spectral_radius", std::isnan(control.spectral_radius) ? json(nullptr) : json(control.spectral_radius)},
          {"steps", control.steps.size()},
          {"final_third_mean_latency_s", final_third_mean_latency(trace)}};
}

}  // namespace detail

inline RunResult run_loaded(const RunConfig& cfg) {
  const auto workload = build_workload(cfg);
  spdlog::info("seed {}: {} queries", cfg.seed, workload.size());

  SimulationOptions sim;
  sim.seed = cfg.seed;
  sim.capacity_schedule = cfg.capacity_schedule;

  RunResult result;
  result.output_dir = cfg.output_dir;
  json summary{{"seed", cfg.seed}};

  auto finish = [&](const Trace& trace, ArtifactWriter& w) {
    check_trace_invariants(trace, workload.size());
    json stats = stats_to_json(trace, cfg.analysis);
    for (auto& [k, v] : stats.items()) summary[k] = v;
    w.add_json("summary.json", summary);
    result.artifacts = w.write();
    result.summary = summary;
    spdlog::info("wrote {} artifacts to {}", result.artifacts.size(), cfg.output_dir.string());
  };

  switch (cfg.mode) {
    case RunMode::kSimulate: {
      summary["mode"] = "simulate";
      const Trace trace = simulate(cfg.topology, cfg.placement, cfg.catalog, workload, sim);
      ArtifactWriter w(cfg.output_dir, detail::make_manifest(trace, cfg));
      detail::add_trace_artifacts(w, trace, workload);
      finish(trace, w);
      break;
    }
    case RunMode::kOptimize: {
      summary["mode"] = "optimize";
      const Trace initial = simulate(cfg.topology, cfg.placement, cfg.catalog, workload, sim);
      check_trace_invariants(initial, workload.size());
      const Catalog weighted =
          cfg.optimize.measured_weights && !initial.records.empty() ? cfg.catalog.with_weights(observed_weights(initial))
                                                                    : cfg.catalog;
      auto greedy = greedy_improve(cfg.placement, weighted, cfg.topology, cfg.optimize.max_moves);
      Placement final_placement = greedy.placement;
      if (cfg.optimize.offload_k > 0 && !initial.records.empty()) {
        final_placement =
            offload_demanding_to_public(final_placement, initial, weighted, cfg.topology, cfg.optimize.offload_k);
      }
      require_valid_placement(final_placement, cfg.catalog, cfg.topology);
      const Trace final_trace = simulate(cfg.topology, final_placement, cfg.catalog, workload, sim);

      ArtifactWriter w(cfg.output_dir, detail::make_manifest(final_trace, cfg));
      detail::add_trace_artifacts(w, final_trace, workload);
      detail::add_trace_artifacts(w, initial, workload, "_initial");
      w.add_json("initial_placement.json", {{"placement", to_json(cfg.placement)}});
      w.add_json("final_placement.json", {{"placement", to_json(final_placement)}});
      json moves = json::array();
      for (const auto& mv : greedy.moves) {
        moves.push_back({{"fragment", mv.fragment}, {"from", mv.from}, {"to", mv.to}, {"cost_after_s", mv.cost_after_s}});
      }
      const double final_cost = evaluate_placement(final_placement, weighted, cfg.topology).expected_latency_s;
      json report{{"initial_cost_s", greedy.initial_cost_s},
                  {"greedy_cost_s", greedy.final_cost_s},
                  {"final_cost_s", final_cost},
                  {"weights", cfg.optimize.measured_weights ? "measured" : "catalog"},
                  {"moves", std::move(moves)},
                  {"simulated_initial_mean_latency_s", mean_latency(initial)},
                  {"simulated_final_mean_latency_s", mean_latency(final_trace)}};
      summary["optimizer"] = report;
      w.add_json("optimizer_report.json", std::move(report));
      finish(final_trace, w);
      break;
    }
    case RunMode::kClosedLoop: {
      summary["mode"] = "closed_loop";
      const auto& ctl = *cfg.controller;
      auto [trace, control] =
          run_closed_loop(cfg.topology, cfg.placement, cfg.catalog, workload, ctl.model, ctl.config, detail::binding_for(cfg));
      summary["control"] = detail::control_summary(control, trace);
      ArtifactWriter w(cfg.output_dir, detail::make_manifest(trace, cfg));
      detail::add_trace_artifacts(w, trace, workload);
      w.add_text("control_trace.csv", control_trace_to_csv(control));
      finish(trace, w);
      break;
    }
    case RunMode::kTune: {
      summary["mode"] = "tune";
      const auto& ctl = *cfg.controller;
      const auto& ts = *ctl.tune;
      const auto binding = detail::binding_for(cfg);
      check_binding(cfg.topology, ctl.config, binding);
      auto log = collect_io_log(cfg.topology, cfg.placement, cfg.catalog, workload, binding,
                                ctl.config.sample_interval_s, ts.excitation_levels);
      // Fit around the operating point of the identification run.
      VectorXd u_mean = VectorXd::Zero(log.front().u.size());
      VectorXd y_mean = VectorXd::Zero(log.front().y.size());
      for (const auto& s : log) {
        u_mean += s.u;
        y_mean += s.y;
      }
      u_mean /= static_cast<double>(log.size());
      y_mean /= static_cast<double>(log.size());
      for (auto& s : log) {
        s.u -= u_mean;
        s.y -= y_mean;
      }
      const auto fit = fit_model(log, ts.order, ctl.config.sample_interval_s);
      ControllerConfig deviation = ctl.config;
      deviation.setpoint -= y_mean;
      deviation.u_min -= u_mean;
      deviation.u_max -= u_mean;
      LinearScenario scenario;
      scenario.steps = ts.scenario_steps;
      scenario.u_offset = u_mean;
      if (ts.initial_output_deviation.size() != 0) {
        if (ts.initial_output_deviation.size() != fit.model.outputs()) {
          throw Error(ErrorCode::kDimensionMismatch, "tune: initial_output_deviation has wrong size");
        }
        // Least-norm state that produces the requested output excursion.
        scenario.x0 = fit.model.C.completeOrthogonalDecomposition().solve(ts.initial_output_deviation);
      }
      const auto tuned = tune_gain_grid(fit.model, ts.candidates, deviation, scenario);

      ControllerConfig chosen = ctl.config;
      chosen.Ki = tuned.best_gain;
      auto [trace, control] = run_closed_loop(cfg.topology, cfg.placement, cfg.catalog, workload, fit.model, chosen, binding);

      json candidates = json::array();
      for (const auto& c : tuned.candidates) {
        candidates.push_back({{"spectral_radius", c.spectral_radius},
                              {"stable", c.stable},
                              {"J", c.stable ? json(c.J) : json(nullptr)}});
      }
      json report{{"model", to_json(fit.model)},
                  {"arx_coefficients", matrix_to_json(fit.coefficients)},
                  {"residual_norm", fit.residual_norm},
                  {"u_mean", vector_to_json(u_mean)},
                  {"y_mean", vector_to_json(y_mean)},
                  {"candidates", std::move(candidates)},
                  {"best_index", tuned.best_index},
                  {"best_gain", matrix_to_json(tuned.best_gain)}};
      summary["tune"] = report;
      summary["control"] = detail::control_summary(control, trace);
      ArtifactWriter w(cfg.output_dir, detail::make_manifest(trace, cfg));
      detail::add_trace_artifacts(w, trace, workload);
      w.add_text("control_trace.csv", control_trace_to_csv(control));
      w.add_json("tune_report.json", std::move(report));
      finish(trace, w);
      break;
    }
  }
  return result;
}

inline RunResult run(const fs::path& config_path, const RunOverrides& overrides = {}) {
  return run_loaded(load_run_config(config_path, overrides));
}

// Checks a config without running it.
inline void validate_config(const fs::path& config_path) {
  const auto cfg = load_run_config(config_path);
  if (cfg.controller) {
    check_binding(cfg.topology, cfg.controller->config, detail::binding_for(cfg));
  }
  const auto workload = build_workload(cfg);
  (void)workload;
}

}  // namespace hybridsim
