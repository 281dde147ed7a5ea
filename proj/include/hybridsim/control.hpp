#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hybridsim/datamodel.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/topology.hpp"
#include "hybridsim/workload.hpp"

namespace hybridsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// x[k+1] = A x[k] + B u[k],  y[k] = C x[k]
struct LinearModel {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
  VectorXd x;
  double sample_interval_s = 1.0;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  void validate() const {
    const auto n = A.rows();
    if (n < 1 || A.cols() != n || B.rows() != n || C.cols() != n || x.size() != n || B.cols() < 1 ||
        C.rows() < 1) {
      throw Error(ErrorCode::kDimensionMismatch, "linear model: inconsistent matrix dimensions");
    }
    if (!(sample_interval_s > 0.0)) {
      throw Error(ErrorCode::kValidationError, "linear model: sample_interval_s must be positive");
    }
  }
};

struct IoSample {
  VectorXd u;
  VectorXd y;
};

struct ArxFit {
  LinearModel model;
  // p x n(p+m): [A_1 .. A_n | B_1 .. B_n] with
  // y[k+1] = sum_i A_i y[k+1-i] + sum_i B_i u[k+1-i].
  MatrixXd coefficients;
  double residual_norm = 0.0;
  int order = 1;
};

// Least-squares ARX identification. Single-input single-output fits come back
// in controllable canonical form; multivariable fits use the shift-register
// realization with state [y[k] .. y[k-n+1], u[k-1] .. u[k-n+1]].
inline ArxFit fit_model(const std::vector<IoSample>& io_log, int order, double sample_interval_s = 1.0) {
  if (order < 1) throw Error(ErrorCode::kValidationError, "fit_model: order must be at least 1");
  const auto n = static_cast<Eigen::Index>(order);
  if (io_log.size() < static_cast<std::size_t>(10 * (order + 1))) {
    throw Error(ErrorCode::kValidationError, "fit_model: need at least 10*(order+1) samples");
  }
  const auto m = io_log.front().u.size();
  const auto p = io_log.front().y.size();
  if (m < 1 || p < 1) throw Error(ErrorCode::kDimensionMismatch, "fit_model: empty u or y");
  for (const auto& s : io_log) {
    if (s.u.size() != m || s.y.size() != p) {
      throw Error(ErrorCode::kDimensionMismatch, "fit_model: inconsistent sample dimensions");
    }
  }

  const auto rows = static_cast<Eigen::Index>(io_log.size()) - n;
  const auto cols = n * (p + m);
  MatrixXd phi(rows, cols);
  MatrixXd target(rows, p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto k = r + n - 1;  // regress y[k+1] on lags ending at k
    for (Eigen::Index i = 0; i < n; ++i) {
      phi.block(r, i * p, 1, p) = io_log[static_cast<std::size_t>(k - i)].y.transpose();
      phi.block(r, n * p + i * m, 1, m) = io_log[static_cast<std::size_t>(k - i)].u.transpose();
    }
    target.row(r) = io_log[static_cast<std::size_t>(k + 1)].y.transpose();
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    throw Error(ErrorCode::kRankDeficient,
                "fit_model: regression is rank deficient (insufficient excitation)");
  }
  const MatrixXd theta = qr.solve(target);  // cols x p

  ArxFit fit;
  fit.order = order;
  fit.coefficients = theta.transpose();
  fit.residual_norm = (phi * theta - target).norm();

  LinearModel& model = fit.model;
  model.sample_interval_s = sample_interval_s;
  if (p == 1 && m == 1) {
    model.A = MatrixXd::Zero(n, n);
    model.A.row(0) = fit.coefficients.block(0, 0, 1, n);
    if (n > 1) model.A.block(1, 0, n - 1, n - 1) = MatrixXd::Identity(n - 1, n - 1);
    model.B = MatrixXd::Zero(n, 1);
    model.B(0, 0) = 1.0;
    model.C = fit.coefficients.block(0, n, 1, n);
  } else {
    const auto ns = n * p + (n - 1) * m;
    model.A = MatrixXd::Zero(ns, ns);
    model.B = MatrixXd::Zero(ns, m);
    model.C = MatrixXd::Zero(p, ns);
    model.A.block(0, 0, p, n * p) = fit.coefficients.block(0, 0, p, n * p);
    if (n > 1) {
      model.A.block(0, n * p, p, (n - 1) * m) = fit.coefficients.block(0, n * p + m, p, (n - 1) * m);
      model.A.block(p, 0, (n - 1) * p, (n - 1) * p) = MatrixXd::Identity((n - 1) * p, (n - 1) * p);
      if (n > 2) {
        model.A.block(n * p + m, n * p, (n - 2) * m, (n - 2) * m) = MatrixXd::Identity((n - 2) * m, (n - 2) * m);
      }
      model.B.block(n * p, 0, m, m) = MatrixXd::Identity(m, m);
    }
    model.B.block(0, 0, p, m) = fit.coefficients.block(0, n * p, p, m);
    model.C.block(0, 0, p, p) = MatrixXd::Identity(p, p);
  }
  model.x = VectorXd::Zero(model.A.rows());
  return fit;
}

struct ControllerConfig {
  MatrixXd Ki;       // m x p integral gain
  VectorXd setpoint; // p
  VectorXd u_min;    // m
  VectorXd u_max;    // m
  double sample_interval_s = 1.0;
  double lambda = 0.0;  // resource weight in J

  Eigen::Index inputs() const { return Ki.rows(); }
  Eigen::Index outputs() const { return Ki.cols(); }

  void validate() const {
    const auto m = Ki.rows();
    const auto p = Ki.cols();
    if (m < 1 || p < 1 || setpoint.size() != p || u_min.size() != m || u_max.size() != m) {
      throw Error(ErrorCode::kDimensionMismatch, "controller: inconsistent dimensions");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(u_min(i) <= u_max(i))) throw Error(ErrorCode::kValidationError, "controller: u_min must not exceed u_max");
    }
    if (!(sample_interval_s > 0.0)) {
      throw Error(ErrorCode::kValidationError, "controller: sample_interval_s must be positive");
    }
    if (!(lambda >= 0.0)) throw Error(ErrorCode::kValidationError, "controller: lambda must be nonnegative");
  }
};

struct ControllerStep {
  VectorXd u;
  VectorXd state;
  std::vector<bool> saturated;
};

// Integral law v = z + Ki (r - y), u = clamp(v). A clamped component's
// integrator stops at the bound it hit.
inline ControllerStep step_controller(const ControllerConfig& config, const VectorXd& integrator_state,
                                      const VectorXd& y) {
  if (integrator_state.size() != config.inputs() || y.size() != config.outputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "step_controller: dimension mismatch");
  }
  const VectorXd v = integrator_state + config.Ki * (config.setpoint - y);
  ControllerStep out;
  out.u = v.cwiseMax(config.u_min).cwiseMin(config.u_max);
  out.state = out.u;
  out.saturated.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.saturated[static_cast<std::size_t>(i)] = v(i) < config.u_min(i) || v(i) > config.u_max(i);
  }
  return out;
}

inline void check_compatible(const LinearModel& model, const ControllerConfig& config) {
  model.validate();
  config.validate();
  if (config.inputs() != model.inputs() || config.outputs() != model.outputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "controller gain does not match model inputs/outputs");
  }
}

// Loop matrix of plant plus integrator under the unsaturated law, with the
// controller output applied one sample after the measurement it is based on:
//   [x; z][k+1] = [[A, B], [-Ki C, I]] [x; z][k]
// A zero gain leaves the controller out of the loop, so the plant matrix A is
// returned as is.
inline MatrixXd closed_loop_matrix(const LinearModel& model, const ControllerConfig& config) {
  check_compatible(model, config);
  if (config.Ki.isZero(0.0)) return model.A;
  const auto n = model.states();
  const auto m = model.inputs();
  MatrixXd M = MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = model.A;
  M.topRightCorner(n, m) = model.B;
  M.bottomLeftCorner(m, n) = -config.Ki * model.C;
  M.bottomRightCorner(m, m) = MatrixXd::Identity(m, m);
  return M;
}

inline double spectral_radius(const MatrixXd& M) {
  Eigen::EigenSolver<MatrixXd> solver(M, false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvariantViolation, "eigenvalue computation did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double closed_loop_spectral_radius(const LinearModel& model, const ControllerConfig& config) {
  return spectral_radius(closed_loop_matrix(model, config));
}

inline bool is_stable(double rho) { return rho < 1.0; }

struct ControlStep {
  std::uint64_t k = 0;
  double t_s = 0.0;
  VectorXd y;
  VectorXd u;
  bool saturated = false;
  double J_partial = 0.0;
};

struct ControlTrace {
  std::vector<ControlStep> steps;
  double J = 0.0;
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
};

inline double stage_cost(const ControllerConfig& config, const VectorXd& y, const VectorXd& u_resource) {
  return ((y - config.setpoint).squaredNorm() + config.lambda * u_resource.squaredNorm()) *
         config.sample_interval_s;
}

struct LinearScenario {
  std::size_t steps = 100;
  VectorXd x0;        // empty: model.x
  VectorXd u0;        // initial integrator state; empty: zeros
  VectorXd u_offset;  // added to u in the resource term; empty: zeros
};

// Runs the loop on the linear model itself:
//   y[k] = C x[k];  x[k+1] = A x[k] + B u[k];  u[k+1] = step_controller(u[k], y[k])
inline ControlTrace simulate_linear_loop(const LinearModel& model, const ControllerConfig& config,
                                         const LinearScenario& scenario) {
  check_compatible(model, config);
  const auto m = model.inputs();
  VectorXd x = scenario.x0.size() ? scenario.x0 : model.x;
  VectorXd z = scenario.u0.size() ? scenario.u0 : VectorXd::Zero(m);
  const VectorXd offset = scenario.u_offset.size() ? scenario.u_offset : VectorXd::Zero(m);
  if (x.size() != model.states() || z.size() != m || offset.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "scenario: dimension mismatch");
  }
  VectorXd u = z.cwiseMax(config.u_min).cwiseMin(config.u_max);

  ControlTrace trace;
  trace.spectral_radius = closed_loop_spectral_radius(model, config);
  for (std::size_t k = 0; k < scenario.steps; ++k) {
    const VectorXd y = model.C * x;
    const auto step = step_controller(config, z, y);
    trace.J += stage_cost(config, y, u + offset);
    ControlStep rec;
    rec.k = k;
    rec.t_s = static_cast<double>(k) * config.sample_interval_s;
    rec.y = y;
    rec.u = u;
    rec.saturated = std::find(step.saturated.begin(), step.saturated.end(), true) != step.saturated.end();
    rec.J_partial = trace.J;
    trace.steps.push_back(std::move(rec));
    x = model.A * x + model.B * u;
    z = step.state;
    u = step.u;
  }
  return trace;
}

struct GainEvaluation {
  double spectral_radius = 0.0;
  bool stable = false;
  double J = std::numeric_limits<double>::infinity();
};

struct TuneResult {
  std::size_t best_index = 0;
  MatrixXd best_gain;
  std::vector<GainEvaluation> candidates;
};

// Stability filter first, then the lowest J on the linear model; the earliest
// candidate wins ties.
inline TuneResult tune_gain_grid(const LinearModel& model, const std::vector<MatrixXd>& candidate_gains,
                                 const ControllerConfig& base, const LinearScenario& scenario) {
  if (candidate_gains.empty()) throw Error(ErrorCode::kValidationError, "tune: no candidate gains");
  TuneResult result;
  bool found = false;
  for (std::size_t i = 0; i < candidate_gains.size(); ++i) {
    ControllerConfig cfg = base;
    cfg.Ki = candidate_gains[i];
    GainEvaluation eval;
    eval.spectral_radius = closed_loop_spectral_radius(model, cfg);
    eval.stable = is_stable(eval.spectral_radius);
    if (eval.stable) {
      eval.J = simulate_linear_loop(model, cfg, scenario).J;
      if (!found || eval.J < result.candidates[result.best_index].J) {
        result.best_index = i;
        found = true;
      }
    }
    result.candidates.push_back(eval);
  }
  if (!found) throw Error(ErrorCode::kNoStableCandidate, "tune: no candidate gain gives a stable loop");
  result.best_gain = candidate_gains[result.best_index];
  return result;
}

enum class Measurement { kLatency, kInFlight };

inline Measurement parse_measurement(const std::string& name) {
  if (name == "latency_s" || name == "latency") return Measurement::kLatency;
  if (name == "in_flight") return Measurement::kInFlight;
  throw Error(ErrorCode::kValidationError, "controller: unknown output '" + name + "'");
}

// Which simulator quantities feed y and which nodes u drives.
struct ControlBinding {
  std::vector<NodeId> controlled_nodes;  // one per u component
  std::vector<Measurement> outputs;      // one per y component
  VectorXd u0;                           // initial integrator; empty: current vm_count
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<int> current_capacity(const Topology& topology, const std::vector<NodeId>& nodes) {
  std::vector<int> out;
  for (const auto& n : nodes) out.push_back(topology.node(n).vm_count);
  return out;
}

// Interval measurement with a zero-order hold on latency when nothing finished.
class OutputMeter {
 public:
  OutputMeter(std::vector<Measurement> outputs, VectorXd initial)
      : outputs_(std::move(outputs)), last_(std::move(initial)) {}

  VectorXd measure(const IntervalObservation& obs) {
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      if (outputs_[i] == Measurement::kLatency) {
        if (obs.completions > 0) last_(idx) = obs.mean_latency_s();
      } else {
        last_(idx) = obs.mean_in_flight;
      }
    }
    return last_;
  }

 private:
  std::vector<Measurement> outputs_;
  VectorXd last_;
};

}  // namespace detail

inline void check_binding(const Topology& topology, const ControllerConfig& config, const ControlBinding& binding) {
  config.validate();
  if (static_cast<Eigen::Index>(binding.controlled_nodes.size()) != config.inputs() ||
      static_cast<Eigen::Index>(binding.outputs.size()) != config.outputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "controller dimensions do not match controlled nodes/outputs");
  }
  for (std::size_t i = 0; i < binding.controlled_nodes.size(); ++i) {
    const auto& node = topology.node(binding.controlled_nodes[i]);
    const auto idx = static_cast<Eigen::Index>(i);
    if (config.u_min(idx) < node.vm_min || config.u_max(idx) > node.vm_max) {
      throw Error(ErrorCode::kCapacityOutOfBounds,
                  "controller bounds exceed vm_min/vm_max of node '" + node.node_id.str() + "'");
    }
  }
  if (binding.u0.size() != 0 && binding.u0.size() != config.inputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "controller: u0 has wrong size");
  }
}

// Feedback loop inside the simulation clock: every sample interval the
// controller reads the last interval's outputs and sets the controlled nodes'
// vm_count (rounded to the nearest integer) from then on.
inline std::pair<Trace, ControlTrace> run_closed_loop(const Topology& topology, const Placement& placement,
                                                      const Catalog& catalog,
                                                      const std::vector<QueryInstance>& workload,
                                                      const LinearModel& model, const ControllerConfig& config,
                                                      const ControlBinding& binding) {
  check_binding(topology, config, binding);
  ControlTrace control;
  if (model.A.size() != 0) control.spectral_radius = closed_loop_spectral_radius(model, config);

  const auto m = config.inputs();
  const auto initial = detail::current_capacity(topology, binding.controlled_nodes);
  VectorXd applied(m);
  for (Eigen::Index i = 0; i < m; ++i) applied(i) = initial[static_cast<std::size_t>(i)];
  VectorXd integrator = binding.u0.size() ? binding.u0 : applied;
  detail::OutputMeter meter(binding.outputs, config.setpoint);

  SimulationOptions options;
  options.seed = binding.seed;
  options.tick_interval_s = config.sample_interval_s;
  options.on_tick = [&](const IntervalObservation& obs) {
    const VectorXd y = meter.measure(obs);
    const auto step = step_controller(config, integrator, y);
    integrator = step.state;

    control.J += stage_cost(config, y, applied);
    ControlStep rec;
    rec.k = obs.index;
    rec.t_s = obs.end_s;
    rec.y = y;
    rec.u = applied;
    rec.saturated = std::find(step.saturated.begin(), step.saturated.end(), true) != step.saturated.end();
    rec.J_partial = control.J;
    control.steps.push_back(std::move(rec));

    std::vector<CapacityChange> changes;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& node = topology.node(binding.controlled_nodes[static_cast<std::size_t>(i)]);
      const int vm = std::clamp(static_cast<int>(std::llround(step.u(i))), node.vm_min, node.vm_max);
      applied(i) = vm;
      changes.push_back({obs.end_s, node.node_id, vm});
    }
    return changes;
  };

  Trace trace = simulate(topology, placement, catalog, workload, options);
  return {std::move(trace), std::move(control)};
}

// Open-loop identification run: controlled capacities follow `levels`, each
// held for one sample interval (cycled). Sample k pairs the output measured at
// tick k with the capacity chosen at tick k, which acts on interval k+1.
inline std::vector<IoSample> collect_io_log(const Topology& topology, const Placement& placement,
                                            const Catalog& catalog, const std::vector<QueryInstance>& workload,
                                            const ControlBinding& binding, double sample_interval_s,
                                            const std::vector<std::vector<int>>& levels) {
  if (levels.empty()) throw Error(ErrorCode::kValidationError, "identification: no excitation levels");
  const auto m = static_cast<Eigen::Index>(binding.controlled_nodes.size());
  VectorXd initial_y = VectorXd::Zero(static_cast<Eigen::Index>(binding.outputs.size()));
  detail::OutputMeter meter(binding.outputs, initial_y);
  const auto start = detail::current_capacity(topology, binding.controlled_nodes);
  VectorXd applied(m);
  for (Eigen::Index i = 0; i < m; ++i) applied(i) = start[static_cast<std::size_t>(i)];

  std::vector<IoSample> log;
  std::size_t step = 0;
  SimulationOptions options;
  options.seed = binding.seed;
  options.tick_interval_s = sample_interval_s;
  options.on_tick = [&](const IntervalObservation& obs) {
    const VectorXd y = meter.measure(obs);
    const auto& level = levels[step++ % levels.size()];
    if (static_cast<Eigen::Index>(level.size()) != m) {
      throw Error(ErrorCode::kDimensionMismatch, "identification: level size differs from controlled nodes");
    }
    std::vector<CapacityChange> changes;
    for (Eigen::Index i = 0; i < m; ++i) {
      applied(i) = level[static_cast<std::size_t>(i)];
      changes.push_back({obs.end_s, binding.controlled_nodes[static_cast<std::size_t>(i)],
                         level[static_cast<std::size_t>(i)]});
    }
    log.push_back({applied, y});
    return changes;
  };
  simulate(topology, placement, catalog, workload, options);
  return log;
}

inline constexpr const char* kControlTraceColumnsDoc = "k,t_s,y...,u...,saturated,J_partial";

inline std::string control_trace_to_csv(const ControlTrace& trace) {
  std::string out = "k,t_s";
  const auto p = trace.steps.empty() ? 0 : trace.steps.front().y.size();
  const auto m = trace.steps.empty() ? 0 : trace.steps.front().u.size();
  for (Eigen::Index i = 0; i < p; ++i) out += ",y" + std::to_string(i);
  for (Eigen::Index i = 0; i < m; ++i) out += ",u" + std::to_string(i);
  out += ",saturated,J_partial\n";
  for (const auto& s : trace.steps) {
    out += std::to_string(s.k) + ',' + format_double(s.t_s);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) out += ',' + format_double(s.y(i));
    for (Eigen::Index i = 0; i < s.u.size(); ++i) out += ',' + format_double(s.u(i));
    out += s.saturated ? ",1," : ",0,";
    out += format_double(s.J_partial);
    out += '\n';
  }
  return out;
}

inline MatrixXd matrix_from_json(const json& j, std::string_view what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorCode::kValidationError, std::string(what) + ": expected nested arrays");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return M;
}

inline VectorXd vector_from_json(const json& j, std::string_view what) {
  if (!j.is_array()) throw Error(ErrorCode::kValidationError, std::string(what) + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j.at(i);
    if (e.is_string() && (e == "inf" || e == "-inf")) {
      v(static_cast<Eigen::Index>(i)) = (e == "inf" ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    } else {
      v(static_cast<Eigen::Index>(i)) = e.get<double>();
    }
  }
  return v;
}

inline json matrix_to_json(const MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline LinearModel linear_model_from_json(const json& j) {
  LinearModel model;
  model.A = matrix_from_json(require<json>(j, "A", "model"), "model.A");
  model.B = matrix_from_json(require<json>(j, "B", "model"), "model.B");
  model.C = matrix_from_json(require<json>(j, "C", "model"), "model.C");
  model.x = j.contains("x") ? vector_from_json(j.at("x"), "model.x") : VectorXd::Zero(model.A.rows());
  model.sample_interval_s = optional_field<double>(j, "sample_interval_s", 1.0, "model");
  model.validate();
  return model;
}

inline json to_json(const LinearModel& model) {
  return {{"A", matrix_to_json(model.A)},
          {"B", matrix_to_json(model.B)},
          {"C", matrix_to_json(model.C)},
          {"x", vector_to_json(model.x)},
          {"sample_interval_s", model.sample_interval_s}};
}

inline ControllerConfig controller_config_from_json(const json& j) {
  ControllerConfig cfg;
  cfg.Ki = matrix_from_json(require<json>(j, "Ki", "controller"), "controller.Ki");
  cfg.setpoint = vector_from_json(require<json>(j, "setpoint", "controller"), "controller.setpoint");
  cfg.u_min = vector_from_json(require<json>(j, "u_min", "controller"), "controller.u_min");
  cfg.u_max = vector_from_json(require<json>(j, "u_max", "controller"), "controller.u_max");
  cfg.sample_interval_s = require<double>(j, "sample_interval_s", "controller");
  cfg.lambda = optional_field<double>(j, "lambda", 0.0, "controller");
  cfg.validate();
  return cfg;
}

}  // namespace hybridsim
