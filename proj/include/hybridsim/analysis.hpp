#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hybridsim/engine.hpp"
#include "hybridsim/error.hpp"

namespace hybridsim {

struct TemplateStats {
  std::size_t count = 0;
  double mean_latency_s = 0.0;
  double p95_latency_s = 0.0;  // nearest rank
  double max_latency_s = 0.0;
  double total_latency_s = 0.0;
};

inline std::map<TemplateId, TemplateStats> per_template_stats(const Trace& trace) {
  std::map<TemplateId, std::vector<double>> latencies;
  for (const auto& r : trace.records) latencies[r.template_id].push_back(r.latency_s);
  std::map<TemplateId, TemplateStats> out;
  for (auto& [id, values] : latencies) {
    std::sort(values.begin(), values.end());
    TemplateStats s;
    s.count = values.size();
    for (double v : values) s.total_latency_s += v;
    s.mean_latency_s = s.total_latency_s / static_cast<double>(s.count);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.count)));
    s.p95_latency_s = values[std::max<std::size_t>(rank, 1) - 1];
    s.max_latency_s = values.back();
    out.emplace(id, s);
  }
  return out;
}

struct OverloadInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t peak_concurrency = 0;
  friend bool operator==(const OverloadInterval&, const OverloadInterval&) = default;
};

// Splits time into windows [k*w, (k+1)*w) and computes the peak number of
// in-flight queries (arrival <= t < completion) inside each. Consecutive
// windows whose peak reaches the threshold merge into one interval.
inline std::vector<OverloadInterval> detect_overload(const Trace& trace, double window_s,
                                                     std::size_t concurrency_threshold) {
  if (!(window_s > 0.0)) throw Error(ErrorCode::kValidationError, "window_s must be positive");
  std::vector<OverloadInterval> out;
  if (trace.records.empty()) return out;

  // Completions sort before arrivals at equal times.
  std::vector<std::pair<double, int>> events;
  events.reserve(trace.records.size() * 2);
  double last = 0.0;
  for (const auto& r : trace.records) {
    events.emplace_back(r.arrival_s, +1);
    events.emplace_back(r.completion_s, -1);
    last = std::max(last, r.completion_s);
  }
  std::sort(events.begin(), events.end());

  const auto windows = static_cast<std::size_t>(std::floor(last / window_s)) + 1;
  if (windows > 50'000'000) throw Error(ErrorCode::kValidationError, "window_s too small for trace span");

  std::size_t idx = 0;
  long long current = 0;
  std::optional<OverloadInterval> open;
  for (std::size_t k = 0; k < windows; ++k) {
    const double lo = static_cast<double>(k) * window_s;
    const double hi = static_cast<double>(k + 1) * window_s;
    while (idx < events.size() && events[idx].first <= lo) current += events[idx++].second;
    long long peak = current;
    while (idx < events.size() && events[idx].first < hi) {
      current += events[idx++].second;
      peak = std::max(peak, current);
    }
    if (peak >= static_cast<long long>(concurrency_threshold)) {
      if (!open) open = OverloadInterval{lo, hi, 0};
      open->end_s = hi;
      open->peak_concurrency = std::max(open->peak_concurrency, static_cast<std::size_t>(peak));
    } else if (open) {
      out.push_back(*open);
      open.reset();
    }
  }
  if (open) out.push_back(*open);
  return out;
}

// Top-k templates by total latency contribution (count x mean), ties by id.
inline std::vector<TemplateId> rank_demanding_templates(const Trace& trace, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kValidationError, "k must be at least 1");
  const auto stats = per_template_stats(trace);
  std::vector<std::pair<double, TemplateId>> totals;
  for (const auto& [id, s] : stats) totals.emplace_back(s.total_latency_s, id);
  std::stable_sort(totals.begin(), totals.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<TemplateId> out;
  for (std::size_t i = 0; i < totals.size() && i < k; ++i) out.push_back(totals[i].second);
  return out;
}

// Observed template frequencies, used as weights in measured mode.
inline std::map<TemplateId, double> observed_weights(const Trace& trace) {
  std::map<TemplateId, double> out;
  for (const auto& r : trace.records) out[r.template_id] += 1.0;
  return out;
}

inline double mean_latency(const Trace& trace) {
  if (trace.records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : trace.records) sum += r.latency_s;
  return sum / static_cast<double>(trace.records.size());
}

// Mean latency of queries arriving inside / outside the given intervals.
inline std::pair<double, double> latency_inside_outside(const Trace& trace,
                                                        const std::vector<OverloadInterval>& intervals) {
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& r : trace.records) {
    const bool inside = std::any_of(intervals.begin(), intervals.end(), [&](const OverloadInterval& iv) {
      return r.arrival_s >= iv.start_s && r.arrival_s < iv.end_s;
    });
    if (inside) {
      in_sum += r.latency_s;
      ++in_n;
    } else {
      out_sum += r.latency_s;
      ++out_n;
    }
  }
  return {in_n ? in_sum / static_cast<double>(in_n) : 0.0, out_n ? out_sum / static_cast<double>(out_n) : 0.0};
}

}  // namespace hybridsim
