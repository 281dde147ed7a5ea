#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "hybridsim/analysis.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/io.hpp"

namespace hybridsim {

struct DurationRow {
  TemplateId template_id;
  TemplateStats stats;
};

// Per-template average query duration, slowest template first.
inline std::vector<DurationRow> emit_fig2_table(const Trace& trace) {
  std::vector<DurationRow> rows;
  for (const auto& [id, s] : per_template_stats(trace)) rows.push_back({id, s});
  std::stable_sort(rows.begin(), rows.end(), [](const DurationRow& a, const DurationRow& b) {
    return a.stats.mean_latency_s > b.stats.mean_latency_s;
  });
  return rows;
}

inline std::string duration_table_csv(const std::vector<DurationRow>& rows) {
  std::string out = "template_id,count,mean_latency_s,p95_latency_s,max_latency_s\n";
  for (const auto& r : rows) {
    out += r.template_id.str() + ',' + std::to_string(r.stats.count) + ',' + format_double(r.stats.mean_latency_s) +
           ',' + format_double(r.stats.p95_latency_s) + ',' + format_double(r.stats.max_latency_s) + '\n';
  }
  return out;
}

inline std::string duration_table_text(const std::vector<DurationRow>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %14s %14s %14s\n", "template", "count", "mean_s", "p95_s", "max_s");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %8zu %14.3f %14.3f %14.3f\n", r.template_id.str().c_str(),
                  r.stats.count, r.stats.mean_latency_s, r.stats.p95_latency_s, r.stats.max_latency_s);
    out += line;
  }
  return out;
}

}  // namespace hybridsim
