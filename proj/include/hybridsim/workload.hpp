#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hybridsim/datamodel.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/ids.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/rng.hpp"

namespace hybridsim {

struct PoissonArrivals {
  double rate_per_s = 1.0;
};

struct FixedCountArrivals {
  std::uint64_t n = 0;
};

using ArrivalProcess = std::variant<PoissonArrivals, FixedCountArrivals>;

struct Burst {
  double start_s = 0.0;
  double duration_s = 1.0;
  std::uint64_t extra_queries = 1;
  std::optional<TemplateId> template_id;  // unset: sample from the mix
};

struct WorkloadSpec {
  double horizon_s = 1.0;
  ArrivalProcess arrival = FixedCountArrivals{0};
  std::vector<Burst> bursts;
  std::uint64_t seed = 0;
};

struct QueryInstance {
  std::uint64_t instance_id = 0;
  TemplateId template_id;
  ClientClass client_class;
  double arrival_s = 0.0;

  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

inline void validate(const WorkloadSpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kValidationError, msg); };
  if (!(spec.horizon_s > 0.0)) fail("workload: horizon_s must be positive");
  if (const auto* p = std::get_if<PoissonArrivals>(&spec.arrival)) {
    if (!(p->rate_per_s > 0.0)) fail("workload: rate_per_s must be positive");
  }
  for (const auto& b : spec.bursts) {
    if (!(b.duration_s > 0.0)) fail("workload: burst duration_s must be positive");
    if (b.extra_queries < 1) fail("workload: burst extra_queries must be at least 1");
    if (b.start_s < 0.0 || b.start_s + b.duration_s > spec.horizon_s) {
      fail("workload: burst window must lie within [0, horizon_s]");
    }
  }
}

inline WorkloadSpec workload_spec_from_json(const json& doc) {
  WorkloadSpec spec;
  spec.horizon_s = require<double>(doc, "horizon_s", "workload");
  const auto arrival = require<json>(doc, "arrival", "workload");
  const auto type = require<std::string>(arrival, "type", "workload.arrival");
  if (type == "poisson") {
    spec.arrival = PoissonArrivals{require<double>(arrival, "rate_per_s", "workload.arrival")};
  } else if (type == "fixed_count") {
    const auto n = require<std::int64_t>(arrival, "n", "workload.arrival");
    if (n < 0) throw Error(ErrorCode::kValidationError, "workload: n must be nonnegative");
    spec.arrival = FixedCountArrivals{static_cast<std::uint64_t>(n)};
  } else {
    throw Error(ErrorCode::kValidationError, "workload: unknown arrival type '" + type + "'");
  }
  const bool bursts_enabled = optional_field<bool>(doc, "bursts_enabled", true, "workload");
  if (bursts_enabled && doc.contains("bursts")) {
    for (const auto& jb : doc.at("bursts")) {
      Burst b;
      b.start_s = require<double>(jb, "start_s", "burst");
      b.duration_s = require<double>(jb, "duration_s", "burst");
      const auto extra = require<std::int64_t>(jb, "extra_queries", "burst");
      if (extra < 1) throw Error(ErrorCode::kValidationError, "workload: burst extra_queries must be at least 1");
      b.extra_queries = static_cast<std::uint64_t>(extra);
      if (jb.contains("template_id") && !jb.at("template_id").is_null()) {
        b.template_id = require<TemplateId>(jb, "template_id", "burst");
      }
      spec.bursts.push_back(std::move(b));
    }
  }
  spec.seed = optional_field<std::uint64_t>(doc, "seed", 0, "workload");
  validate(spec);
  return spec;
}

// Frequency-weighted template sampler; templates are taken in id order.
class TemplateMix {
 public:
  explicit TemplateMix(const Catalog& catalog) {
    if (catalog.templates().empty()) {
      throw Error(ErrorCode::kEmptyCatalog, "catalog has no query templates");
    }
    double acc = 0.0;
    for (const auto& t : catalog.templates()) {
      acc += t.frequency_weight;
      ids_.push_back(t.template_id);
      cumulative_.push_back(acc);
    }
  }

  const TemplateId& sample(Rng& rng) const {
    if (ids_.size() == 1) return ids_.front();
    const double pick = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick);
    if (it == cumulative_.end()) --it;
    return ids_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<TemplateId> ids_;
  std::vector<double> cumulative_;
};

inline const ClientClass& sample_client(const std::vector<ClientClass>& classes, Rng& rng) {
  if (classes.empty()) throw Error(ErrorCode::kValidationError, "workload: no client classes");
  return classes[rng.below(classes.size())];
}

// Stable by arrival time, then renumbered so ids follow arrival order.
inline void renumber_by_arrival(std::vector<QueryInstance>& instances) {
  std::stable_sort(instances.begin(), instances.end(),
                   [](const QueryInstance& a, const QueryInstance& b) { return a.arrival_s < b.arrival_s; });
  for (std::size_t i = 0; i < instances.size(); ++i) instances[i].instance_id = i;
}

// Adds each burst's extra queries, uniform over its window, and re-sorts.
inline std::vector<QueryInstance> merge_bursts(std::vector<QueryInstance> base,
                                               const std::vector<Burst>& bursts,
                                               const TemplateMix& mix,
                                               const std::vector<ClientClass>& classes, Rng& rng) {
  if (bursts.empty()) return base;
  for (const auto& b : bursts) {
    for (std::uint64_t i = 0; i < b.extra_queries; ++i) {
      QueryInstance q;
      q.arrival_s = rng.uniform_closed(b.start_s, b.start_s + b.duration_s);
      q.template_id = b.template_id ? *b.template_id : mix.sample(rng);
      q.client_class = sample_client(classes, rng);
      base.push_back(std::move(q));
    }
  }
  renumber_by_arrival(base);
  return base;
}

inline std::vector<QueryInstance> generate_workload(const WorkloadSpec& spec, const Catalog& catalog,
                                                    const std::vector<ClientClass>& client_classes) {
  validate(spec);
  const TemplateMix mix(catalog);
  for (const auto& b : spec.bursts) {
    if (b.template_id && !catalog.has_template(*b.template_id)) {
      throw Error(ErrorCode::kValidationError,
                  "workload: burst references unknown template '" + b.template_id->str() + "'");
    }
  }
  Rng arrivals(spec.seed, Stream::kArrivals);
  Rng templates(spec.seed, Stream::kTemplates);
  Rng clients(spec.seed, Stream::kClients);
  Rng bursts(spec.seed, Stream::kBursts);

  std::vector<double> times;
  if (const auto* fixed = std::get_if<FixedCountArrivals>(&spec.arrival)) {
    times.reserve(fixed->n);
    for (std::uint64_t i = 0; i < fixed->n; ++i) times.push_back(arrivals.uniform_closed(0.0, spec.horizon_s));
    std::sort(times.begin(), times.end());
  } else {
    const double rate = std::get<PoissonArrivals>(spec.arrival).rate_per_s;
    double t = arrivals.exponential(rate);
    while (t <= spec.horizon_s) {
      times.push_back(t);
      t += arrivals.exponential(rate);
    }
  }

  std::vector<QueryInstance> base;
  base.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    base.push_back({i, mix.sample(templates), sample_client(client_classes, clients), times[i]});
  }
  return merge_bursts(std::move(base), spec.bursts, mix, client_classes, bursts);
}

inline constexpr std::string_view kWorkloadCsvHeader = "instance_id,template_id,client_class,arrival_s";

inline std::string workload_to_csv(const std::vector<QueryInstance>& instances) {
  std::string out(kWorkloadCsvHeader);
  out += '\n';
  for (const auto& q : instances) {
    out += std::to_string(q.instance_id);
    out += ',';
    out += q.template_id.str();
    out += ',';
    out += q.client_class.str();
    out += ',';
    out += format_double(q.arrival_s);
    out += '\n';
  }
  return out;
}

inline std::vector<QueryInstance> workload_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "workload csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kWorkloadCsvHeader) throw Error(ErrorCode::kParseError, "workload csv: unexpected header");
  std::vector<QueryInstance> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 4) throw Error(ErrorCode::kParseError, "workload csv: expected 4 columns");
    QueryInstance q;
    try {
      q.instance_id = std::stoull(cols[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, "workload csv: bad instance_id '" + cols[0] + "'");
    }
    q.template_id = TemplateId(cols[1]);
    q.client_class = ClientClass(cols[2]);
    q.arrival_s = parse_double(cols[3]);
    if (!out.empty() && (q.instance_id <= out.back().instance_id || q.arrival_s < out.back().arrival_s)) {
      throw Error(ErrorCode::kValidationError, "workload csv: rows must be sorted by arrival and id");
    }
    out.push_back(std::move(q));
  }
  return out;
}

inline json to_json(const std::vector<QueryInstance>& instances) {
  json arr = json::array();
  for (const auto& q : instances) {
    arr.push_back({q.instance_id, q.template_id.str(), q.client_class.str(), q.arrival_s});
  }
  return arr;
}

}  // namespace hybridsim
