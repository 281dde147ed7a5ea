#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "hybridsim/datamodel.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/rng.hpp"
#include "hybridsim/topology.hpp"
#include "hybridsim/workload.hpp"

namespace hybridsim {

struct CapacityChange {
  double time_s = 0.0;
  NodeId node;
  int vm_count = 1;
  friend bool operator==(const CapacityChange&, const CapacityChange&) = default;
};

// One per-node slice of a query as it went through the node's queue.
struct ItemRecord {
  NodeId node;
  RouteId route;
  double cpu_work = 0.0;
  std::uint64_t bytes = 0;
  double start_service_s = 0.0;
  double end_service_s = 0.0;
  double transfer_s = 0.0;

  double finish_s() const { return end_service_s + transfer_s; }
};

struct QueryRecord {
  std::uint64_t instance_id = 0;
  TemplateId template_id;
  ClientClass client_class;
  double arrival_s = 0.0;
  double completion_s = 0.0;
  double latency_s = 0.0;
  // Breakdown of the item that finished last; sums to latency_s.
  double queue_wait_s = 0.0;
  double service_s = 0.0;
  double network_s = 0.0;
  std::vector<ItemRecord> items;  // node order
};

struct RunManifest {
  std::uint64_t seed = 0;
  std::string rng_algorithm{kRngAlgorithm};
  std::map<std::string, std::string> digests;
  std::vector<CapacityChange> capacity_timeline;
  std::string created_at;  // the only field allowed to differ between identical runs
};

struct Trace {
  std::vector<QueryRecord> records;  // arrival order
  RunManifest manifest;
};

// What the controller sees at each sampling instant.
struct IntervalObservation {
  std::uint64_t index = 0;  // 1-based tick number
  double start_s = 0.0;
  double end_s = 0.0;
  std::size_t completions = 0;
  double latency_sum_s = 0.0;
  double mean_in_flight = 0.0;  // time average over the interval
  std::size_t in_flight_now = 0;

  double mean_latency_s() const {
    return completions == 0 ? std::numeric_limits<double>::quiet_NaN()
                            : latency_sum_s / static_cast<double>(completions);
  }
};

using TickHandler = std::function<std::vector<CapacityChange>(const IntervalObservation&)>;

struct SimulationOptions {
  std::uint64_t seed = 0;
  std::vector<CapacityChange> capacity_schedule;
  double tick_interval_s = 0.0;  // 0 disables ticks
  TickHandler on_tick;
};

namespace detail {

enum class EventKind : int { kQueryDone = 0, kServiceDone = 1, kTick = 2, kCapacity = 3, kArrival = 4 };

struct Event {
  double time;
  EventKind kind;
  std::uint64_t key;  // instance id, tick number or schedule index
  std::uint64_t seq;  // insertion counter, last-resort tie-break
  std::size_t a = 0;  // query index / node index
  std::size_t b = 0;  // item index / capacity value

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return kind > o.kind;
    if (key != o.key) return key > o.key;
    return seq > o.seq;
  }
};

class Simulator {
 public:
  Simulator(const Topology& topology, const Placement& placement, const Catalog& catalog,
            const std::vector<QueryInstance>& workload, const SimulationOptions& options)
      : topology_(topology),
        placement_(placement),
        catalog_(catalog),
        workload_(workload),
        options_(options),
        routes_rng_(options.seed, Stream::kRoutes) {}

  Trace run() {
    require_valid_placement(placement_, catalog_, topology_);
    check_workload();

    const auto& nodes = topology_.nodes();
    node_states_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      node_states_[i].capacity = nodes[i].vm_count;
      node_index_[nodes[i].node_id] = i;
      trace_.manifest.capacity_timeline.push_back({0.0, nodes[i].node_id, nodes[i].vm_count});
    }

    for (std::size_t i = 0; i < options_.capacity_schedule.size(); ++i) {
      const auto& c = options_.capacity_schedule[i];
      const auto n = checked_node(c.node, c.vm_count);
      if (!(c.time_s >= 0.0)) {
        throw Error(ErrorCode::kValidationError, "capacity schedule: time must be nonnegative");
      }
      push(c.time_s, EventKind::kCapacity, i, n, static_cast<std::size_t>(c.vm_count));
    }

    queries_.resize(workload_.size());
    trace_.records.resize(workload_.size());
    for (std::size_t i = 0; i < workload_.size(); ++i) {
      const auto& q = workload_[i];
      push(q.arrival_s, EventKind::kArrival, q.instance_id, i, 0);
    }
    if (options_.tick_interval_s > 0.0 && options_.on_tick && !events_.empty()) {
      push(options_.tick_interval_s, EventKind::kTick, 1, 0, 0);
    }

    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      advance_clock(e.time);
      switch (e.kind) {
        case EventKind::kArrival: on_arrival(e); break;
        case EventKind::kServiceDone: on_service_done(e); break;
        case EventKind::kQueryDone: on_query_done(e); break;
        case EventKind::kCapacity: set_capacity(e.a, static_cast<int>(e.b), e.time); break;
        case EventKind::kTick: on_tick(e); break;
      }
    }
    return std::move(trace_);
  }

 private:
  struct NodeState {
    int capacity = 1;
    int busy = 0;
    std::deque<std::pair<std::size_t, std::size_t>> fifo;  // (query index, item index)
  };

  struct QueryState {
    std::size_t pending = 0;
  };

  void push(double time, EventKind kind, std::uint64_t key, std::size_t a, std::size_t b) {
    events_.push(Event{time, kind, key, seq_++, a, b});
  }

  std::size_t checked_node(const NodeId& id, int vm_count) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) {
      throw Error(ErrorCode::kValidationError, "capacity change for unknown node '" + id.str() + "'");
    }
    const auto& spec = topology_.nodes()[it->second];
    if (vm_count < spec.vm_min || vm_count > spec.vm_max) {
      throw Error(ErrorCode::kCapacityOutOfBounds,
                  "node '" + id.str() + "': capacity " + std::to_string(vm_count) + " outside [" +
                      std::to_string(spec.vm_min) + ", " + std::to_string(spec.vm_max) + "]");
    }
    return it->second;
  }

  void check_workload() const {
    for (std::size_t i = 0; i < workload_.size(); ++i) {
      const auto& q = workload_[i];
      if (!catalog_.has_template(q.template_id)) {
        throw Error(ErrorCode::kValidationError, "workload references unknown template '" +
                                                     q.template_id.str() + "'");
      }
      if (!std::binary_search(topology_.client_classes().begin(), topology_.client_classes().end(),
                              q.client_class)) {
        throw Error(ErrorCode::kNoRoute, "workload references unknown client_class '" +
                                             q.client_class.str() + "'");
      }
      if (!(q.arrival_s >= 0.0)) throw Error(ErrorCode::kValidationError, "negative arrival time");
      if (i > 0 && (q.arrival_s < workload_[i - 1].arrival_s ||
                    q.instance_id <= workload_[i - 1].instance_id)) {
        throw Error(ErrorCode::kValidationError, "workload must be sorted by arrival with increasing ids");
      }
    }
  }

  void advance_clock(double t) {
    in_flight_area_ += static_cast<double>(in_flight_) * (t - last_change_s_);
    last_change_s_ = t;
  }

  void on_arrival(const Event& e) {
    const auto qi = e.a;
    const auto& q = workload_[qi];
    const auto& tmpl = catalog_.query_template(q.template_id);
    auto& rec = trace_.records[qi];
    rec.instance_id = q.instance_id;
    rec.template_id = q.template_id;
    rec.client_class = q.client_class;
    rec.arrival_s = q.arrival_s;
    // Routes are drawn at arrival in node order, so the draw sequence does not
    // depend on queueing or capacity decisions.
    for (const auto& [node, share] : query_footprint(tmpl, placement_)) {
      const auto& route = sample_route(topology_, q.client_class, node, routes_rng_);
      ItemRecord item;
      item.node = node;
      item.route = route.route_id;
      item.cpu_work = share.cpu_work;
      item.bytes = share.bytes_out;
      item.transfer_s = transfer_time(share.bytes_out, route, topology_);
      rec.items.push_back(std::move(item));
    }
    queries_[qi].pending = rec.items.size();
    ++in_flight_;
    for (std::size_t ii = 0; ii < rec.items.size(); ++ii) {
      const auto n = node_index_.at(rec.items[ii].node);
      node_states_[n].fifo.emplace_back(qi, ii);
      try_start(n, e.time);
    }
  }

  void try_start(std::size_t n, double now) {
    auto& st = node_states_[n];
    const double rate = topology_.nodes()[n].service_rate;
    while (st.busy < st.capacity && !st.fifo.empty()) {
      const auto [qi, ii] = st.fifo.front();
      st.fifo.pop_front();
      ++st.busy;
      auto& item = trace_.records[qi].items[ii];
      item.start_service_s = now;
      item.end_service_s = now + item.cpu_work / rate;
      push(item.end_service_s, EventKind::kServiceDone, workload_[qi].instance_id, qi, ii);
    }
  }

  void on_service_done(const Event& e) {
    const auto qi = e.a;
    auto& rec = trace_.records[qi];
    const auto n = node_index_.at(rec.items[e.b].node);
    --node_states_[n].busy;
    if (--queries_[qi].pending == 0) {
      const ItemRecord* critical = &rec.items.front();
      for (const auto& item : rec.items) {
        if (item.finish_s() > critical->finish_s()) critical = &item;
      }
      rec.completion_s = critical->finish_s();
      rec.latency_s = rec.completion_s - rec.arrival_s;
      rec.queue_wait_s = critical->start_service_s - rec.arrival_s;
      rec.service_s = critical->end_service_s - critical->start_service_s;
      rec.network_s = critical->transfer_s;
      push(rec.completion_s, EventKind::kQueryDone, rec.instance_id, qi, 0);
    }
    try_start(n, e.time);
  }

  void on_query_done(const Event& e) {
    --in_flight_;
    ++interval_.completions;
    interval_.latency_sum_s += trace_.records[e.a].latency_s;
  }

  void set_capacity(std::size_t n, int vm_count, double now) {
    auto& st = node_states_[n];
    st.capacity = vm_count;
    trace_.manifest.capacity_timeline.push_back({now, topology_.nodes()[n].node_id, vm_count});
    // In-service items finish on their server; only new starts see the change.
    try_start(n, now);
  }

  void on_tick(const Event& e) {
    interval_.index = e.key;
    interval_.start_s = e.time - options_.tick_interval_s;
    interval_.end_s = e.time;
    interval_.mean_in_flight = (in_flight_area_ - area_at_last_tick_) / options_.tick_interval_s;
    interval_.in_flight_now = in_flight_;
    area_at_last_tick_ = in_flight_area_;

    for (const auto& change : options_.on_tick(interval_)) {
      const auto n = checked_node(change.node, change.vm_count);
      if (node_states_[n].capacity != change.vm_count) set_capacity(n, change.vm_count, e.time);
    }
    interval_ = IntervalObservation{};
    if (!events_.empty()) push(e.time + options_.tick_interval_s, EventKind::kTick, e.key + 1, 0, 0);
  }

  const Topology& topology_;
  const Placement& placement_;
  const Catalog& catalog_;
  const std::vector<QueryInstance>& workload_;
  const SimulationOptions& options_;
  Rng routes_rng_;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  std::vector<NodeState> node_states_;
  std::map<NodeId, std::size_t> node_index_;
  std::vector<QueryState> queries_;
  Trace trace_;

  std::size_t in_flight_ = 0;
  double in_flight_area_ = 0.0;
  double area_at_last_tick_ = 0.0;
  double last_change_s_ = 0.0;
  IntervalObservation interval_;
};

}  // namespace detail

inline void fill_input_digests(RunManifest& manifest, const Topology& topology, const Catalog& catalog,
                               const Placement& placement, const std::vector<QueryInstance>& workload) {
  manifest.digests["topology"] = json_digest(to_json(topology));
  manifest.digests["catalog"] = json_digest(to_json(catalog));
  manifest.digests["placement"] = json_digest(to_json(placement));
  manifest.digests["workload"] = json_digest(to_json(workload));
}

// Replays `workload` through per-node FIFO queues with vm_count parallel
// servers. Each query fans out to the nodes holding its fragments; an item is
// served for cpu_share / service_rate seconds and then its result is shipped
// over a sampled route. The query completes when its last item arrives.
inline Trace simulate(const Topology& topology, const Placement& placement, const Catalog& catalog,
                      const std::vector<QueryInstance>& workload, const SimulationOptions& options = {}) {
  detail::Simulator sim(topology, placement, catalog, workload, options);
  Trace trace = sim.run();
  trace.manifest.seed = options.seed;
  fill_input_digests(trace.manifest, topology, catalog, placement, workload);
  return trace;
}

inline constexpr std::string_view kTraceCsvHeader =
    "instance_id,template_id,arrival_s,completion_s,latency_s,queue_wait_s,service_s,network_s";

inline std::string trace_to_csv(const Trace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.instance_id);
    out += ',';
    out += r.template_id.str();
    for (double v : {r.arrival_s, r.completion_s, r.latency_s, r.queue_wait_s, r.service_s, r.network_s}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline json to_json(const RunManifest& m) {
  json timeline = json::array();
  for (const auto& c : m.capacity_timeline) {
    timeline.push_back({{"t_s", c.time_s}, {"node", c.node}, {"vm_count", c.vm_count}});
  }
  return {{"seed", m.seed},
          {"rng_algorithm", m.rng_algorithm},
          {"digests", m.digests},
          {"capacity_timeline", std::move(timeline)},
          {"created_at", m.created_at}};
}

// Digest of the manifest without its timestamp; artifacts cite it.
inline std::string manifest_digest(const RunManifest& m) {
  json doc = to_json(m);
  doc.erase("created_at");
  return json_digest(doc);
}

// Checks the per-record invariants a finished trace must satisfy.
inline void check_trace_invariants(const Trace& trace, std::size_t submitted) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvariantViolation, msg); };
  if (trace.records.size() != submitted) fail("trace record count differs from submitted queries");
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (i > 0 && r.arrival_s < trace.records[i - 1].arrival_s) fail("trace not sorted by arrival");
    if (r.completion_s < r.arrival_s) fail("completion before arrival");
    if (r.queue_wait_s < 0.0 || r.service_s < 0.0 || r.network_s < 0.0) fail("negative latency component");
    if (std::abs(r.queue_wait_s + r.service_s + r.network_s - r.latency_s) > 1e-9) {
      fail("latency breakdown does not sum to latency");
    }
  }
}

}  // namespace hybridsim
