#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridsim/error.hpp"
#include "hybridsim/ids.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/rng.hpp"

namespace hybridsim {

enum class Tier { kPrivate, kPublic };

inline std::string_view to_string(Tier tier) noexcept {
  return tier == Tier::kPrivate ? "private" : "public";
}

inline Tier parse_tier(std::string_view text) {
  if (text == "private") return Tier::kPrivate;
  if (text == "public") return Tier::kPublic;
  throw Error(ErrorCode::kValidationError, "unknown tier '" + std::string(text) + "'");
}

struct NodeSpec {
  NodeId node_id;
  Tier tier = Tier::kPrivate;
  int vm_count = 1;
  double service_rate = 1.0;  // CPU-work units per second per VM
  int vm_min = 1;
  int vm_max = 1;
};

struct LinkSpec {
  LinkId link_id;
  double latency_s = 0.0;
  double bandwidth_Bps = 1.0;
};

struct Route {
  RouteId route_id;
  ClientClass client_class;
  NodeId target_node;
  std::vector<LinkId> links;
  double weight = 1.0;
};

// Validated, immutable description of the infrastructure. Construct through
// Topology::create or load_topology; both reject documents that break an
// invariant.
class Topology {
 public:
  static Topology create(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links,
                         std::vector<Route> routes) {
    Topology t;
    t.nodes_ = std::move(nodes);
    t.links_ = std::move(links);
    t.routes_ = std::move(routes);
    t.validate_and_index();
    return t;
  }

  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  const std::vector<LinkSpec>& links() const noexcept { return links_; }
  const std::vector<Route>& routes() const noexcept { return routes_; }

  const NodeSpec& node(const NodeId& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) {
      throw Error(ErrorCode::kValidationError, "unknown node '" + id.str() + "'");
    }
    return nodes_[it->second];
  }
  bool has_node(const NodeId& id) const { return node_index_.contains(id); }

  const LinkSpec& link(const LinkId& id) const {
    auto it = link_index_.find(id);
    if (it == link_index_.end()) {
      throw Error(ErrorCode::kValidationError, "unknown link '" + id.str() + "'");
    }
    return links_[it->second];
  }

  // Sorted, duplicate-free.
  const std::vector<ClientClass>& client_classes() const noexcept { return classes_; }

  // Routes serving (client_class, node), ordered by route_id.
  const std::vector<std::size_t>& route_indices(const ClientClass& cls, const NodeId& node) const {
    static const std::vector<std::size_t> kNone;
    auto it = by_pair_.find({cls, node});
    return it == by_pair_.end() ? kNone : it->second;
  }

  std::vector<NodeId> node_ids() const {
    std::vector<NodeId> ids;
    for (const auto& n : nodes_) ids.push_back(n.node_id);
    return ids;
  }

  // Copy with a node's capacity replaced; bounds still apply.
  Topology with_vm_count(const NodeId& id, int vm_count) const {
    Topology copy = *this;
    auto& n = copy.nodes_[copy.node_index_.at(id)];
    n.vm_count = vm_count;
    copy.validate_and_index();
    return copy;
  }

 private:
  void validate_and_index() {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::kValidationError, msg); };

    std::sort(nodes_.begin(), nodes_.end(),
              [](const NodeSpec& a, const NodeSpec& b) { return a.node_id < b.node_id; });
    std::sort(links_.begin(), links_.end(),
              [](const LinkSpec& a, const LinkSpec& b) { return a.link_id < b.link_id; });
    std::sort(routes_.begin(), routes_.end(),
              [](const Route& a, const Route& b) { return a.route_id < b.route_id; });

    node_index_.clear();
    link_index_.clear();
    by_pair_.clear();
    classes_.clear();

    bool has_private = false;
    bool has_public = false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.node_id.empty()) fail("node_id must be nonempty");
      if (!node_index_.emplace(n.node_id, i).second) fail("duplicate node_id '" + n.node_id.str() + "'");
      if (!(n.service_rate > 0.0)) fail("node '" + n.node_id.str() + "': service_rate must be positive");
      if (n.vm_min < 1) fail("node '" + n.node_id.str() + "': vm_min must be at least 1");
      if (n.vm_count < n.vm_min || n.vm_count > n.vm_max) {
        fail("node '" + n.node_id.str() + "': vm_count must lie in [vm_min, vm_max]");
      }
      has_private |= n.tier == Tier::kPrivate;
      has_public |= n.tier == Tier::kPublic;
    }
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& l = links_[i];
      if (l.link_id.empty()) fail("link_id must be nonempty");
      if (!link_index_.emplace(l.link_id, i).second) fail("duplicate link_id '" + l.link_id.str() + "'");
      if (!(l.latency_s >= 0.0)) fail("link '" + l.link_id.str() + "': latency must be nonnegative");
      if (!(l.bandwidth_Bps > 0.0)) fail("link '" + l.link_id.str() + "': bandwidth must be positive");
    }
    std::set<RouteId> route_ids;
    std::set<ClientClass> classes;
    for (std::size_t i = 0; i < routes_.size(); ++i) {
      const auto& r = routes_[i];
      if (r.route_id.empty()) fail("route_id must be nonempty");
      if (!route_ids.insert(r.route_id).second) fail("duplicate route_id '" + r.route_id.str() + "'");
      if (r.links.empty()) fail("route '" + r.route_id.str() + "': links must be nonempty");
      for (const auto& l : r.links) {
        if (!link_index_.contains(l)) {
          fail("route '" + r.route_id.str() + "': unknown link '" + l.str() + "'");
        }
      }
      if (!node_index_.contains(r.target_node)) {
        fail("route '" + r.route_id.str() + "': unknown target_node '" + r.target_node.str() + "'");
      }
      if (!(r.weight > 0.0)) fail("route '" + r.route_id.str() + "': weight must be positive");
      classes.insert(r.client_class);
      by_pair_[{r.client_class, r.target_node}].push_back(i);
    }
    if (!has_private || !has_public) fail("topology needs at least one private and one public node");
    if (classes.empty()) fail("topology needs at least one route");
    classes_.assign(classes.begin(), classes.end());

    // Any node may host fragments and any client class may issue a query.
    for (const auto& cls : classes_) {
      for (const auto& n : nodes_) {
        if (!by_pair_.contains({cls, n.node_id})) {
          fail("missing route coverage for client_class '" + cls.str() + "' to node '" +
               n.node_id.str() + "'");
        }
      }
    }
  }

  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
  std::vector<Route> routes_;
  std::map<NodeId, std::size_t> node_index_;
  std::map<LinkId, std::size_t> link_index_;
  std::map<std::pair<ClientClass, NodeId>, std::vector<std::size_t>> by_pair_;
  std::vector<ClientClass> classes_;
};

inline Topology topology_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kValidationError, "topology: expected an object");
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<Route> routes;
  for (const auto& n : require<json>(doc, "nodes", "topology")) {
    NodeSpec spec;
    spec.node_id = require<NodeId>(n, "node_id", "node");
    spec.tier = parse_tier(require<std::string>(n, "tier", "node"));
    spec.vm_count = require<int>(n, "vm_count", "node");
    spec.service_rate = require<double>(n, "service_rate", "node");
    spec.vm_min = optional_field<int>(n, "vm_min", 1, "node");
    spec.vm_max = optional_field<int>(n, "vm_max", spec.vm_count, "node");
    nodes.push_back(std::move(spec));
  }
  for (const auto& l : require<json>(doc, "links", "topology")) {
    LinkSpec spec;
    spec.link_id = require<LinkId>(l, "link_id", "link");
    spec.latency_s = require<double>(l, "latency_s", "link");
    spec.bandwidth_Bps = require<double>(l, "bandwidth_Bps", "link");
    links.push_back(std::move(spec));
  }
  for (const auto& r : require<json>(doc, "routes", "topology")) {
    Route route;
    route.route_id = require<RouteId>(r, "route_id", "route");
    route.client_class = require<ClientClass>(r, "client_class", "route");
    route.target_node = require<NodeId>(r, "target_node", "route");
    route.links = require<std::vector<LinkId>>(r, "links", "route");
    route.weight = optional_field<double>(r, "weight", 1.0, "route");
    routes.push_back(std::move(route));
  }
  return Topology::create(std::move(nodes), std::move(links), std::move(routes));
}

inline json to_json(const Topology& t) {
  json doc{{"nodes", json::array()}, {"links", json::array()}, {"routes", json::array()}};
  for (const auto& n : t.nodes()) {
    doc["nodes"].push_back({{"node_id", n.node_id},
                            {"tier", to_string(n.tier)},
                            {"vm_count", n.vm_count},
                            {"service_rate", n.service_rate},
                            {"vm_min", n.vm_min},
                            {"vm_max", n.vm_max}});
  }
  for (const auto& l : t.links()) {
    doc["links"].push_back(
        {{"link_id", l.link_id}, {"latency_s", l.latency_s}, {"bandwidth_Bps", l.bandwidth_Bps}});
  }
  for (const auto& r : t.routes()) {
    doc["routes"].push_back({{"route_id", r.route_id},
                             {"client_class", r.client_class},
                             {"target_node", r.target_node},
                             {"links", r.links},
                             {"weight", r.weight}});
  }
  return doc;
}

inline Topology load_topology(std::string_view config_document) {
  return topology_from_json(parse_json_text(config_document, "topology"));
}

inline Topology load_topology_file(const std::filesystem::path& path) {
  return topology_from_json(read_json_file(path));
}

// Weight-proportional choice among the routes of (client_class, target_node).
inline const Route& sample_route(const Topology& topology, const ClientClass& client_class,
                                 const NodeId& target_node, Rng& rng) {
  const auto& candidates = topology.route_indices(client_class, target_node);
  if (candidates.empty()) {
    throw Error(ErrorCode::kNoRoute, "no route for client_class '" + client_class.str() +
                                         "' to node '" + target_node.str() + "'");
  }
  const auto& routes = topology.routes();
  if (candidates.size() == 1) return routes[candidates.front()];
  double total = 0.0;
  for (auto i : candidates) total += routes[i].weight;
  const double pick = rng.uniform() * total;
  double acc = 0.0;
  for (auto i : candidates) {
    acc += routes[i].weight;
    if (pick < acc) return routes[i];
  }
  return routes[candidates.back()];
}

// Sum of link latencies plus payload over the bottleneck bandwidth.
inline double transfer_time(std::uint64_t bytes, const Route& route, const Topology& topology) {
  double latency = 0.0;
  double bottleneck = std::numeric_limits<double>::infinity();
  for (const auto& id : route.links) {
    const auto& l = topology.link(id);
    latency += l.latency_s;
    bottleneck = std::min(bottleneck, l.bandwidth_Bps);
  }
  if (bytes == 0) return latency;
  return latency + static_cast<double>(bytes) / bottleneck;
}

// Expected transfer time to `node`: client classes equally likely, routes of a
// class weighted by their sampling weight.
inline double mean_transfer_time(std::uint64_t bytes, const NodeId& node, const Topology& topology) {
  const auto& classes = topology.client_classes();
  double sum = 0.0;
  for (const auto& cls : classes) {
    const auto& idx = topology.route_indices(cls, node);
    double wsum = 0.0;
    double tsum = 0.0;
    for (auto i : idx) {
      const auto& r = topology.routes()[i];
      wsum += r.weight;
      tsum += r.weight * transfer_time(bytes, r, topology);
    }
    sum += tsum / wsum;
  }
  return sum / static_cast<double>(classes.size());
}

}  // namespace hybridsim
