#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hybridsim/hybridsim.hpp"

namespace hybridsim::testing {

inline NodeSpec node(const std::string& id, Tier tier, int vm = 1, double rate = 1.0, int vm_min = 1, int vm_max = 0) {
  return NodeSpec{NodeId(id), tier, vm, rate, vm_min, vm_max == 0 ? std::max(vm, 1) : vm_max};
}

inline LinkSpec link(const std::string& id, double latency, double bandwidth) {
  return LinkSpec{LinkId(id), latency, bandwidth};
}

inline Route route(const std::string& id, const std::string& cls, const std::string& target,
                   std::vector<std::string> links, double weight = 1.0) {
  Route r{RouteId(id), ClientClass(cls), NodeId(target), {}, weight};
  for (auto& l : links) r.links.emplace_back(l);
  return r;
}

// One private and one public node, one client class, one direct link each.
inline Topology two_node_topology(double priv_rate = 1.0, double pub_rate = 1.0, double latency = 0.05,
                                  int priv_vm = 1, int pub_vm = 1) {
  return Topology::create(
      {node("a-priv", Tier::kPrivate, priv_vm, priv_rate, 1, 8), node("b-pub", Tier::kPublic, pub_vm, pub_rate, 1, 8)},
      {link("l-priv", latency, 1e6), link("l-pub", latency, 1e6)},
      {route("r-priv", "c", "a-priv", {"l-priv"}), route("r-pub", "c", "b-pub", {"l-pub"})});
}

inline QueryTemplate tmpl(const std::string& id, std::vector<std::string> frags, double cpu,
                          std::vector<std::uint64_t> bytes = {}, double weight = 1.0) {
  QueryTemplate t;
  t.template_id = TemplateId(id);
  for (std::size_t i = 0; i < frags.size(); ++i) {
    t.fragments_read.emplace_back(frags[i]);
    if (i < bytes.size()) t.result_bytes_per_fragment[FragmentId(frags[i])] = bytes[i];
  }
  t.cpu_work = cpu;
  t.frequency_weight = weight;
  return t;
}

inline Fragment frag(const std::string& id, std::optional<Tier> pin = std::nullopt) {
  return Fragment{FragmentId(id), "t", 1000, pin};
}

inline Placement place(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  Placement p;
  for (auto [f, n] : pairs) p.assignment[FragmentId(f)] = NodeId(n);
  return p;
}

inline QueryInstance query(std::uint64_t id, const std::string& t, double arrival, const std::string& cls = "c") {
  return QueryInstance{id, TemplateId(t), ClientClass(cls), arrival};
}

// Random topology: 1..max_nodes nodes (at least one per tier), a single
// client class, each (class, node) pair served by 1..max_routes routes over
// 1..3 links.
inline Topology random_topology(Rng& rng, int max_nodes = 4, int max_routes = 2, int max_vm = 3) {
  const int n_nodes = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes - 1)));
  std::vector<NodeSpec> nodes;
  for (int i = 0; i < n_nodes; ++i) {
    const Tier tier = i == 0 ? Tier::kPrivate : (i == 1 ? Tier::kPublic : (rng.below(2) ? Tier::kPublic : Tier::kPrivate));
    const int vm = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_vm)));
    nodes.push_back(node("n" + std::to_string(i), tier, vm, rng.uniform(0.5, 4.0), 1, 10));
  }
  std::vector<LinkSpec> links;
  for (int i = 0; i < 5; ++i) {
    links.push_back(link("l" + std::to_string(i), rng.uniform(0.0, 0.2), rng.uniform(1e4, 1e7)));
  }
  std::vector<Route> routes;
  int rid = 0;
  for (const auto& n : nodes) {
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_routes)));
    for (int j = 0; j < k; ++j) {
      std::vector<std::string> ls;
      const int len = 1 + static_cast<int>(rng.below(3));
      for (int q = 0; q < len; ++q) ls.push_back("l" + std::to_string(rng.below(5)));
      routes.push_back(route("r" + std::to_string(rid++), "c", n.node_id.str(), ls, rng.uniform(0.5, 3.0)));
    }
  }
  return Topology::create(std::move(nodes), std::move(links), std::move(routes));
}

// Random catalog over `n_frags` fragments with 1..max_templates templates.
inline Catalog random_catalog(Rng& rng, int n_frags, int max_templates = 3, bool pins = true) {
  std::vector<Fragment> frags;
  for (int i = 0; i < n_frags; ++i) {
    std::optional<Tier> pin;
    if (pins) {
      const auto r = rng.below(6);
      if (r == 0) pin = Tier::kPrivate;
      if (r == 1) pin = Tier::kPublic;
    }
    frags.push_back(frag("f" + std::to_string(i), pin));
  }
  std::vector<QueryTemplate> templates;
  const int n_t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_templates)));
  for (int t = 0; t < n_t; ++t) {
    std::vector<std::string> fs;
    std::vector<std::uint64_t> bytes;
    for (int i = 0; i < n_frags; ++i) {
      if (rng.below(2) == 0) {
        fs.push_back("f" + std::to_string(i));
        bytes.push_back(rng.below(200000));
      }
    }
    if (fs.empty()) {
      fs.push_back("f" + std::to_string(rng.below(static_cast<std::uint64_t>(n_frags))));
      bytes.push_back(rng.below(200000));
    }
    templates.push_back(tmpl("t" + std::to_string(t), fs, rng.uniform(0.1, 10.0), bytes, rng.uniform(0.5, 5.0)));
  }
  return Catalog::create(std::move(frags), std::move(templates));
}

// Random pin-respecting placement.
inline Placement random_placement(Rng& rng, const Catalog& catalog, const Topology& topology) {
  Placement p;
  for (const auto& f : catalog.fragments()) {
    std::vector<NodeId> ok;
    for (const auto& n : topology.nodes()) {
      if (!f.pinned_tier || *f.pinned_tier == n.tier) ok.push_back(n.node_id);
    }
    p.assignment[f.fragment_id] = ok[rng.below(ok.size())];
  }
  return p;
}

}  // namespace hybridsim::testing
