#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "hybridsim/analysis.hpp"
#include "hybridsim/datamodel.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/error.hpp"
#include "hybridsim/topology.hpp"

namespace hybridsim {

struct PlacementCost {
  double expected_latency_s = 0.0;  // frequency-weighted mean of per_template
  std::map<TemplateId, double> per_template;
};

// Contention-free latency of a single query of `tmpl`: slowest node's share
// spread over all of its VMs, plus the slowest expected result transfer.
inline double analytic_latency(const QueryTemplate& tmpl, const Placement& placement, const Topology& topology) {
  double service = 0.0;
  double transfer = 0.0;
  for (const auto& [node_id, share] : query_footprint(tmpl, placement)) {
    const auto& node = topology.node(node_id);
    service = std::max(service, share.cpu_work / (node.vm_count * node.service_rate));
    transfer = std::max(transfer, mean_transfer_time(share.bytes_out, node_id, topology));
  }
  return service + transfer;
}

inline PlacementCost evaluate_placement_unchecked(const Placement& placement, const Catalog& catalog,
                                                  const Topology& topology) {
  PlacementCost cost;
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (const auto& t : catalog.templates()) {
    const double latency = analytic_latency(t, placement, topology);
    cost.per_template.emplace(t.template_id, latency);
    weight_sum += t.frequency_weight;
    weighted += t.frequency_weight * latency;
  }
  cost.expected_latency_s = weight_sum > 0.0 ? weighted / weight_sum : 0.0;
  return cost;
}

inline PlacementCost evaluate_placement(const Placement& placement, const Catalog& catalog,
                                        const Topology& topology) {
  require_valid_placement(placement, catalog, topology);
  return evaluate_placement_unchecked(placement, catalog, topology);
}

inline bool allowed_on(const Fragment& f, const NodeSpec& n) { return !f.pinned_tier || *f.pinned_tier == n.tier; }

namespace detail {
inline bool strictly_better(double candidate, double incumbent) {
  return candidate < incumbent - 1e-12 * std::max(1.0, std::abs(incumbent));
}
}  // namespace detail

struct PlacementMove {
  FragmentId fragment;
  NodeId from;
  NodeId to;
  double cost_after_s = 0.0;
};

struct GreedyResult {
  Placement placement;
  std::vector<PlacementMove> moves;
  double initial_cost_s = 0.0;
  double final_cost_s = 0.0;
};

// Steepest descent over single-fragment reassignments. Scans fragments then
// nodes in id order and keeps the first of equally good moves.
inline GreedyResult greedy_improve(const Placement& placement, const Catalog& catalog, const Topology& topology,
                                   std::size_t max_moves) {
  if (max_moves < 1) throw Error(ErrorCode::kValidationError, "max_moves must be at least 1");
  require_valid_placement(placement, catalog, topology);

  GreedyResult result;
  result.placement = placement;
  double current = evaluate_placement_unchecked(placement, catalog, topology).expected_latency_s;
  result.initial_cost_s = current;

  while (result.moves.size() < max_moves) {
    std::optional<PlacementMove> best;
    double best_cost = current;
    for (const auto& frag : catalog.fragments()) {
      const NodeId from = result.placement.assignment.at(frag.fragment_id);
      for (const auto& node : topology.nodes()) {
        if (node.node_id == from || !allowed_on(frag, node)) continue;
        Placement trial = result.placement;
        trial.assignment[frag.fragment_id] = node.node_id;
        const double c = evaluate_placement_unchecked(trial, catalog, topology).expected_latency_s;
        if (detail::strictly_better(c, best_cost)) {
          best_cost = c;
          best = PlacementMove{frag.fragment_id, from, node.node_id, c};
        }
      }
    }
    if (!best) break;
    result.placement.assignment[best->fragment] = best->to;
    current = best_cost;
    result.moves.push_back(*best);
  }
  result.final_cost_s = current;
  return result;
}

inline constexpr std::uint64_t kBruteForceLimit = 1'000'000;

// Exhaustive search over pin-respecting placements in lexicographic order of
// (fragment id -> node id); the first minimum wins ties.
inline std::pair<Placement, PlacementCost> brute_force_optimal(const Catalog& catalog, const Topology& topology) {
  const auto& frags = catalog.fragments();
  std::vector<std::vector<NodeId>> options;
  std::uint64_t combos = 1;
  for (const auto& f : frags) {
    std::vector<NodeId> nodes;
    for (const auto& n : topology.nodes()) {
      if (allowed_on(f, n)) nodes.push_back(n.node_id);
    }
    if (nodes.empty()) {
      throw Error(ErrorCode::kInvalidPlacement, "fragment '" + f.fragment_id.str() + "' has no admissible node");
    }
    combos *= nodes.size();
    if (combos > kBruteForceLimit) {
      throw Error(ErrorCode::kInstanceTooLarge, "brute force limited to 1e6 placements");
    }
    options.push_back(std::move(nodes));
  }

  std::vector<std::size_t> digit(frags.size(), 0);
  Placement trial;
  for (std::size_t i = 0; i < frags.size(); ++i) trial.assignment[frags[i].fragment_id] = options[i][0];

  std::optional<std::pair<Placement, PlacementCost>> best;
  while (true) {
    auto cost = evaluate_placement_unchecked(trial, catalog, topology);
    if (!best || detail::strictly_better(cost.expected_latency_s, best->second.expected_latency_s)) {
      best.emplace(trial, std::move(cost));
    }
    // Odometer: the last fragment varies fastest.
    std::size_t pos = frags.size();
    while (pos > 0) {
      --pos;
      if (++digit[pos] < options[pos].size()) {
        trial.assignment[frags[pos].fragment_id] = options[pos][digit[pos]];
        break;
      }
      digit[pos] = 0;
      trial.assignment[frags[pos].fragment_id] = options[pos][0];
      if (pos == 0) return std::move(*best);
    }
    if (frags.empty()) return std::move(*best);
  }
}

// Moves the unpinned fragments of the k most demanding templates onto public
// nodes, one fragment at a time, each to the public node with the lowest
// resulting analytic cost.
inline Placement offload_demanding_to_public(const Placement& placement, const Trace& trace, const Catalog& catalog,
                                             const Topology& topology, std::size_t k) {
  if (trace.records.empty()) throw Error(ErrorCode::kValidationError, "offload needs a nonempty trace");
  if (k < 1) throw Error(ErrorCode::kValidationError, "k must be at least 1");
  require_valid_placement(placement, catalog, topology);

  std::vector<NodeId> public_nodes;
  for (const auto& n : topology.nodes()) {
    if (n.tier == Tier::kPublic) public_nodes.push_back(n.node_id);
  }
  if (public_nodes.empty()) throw Error(ErrorCode::kNoPublicNode, "topology has no public node");

  std::set<FragmentId> targets;
  for (const auto& t : rank_demanding_templates(trace, k)) {
    if (!catalog.has_template(t)) continue;
    for (const auto& f : catalog.query_template(t).fragments_read) {
      if (!catalog.fragment(f).pinned_tier) targets.insert(f);
    }
  }

  Placement out = placement;
  for (const auto& f : targets) {
    std::optional<NodeId> best;
    double best_cost = 0.0;
    for (const auto& n : public_nodes) {
      Placement trial = out;
      trial.assignment[f] = n;
      const double c = evaluate_placement_unchecked(trial, catalog, topology).expected_latency_s;
      if (!best || detail::strictly_better(c, best_cost)) {
        best = n;
        best_cost = c;
      }
    }
    out.assignment[f] = *best;
  }
  return out;
}

}  // namespace hybridsim
