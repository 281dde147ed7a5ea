#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "hybridsim/analysis.hpp"
#include "hybridsim/engine.hpp"
#include "hybridsim/placement.hpp"
#include "oracles.hpp"

using namespace hybridsim;
using namespace hybridsim::testing;

namespace {

// Private node "a-priv" at `slow` rate, public node "b-pub" at `fast` rate.
Topology slow_fast(double slow, double fast, double latency = 0.0) {
  return two_node_topology(slow, fast, latency);
}

// Minimum cost over all pin-respecting placements, enumerated independently
// of brute_force_optimal.
double enumerate_min(const Catalog& cat, const Topology& topo) {
  const auto& frags = cat.fragments();
  const auto& nodes = topo.nodes();
  std::size_t total = 1;
  for (std::size_t i = 0; i < frags.size(); ++i) total *= nodes.size();
  double best = 1e300;
  for (std::size_t code = 0; code < total; ++code) {
    Placement p;
    std::size_t c = code;
    bool ok = true;
    for (const auto& f : frags) {
      const auto& n = nodes[c % nodes.size()];
      c /= nodes.size();
      if (f.pinned_tier && *f.pinned_tier != n.tier) ok = false;
      p.assignment[f.fragment_id] = n.node_id;
    }
    if (ok) best = std::min(best, evaluate_placement(p, cat, topo).expected_latency_s);
  }
  return best;
}

Topology relabeled(const Topology& t, const std::map<NodeId, NodeId>& rename) {
  std::vector<NodeSpec> nodes;
  for (auto n : t.nodes()) {
    n.node_id = rename.at(n.node_id);
    nodes.push_back(n);
  }
  std::vector<Route> routes;
  for (auto r : t.routes()) {
    r.target_node = rename.at(r.target_node);
    routes.push_back(r);
  }
  return Topology::create(nodes, t.links(), routes);
}

}  // namespace

TEST(EvaluatePlacement, SingleNodeSingleTemplate) {
  const auto topo = two_node_topology(1.0, 1.0, 0.05);
  const auto cat = Catalog::create({frag("f")}, {tmpl("T", {"f"}, 2.0, {0})});
  const auto cost = evaluate_placement(place({{"f", "a-priv"}}), cat, topo);
  EXPECT_NEAR(cost.per_template.at(TemplateId("T")), 2.05, 1e-12);
  EXPECT_NEAR(cost.expected_latency_s, 2.05, 1e-12);
}

TEST(EvaluatePlacement, WeightedMean) {
  const auto topo = slow_fast(1.0, 1.0);
  const auto cat = Catalog::create({frag("f")}, {tmpl("A", {"f"}, 1.0), tmpl("B", {"f"}, 3.0)});
  const auto cost = evaluate_placement(place({{"f", "a-priv"}}), cat, topo);
  EXPECT_DOUBLE_EQ(cost.per_template.at(TemplateId("A")), 1.0);
  EXPECT_DOUBLE_EQ(cost.per_template.at(TemplateId("B")), 3.0);
  EXPECT_DOUBLE_EQ(cost.expected_latency_s, 2.0);
}

TEST(EvaluatePlacement, ExpectedIsWeightedMeanProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo = random_topology(rng);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(4)), 4);
    const auto cost = evaluate_placement(random_placement(rng, cat, topo), cat, topo);
    double w = 0.0, s = 0.0;
    for (const auto& t : cat.templates()) {
      w += t.frequency_weight;
      s += t.frequency_weight * cost.per_template.at(t.template_id);
    }
    ASSERT_NEAR(cost.expected_latency_s, s / w, 1e-9);
  }
}

TEST(EvaluatePlacement, RejectsInvalid) {
  const auto cat = Catalog::create({frag("f", Tier::kPublic)}, {tmpl("T", {"f"}, 1.0)});
  EXPECT_THROW(evaluate_placement(place({{"f", "a-priv"}}), cat, two_node_topology()), Error);
}

TEST(EvaluatePlacement, MatchesSimulationWhenContentionFree) {
  // One node per query, one VM, one route: analytic equals simulated exactly.
  // With more VMs the analytic service term can only be smaller.
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo0 = random_topology(rng, 4, 1);
    const bool single_vm = trial % 2 == 0;
    const auto topo = single_vm ? topo0.with_vm_count(NodeId("n0"), 1).with_vm_count(NodeId("n1"), 1) : topo0;
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(3)), 3, false);
    const auto& target = topo.nodes()[rng.below(topo.nodes().size())];
    Placement p;
    for (const auto& f : cat.fragments()) p.assignment[f.fragment_id] = target.node_id;
    const auto cost = evaluate_placement(p, cat, topo);

    std::vector<QueryInstance> wl;
    for (std::size_t i = 0; i < cat.templates().size(); ++i) {
      wl.push_back(query(i, cat.templates()[i].template_id.str(), 1000.0 * static_cast<double>(i)));
    }
    const auto trace = simulate(topo, p, cat, wl);
    for (const auto& r : trace.records) {
      const double analytic = cost.per_template.at(r.template_id);
      if (target.vm_count == 1) {
        ASSERT_NEAR(analytic, r.latency_s, 1e-6);
      } else {
        ASSERT_LE(analytic, r.latency_s + 1e-9);
      }
    }
  }
}

TEST(EvaluatePlacement, InvariantUnderNodeRelabeling) {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo = random_topology(rng);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(4)));
    const auto p = random_placement(rng, cat, topo);
    std::vector<NodeId> ids = topo.node_ids();
    std::vector<NodeId> shuffled = ids;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    std::map<NodeId, NodeId> rename;
    for (std::size_t i = 0; i < ids.size(); ++i) rename[ids[i]] = NodeId("z" + shuffled[i].str());
    Placement q;
    for (const auto& [f, n] : p.assignment) q.assignment[f] = rename.at(n);
    const auto a = evaluate_placement(p, cat, topo).expected_latency_s;
    const auto b = evaluate_placement(q, cat, relabeled(topo, rename)).expected_latency_s;
    ASSERT_NEAR(a, b, 1e-12 * std::max(1.0, a));
  }
}

TEST(GreedyImprove, MovesHotFragmentToFastNode) {
  const auto topo = slow_fast(1.0, 4.0);
  const auto cat = Catalog::create({frag("hot"), frag("cold")},
                                   {tmpl("H", {"hot"}, 4.0, {0}, 9.0), tmpl("C", {"cold"}, 1.0, {0}, 1.0)});
  const auto start = place({{"hot", "a-priv"}, {"cold", "a-priv"}});
  const auto result = greedy_improve(start, cat, topo, 10);
  EXPECT_EQ(result.placement.node_of(FragmentId("hot")), NodeId("b-pub"));
  EXPECT_LT(result.final_cost_s, result.initial_cost_s);
  EXPECT_NEAR(result.final_cost_s, enumerate_min(cat, topo), 1e-12);
  EXPECT_EQ(result.moves.front().fragment, FragmentId("hot"));
}

TEST(GreedyImprove, UnchangedAtOptimum) {
  const auto topo = slow_fast(1.0, 4.0);
  const auto cat = Catalog::create({frag("a"), frag("b")}, {tmpl("T", {"a", "b"}, 2.0)});
  const auto [opt, cost] = brute_force_optimal(cat, topo);
  const auto result = greedy_improve(opt, cat, topo, 5);
  EXPECT_TRUE(result.moves.empty());
  EXPECT_EQ(result.placement, opt);
}

TEST(GreedyImprove, PinnedFragmentStays) {
  const auto topo = slow_fast(1.0, 100.0);
  const auto cat = Catalog::create({frag("secret", Tier::kPrivate)}, {tmpl("T", {"secret"}, 50.0)});
  const auto result = greedy_improve(place({{"secret", "a-priv"}}), cat, topo, 10);
  EXPECT_TRUE(result.moves.empty());
  EXPECT_EQ(result.placement.node_of(FragmentId("secret")), NodeId("a-priv"));
  EXPECT_THROW(greedy_improve(place({{"secret", "a-priv"}}), cat, topo, 0), Error);
}

TEST(GreedyImprove, BruteLeGreedyLeInitial) {
  Rng rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo = random_topology(rng, 4);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(4)), 3);
    const auto start = random_placement(rng, cat, topo);
    const auto greedy = greedy_improve(start, cat, topo, 1 + rng.below(6));
    const auto [opt, opt_cost] = brute_force_optimal(cat, topo);
    const double initial = evaluate_placement(start, cat, topo).expected_latency_s;
    const double g = evaluate_placement(greedy.placement, cat, topo).expected_latency_s;
    ASSERT_TRUE(validate_placement(greedy.placement, cat, topo).empty());
    ASSERT_TRUE(validate_placement(opt, cat, topo).empty());
    ASSERT_NEAR(g, greedy.final_cost_s, 1e-12 * std::max(1.0, g));
    ASSERT_LE(g, initial);
    ASSERT_LE(opt_cost.expected_latency_s, g + 1e-12);
    ASSERT_NEAR(opt_cost.expected_latency_s, enumerate_min(cat, topo), 1e-12);
    for (const auto& m : greedy.moves) {
      ASSERT_TRUE(allowed_on(cat.fragment(m.fragment), topo.node(m.to)));
    }
  }
}

TEST(GreedyImprove, SecondPassDoesNotImprove) {
  Rng rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo = random_topology(rng);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(5)), 4);
    const auto first = greedy_improve(random_placement(rng, cat, topo), cat, topo, 1000);
    const auto second = greedy_improve(first.placement, cat, topo, 1000);
    ASSERT_TRUE(second.moves.empty());
    ASSERT_EQ(second.final_cost_s, first.final_cost_s);
    // A brute-force optimum is a fixed point as well.
    const auto [opt, c] = brute_force_optimal(cat, topo);
    ASSERT_TRUE(greedy_improve(opt, cat, topo, 1000).moves.empty());
  }
}

TEST(BruteForce, SingleFragmentPicksFastestNode) {
  const auto topo = Topology::create(
      {node("n1", Tier::kPrivate, 1, 1.0), node("n2", Tier::kPublic, 1, 3.0), node("n3", Tier::kPublic, 1, 2.0)},
      {link("l", 0.01, 1e6)},
      {route("r1", "c", "n1", {"l"}), route("r2", "c", "n2", {"l"}), route("r3", "c", "n3", {"l"})});
  const auto cat = Catalog::create({frag("f")}, {tmpl("T", {"f"}, 6.0)});
  const auto [p, cost] = brute_force_optimal(cat, topo);
  EXPECT_EQ(p.node_of(FragmentId("f")), NodeId("n2"));
  EXPECT_NEAR(cost.expected_latency_s, 2.01, 1e-12);
}

TEST(BruteForce, SymmetricNodesLexicographicWinner) {
  const auto topo = Topology::create(
      {node("n1", Tier::kPrivate), node("n2", Tier::kPublic), node("n3", Tier::kPublic)}, {link("l", 0.0, 1e6)},
      {route("r1", "c", "n1", {"l"}), route("r2", "c", "n2", {"l"}), route("r3", "c", "n3", {"l"})});
  const auto cat = Catalog::create({frag("a"), frag("b")}, {tmpl("A", {"a"}, 1.0), tmpl("B", {"b"}, 1.0)});
  const auto [p, cost] = brute_force_optimal(cat, topo);
  EXPECT_EQ(p, place({{"a", "n1"}, {"b", "n1"}}));
}

TEST(BruteForce, GuardRejectsLargeInstances) {
  std::vector<Fragment> fs;
  std::vector<std::string> names;
  for (int i = 0; i < 21; ++i) {
    fs.push_back(frag("f" + std::to_string(i)));
    names.push_back("f" + std::to_string(i));
  }
  const auto cat = Catalog::create(fs, {tmpl("T", names, 1.0)});
  try {
    brute_force_optimal(cat, two_node_topology());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInstanceTooLarge);
  }
}

TEST(Offload, DemandingFragmentMovesToFasterPublicNode) {
  const auto topo = slow_fast(1.0, 3.0);
  const auto cat = Catalog::create({frag("f")}, {tmpl("T", {"f"}, 3.0)});
  const auto start = place({{"f", "a-priv"}});
  const auto trace = simulate(topo, start, cat, {query(0, "T", 0.0)});
  const auto out = offload_demanding_to_public(start, trace, cat, topo, 1);
  EXPECT_EQ(out.node_of(FragmentId("f")), NodeId("b-pub"));
  EXPECT_NEAR(evaluate_placement(out, cat, topo).expected_latency_s, enumerate_min(cat, topo), 1e-12);
}

TEST(Offload, PinnedFragmentsUntouched) {
  const auto topo = slow_fast(1.0, 3.0);
  const auto cat = Catalog::create({frag("f", Tier::kPrivate), frag("g", Tier::kPrivate)}, {tmpl("T", {"f", "g"}, 3.0)});
  const auto start = place({{"f", "a-priv"}, {"g", "a-priv"}});
  const auto trace = simulate(topo, start, cat, {query(0, "T", 0.0)});
  EXPECT_EQ(offload_demanding_to_public(start, trace, cat, topo, 1), start);
}

TEST(Offload, LargeKClampsToTemplateCount) {
  const auto topo = slow_fast(1.0, 3.0);
  const auto cat = Catalog::create({frag("f"), frag("g")}, {tmpl("A", {"f"}, 3.0), tmpl("B", {"g"}, 1.0)});
  const auto start = place({{"f", "a-priv"}, {"g", "a-priv"}});
  const auto trace = simulate(topo, start, cat, {query(0, "A", 0.0), query(1, "B", 10.0)});
  const auto two = offload_demanding_to_public(start, trace, cat, topo, 2);
  EXPECT_EQ(offload_demanding_to_public(start, trace, cat, topo, 50), two);
  EXPECT_EQ(two, place({{"f", "b-pub"}, {"g", "b-pub"}}));
  EXPECT_THROW(offload_demanding_to_public(start, Trace{}, cat, topo, 1), Error);
}

TEST(Offload, OutputAlwaysValid) {
  Rng rng(16);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto topo = random_topology(rng);
    const auto cat = random_catalog(rng, 1 + static_cast<int>(rng.below(4)), 3);
    const auto start = random_placement(rng, cat, topo);
    std::vector<QueryInstance> wl;
    for (std::size_t i = 0; i < 5; ++i) {
      wl.push_back(query(i, cat.templates()[rng.below(cat.templates().size())].template_id.str(), static_cast<double>(i)));
    }
    const auto trace = simulate(topo, start, cat, wl);
    const auto out = offload_demanding_to_public(start, trace, cat, topo, 1 + rng.below(3));
    ASSERT_TRUE(validate_placement(out, cat, topo).empty());
    for (const auto& [f, n] : out.assignment) {
      if (n != start.node_of(f)) {
        ASSERT_EQ(topo.node(n).tier, Tier::kPublic);
      }
    }
  }
}
