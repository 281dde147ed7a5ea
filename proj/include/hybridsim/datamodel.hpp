#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hybridsim/error.hpp"
#include "hybridsim/ids.hpp"
#include "hybridsim/io.hpp"
#include "hybridsim/topology.hpp"

namespace hybridsim {

struct Fragment {
  FragmentId fragment_id;
  std::string table;
  std::uint64_t size_bytes = 1;
  std::optional<Tier> pinned_tier;
};

struct QueryTemplate {
  TemplateId template_id;
  std::vector<FragmentId> fragments_read;  // sorted, unique
  double cpu_work = 1.0;
  std::map<FragmentId, std::uint64_t> result_bytes_per_fragment;
  double frequency_weight = 1.0;

  std::uint64_t result_bytes(const FragmentId& f) const {
    auto it = result_bytes_per_fragment.find(f);
    return it == result_bytes_per_fragment.end() ? 0 : it->second;
  }
};

class Catalog {
 public:
  static Catalog create(std::vector<Fragment> fragments, std::vector<QueryTemplate> templates) {
    Catalog c;
    c.fragments_ = std::move(fragments);
    c.templates_ = std::move(templates);
    c.validate_and_index();
    return c;
  }

  const std::vector<Fragment>& fragments() const noexcept { return fragments_; }
  const std::vector<QueryTemplate>& templates() const noexcept { return templates_; }

  const Fragment& fragment(const FragmentId& id) const {
    auto it = fragment_index_.find(id);
    if (it == fragment_index_.end()) {
      throw Error(ErrorCode::kValidationError, "unknown fragment '" + id.str() + "'");
    }
    return fragments_[it->second];
  }
  bool has_fragment(const FragmentId& id) const { return fragment_index_.contains(id); }

  const QueryTemplate& query_template(const TemplateId& id) const {
    auto it = template_index_.find(id);
    if (it == template_index_.end()) {
      throw Error(ErrorCode::kValidationError, "unknown template '" + id.str() + "'");
    }
    return templates_[it->second];
  }
  bool has_template(const TemplateId& id) const { return template_index_.contains(id); }

  // Copy with every template's frequency weight replaced (measured mode).
  // Templates missing from `weights` keep their design-time weight.
  Catalog with_weights(const std::map<TemplateId, double>& weights) const {
    Catalog copy = *this;
    for (auto& t : copy.templates_) {
      if (auto it = weights.find(t.template_id); it != weights.end()) t.frequency_weight = it->second;
    }
    copy.validate_and_index();
    return copy;
  }

  // Copy with every cpu_work multiplied by `factor`.
  Catalog with_scaled_work(double factor) const {
    Catalog copy = *this;
    for (auto& t : copy.templates_) t.cpu_work *= factor;
    copy.validate_and_index();
    return copy;
  }

 private:
  void validate_and_index() {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::kValidationError, msg); };
    std::sort(fragments_.begin(), fragments_.end(),
              [](const Fragment& a, const Fragment& b) { return a.fragment_id < b.fragment_id; });
    std::sort(templates_.begin(), templates_.end(),
              [](const QueryTemplate& a, const QueryTemplate& b) { return a.template_id < b.template_id; });
    fragment_index_.clear();
    template_index_.clear();
    for (std::size_t i = 0; i < fragments_.size(); ++i) {
      const auto& f = fragments_[i];
      if (f.fragment_id.empty()) fail("fragment_id must be nonempty");
      if (!fragment_index_.emplace(f.fragment_id, i).second) {
        fail("duplicate fragment_id '" + f.fragment_id.str() + "'");
      }
      if (f.size_bytes == 0) fail("fragment '" + f.fragment_id.str() + "': size_bytes must be positive");
    }
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      auto& t = templates_[i];
      const std::string where = "template '" + t.template_id.str() + "'";
      if (t.template_id.empty()) fail("template_id must be nonempty");
      if (!template_index_.emplace(t.template_id, i).second) fail("duplicate template_id '" + t.template_id.str() + "'");
      std::sort(t.fragments_read.begin(), t.fragments_read.end());
      t.fragments_read.erase(std::unique(t.fragments_read.begin(), t.fragments_read.end()),
                             t.fragments_read.end());
      if (t.fragments_read.empty()) fail(where + ": fragments_read must be nonempty");
      for (const auto& f : t.fragments_read) {
        if (!fragment_index_.contains(f)) fail(where + ": unknown fragment '" + f.str() + "'");
      }
      for (const auto& [f, bytes] : t.result_bytes_per_fragment) {
        if (!std::binary_search(t.fragments_read.begin(), t.fragments_read.end(), f)) {
          fail(where + ": result bytes for fragment '" + f.str() + "' not in fragments_read");
        }
      }
      if (!(t.cpu_work > 0.0)) fail(where + ": cpu_work must be positive");
      if (!(t.frequency_weight > 0.0)) fail(where + ": frequency_weight must be positive");
    }
  }

  std::vector<Fragment> fragments_;
  std::vector<QueryTemplate> templates_;
  std::map<FragmentId, std::size_t> fragment_index_;
  std::map<TemplateId, std::size_t> template_index_;
};

inline Catalog catalog_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kValidationError, "catalog: expected an object");
  std::vector<Fragment> fragments;
  std::vector<QueryTemplate> templates;
  for (const auto& f : require<json>(doc, "fragments", "catalog")) {
    Fragment frag;
    frag.fragment_id = require<FragmentId>(f, "fragment_id", "fragment");
    frag.table = optional_field<std::string>(f, "table", "", "fragment");
    const auto size = require<std::int64_t>(f, "size_bytes", "fragment");
    if (size <= 0) {
      throw Error(ErrorCode::kValidationError,
                  "fragment '" + frag.fragment_id.str() + "': size_bytes must be positive");
    }
    frag.size_bytes = static_cast<std::uint64_t>(size);
    if (f.contains("pinned_tier") && !f.at("pinned_tier").is_null()) {
      frag.pinned_tier = parse_tier(require<std::string>(f, "pinned_tier", "fragment"));
    }
    fragments.push_back(std::move(frag));
  }
  for (const auto& t : require<json>(doc, "templates", "catalog")) {
    QueryTemplate qt;
    qt.template_id = require<TemplateId>(t, "template_id", "template");
    qt.fragments_read = require<std::vector<FragmentId>>(t, "fragments_read", "template");
    qt.cpu_work = require<double>(t, "cpu_work", "template");
    if (t.contains("result_bytes_per_fragment")) {
      for (const auto& [k, v] : t.at("result_bytes_per_fragment").items()) {
        const auto bytes = v.get<std::int64_t>();
        if (bytes < 0) {
          throw Error(ErrorCode::kValidationError,
                      "template '" + qt.template_id.str() + "': result bytes must be nonnegative");
        }
        qt.result_bytes_per_fragment[FragmentId(k)] = static_cast<std::uint64_t>(bytes);
      }
    }
    qt.frequency_weight = optional_field<double>(t, "frequency_weight", 1.0, "template");
    templates.push_back(std::move(qt));
  }
  return Catalog::create(std::move(fragments), std::move(templates));
}

inline json to_json(const Catalog& c) {
  json doc{{"fragments", json::array()}, {"templates", json::array()}};
  for (const auto& f : c.fragments()) {
    json jf{{"fragment_id", f.fragment_id}, {"table", f.table}, {"size_bytes", f.size_bytes}};
    if (f.pinned_tier) jf["pinned_tier"] = to_string(*f.pinned_tier);
    doc["fragments"].push_back(std::move(jf));
  }
  for (const auto& t : c.templates()) {
    json bytes = json::object();
    for (const auto& [f, b] : t.result_bytes_per_fragment) bytes[f.str()] = b;
    doc["templates"].push_back({{"template_id", t.template_id},
                                {"fragments_read", t.fragments_read},
                                {"cpu_work", t.cpu_work},
                                {"result_bytes_per_fragment", std::move(bytes)},
                                {"frequency_weight", t.frequency_weight}});
  }
  return doc;
}

inline Catalog load_catalog_file(const std::filesystem::path& path) {
  return catalog_from_json(read_json_file(path));
}

// Total map fragment -> node. Ordered so iteration (and serialization) is
// deterministic.
struct Placement {
  std::map<FragmentId, NodeId> assignment;

  const NodeId& node_of(const FragmentId& f) const {
    auto it = assignment.find(f);
    if (it == assignment.end()) {
      throw Error(ErrorCode::kInvalidPlacement, "unassigned fragment '" + f.str() + "'");
    }
    return it->second;
  }

  friend bool operator==(const Placement&, const Placement&) = default;
};

inline Placement placement_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kValidationError, "placement: expected an object");
  Placement p;
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_string()) {
      throw Error(ErrorCode::kValidationError, "placement: node id for '" + k + "' must be a string");
    }
    p.assignment[FragmentId(k)] = NodeId(v.get<std::string>());
  }
  return p;
}

inline json to_json(const Placement& p) {
  json doc = json::object();
  for (const auto& [f, n] : p.assignment) doc[f.str()] = n.str();
  return doc;
}

inline Placement load_placement_file(const std::filesystem::path& path) {
  return placement_from_json(read_json_file(path));
}

enum class PlacementRule { kUnassignedFragment, kUnknownFragment, kUnknownNode, kPinnedTier };

inline std::string_view to_string(PlacementRule rule) noexcept {
  switch (rule) {
    case PlacementRule::kUnassignedFragment: return "unassigned fragment";
    case PlacementRule::kUnknownFragment: return "unknown fragment";
    case PlacementRule::kUnknownNode: return "unknown node";
    case PlacementRule::kPinnedTier: return "pinned tier mismatch";
  }
  return "?";
}

struct PlacementViolation {
  FragmentId fragment;
  PlacementRule rule;

  std::string describe() const { return std::string(to_string(rule)) + " '" + fragment.str() + "'"; }
  friend bool operator==(const PlacementViolation&, const PlacementViolation&) = default;
};

// Empty result means the placement is total, uses known nodes only, and
// honours every pin. Violations are reported in fragment order.
inline std::vector<PlacementViolation> validate_placement(const Placement& placement,
                                                          const Catalog& catalog,
                                                          const Topology& topology) {
  std::vector<PlacementViolation> out;
  std::map<FragmentId, std::vector<PlacementRule>> found;
  for (const auto& f : catalog.fragments()) {
    auto it = placement.assignment.find(f.fragment_id);
    if (it == placement.assignment.end()) {
      found[f.fragment_id].push_back(PlacementRule::kUnassignedFragment);
      continue;
    }
    if (!topology.has_node(it->second)) {
      found[f.fragment_id].push_back(PlacementRule::kUnknownNode);
      continue;
    }
    if (f.pinned_tier && topology.node(it->second).tier != *f.pinned_tier) {
      found[f.fragment_id].push_back(PlacementRule::kPinnedTier);
    }
  }
  for (const auto& [f, n] : placement.assignment) {
    if (!catalog.has_fragment(f)) found[f].push_back(PlacementRule::kUnknownFragment);
  }
  for (const auto& [f, rules] : found) {
    for (auto r : rules) out.push_back({f, r});
  }
  return out;
}

inline void require_valid_placement(const Placement& placement, const Catalog& catalog,
                                    const Topology& topology) {
  const auto violations = validate_placement(placement, catalog, topology);
  if (!violations.empty()) {
    std::string msg = "invalid placement: " + violations.front().describe();
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw Error(ErrorCode::kInvalidPlacement, msg);
  }
}

struct NodeShare {
  double cpu_work = 0.0;
  std::uint64_t bytes_out = 0;
  friend bool operator==(const NodeShare&, const NodeShare&) = default;
};

// Per-node slice of one query: CPU split equally over the distinct hosting
// nodes, result bytes summed per node.
inline std::map<NodeId, NodeShare> query_footprint(const QueryTemplate& tmpl, const Placement& placement) {
  std::map<NodeId, NodeShare> out;
  for (const auto& f : tmpl.fragments_read) {
    out[placement.node_of(f)].bytes_out += tmpl.result_bytes(f);
  }
  const double share = tmpl.cpu_work / static_cast<double>(out.size());
  for (auto& [node, s] : out) s.cpu_work = share;
  return out;
}

}  // namespace hybridsim
