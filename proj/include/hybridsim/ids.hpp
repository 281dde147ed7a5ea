#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

namespace hybridsim {

// Identifier tagged by the kind of entity it names. Ordering is plain
// lexicographic on the underlying string, which every tie-break relies on.
template <typename Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}
  explicit Id(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Id& id) {
    return os << id.value_;
  }

  friend void to_json(nlohmann::json& j, const Id& id) { j = id.value_; }
  friend void from_json(const nlohmann::json& j, Id& id) {
    id.value_ = j.get<std::string>();
  }

 private:
  std::string value_;
};

using NodeId = Id<struct NodeTag>;
using LinkId = Id<struct LinkTag>;
using RouteId = Id<struct RouteTag>;
using ClientClass = Id<struct ClientClassTag>;
using FragmentId = Id<struct FragmentTag>;
using TemplateId = Id<struct TemplateTag>;

}  // namespace hybridsim

template <typename Tag>
struct std::hash<hybridsim::Id<Tag>> {
  std::size_t operator()(const hybridsim::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
