#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exr/uad/session.hpp"

namespace exr {

/// Record selection. An unset dimension is unrestricted.
struct FilterSpec {
  std::optional<std::vector<std::string>> users;
  std::optional<std::vector<std::string>> actions;
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;

  /// `{users, actions, from, to}`, null meaning unrestricted. Throws
  /// InvalidArgument on wrong types, bad timestamps or from > to.
  static FilterSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  bool matches(const ActionRecord& r) const;
};

/// Half-open overlap of [start, end) with [t0, t1). Zero-duration actions
/// count as the instant `start`.
bool overlaps(const ActionRecord& r, std::int64_t t0_ms, std::int64_t t1_ms);

/// Filtered, non-owning window onto a store. The store must outlive it.
class SessionView {
 public:
  SessionView(const SessionStore& store, FilterSpec filter);

  const SessionStore& store() const { return *store_; }
  const FilterSpec& filter() const { return filter_; }
  const std::vector<const ActionRecord*>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  /// Users with at least one record in the view, in store order.
  std::vector<std::string> users() const;

 private:
  const SessionStore* store_;
  FilterSpec filter_;
  std::vector<const ActionRecord*> records_;
};

SessionView make_view(const SessionStore& store, FilterSpec filter = {});

}  // namespace exr
