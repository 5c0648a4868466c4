#include "exr/ingest/view.hpp"

#include <algorithm>
#include <limits>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

std::optional<std::vector<std::string>> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_array()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be an array or null");
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::optional<Timestamp> timestamp(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a timestamp string");
  try {
    return Timestamp::parse(j[key].get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + ": " + e.what());
  }
}

bool contains(const std::vector<std::string>& xs, const std::string& x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

}  // namespace

FilterSpec FilterSpec::from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "filter must be an object");
  FilterSpec f;
  f.users = string_list(j, "users");
  f.actions = string_list(j, "actions");
  f.from = timestamp(j, "from");
  f.to = timestamp(j, "to");
  if (f.from && f.to && *f.to < *f.from) throw Error(ErrorCode::InvalidArgument, "filter range has to < from");
  return f;
}

nlohmann::json FilterSpec::to_json() const {
  nlohmann::json j;
  j["users"] = users ? nlohmann::json(*users) : nlohmann::json();
  j["actions"] = actions ? nlohmann::json(*actions) : nlohmann::json();
  j["from"] = from ? nlohmann::json(from->to_string()) : nlohmann::json();
  j["to"] = to ? nlohmann::json(to->to_string()) : nlohmann::json();
  return j;
}

bool overlaps(const ActionRecord& r, std::int64_t t0, std::int64_t t1) {
  if (t1 <= t0) return false;
  std::int64_t s = r.start_time.unix_millis();
  std::int64_t e = s + r.duration.total_millis();
  if (e <= s) return s >= t0 && s < t1;
  return s < t1 && e > t0;
}

bool FilterSpec::matches(const ActionRecord& r) const {
  if (users && !contains(*users, r.user)) return false;
  if (actions && !contains(*actions, r.name)) return false;
  if (from || to) {
    std::int64_t t0 = from ? from->unix_millis() : std::numeric_limits<std::int64_t>::min();
    std::int64_t t1 = to ? to->unix_millis() : std::numeric_limits<std::int64_t>::max();
    if (!overlaps(r, t0, t1)) return false;
  }
  return true;
}

SessionView::SessionView(const SessionStore& store, FilterSpec filter) : store_(&store), filter_(std::move(filter)) {
  for (const auto& r : store.records) {
    if (filter_.matches(r)) records_.push_back(&r);
  }
}

std::vector<std::string> SessionView::users() const {
  std::vector<std::string> out;
  for (const auto& u : store_->meta.users) {
    if (std::any_of(records_.begin(), records_.end(), [&](const ActionRecord* r) { return r->user == u; })) {
      out.push_back(u);
    }
  }
  return out;
}

SessionView make_view(const SessionStore& store, FilterSpec filter) { return SessionView(store, std::move(filter)); }

}  // namespace exr
