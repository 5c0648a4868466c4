#include "exr/uad/validate.hpp"

#include <charconv>
#include <cmath>

namespace exr {

bool ValidationReport::has(std::string_view field) const {
  for (const auto& v : violations) {
    if (v.field == field) return true;
  }
  return false;
}

bool is_session_relative(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.front() == '\\') return false;
  if (path.size() > 1 && path[1] == ':') return false;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find_first_of("/\\", start);
    if (end == std::string_view::npos) end = path.size();
    auto part = path.substr(start, end - start);
    if (part == ".." || part.empty()) return false;
    start = end + 1;
  }
  return true;
}

namespace {

bool transforms_ok(const std::vector<Transform>& ts) {
  for (const auto& t : ts) {
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(t.pos[i]) || !std::isfinite(t.rot[i])) return false;
      if (t.rot[i] < -360.0 || t.rot[i] > 360.0) return false;
    }
  }
  return true;
}

// `<label>@<confidence in [0,1]>`
bool is_classified_name(std::string_view name) {
  auto at = name.rfind('@');
  if (at == std::string_view::npos || at == 0) return false;
  auto num = name.substr(at + 1);
  double c = -1;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), c);
  return ec == std::errc{} && ptr == num.data() + num.size() && c >= 0.0 && c <= 1.0;
}

}  // namespace

ValidationReport validate_record(const ActionRecord& r, const ValidationOptions& opts) {
  ValidationReport report;
  auto add = [&](std::string field, std::string rule) {
    report.violations.push_back({std::move(field), std::move(rule)});
  };

  if (r.id.empty()) add("id", "must be non-empty");
  if (r.name.empty()) add("name", "must be non-empty");
  if (r.intent.empty()) add("intent", "must be non-empty (use PostDefined when unknown)");
  if (r.user.empty()) add("user", "must be non-empty");
  if (opts.require_alias && !is_user_alias(r.user)) add("user.alias", "must match User<N> after ingest");
  if (r.trigger_source.empty()) add("triggerSource", "must be non-empty");

  if (r.type == ActionType::Discrete && r.location.size() != 1) {
    add("location.count", "discrete actions carry exactly one transform");
  } else if (r.type == ActionType::Continuous && r.location.empty()) {
    add("location.count", "continuous actions carry at least one transform");
  }
  if (!transforms_ok(r.location)) add("location.value", "finite, rotation within [-360,360]");
  if (!transforms_ok(r.referent_location)) {
    add("referentLocation.value", "finite, rotation within [-360,360]");
  }

  if (r.referent_type == RealityType::Physical && r.processing.referent_classified &&
      !is_classified_name(r.referent_name)) {
    add("referentName.classification", "classified physical referents read <label>@<confidence>");
  }

  auto check_assets = [&](const std::vector<AssetRef>& assets, const char* field) {
    for (const auto& a : assets) {
      if (!is_session_relative(a.path)) add(std::string(field) + ".path", "session-relative, no '..'");
      if (a.sha256.size() != 64) add(std::string(field) + ".sha256", "64 hex digits");
    }
  };
  check_assets(r.referent, "referent");
  check_assets(r.context, "context");
  for (const auto& a : r.referent) {
    if (a.kind != AssetKind::ReferentModel && a.kind != AssetKind::ReferentImage) {
      add("referent.kind", "referent assets are GLB models or PNG images");
    }
  }
  return report;
}

}  // namespace exr
