#include "exr/uad/serialize.hpp"

#include <cmath>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

ojson vec3_json(const Vec3& v) {
  for (double c : v) {
    if (!std::isfinite(c)) throw Error(ErrorCode::SerializationFailure, "non-finite coordinate");
  }
  return ojson::array({v[0], v[1], v[2]});
}

Vec3 vec3_from(const ojson& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::MalformedRecord, "expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ojson transforms_json(const std::vector<Transform>& ts) {
  ojson arr = ojson::array();
  for (const auto& t : ts) arr.push_back(to_json(t));
  return arr;
}

std::vector<Transform> transforms_from(const ojson& j) {
  std::vector<Transform> out;
  for (const auto& e : j) out.push_back(transform_from_json(e));
  return out;
}

ojson assets_json(const std::vector<AssetRef>& as) {
  ojson arr = ojson::array();
  for (const auto& a : as) arr.push_back(to_json(a));
  return arr;
}

std::vector<AssetRef> assets_from(const ojson& j) {
  std::vector<AssetRef> out;
  for (const auto& e : j) out.push_back(asset_ref_from_json(e));
  return out;
}

ojson processing_json(const ProcessingState& p) {
  ojson j = ojson::object();
  if (!p.done.empty()) j["done"] = p.done;
  if (p.referent_classified) j["referentClassified"] = true;
  if (p.intent_estimated) j["intentEstimated"] = true;
  if (p.transcript_missing) j["transcriptMissing"] = true;
  if (!p.diagnostics.empty()) j["diagnostics"] = p.diagnostics;
  return j;
}

ProcessingState processing_from(const ojson& j) {
  ProcessingState p;
  if (j.contains("done")) p.done = j["done"].get<std::vector<std::string>>();
  p.referent_classified = j.value("referentClassified", false);
  p.intent_estimated = j.value("intentEstimated", false);
  p.transcript_missing = j.value("transcriptMissing", false);
  if (j.contains("diagnostics")) p.diagnostics = j["diagnostics"].get<std::vector<std::string>>();
  return p;
}

const ojson& field(const ojson& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw Error(ErrorCode::MalformedRecord, std::string("missing field ") + name);
  return *it;
}

}  // namespace

ojson to_json(const Transform& t) {
  ojson j;
  j["pos"] = vec3_json(t.pos);
  j["rot"] = vec3_json(t.rot);
  return j;
}

Transform transform_from_json(const ojson& j) {
  return {vec3_from(field(j, "pos")), vec3_from(field(j, "rot"))};
}

ojson to_json(const AssetRef& a) {
  ojson j;
  j["kind"] = to_string(a.kind);
  j["path"] = a.path;
  j["sha256"] = a.sha256;
  if (a.capture) j["capture"] = *a.capture;
  return j;
}

AssetRef asset_ref_from_json(const ojson& j) {
  AssetRef a;
  a.kind = parse_asset_kind(field(j, "kind").get<std::string>());
  a.path = field(j, "path").get<std::string>();
  a.sha256 = field(j, "sha256").get<std::string>();
  if (j.contains("capture")) a.capture = j["capture"].get<int>();
  return a;
}

ojson to_json(const ActionRecord& r) {
  ojson j;
  j["uadVersion"] = kUadVersion;
  j["id"] = r.id;
  j["Name"] = r.name;
  j["Type"] = to_string(r.type);
  j["Intent"] = r.intent;
  j["User"] = r.user;
  j["Location"] = transforms_json(r.location);
  j["TriggerSource"] = r.trigger_source;
  j["StartTime"] = r.start_time.to_string();
  j["Duration"] = r.duration.to_string();
  ojson referent;
  referent["name"] = r.referent_name;
  referent["assets"] = assets_json(r.referent);
  j["Referent"] = std::move(referent);
  j["ReferentType"] = to_string(r.referent_type);
  j["ReferentLocation"] = transforms_json(r.referent_location);
  ojson context;
  context["assets"] = assets_json(r.context);
  if (r.context_description) context["description"] = *r.context_description;
  j["Context"] = std::move(context);
  j["ContextType"] = to_string(r.context_type);
  if (!r.processing.empty()) j["processing"] = processing_json(r.processing);
  return j;
}

ActionRecord record_from_json(const ojson& j) {
  try {
    auto version = field(j, "uadVersion").get<std::string>();
    if (version.empty() || version.substr(0, version.find('.')) != "1") {
      throw Error(ErrorCode::SchemaVersionUnsupported, "record uadVersion " + version);
    }
    ActionRecord r;
    r.id = field(j, "id").get<std::string>();
    r.name = field(j, "Name").get<std::string>();
    r.type = parse_action_type(field(j, "Type").get<std::string>());
    r.intent = field(j, "Intent").get<std::string>();
    r.user = field(j, "User").get<std::string>();
    r.location = transforms_from(field(j, "Location"));
    r.trigger_source = field(j, "TriggerSource").get<std::string>();
    r.start_time = Timestamp::parse(field(j, "StartTime").get<std::string>());
    r.duration = TimeDelta::parse(field(j, "Duration").get<std::string>());
    const auto& referent = field(j, "Referent");
    r.referent_name = field(referent, "name").get<std::string>();
    r.referent = assets_from(field(referent, "assets"));
    r.referent_type = parse_reality_type(field(j, "ReferentType").get<std::string>());
    r.referent_location = transforms_from(field(j, "ReferentLocation"));
    const auto& context = field(j, "Context");
    r.context = assets_from(field(context, "assets"));
    if (context.contains("description")) {
      r.context_description = context["description"].get<std::string>();
    }
    r.context_type = parse_reality_type(field(j, "ContextType").get<std::string>());
    if (j.contains("processing")) r.processing = processing_from(j["processing"]);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
}

ojson to_json(const SessionMeta& m) {
  ojson j;
  j["uadVersion"] = m.uad_version;
  j["sessionId"] = m.session_id;
  j["appName"] = m.app_name;
  j["virtuality"] = to_string(m.virtuality);
  j["users"] = m.users;
  j["recordingStart"] = m.recording_start.to_string();
  j["recordingEnd"] = m.recording_end.to_string();
  return j;
}

SessionMeta meta_from_json(const ojson& j) {
  try {
    SessionMeta m;
    m.uad_version = field(j, "uadVersion").get<std::string>();
    if (m.uad_version.empty() || m.uad_version.substr(0, m.uad_version.find('.')) != "1") {
      throw Error(ErrorCode::SchemaVersionUnsupported, "session uadVersion " + m.uad_version);
    }
    m.session_id = field(j, "sessionId").get<std::string>();
    m.app_name = field(j, "appName").get<std::string>();
    m.virtuality = parse_virtuality(field(j, "virtuality").get<std::string>());
    m.users = field(j, "users").get<std::vector<std::string>>();
    m.recording_start = Timestamp::parse(field(j, "recordingStart").get<std::string>());
    m.recording_end = Timestamp::parse(field(j, "recordingEnd").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("meta.json: ") + e.what());
  }
}

std::string dump_record_line(const ActionRecord& r) { return to_json(r).dump(); }

ActionRecord parse_record_line(std::string_view line) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "record line is not a JSON object");
  }
  return record_from_json(j);
}

std::string dump_meta(const SessionMeta& m) { return to_json(m).dump(2) + "\n"; }

std::string dump_alias_map(const AliasMap& aliases) {
  ojson j = ojson::object();
  for (const auto& [original, alias] : aliases) j[original] = alias;
  return j.dump(2) + "\n";
}

AliasMap parse_alias_map(std::string_view text) {
  ojson j = ojson::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "alias_map.json is not a JSON object");
  }
  AliasMap out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<std::string>();
  return out;
}

}  // namespace exr
