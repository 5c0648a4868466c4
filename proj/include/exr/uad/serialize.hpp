#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "exr/uad/record.hpp"

namespace exr {

using ojson = nlohmann::ordered_json;

/// The thirteen descriptor fields, spelled exactly as serialized.
inline constexpr std::array<std::string_view, 13> kDescriptorFields = {
    "Name",      "Type",     "Intent",   "User",         "Location",
    "TriggerSource", "StartTime", "Duration", "Referent", "ReferentType",
    "ReferentLocation", "Context", "ContextType"};

ojson to_json(const Transform& t);
ojson to_json(const AssetRef& a);
ojson to_json(const ActionRecord& r);
ojson to_json(const SessionMeta& m);

Transform transform_from_json(const ojson& j);
AssetRef asset_ref_from_json(const ojson& j);
ActionRecord record_from_json(const ojson& j);
SessionMeta meta_from_json(const ojson& j);

/// Canonical single-line form used in the per-user JSON Lines files.
std::string dump_record_line(const ActionRecord& r);
ActionRecord parse_record_line(std::string_view line);

std::string dump_meta(const SessionMeta& m);
std::string dump_alias_map(const AliasMap& aliases);
AliasMap parse_alias_map(std::string_view text);

}  // namespace exr
