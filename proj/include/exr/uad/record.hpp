#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exr/uad/time.hpp"

namespace exr {

inline constexpr std::string_view kUadVersion = "1.0";
inline constexpr std::string_view kPostDefinedIntent = "PostDefined";

using Vec3 = std::array<double, 3>;

/// 6DoF pose: position in meters (right-handed, Y-up world) and Euler
/// rotation in degrees applied X, then Y, then Z (intrinsic).
struct Transform {
  Vec3 pos{0, 0, 0};
  Vec3 rot{0, 0, 0};

  /// Parses the literal form `(Pos(x,y,z), Rot(x,y,z))`.
  static Transform parse(std::string_view text);
  std::string to_string() const;

  /// Wraps each rotation component into (-360, 360).
  Transform normalized() const;

  friend bool operator==(const Transform&, const Transform&) = default;
};

enum class ActionType { Discrete, Continuous };
enum class RealityType { Physical, Virtual };
enum class Virtuality { AR, VR, MR };

enum class AssetKind {
  ReferentModel,
  ReferentImage,
  ContextCloud,
  ContextRGB,
  ContextDepth,
  CameraParams,
  AudioTranscript,
  AudioClip,
};

std::string_view to_string(ActionType t);
std::string_view to_string(RealityType t);
std::string_view to_string(Virtuality v);
std::string_view to_string(AssetKind k);
ActionType parse_action_type(std::string_view s);
RealityType parse_reality_type(std::string_view s);
Virtuality parse_virtuality(std::string_view s);
AssetKind parse_asset_kind(std::string_view s);
std::string_view file_extension(AssetKind k);

/// Sidecar file reference. `path` is relative to the session directory.
struct AssetRef {
  AssetKind kind = AssetKind::ReferentModel;
  std::string path;
  std::string sha256;
  /// Groups ContextRGB/ContextDepth/CameraParams files of one capture.
  std::optional<int> capture;

  friend bool operator==(const AssetRef&, const AssetRef&) = default;
};

/// Post-hoc processing provenance and per-step done markers.
struct ProcessingState {
  std::vector<std::string> done;  // step names, in completion order
  bool referent_classified = false;
  bool intent_estimated = false;
  bool transcript_missing = false;
  std::vector<std::string> diagnostics;

  bool has(std::string_view step) const;
  bool empty() const {
    return done.empty() && !referent_classified && !intent_estimated && !transcript_missing &&
           diagnostics.empty();
  }
  friend bool operator==(const ProcessingState&, const ProcessingState&) = default;
};

/// One user action: every User Action Descriptor field plus identity and
/// processing bookkeeping.
struct ActionRecord {
  std::string id;
  std::string name;
  ActionType type = ActionType::Discrete;
  std::string intent;
  std::string user;
  std::vector<Transform> location;
  std::string trigger_source;
  Timestamp start_time;
  TimeDelta duration;

  std::vector<AssetRef> referent;  // GLB and/or PNG
  std::string referent_name;
  RealityType referent_type = RealityType::Virtual;
  std::vector<Transform> referent_location;

  std::vector<AssetRef> context;
  std::optional<std::string> context_description;
  RealityType context_type = RealityType::Virtual;

  ProcessingState processing;

  Timestamp end_time() const { return start_time + duration; }
  const AssetRef* find_referent(AssetKind kind) const;
  std::vector<const AssetRef*> context_assets(AssetKind kind) const;

  friend bool operator==(const ActionRecord&, const ActionRecord&) = default;
};

struct SessionMeta {
  std::string uad_version{kUadVersion};
  std::string session_id;
  std::vector<std::string> users;
  std::string app_name;
  Virtuality virtuality = Virtuality::VR;
  Timestamp recording_start;
  Timestamp recording_end;

  friend bool operator==(const SessionMeta&, const SessionMeta&) = default;
};

/// original identity -> `UserN`. Persisted privately, never served.
using AliasMap = std::map<std::string, std::string>;

/// True for `User<positive integer>` without leading zeros.
bool is_user_alias(std::string_view user);
/// The N of `UserN`, or 0 when `user` is not an alias.
int alias_number(std::string_view user);

}  // namespace exr
