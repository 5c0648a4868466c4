#include "exr/uad/record.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "exr/uad/error.hpp"

namespace exr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::InvalidCalendar: return "InvalidCalendar";
    case ErrorCode::MalformedTimedelta: return "MalformedTimedelta";
    case ErrorCode::MalformedTransform: return "MalformedTransform";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::SerializationFailure: return "SerializationFailure";
    case ErrorCode::UninitializedLogger: return "UninitializedLogger";
    case ErrorCode::CorruptAsset: return "CorruptAsset";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::TranscriberUnavailable: return "TranscriberUnavailable";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::DegenerateSize: return "DegenerateSize";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidCamera: return "InvalidCamera";
    case ErrorCode::MalformedGlb: return "MalformedGlb";
    case ErrorCode::UnsupportedPrimitive: return "UnsupportedPrimitive";
    case ErrorCode::MalformedPng: return "MalformedPng";
    case ErrorCode::ClientFailure: return "ClientFailure";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::AllAgentsFailed: return "AllAgentsFailed";
    case ErrorCode::AllRunsFailed: return "AllRunsFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error(ErrorCode::SerializationFailure, "number formatting");
  return std::string(buf, end);
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  void expect(std::string_view token) {
    skip_ws();
    if (s_.substr(i_, token.size()) != token) fail();
    i_ += token.size();
  }
  double number() {
    skip_ws();
    double v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
    if (ec != std::errc{} || !std::isfinite(v)) fail();
    i_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }
  Vec3 triple(std::string_view head) {
    expect(head);
    expect("(");
    Vec3 v{};
    v[0] = number();
    expect(",");
    v[1] = number();
    expect(",");
    v[2] = number();
    expect(")");
    return v;
  }
  void finish() {
    skip_ws();
    if (i_ != s_.size()) fail();
  }
  [[noreturn]] void fail() const {
    throw Error(ErrorCode::MalformedTransform,
                "expected (Pos(x,y,z), Rot(x,y,z)), got '" + std::string(s_) + "'");
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, const char* what) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::MalformedRecord, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace

Transform Transform::parse(std::string_view text) {
  Cursor c(text);
  Transform t;
  c.expect("(");
  t.pos = c.triple("Pos");
  c.expect(",");
  t.rot = c.triple("Rot");
  c.expect(")");
  c.finish();
  return t;
}

std::string Transform::to_string() const {
  auto v3 = [](const Vec3& v) {
    return format_number(v[0]) + "," + format_number(v[1]) + "," + format_number(v[2]);
  };
  return "(Pos(" + v3(pos) + "), Rot(" + v3(rot) + "))";
}

Transform Transform::normalized() const {
  Transform t = *this;
  for (double& r : t.rot) r = std::fmod(r, 360.0);
  return t;
}

std::string_view to_string(ActionType t) {
  return t == ActionType::Discrete ? "Discrete" : "Continuous";
}

std::string_view to_string(RealityType t) {
  return t == RealityType::Physical ? "Physical" : "Virtual";
}

std::string_view to_string(Virtuality v) {
  switch (v) {
    case Virtuality::AR: return "AR";
    case Virtuality::VR: return "VR";
    case Virtuality::MR: return "MR";
  }
  return "VR";
}

std::string_view to_string(AssetKind k) {
  switch (k) {
    case AssetKind::ReferentModel: return "ReferentModel";
    case AssetKind::ReferentImage: return "ReferentImage";
    case AssetKind::ContextCloud: return "ContextCloud";
    case AssetKind::ContextRGB: return "ContextRGB";
    case AssetKind::ContextDepth: return "ContextDepth";
    case AssetKind::CameraParams: return "CameraParams";
    case AssetKind::AudioTranscript: return "AudioTranscript";
    case AssetKind::AudioClip: return "AudioClip";
  }
  return "ReferentModel";
}

ActionType parse_action_type(std::string_view s) {
  return parse_enum(s, std::array{ActionType::Discrete, ActionType::Continuous}, "action type");
}

RealityType parse_reality_type(std::string_view s) {
  return parse_enum(s, std::array{RealityType::Physical, RealityType::Virtual}, "reality type");
}

Virtuality parse_virtuality(std::string_view s) {
  return parse_enum(s, std::array{Virtuality::AR, Virtuality::VR, Virtuality::MR}, "virtuality");
}

AssetKind parse_asset_kind(std::string_view s) {
  return parse_enum(s,
                    std::array{AssetKind::ReferentModel, AssetKind::ReferentImage,
                               AssetKind::ContextCloud, AssetKind::ContextRGB,
                               AssetKind::ContextDepth, AssetKind::CameraParams,
                               AssetKind::AudioTranscript, AssetKind::AudioClip},
                    "asset kind");
}

std::string_view file_extension(AssetKind k) {
  switch (k) {
    case AssetKind::ReferentModel:
    case AssetKind::ContextCloud: return "glb";
    case AssetKind::ReferentImage:
    case AssetKind::ContextRGB:
    case AssetKind::ContextDepth: return "png";
    case AssetKind::CameraParams: return "json";
    case AssetKind::AudioTranscript: return "txt";
    case AssetKind::AudioClip: return "wav";
  }
  return "bin";
}

bool ProcessingState::has(std::string_view step) const {
  return std::find(done.begin(), done.end(), step) != done.end();
}

const AssetRef* ActionRecord::find_referent(AssetKind kind) const {
  for (const auto& a : referent) {
    if (a.kind == kind) return &a;
  }
  return nullptr;
}

std::vector<const AssetRef*> ActionRecord::context_assets(AssetKind kind) const {
  std::vector<const AssetRef*> out;
  for (const auto& a : context) {
    if (a.kind == kind) out.push_back(&a);
  }
  return out;
}

int alias_number(std::string_view user) {
  constexpr std::string_view prefix = "User";
  if (user.size() <= prefix.size() || user.substr(0, prefix.size()) != prefix) return 0;
  auto digits = user.substr(prefix.size());
  if (digits[0] == '0') return 0;
  int n = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return 0;
  return n;
}

bool is_user_alias(std::string_view user) { return alias_number(user) > 0; }

}  // namespace exr
