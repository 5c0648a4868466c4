#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace exr {

struct CloudPoint {
  std::array<float, 3> xyz{};
  std::array<std::uint8_t, 3> rgb{};
  friend bool operator==(const CloudPoint&, const CloudPoint&) = default;
};

/// Colored point cloud in world meters. Coordinates are float32 so that a GLB
/// round trip is exact.
struct ContextCloud {
  std::vector<CloudPoint> points;
  std::string source_action_id;
  friend bool operator==(const ContextCloud&, const ContextCloud&) = default;
};

/// Indexed triangle mesh with a single base color, used for virtual referents.
struct TriangleMesh {
  std::string name;
  std::vector<std::array<float, 3>> positions;
  std::vector<std::array<float, 3>> normals;
  std::vector<std::uint32_t> indices;
  std::array<float, 4> base_color{1, 1, 1, 1};
};

/// Split container: the JSON chunk parsed, and the BIN chunk bytes.
struct GlbContainer {
  nlohmann::json document;
  std::vector<std::uint8_t> bin;
};

inline constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
inline constexpr std::uint32_t kChunkJson = 0x4E4F534A;  // "JSON"
inline constexpr std::uint32_t kChunkBin = 0x004E4942;   // "BIN\0"

/// One POINTS primitive with POSITION (float32 VEC3) and COLOR_0
/// (normalized unsigned byte VEC3, 4-byte stride).
std::vector<std::uint8_t> encode_point_cloud_glb(const ContextCloud& cloud);
/// Throws MalformedGlb, or UnsupportedPrimitive when the first primitive is not POINTS.
ContextCloud decode_point_cloud_glb(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_mesh_glb(const TriangleMesh& mesh);

/// Header/chunk parsing shared by the decoders. Throws MalformedGlb.
GlbContainer parse_glb(std::span<const std::uint8_t> bytes);

}  // namespace exr
