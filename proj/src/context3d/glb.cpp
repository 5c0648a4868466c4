#include "exr/context3d/glb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

using json = nlohmann::json;

constexpr int kFloat = 5126;
constexpr int kUnsignedByte = 5121;
constexpr int kUnsignedShort = 5123;
constexpr int kUnsignedInt = 5125;
constexpr int kArrayBuffer = 34962;
constexpr int kElementArrayBuffer = 34963;
constexpr int kModePoints = 0;
constexpr int kModeTriangles = 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float get_f32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t bits = get_u32(b, at);
  float f = 0;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::vector<std::uint8_t> assemble(const json& doc, std::vector<std::uint8_t> bin) {
  std::string text = doc.dump();
  while (text.size() % 4 != 0) text.push_back(' ');
  while (bin.size() % 4 != 0) bin.push_back(0);

  std::uint32_t total = 12 + 8 + static_cast<std::uint32_t>(text.size());
  if (!bin.empty()) total += 8 + static_cast<std::uint32_t>(bin.size());

  std::vector<std::uint8_t> out;
  out.reserve(total);
  put_u32(out, kGlbMagic);
  put_u32(out, 2);
  put_u32(out, total);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_u32(out, kChunkJson);
  out.insert(out.end(), text.begin(), text.end());
  if (!bin.empty()) {
    put_u32(out, static_cast<std::uint32_t>(bin.size()));
    put_u32(out, kChunkBin);
    out.insert(out.end(), bin.begin(), bin.end());
  }
  return out;
}

json asset_header() { return {{"version", "2.0"}, {"generator", "exr"}}; }

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedGlb, why); }

struct AccessorView {
  std::size_t offset = 0;
  std::size_t stride = 0;
  std::size_t count = 0;
  int component = 0;
  int components = 0;
  bool normalized = false;
};

int component_count(const std::string& type) {
  if (type == "SCALAR") return 1;
  if (type == "VEC2") return 2;
  if (type == "VEC3") return 3;
  if (type == "VEC4") return 4;
  malformed("unsupported accessor type " + type);
}

std::size_t component_size(int component) {
  switch (component) {
    case kFloat:
    case kUnsignedInt: return 4;
    case kUnsignedShort: return 2;
    case kUnsignedByte: return 1;
    default: malformed("unsupported component type " + std::to_string(component));
  }
}

AccessorView resolve_accessor(const GlbContainer& c, std::size_t index) {
  const auto& doc = c.document;
  if (!doc.contains("accessors") || index >= doc["accessors"].size()) malformed("accessor out of range");
  const auto& acc = doc["accessors"][index];
  AccessorView v;
  v.count = acc.at("count").get<std::size_t>();
  v.component = acc.at("componentType").get<int>();
  v.components = component_count(acc.at("type").get<std::string>());
  v.normalized = acc.value("normalized", false);
  std::size_t elem = component_size(v.component) * static_cast<std::size_t>(v.components);
  if (!acc.contains("bufferView")) {
    if (v.count != 0) malformed("sparse or implicit accessors are not supported");
    return v;
  }
  const auto& view = doc.at("bufferViews").at(acc["bufferView"].get<std::size_t>());
  if (view.value("buffer", 0) != 0) malformed("only the GLB-stored buffer is supported");
  std::size_t view_offset = view.value("byteOffset", std::size_t{0});
  std::size_t view_length = view.at("byteLength").get<std::size_t>();
  v.stride = view.value("byteStride", elem);
  v.offset = view_offset + acc.value("byteOffset", std::size_t{0});
  if (v.count > 0) {
    std::size_t last = v.offset + (v.count - 1) * v.stride + elem;
    if (last > view_offset + view_length || last > c.bin.size()) malformed("accessor exceeds buffer");
  }
  return v;
}

}  // namespace

GlbContainer parse_glb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20) malformed("shorter than a GLB header");
  if (get_u32(bytes, 0) != kGlbMagic) malformed("bad magic");
  if (get_u32(bytes, 4) != 2) malformed("unsupported container version");
  if (get_u32(bytes, 8) != bytes.size()) malformed("header length does not match size");

  GlbContainer c;
  std::size_t at = 12;
  bool have_json = false;
  while (at < bytes.size()) {
    if (at + 8 > bytes.size()) malformed("truncated chunk header");
    std::uint32_t length = get_u32(bytes, at);
    std::uint32_t type = get_u32(bytes, at + 4);
    if (length % 4 != 0) malformed("chunk length not 4-byte aligned");
    if (at + 8 + length > bytes.size()) malformed("chunk exceeds file");
    auto body = bytes.subspan(at + 8, length);
    if (!have_json) {
      if (type != kChunkJson) malformed("first chunk must be JSON");
      c.document = json::parse(body.begin(), body.end(), nullptr, false);
      if (c.document.is_discarded()) malformed("JSON chunk does not parse");
      have_json = true;
    } else if (type == kChunkBin && c.bin.empty()) {
      c.bin.assign(body.begin(), body.end());
    }
    at += 8 + length;
  }
  if (!have_json) malformed("missing JSON chunk");
  return c;
}

std::vector<std::uint8_t> encode_point_cloud_glb(const ContextCloud& cloud) {
  const std::size_t n = cloud.points.size();
  json doc;
  doc["asset"] = asset_header();
  doc["scene"] = 0;
  doc["scenes"] = json::array({{{"nodes", {0}}}});
  json node = {{"mesh", 0}, {"name", "context_cloud"}};
  if (!cloud.source_action_id.empty()) node["extras"] = {{"sourceActionId", cloud.source_action_id}};
  doc["nodes"] = json::array({node});
  doc["meshes"] = json::array(
      {{{"primitives", json::array({{{"attributes", {{"POSITION", 0}, {"COLOR_0", 1}}},
                                      {"mode", kModePoints}}})}}});

  json position = {{"componentType", kFloat}, {"count", n}, {"type", "VEC3"}};
  json color = {{"componentType", kUnsignedByte}, {"normalized", true}, {"count", n}, {"type", "VEC3"}};

  std::vector<std::uint8_t> bin;
  if (n > 0) {
    bin.reserve(n * 16);
    std::array<float, 3> lo{std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                            std::numeric_limits<float>::max()};
    std::array<float, 3> hi{-lo[0], -lo[1], -lo[2]};
    for (const auto& p : cloud.points) {
      for (int i = 0; i < 3; ++i) {
        if (!std::isfinite(p.xyz[i])) throw Error(ErrorCode::SerializationFailure, "non-finite point");
        put_f32(bin, p.xyz[i]);
        lo[i] = std::min(lo[i], p.xyz[i]);
        hi[i] = std::max(hi[i], p.xyz[i]);
      }
    }
    for (const auto& p : cloud.points) {
      bin.insert(bin.end(), {p.rgb[0], p.rgb[1], p.rgb[2], 0});
    }
    doc["buffers"] = json::array({{{"byteLength", bin.size()}}});
    doc["bufferViews"] = json::array(
        {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", n * 12}, {"target", kArrayBuffer}},
         {{"buffer", 0},
          {"byteOffset", n * 12},
          {"byteLength", n * 4},
          {"byteStride", 4},
          {"target", kArrayBuffer}}});
    position["bufferView"] = 0;
    position["min"] = lo;
    position["max"] = hi;
    color["bufferView"] = 1;
  }
  doc["accessors"] = json::array({position, color});
  return assemble(doc, std::move(bin));
}

ContextCloud decode_point_cloud_glb(std::span<const std::uint8_t> bytes) {
  GlbContainer c = parse_glb(bytes);
  try {
    const auto& doc = c.document;
    const auto& prim = doc.at("meshes").at(0).at("primitives").at(0);
    if (prim.value("mode", kModeTriangles) != kModePoints) {
      throw Error(ErrorCode::UnsupportedPrimitive, "context assets must be POINTS primitives");
    }
    const auto& attrs = prim.at("attributes");
    AccessorView pos = resolve_accessor(c, attrs.at("POSITION").get<std::size_t>());
    if (pos.component != kFloat || pos.components != 3) malformed("POSITION must be float32 VEC3");

    ContextCloud cloud;
    cloud.points.resize(pos.count);
    for (std::size_t i = 0; i < pos.count; ++i) {
      for (int k = 0; k < 3; ++k) {
        cloud.points[i].xyz[k] = get_f32(c.bin, pos.offset + i * pos.stride + 4 * static_cast<std::size_t>(k));
      }
    }
    if (attrs.contains("COLOR_0")) {
      AccessorView col = resolve_accessor(c, attrs["COLOR_0"].get<std::size_t>());
      if (col.count != pos.count || col.components < 3) malformed("COLOR_0 does not match POSITION");
      for (std::size_t i = 0; i < col.count; ++i) {
        std::size_t base = col.offset + i * col.stride;
        for (int k = 0; k < 3; ++k) {
          std::uint8_t v = 0;
          if (col.component == kUnsignedByte) {
            v = c.bin[base + static_cast<std::size_t>(k)];
          } else if (col.component == kUnsignedShort) {
            std::size_t at = base + 2 * static_cast<std::size_t>(k);
            v = static_cast<std::uint8_t>((c.bin[at] | (c.bin[at + 1] << 8)) >> 8);
          } else {
            float f = get_f32(c.bin, base + 4 * static_cast<std::size_t>(k));
            v = static_cast<std::uint8_t>(std::lround(std::clamp(f, 0.0f, 1.0f) * 255.0f));
          }
          cloud.points[i].rgb[k] = v;
        }
      }
    } else {
      for (auto& p : cloud.points) p.rgb = {255, 255, 255};
    }
    const auto& node = doc.at("nodes").at(0);
    if (node.contains("extras")) cloud.source_action_id = node["extras"].value("sourceActionId", "");
    return cloud;
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

std::vector<std::uint8_t> encode_mesh_glb(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.positions.size();
  if (!mesh.normals.empty() && mesh.normals.size() != nv) {
    throw Error(ErrorCode::SerializationFailure, "normals must match positions");
  }
  std::vector<std::uint8_t> bin;
  bin.reserve(nv * 24 + mesh.indices.size() * 4);
  std::array<float, 3> lo{std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                          std::numeric_limits<float>::max()};
  std::array<float, 3> hi{-lo[0], -lo[1], -lo[2]};
  for (const auto& p : mesh.positions) {
    for (int i = 0; i < 3; ++i) {
      put_f32(bin, p[i]);
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  std::size_t normal_offset = bin.size();
  for (const auto& nrm : mesh.normals) {
    for (float f : nrm) put_f32(bin, f);
  }
  std::size_t index_offset = bin.size();
  for (std::uint32_t idx : mesh.indices) {
    if (idx >= nv) throw Error(ErrorCode::SerializationFailure, "index out of range");
    put_u32(bin, idx);
  }

  json doc;
  doc["asset"] = asset_header();
  doc["scene"] = 0;
  doc["scenes"] = json::array({{{"nodes", {0}}}});
  doc["nodes"] = json::array({{{"mesh", 0}, {"name", mesh.name}}});
  doc["materials"] = json::array(
      {{{"name", mesh.name + "_material"},
        {"pbrMetallicRoughness", {{"baseColorFactor", mesh.base_color}, {"metallicFactor", 0.0}}}}});

  json attributes = {{"POSITION", 0}};
  json accessors = json::array();
  json views = json::array();
  views.push_back({{"buffer", 0}, {"byteOffset", 0}, {"byteLength", nv * 12}, {"target", kArrayBuffer}});
  accessors.push_back({{"bufferView", 0}, {"componentType", kFloat}, {"count", nv}, {"type", "VEC3"},
                       {"min", lo}, {"max", hi}});
  if (!mesh.normals.empty()) {
    views.push_back({{"buffer", 0}, {"byteOffset", normal_offset}, {"byteLength", nv * 12},
                     {"target", kArrayBuffer}});
    accessors.push_back({{"bufferView", views.size() - 1}, {"componentType", kFloat}, {"count", nv},
                         {"type", "VEC3"}});
    attributes["NORMAL"] = accessors.size() - 1;
  }
  json primitive = {{"attributes", attributes}, {"material", 0}, {"mode", kModeTriangles}};
  if (!mesh.indices.empty()) {
    views.push_back({{"buffer", 0}, {"byteOffset", index_offset}, {"byteLength", mesh.indices.size() * 4},
                     {"target", kElementArrayBuffer}});
    accessors.push_back({{"bufferView", views.size() - 1}, {"componentType", kUnsignedInt},
                         {"count", mesh.indices.size()}, {"type", "SCALAR"}});
    primitive["indices"] = accessors.size() - 1;
  }
  doc["meshes"] = json::array({{{"name", mesh.name}, {"primitives", json::array({primitive})}}});
  doc["buffers"] = json::array({{{"byteLength", bin.size()}}});
  doc["bufferViews"] = views;
  doc["accessors"] = accessors;
  return assemble(doc, std::move(bin));
}

}  // namespace exr
