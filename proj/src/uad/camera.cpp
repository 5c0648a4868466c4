#include "exr/uad/camera.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "exr/uad/error.hpp"

namespace exr {

void CameraParams::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidCamera, why); };
  if (!(fx > 0) || !(fy > 0)) fail("focal lengths must be positive");
  if (width <= 0 || height <= 0) fail("resolution must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height)) fail("principal point outside image");
  for (double v : cam_to_world) {
    if (!std::isfinite(v)) fail("non-finite extrinsics");
  }
  const auto& m = cam_to_world;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0;
      for (int k = 0; k < 3; ++k) dot += m[k * 4 + i] * m[k * 4 + j];
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-6) fail("rotation block is not orthonormal");
    }
  }
  if (m[12] != 0 || m[13] != 0 || m[14] != 0 || m[15] != 1) fail("last row must be (0,0,0,1)");
}

std::string dump_camera_params(const CameraParams& p) {
  nlohmann::ordered_json j;
  j["fx"] = p.fx;
  j["fy"] = p.fy;
  j["cx"] = p.cx;
  j["cy"] = p.cy;
  j["width"] = p.width;
  j["height"] = p.height;
  j["cam_to_world"] = p.cam_to_world;
  return j.dump();
}

CameraParams parse_camera_params(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::InvalidCamera, "camera params are not a JSON object");
  }
  try {
    CameraParams p;
    p.fx = j.at("fx").get<double>();
    p.fy = j.at("fy").get<double>();
    p.cx = j.at("cx").get<double>();
    p.cy = j.at("cy").get<double>();
    p.width = j.at("width").get<int>();
    p.height = j.at("height").get<int>();
    const auto& m = j.at("cam_to_world");
    if (!m.is_array() || m.size() != 16) throw Error(ErrorCode::InvalidCamera, "cam_to_world needs 16 numbers");
    for (std::size_t i = 0; i < 16; ++i) p.cam_to_world[i] = m[i].get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidCamera, e.what());
  }
}

}  // namespace exr
