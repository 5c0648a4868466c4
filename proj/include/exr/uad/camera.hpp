#pragma once

#include <array>
#include <string>
#include <string_view>

namespace exr {

/// Pinhole intrinsics plus a row-major 4x4 camera-to-world rigid transform.
/// Camera frame: +X right, +Y down, +Z forward. Units: pixels and meters.
struct CameraParams {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;
  std::array<double, 16> cam_to_world{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  /// Throws InvalidCamera when an invariant fails (positive focal lengths,
  /// principal point inside the image, orthonormal rotation within 1e-6).
  void validate() const;

  friend bool operator==(const CameraParams&, const CameraParams&) = default;
};

/// `{ "fx","fy","cx","cy","width","height","cam_to_world":[16 numbers] }`
std::string dump_camera_params(const CameraParams& p);
CameraParams parse_camera_params(std::string_view text);

}  // namespace exr
