#pragma once

#include "exr/uad/camera.hpp"
#include "exr/uad/image.hpp"
#include "exr/uad/record.hpp"

namespace exr {

/// Raw RGB-D snapshot with the camera that took it. Depth is metric (mm).
struct ContextCapture {
  RgbImage rgb;
  DepthImage depth;
  CameraParams params;
  RealityType source_reality = RealityType::Virtual;
};

}  // namespace exr
