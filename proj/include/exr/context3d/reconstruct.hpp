#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exr/context3d/capture.hpp"
#include "exr/context3d/glb.hpp"
#include "exr/uad/session.hpp"

namespace exr {

/// Shrinks a capture by `reduction` (0.75 turns 1920x1080 into 480x270).
/// RGB is box-filtered with fractional coverage; depth is nearest-neighbor so
/// the invalid value 0 is never blended. Intrinsics are scaled by W'/W and
/// H'/H. Throws DegenerateSize when an output side would be < 1.
ContextCapture downsample_capture(const ContextCapture& in, double reduction);

/// Camera-frame point for pixel (u, v) at metric depth `depth_m`.
std::array<double, 3> backproject_pixel(const CameraParams& k, double u, double v, double depth_m);

/// World point to (u, v, camera z). nullopt when z <= 0.
std::optional<std::array<double, 3>> project(const CameraParams& k, const std::array<double, 3>& world);

std::array<double, 3> camera_to_world(const CameraParams& k, const std::array<double, 3>& p);

struct BackprojectOptions {
  int stride = 2;
  /// Source world is Y-down (x, -y, -z relative to ours); convert on output.
  bool y_down_world = false;
};

/// One point per sampled pixel (every `stride`-th row and column starting at
/// 0) with nonzero depth. Throws DimensionMismatch, InvalidCamera,
/// InvalidArgument (stride < 1).
ContextCloud backproject(const ContextCapture& capture, const BackprojectOptions& opts = {});

/// Keeps the first point that lands in each occupied voxel, scanning the
/// inputs in order. Throws InvalidArgument when voxel <= 0.
ContextCloud merge_clouds(std::span<const ContextCloud> clouds, double voxel);

/// Decodes capture `index` of a record (its RGB, depth and camera params
/// sidecars). Throws NotFound, MalformedPng, MalformedRecord.
ContextCapture load_capture(const SessionStore& store, const ActionRecord& r, int index);

/// Distinct capture indices present on a record, ascending.
std::vector<int> capture_indices(const ActionRecord& r);

struct ReconstructOptions {
  BackprojectOptions backproject;
  double voxel = 0.02;
};

struct ReconstructResult {
  ActionRecord record;
  std::optional<ContextCloud> cloud;
  std::vector<std::string> diagnostics;  // one per failed capture, or the no-op note
};

/// Back-projects every capture of `r`, merges them and registers the cloud as
/// a ContextCloud asset in `store`. Raw captures stay attached. A capture
/// that fails to decode is reported and skipped.
ReconstructResult reconstruct_context(const ActionRecord& r, SessionStore& store,
                                      const ReconstructOptions& opts = {});

}  // namespace exr
