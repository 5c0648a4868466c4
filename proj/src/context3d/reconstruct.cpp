#include "exr/context3d/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

void check_dimensions(const ContextCapture& c) {
  const auto& p = c.params;
  if (c.rgb.width != p.width || c.rgb.height != p.height) {
    throw Error(ErrorCode::DimensionMismatch, "rgb is " + std::to_string(c.rgb.width) + "x" +
                                                  std::to_string(c.rgb.height) + ", camera expects " +
                                                  std::to_string(p.width) + "x" + std::to_string(p.height));
  }
  if (c.depth.width != p.width || c.depth.height != p.height) {
    throw Error(ErrorCode::DimensionMismatch, "depth is " + std::to_string(c.depth.width) + "x" +
                                                  std::to_string(c.depth.height) + ", camera expects " +
                                                  std::to_string(p.width) + "x" + std::to_string(p.height));
  }
}

}  // namespace

ContextCapture downsample_capture(const ContextCapture& in, double reduction) {
  if (!(reduction >= 0.0 && reduction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "reduction must lie in [0, 1]");
  }
  check_dimensions(in);
  const int w = in.params.width, h = in.params.height;
  const int w2 = static_cast<int>(std::lround(w * (1.0 - reduction)));
  const int h2 = static_cast<int>(std::lround(h * (1.0 - reduction)));
  if (w2 < 1 || h2 < 1) {
    throw Error(ErrorCode::DegenerateSize, "output would be " + std::to_string(w2) + "x" + std::to_string(h2));
  }
  if (w2 == w && h2 == h) return in;

  const double sx = static_cast<double>(w2) / w, sy = static_cast<double>(h2) / h;
  ContextCapture out;
  out.source_reality = in.source_reality;
  out.params = in.params;
  out.params.width = w2;
  out.params.height = h2;
  out.params.fx = in.params.fx * sx;
  out.params.cx = in.params.cx * sx;
  out.params.fy = in.params.fy * sy;
  out.params.cy = in.params.cy * sy;

  // Depth: the source pixel whose ray matches the output pixel's ray.
  out.depth = DepthImage(w2, h2);
  for (int v = 0; v < h2; ++v) {
    int sv = std::min(h - 1, static_cast<int>(std::lround(v / sy)));
    for (int u = 0; u < w2; ++u) {
      int su = std::min(w - 1, static_cast<int>(std::lround(u / sx)));
      out.depth.at(u, v) = in.depth.at(su, sv);
    }
  }

  // RGB: area average over the source footprint, partial pixels weighted.
  out.rgb = RgbImage(w2, h2);
  const double fw = 1.0 / sx, fh = 1.0 / sy;
  for (int v = 0; v < h2; ++v) {
    const double y0 = v * fh, y1 = std::min<double>(h, (v + 1) * fh);
    for (int u = 0; u < w2; ++u) {
      const double x0 = u * fw, x1 = std::min<double>(w, (u + 1) * fw);
      double acc[3] = {0, 0, 0}, area = 0;
      for (int y = static_cast<int>(y0); y < h && y < y1; ++y) {
        double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = static_cast<int>(x0); x < w && x < x1; ++x) {
          double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          const auto* px = in.rgb.at(x, y);
          for (int c = 0; c < 3; ++c) acc[c] += px[c] * wx * wy;
          area += wx * wy;
        }
      }
      auto* dst = out.rgb.at(u, v);
      for (int c = 0; c < 3; ++c) {
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / area), 0L, 255L));
      }
    }
  }
  return out;
}

std::array<double, 3> backproject_pixel(const CameraParams& k, double u, double v, double depth_m) {
  return {depth_m * (u - k.cx) / k.fx, depth_m * (v - k.cy) / k.fy, depth_m};
}

std::array<double, 3> camera_to_world(const CameraParams& k, const std::array<double, 3>& p) {
  const auto& m = k.cam_to_world;
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + m[3],
          m[4] * p[0] + m[5] * p[1] + m[6] * p[2] + m[7],
          m[8] * p[0] + m[9] * p[1] + m[10] * p[2] + m[11]};
}

std::optional<std::array<double, 3>> project(const CameraParams& k, const std::array<double, 3>& world) {
  const auto& m = k.cam_to_world;
  // Inverse of a rigid transform: R^T (x - t).
  double d[3] = {world[0] - m[3], world[1] - m[7], world[2] - m[11]};
  double x = m[0] * d[0] + m[4] * d[1] + m[8] * d[2];
  double y = m[1] * d[0] + m[5] * d[1] + m[9] * d[2];
  double z = m[2] * d[0] + m[6] * d[1] + m[10] * d[2];
  if (!(z > 0)) return std::nullopt;
  return std::array<double, 3>{k.fx * x / z + k.cx, k.fy * y / z + k.cy, z};
}

ContextCloud backproject(const ContextCapture& capture, const BackprojectOptions& opts) {
  if (opts.stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  capture.params.validate();
  check_dimensions(capture);
  const auto& k = capture.params;
  ContextCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>((k.width + opts.stride - 1) / opts.stride) *
                       static_cast<std::size_t>((k.height + opts.stride - 1) / opts.stride));
  for (int v = 0; v < k.height; v += opts.stride) {
    for (int u = 0; u < k.width; u += opts.stride) {
      std::uint16_t mm = capture.depth.at(u, v);
      if (mm == 0) continue;
      auto w = camera_to_world(k, backproject_pixel(k, u, v, mm / 1000.0));
      if (opts.y_down_world) {
        w[1] = -w[1];
        w[2] = -w[2];
      }
      const auto* px = capture.rgb.at(u, v);
      cloud.points.push_back({{static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2])},
                              {px[0], px[1], px[2]}});
    }
  }
  return cloud;
}

ContextCloud merge_clouds(std::span<const ContextCloud> clouds, double voxel) {
  if (!(voxel > 0)) throw Error(ErrorCode::InvalidArgument, "voxel must be positive");
  ContextCloud out;
  if (!clouds.empty()) out.source_action_id = clouds.front().source_action_id;
  std::unordered_set<VoxelKey, VoxelHash> occupied;
  for (const auto& c : clouds) {
    for (const auto& p : c.points) {
      VoxelKey key{static_cast<std::int64_t>(std::floor(p.xyz[0] / voxel)),
                   static_cast<std::int64_t>(std::floor(p.xyz[1] / voxel)),
                   static_cast<std::int64_t>(std::floor(p.xyz[2] / voxel))};
      if (occupied.insert(key).second) out.points.push_back(p);
    }
  }
  return out;
}

std::vector<int> capture_indices(const ActionRecord& r) {
  std::set<int> idx;
  for (const auto& a : r.context) {
    if (a.kind == AssetKind::ContextRGB || a.kind == AssetKind::ContextDepth ||
        a.kind == AssetKind::CameraParams) {
      idx.insert(a.capture.value_or(0));
    }
  }
  return {idx.begin(), idx.end()};
}

ContextCapture load_capture(const SessionStore& store, const ActionRecord& r, int index) {
  const AssetRef *rgb = nullptr, *depth = nullptr, *params = nullptr;
  for (const auto& a : r.context) {
    if (a.capture.value_or(0) != index) continue;
    if (a.kind == AssetKind::ContextRGB) rgb = &a;
    if (a.kind == AssetKind::ContextDepth) depth = &a;
    if (a.kind == AssetKind::CameraParams) params = &a;
  }
  if (!rgb || !depth || !params) {
    throw Error(ErrorCode::NotFound, "capture " + std::to_string(index) + " of " + r.id +
                                         " lacks rgb, depth or camera params");
  }
  ContextCapture c;
  c.rgb = decode_png_rgb(store.read_asset(*rgb));
  c.depth = decode_png_depth(store.read_asset(*depth));
  auto text = store.read_asset(*params);
  c.params = parse_camera_params(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
  c.source_reality = r.context_type;
  return c;
}

ReconstructResult reconstruct_context(const ActionRecord& r, SessionStore& store,
                                      const ReconstructOptions& opts) {
  ReconstructResult result{r, std::nullopt, {}};
  auto indices = capture_indices(r);
  if (indices.empty()) {
    result.diagnostics.push_back("no context captures");
    return result;
  }
  std::vector<ContextCloud> clouds;
  for (int i : indices) {
    try {
      clouds.push_back(backproject(load_capture(store, r, i), opts.backproject));
    } catch (const Error& e) {
      result.diagnostics.push_back("capture " + std::to_string(i) + ": " + e.what());
    }
  }
  if (clouds.empty()) return result;

  ContextCloud merged = merge_clouds(clouds, opts.voxel);
  merged.source_action_id = r.id;
  auto ref = store.add_asset(AssetKind::ContextCloud, r.id + "_cloud", encode_point_cloud_glb(merged));
  auto& ctx = result.record.context;
  ctx.erase(std::remove_if(ctx.begin(), ctx.end(),
                           [](const AssetRef& a) { return a.kind == AssetKind::ContextCloud; }),
            ctx.end());
  ctx.push_back(ref);
  result.cloud = std::move(merged);
  return result;
}

}  // namespace exr
