#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exr/context3d/capture.hpp"
#include "exr/context3d/glb.hpp"

namespace exr::sim {

using Vec3 = std::array<double, 3>;
using Color = std::array<std::uint8_t, 3>;

enum class PrimitiveKind { Plane, Sphere, Box };

/// Analytic scene element. Planes may be clipped to an axis-aligned box
/// (`min`/`max`) to form finite panels; boxes are axis-aligned.
struct Primitive {
  std::string name;
  PrimitiveKind kind = PrimitiveKind::Plane;
  Vec3 point{0, 0, 0};   // plane: any point on it; sphere: center
  Vec3 normal{0, 0, 1};  // plane only
  double radius = 0;     // sphere only
  std::optional<Vec3> min, max;  // box extents, or plane clip bounds
  Color color{200, 200, 200};
};

struct Scene {
  std::vector<Primitive> primitives;
  Color miss_color{0, 0, 0};
};

struct Hit {
  double t = 0;  // along the un-normalized ray, equals camera z
  std::size_t primitive = 0;
};

/// Nearest intersection of `origin + t * dir` with t > 0.
std::optional<Hit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir);

/// Casts one ray per pixel through integer pixel coordinates. Depth holds the
/// camera-frame z of the nearest hit in millimeters, rounded; misses and
/// hits beyond 65.535 m are 0.
ContextCapture render_capture(const Scene& scene, const CameraParams& params);

/// Camera at `eye` looking along one world axis with the image +Y mapped to
/// world -Y (upright). `axis` is one of "+x","-x","+z","-z".
CameraParams axis_camera(const Vec3& eye, const std::string& axis, int width = 480, int height = 270,
                         double focal = 300.0);

/// Closed triangle meshes used as virtual referent models.
TriangleMesh uv_sphere_mesh(const std::string& name, double radius, int rings, int segments,
                            const std::array<float, 4>& color);
TriangleMesh box_mesh(const std::string& name, const Vec3& half_extents, const std::array<float, 4>& color);

nlohmann::json to_json(const Primitive& p);
nlohmann::json to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace exr::sim
