#include "exr/sim/scene.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "exr/context3d/reconstruct.hpp"
#include "exr/uad/error.hpp"

namespace exr::sim {

namespace {

constexpr double kEps = 1e-9;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

bool inside_bounds(const Primitive& p, const Vec3& x) {
  if (!p.min || !p.max) return true;
  for (int i = 0; i < 3; ++i) {
    if (x[i] < (*p.min)[i] - kEps || x[i] > (*p.max)[i] + kEps) return false;
  }
  return true;
}

std::optional<double> hit_plane(const Primitive& p, const Vec3& o, const Vec3& d) {
  double denom = dot(p.normal, d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  double t = dot(p.normal, sub(p.point, o)) / denom;
  if (t <= kEps) return std::nullopt;
  Vec3 x{o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]};
  if (!inside_bounds(p, x)) return std::nullopt;
  return t;
}

std::optional<double> hit_sphere(const Primitive& p, const Vec3& o, const Vec3& d) {
  Vec3 oc = sub(o, p.point);
  double a = dot(d, d);
  double half_b = dot(oc, d);
  double c = dot(oc, oc) - p.radius * p.radius;
  double disc = half_b * half_b - a * c;
  if (disc < 0) return std::nullopt;
  double s = std::sqrt(disc);
  // Numerically stable pair of roots.
  double q = -(half_b + std::copysign(s, half_b));
  double t0 = q / a, t1 = (q != 0) ? c / q : t0;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > kEps) return t0;
  if (t1 > kEps) return t1;
  return std::nullopt;
}

std::optional<double> hit_box(const Primitive& p, const Vec3& o, const Vec3& d) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < (*p.min)[i] || o[i] > (*p.max)[i]) return std::nullopt;
      continue;
    }
    double a = ((*p.min)[i] - o[i]) / d[i];
    double b = ((*p.max)[i] - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    tmin = std::max(tmin, a);
    tmax = std::min(tmax, b);
  }
  if (tmax < tmin) return std::nullopt;
  if (tmin > kEps) return tmin;
  if (tmax > kEps) return tmax;
  return std::nullopt;
}

std::string kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Plane: return "plane";
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
  }
  return "plane";
}

}  // namespace

std::optional<Hit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const auto& p = scene.primitives[i];
    std::optional<double> t;
    switch (p.kind) {
      case PrimitiveKind::Plane: t = hit_plane(p, origin, dir); break;
      case PrimitiveKind::Sphere: t = hit_sphere(p, origin, dir); break;
      case PrimitiveKind::Box: t = hit_box(p, origin, dir); break;
    }
    if (t && (!best || *t < best->t)) best = Hit{*t, i};
  }
  return best;
}

ContextCapture render_capture(const Scene& scene, const CameraParams& k) {
  k.validate();
  ContextCapture out;
  out.params = k;
  out.rgb = RgbImage(k.width, k.height);
  out.depth = DepthImage(k.width, k.height);
  const auto& m = k.cam_to_world;
  Vec3 origin{m[3], m[7], m[11]};
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // Camera-frame direction with z = 1, so the hit parameter is camera z.
      Vec3 c{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      Vec3 dir{m[0] * c[0] + m[1] * c[1] + m[2] * c[2], m[4] * c[0] + m[5] * c[1] + m[6] * c[2],
               m[8] * c[0] + m[9] * c[1] + m[10] * c[2]};
      auto hit = intersect(scene, origin, dir);
      auto* px = out.rgb.at(u, v);
      if (!hit) {
        px[0] = scene.miss_color[0];
        px[1] = scene.miss_color[1];
        px[2] = scene.miss_color[2];
        continue;
      }
      const auto& col = scene.primitives[hit->primitive].color;
      px[0] = col[0];
      px[1] = col[1];
      px[2] = col[2];
      double mm = std::round(hit->t * 1000.0);
      out.depth.at(u, v) = (mm >= 1 && mm <= 65535) ? static_cast<std::uint16_t>(mm) : 0;
    }
  }
  return out;
}

CameraParams axis_camera(const Vec3& eye, const std::string& axis, int width, int height, double focal) {
  Vec3 f;
  if (axis == "+x") f = {1, 0, 0};
  else if (axis == "-x") f = {-1, 0, 0};
  else if (axis == "+z") f = {0, 0, 1};
  else if (axis == "-z") f = {0, 0, -1};
  else throw Error(ErrorCode::InvalidArgument, "camera axis must be +x, -x, +z or -z");
  Vec3 down{0, -1, 0};
  Vec3 right = cross(down, f);
  CameraParams k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = focal;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.cam_to_world = {right[0], down[0], f[0], eye[0], right[1], down[1], f[1], eye[1],
                    right[2], down[2], f[2], eye[2], 0,        0,       0,    1};
  return k;
}

TriangleMesh uv_sphere_mesh(const std::string& name, double radius, int rings, int segments,
                            const std::array<float, 4>& color) {
  TriangleMesh m;
  m.name = name;
  m.base_color = color;
  for (int r = 0; r <= rings; ++r) {
    double theta = std::numbers::pi * r / rings;
    for (int s = 0; s <= segments; ++s) {
      double phi = 2 * std::numbers::pi * s / segments;
      std::array<float, 3> n{static_cast<float>(std::sin(theta) * std::cos(phi)),
                             static_cast<float>(std::cos(theta)),
                             static_cast<float>(std::sin(theta) * std::sin(phi))};
      m.normals.push_back(n);
      m.positions.push_back({static_cast<float>(radius * n[0]), static_cast<float>(radius * n[1]),
                             static_cast<float>(radius * n[2])});
    }
  }
  auto idx = [&](int r, int s) { return static_cast<std::uint32_t>(r * (segments + 1) + s); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.indices.insert(m.indices.end(), {idx(r, s), idx(r + 1, s), idx(r, s + 1)});
      m.indices.insert(m.indices.end(), {idx(r, s + 1), idx(r + 1, s), idx(r + 1, s + 1)});
    }
  }
  return m;
}

TriangleMesh box_mesh(const std::string& name, const Vec3& h, const std::array<float, 4>& color) {
  TriangleMesh m;
  m.name = name;
  m.base_color = color;
  // Four vertices per face so each face keeps a flat normal.
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {-1, 1}) {
      int a = (axis + 1) % 3, b = (axis + 2) % 3;
      auto base = static_cast<std::uint32_t>(m.positions.size());
      for (auto [sa, sb] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) {
        std::array<float, 3> p{}, n{};
        p[axis] = static_cast<float>(sign * h[axis]);
        p[a] = static_cast<float>(sa * h[a]);
        p[b] = static_cast<float>(sb * h[b]);
        n[axis] = static_cast<float>(sign);
        m.positions.push_back(p);
        m.normals.push_back(n);
      }
      if (sign > 0) {
        m.indices.insert(m.indices.end(), {base, base + 1, base + 2, base, base + 2, base + 3});
      } else {
        m.indices.insert(m.indices.end(), {base, base + 2, base + 1, base, base + 3, base + 2});
      }
    }
  }
  return m;
}

nlohmann::json to_json(const Primitive& p) {
  nlohmann::json j = {{"name", p.name}, {"kind", kind_name(p.kind)}, {"color", p.color}};
  switch (p.kind) {
    case PrimitiveKind::Plane:
      j["point"] = p.point;
      j["normal"] = p.normal;
      if (p.min && p.max) {
        j["min"] = *p.min;
        j["max"] = *p.max;
      }
      break;
    case PrimitiveKind::Sphere:
      j["center"] = p.point;
      j["radius"] = p.radius;
      break;
    case PrimitiveKind::Box:
      j["min"] = *p.min;
      j["max"] = *p.max;
      break;
  }
  return j;
}

nlohmann::json to_json(const Scene& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives) prims.push_back(to_json(p));
  return {{"primitives", prims}, {"missColor", s.miss_color}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  try {
    if (j.contains("missColor")) s.miss_color = j["missColor"].get<Color>();
    for (const auto& e : j.at("primitives")) {
      Primitive p;
      p.name = e.at("name").get<std::string>();
      auto kind = e.at("kind").get<std::string>();
      if (e.contains("color")) p.color = e["color"].get<Color>();
      if (kind == "plane") {
        p.kind = PrimitiveKind::Plane;
        p.point = e.at("point").get<Vec3>();
        p.normal = e.at("normal").get<Vec3>();
        if (e.contains("min")) {
          p.min = e["min"].get<Vec3>();
          p.max = e.at("max").get<Vec3>();
        }
      } else if (kind == "sphere") {
        p.kind = PrimitiveKind::Sphere;
        p.point = e.at("center").get<Vec3>();
        p.radius = e.at("radius").get<double>();
      } else if (kind == "box") {
        p.kind = PrimitiveKind::Box;
        p.min = e.at("min").get<Vec3>();
        p.max = e.at("max").get<Vec3>();
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown primitive kind " + kind);
      }
      s.primitives.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("scene: ") + e.what());
  }
  return s;
}

}  // namespace exr::sim
