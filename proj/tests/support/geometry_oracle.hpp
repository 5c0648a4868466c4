#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace exr::test {

/// Distance from `p` to the nearest primitive surface of a scene given in its
/// JSON form. Written against the JSON directly so it shares no code with the
/// renderer.
inline double surface_distance(const nlohmann::json& scene, const std::array<double, 3>& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : scene.at("primitives")) {
    const std::string kind = e.at("kind");
    double d = best;
    if (kind == "sphere") {
      auto c = e.at("center").get<std::array<double, 3>>();
      double r = e.at("radius").get<double>();
      d = std::abs(std::hypot(p[0] - c[0], p[1] - c[1], p[2] - c[2]) - r);
    } else if (kind == "plane") {
      auto q = e.at("point").get<std::array<double, 3>>();
      auto n = e.at("normal").get<std::array<double, 3>>();
      double len = std::hypot(n[0], n[1], n[2]);
      double s = ((p[0] - q[0]) * n[0] + (p[1] - q[1]) * n[1] + (p[2] - q[2]) * n[2]) / len;
      std::array<double, 3> foot{p[0] - s * n[0] / len, p[1] - s * n[1] / len, p[2] - s * n[2] / len};
      if (e.contains("min")) {
        auto lo = e["min"].get<std::array<double, 3>>();
        auto hi = e["max"].get<std::array<double, 3>>();
        for (int i = 0; i < 3; ++i) foot[i] = std::clamp(foot[i], lo[i], hi[i]);
      }
      d = std::hypot(p[0] - foot[0], p[1] - foot[1], p[2] - foot[2]);
    } else if (kind == "box") {
      auto lo = e.at("min").get<std::array<double, 3>>();
      auto hi = e.at("max").get<std::array<double, 3>>();
      bool inside = true;
      double out2 = 0, in_min = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) {
        double below = lo[i] - p[i], above = p[i] - hi[i];
        double o = std::max({below, above, 0.0});
        out2 += o * o;
        if (o > 0) inside = false;
        in_min = std::min({in_min, p[i] - lo[i], hi[i] - p[i]});
      }
      d = inside ? in_min : std::sqrt(out2);
    }
    best = std::min(best, d);
  }
  return best;
}

}  // namespace exr::test
