#pragma once

#include <array>
#include <cmath>
#include <random>

#include "exr/uad/camera.hpp"

namespace exr::test {

// Random rotation from a random unit quaternion; row-major 3x3.
inline std::array<double, 9> random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  double q[4] = {n(rng), n(rng), n(rng), n(rng)};
  double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& x : q) x /= len;
  double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

inline CameraParams random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(100, 1500), t(-10, 10);
  std::uniform_int_distribution<int> size(16, 2000);
  CameraParams k;
  k.width = size(rng);
  k.height = size(rng);
  k.fx = f(rng);
  k.fy = f(rng);
  k.cx = std::uniform_real_distribution<double>(0, k.width - 1e-6)(rng);
  k.cy = std::uniform_real_distribution<double>(0, k.height - 1e-6)(rng);
  auto r = random_rotation(rng);
  k.cam_to_world = {r[0], r[1], r[2], t(rng), r[3], r[4], r[5], t(rng), r[6], r[7], r[8], t(rng), 0, 0, 0, 1};
  return k;
}

}  // namespace exr::test
