#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace exr {

/// 8-bit RGB, row-major, tightly packed.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int u, int v) { return &pixels[(static_cast<std::size_t>(v) * width + u) * 3]; }
  const std::uint8_t* at(int u, int v) const {
    return &pixels[(static_cast<std::size_t>(v) * width + u) * 3];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// 16-bit depth in millimeters; 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> mm;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), mm(static_cast<std::size_t>(w) * h, 0) {}

  std::uint16_t& at(int u, int v) { return mm[static_cast<std::size_t>(v) * width + u]; }
  std::uint16_t at(int u, int v) const { return mm[static_cast<std::size_t>(v) * width + u]; }
  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_png(const DepthImage& img);
/// Accepts 8-bit gray/RGB/RGBA (alpha dropped). Throws MalformedPng.
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
/// Requires single-channel 16-bit grayscale. Throws MalformedPng.
DepthImage decode_png_depth(std::span<const std::uint8_t> bytes);

}  // namespace exr
