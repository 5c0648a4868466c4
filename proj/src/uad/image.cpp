#include "exr/uad/image.hpp"

#include <png.h>

#include <cstring>
#include <string>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void read_from_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* in = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (in->offset + length > in->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, in->bytes.data() + in->offset, length);
  in->offset += length;
}

[[noreturn]] void on_error(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::MalformedPng, msg);
}

void on_warning(png_structp, png_const_charp) {}

class WriteHandle {
 public:
  WriteHandle() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!png_ || !info_) throw Error(ErrorCode::SerializationFailure, "libpng allocation failed");
  }
  ~WriteHandle() { png_destroy_write_struct(&png_, &info_); }
  WriteHandle(const WriteHandle&) = delete;
  WriteHandle& operator=(const WriteHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class ReadHandle {
 public:
  ReadHandle() {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!png_ || !info_) throw Error(ErrorCode::MalformedPng, "libpng allocation failed");
  }
  ~ReadHandle() { png_destroy_read_struct(&png_, &info_, nullptr); }
  ReadHandle(const ReadHandle&) = delete;
  ReadHandle& operator=(const ReadHandle&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

std::vector<std::uint8_t> encode(int width, int height, int color_type, int bit_depth,
                                 const std::uint8_t* rows, std::size_t stride, bool swap16) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::SerializationFailure, "empty image");
  std::vector<std::uint8_t> out;
  WriteHandle h;
  png_set_write_fn(h.png(), &out, write_to_vector, nullptr);
  png_set_IHDR(h.png(), h.info(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(h.png(), 6);
  png_write_info(h.png(), h.info());
  if (swap16) png_set_swap(h.png());
  for (int v = 0; v < height; ++v) {
    png_write_row(h.png(), const_cast<png_bytep>(rows + static_cast<std::size_t>(v) * stride));
  }
  png_write_end(h.png(), nullptr);
  return out;
}

bool little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first = 0;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw Error(ErrorCode::SerializationFailure, "RGB buffer size does not match dimensions");
  }
  return encode(img.width, img.height, PNG_COLOR_TYPE_RGB, 8, img.pixels.data(),
                static_cast<std::size_t>(img.width) * 3, false);
}

std::vector<std::uint8_t> encode_png(const DepthImage& img) {
  if (img.mm.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw Error(ErrorCode::SerializationFailure, "depth buffer size does not match dimensions");
  }
  return encode(img.width, img.height, PNG_COLOR_TYPE_GRAY, 16,
                reinterpret_cast<const std::uint8_t*>(img.mm.data()),
                static_cast<std::size_t>(img.width) * 2, little_endian());
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::MalformedPng, "missing PNG signature");
  }
  ReadHandle h;
  MemoryReader reader{bytes};
  png_set_read_fn(h.png(), &reader, read_from_memory);
  png_read_info(h.png(), h.info());
  int color = png_get_color_type(h.png(), h.info());
  int depth = png_get_bit_depth(h.png(), h.info());
  if (depth == 16) png_set_strip_16(h.png());
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png());
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(h.png());
    png_set_gray_to_rgb(h.png());
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(h.png());
  png_read_update_info(h.png(), h.info());
  if (png_get_rowbytes(h.png(), h.info()) != png_get_image_width(h.png(), h.info()) * 3) {
    throw Error(ErrorCode::MalformedPng, "unsupported PNG layout");
  }
  RgbImage img(static_cast<int>(png_get_image_width(h.png(), h.info())),
               static_cast<int>(png_get_image_height(h.png(), h.info())));
  for (int v = 0; v < img.height; ++v) png_read_row(h.png(), img.at(0, v), nullptr);
  png_read_end(h.png(), nullptr);
  return img;
}

DepthImage decode_png_depth(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::MalformedPng, "missing PNG signature");
  }
  ReadHandle h;
  MemoryReader reader{bytes};
  png_set_read_fn(h.png(), &reader, read_from_memory);
  png_read_info(h.png(), h.info());
  if (png_get_color_type(h.png(), h.info()) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(h.png(), h.info()) != 16) {
    throw Error(ErrorCode::MalformedPng, "depth images must be 16-bit grayscale");
  }
  if (little_endian()) png_set_swap(h.png());
  png_read_update_info(h.png(), h.info());
  DepthImage img(static_cast<int>(png_get_image_width(h.png(), h.info())),
                 static_cast<int>(png_get_image_height(h.png(), h.info())));
  for (int v = 0; v < img.height; ++v) {
    png_read_row(h.png(), reinterpret_cast<png_bytep>(&img.at(0, v)), nullptr);
  }
  png_read_end(h.png(), nullptr);
  return img;
}

}  // namespace exr
