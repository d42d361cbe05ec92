#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "salnet/tensor.hpp"

namespace salnet {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved image; RGB order when channels == 3.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

/// Decodes PNG/JPEG/BMP/... into RGB (channels = 3) or grayscale (channels = 1).
Image read_image(const std::filesystem::path& path, std::size_t channels = 3);

/// C x H x W float tensor holding the raw 0..255 pixel values.
Tensor to_planar(const Image& image);

/// Writes an H x W map with values in [0,1] as 8-bit grayscale PNG,
/// pixel = round(255 * value).
void write_gray_png(const std::filesystem::path& path, const Tensor& map);

/// Encodes round(255 * value) bytes without touching the filesystem.
std::vector<std::uint8_t> to_gray_bytes(const Tensor& map);

/// Writes an interleaved RGB or gray image.
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace salnet
