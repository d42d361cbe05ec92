#include "salnet/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace salnet {

Image read_image(const std::filesystem::path& path, std::size_t channels) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("read_image: channels must be 1 or 3");
  if (!std::filesystem::exists(path)) throw ImageError("no such image file: " + path.string());
  const int flag = channels == 3 ? cv::IMREAD_COLOR : cv::IMREAD_GRAYSCALE;
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), flag);
  } catch (const cv::Exception& e) {
    throw ImageError("cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) throw ImageError("cannot decode image " + path.string());
  if (mat.depth() != CV_8U) mat.convertTo(mat, CV_8U);
  if (channels == 3) {
    cv::Mat rgb(mat.rows, mat.cols, CV_8UC3);
    const int from_to[] = {0, 2, 1, 1, 2, 0};  // BGR -> RGB
    cv::mixChannels(&mat, 1, &rgb, 1, from_to, 3);
    mat = rgb;
  }
  Image img;
  img.width = static_cast<std::size_t>(mat.cols);
  img.height = static_cast<std::size_t>(mat.rows);
  img.channels = channels;
  img.pixels.resize(img.width * img.height * channels);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    std::copy(row, row + img.width * channels, img.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width * channels));
  }
  return img;
}

Tensor to_planar(const Image& image) {
  if (image.width == 0 || image.height == 0) throw ImageError("empty image");
  Tensor t({image.channels, image.height, image.width});
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) t.at(c, y, x) = image.at(y, x, c);
    }
  }
  return t;
}

std::vector<std::uint8_t> to_gray_bytes(const Tensor& map) {
  std::vector<std::uint8_t> bytes(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float v = std::clamp(map[i], 0.0f, 1.0f);
    bytes[i] = static_cast<std::uint8_t>(std::lround(255.0f * v));
  }
  return bytes;
}

void write_gray_png(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("write_gray_png: expected H x W, got " + to_string(map.shape()));
  Image img{map.dim(1), map.dim(0), 1, to_gray_bytes(map)};
  write_image(path, img);
}

void write_image(const std::filesystem::path& path, const Image& image) {
  const int type = image.channels == 3 ? CV_8UC3 : CV_8UC1;
  cv::Mat mat(static_cast<int>(image.height), static_cast<int>(image.width), type,
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat out = mat;
  if (image.channels == 3) {
    out = cv::Mat(mat.rows, mat.cols, CV_8UC3);
    const int from_to[] = {0, 2, 1, 1, 2, 0};
    cv::mixChannels(&mat, 1, &out, 1, from_to, 3);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), out);
  } catch (const cv::Exception& e) {
    throw ImageError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw ImageError("cannot write " + path.string());
}

}  // namespace salnet
