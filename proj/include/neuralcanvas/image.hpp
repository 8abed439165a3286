#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "neuralcanvas/tensor.hpp"

namespace neuralcanvas {

// 8-bit RGB raster, row-major, interleaved.
struct ImageBuffer {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(std::size_t h, std::size_t w)
      : height(h), width(w), pixels(h * w * 3, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

enum class ChannelOrder : std::uint8_t { rgb = 0, bgr = 1 };

// How display pixels map to network input. channel_mean is indexed by network
// channel, i.e. after reordering.
struct PreprocessSpec {
  std::array<float, 3> channel_mean{0.0F, 0.0F, 0.0F};
  ChannelOrder channel_order = ChannelOrder::rgb;

  // Convention of the Caffe VGG-19 release: BGR order, ImageNet means.
  static PreprocessSpec caffe_vgg() {
    return {{103.939F, 116.779F, 123.68F}, ChannelOrder::bgr};
  }

  friend bool operator==(const PreprocessSpec&, const PreprocessSpec&) = default;
};

// Decodes a PNG or JPEG file.
ImageBuffer read_image(const std::filesystem::path& path);

// read_image followed by resize_bilinear to the target size.
ImageBuffer load_image(const std::filesystem::path& path, std::size_t target_h,
                       std::size_t target_w);

void save_png(const std::filesystem::path& path, const ImageBuffer& image);

// Corner-aligned bilinear resampling; returns the input unchanged when the
// size already matches.
ImageBuffer resize_bilinear(const ImageBuffer& image, std::size_t target_h,
                            std::size_t target_w);

// Size that fits long_edge on the longer side while keeping aspect ratio.
std::array<std::size_t, 2> fit_long_edge(std::size_t height, std::size_t width,
                                         std::size_t long_edge);

template <typename T>
FeatureTensor<T> preprocess(const ImageBuffer& image, const PreprocessSpec& spec);

// Adds the mean back, clamps to [0, 255] and rounds half away from zero.
template <typename T>
ImageBuffer postprocess(const FeatureTensor<T>& tensor, const PreprocessSpec& spec);

}  // namespace neuralcanvas
