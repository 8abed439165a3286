#include "neuralcanvas/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace neuralcanvas {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_prefix(const std::vector<unsigned char>& head, std::initializer_list<unsigned char> magic) {
  return head.size() >= magic.size() && std::equal(magic.begin(), magic.end(), head.begin());
}

ImageBuffer read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
    throw IoError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  ImageBuffer image(png.height, png.width);
  if (png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr) == 0) {
    std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  return image;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

// Corrupt or truncated data only raises warnings in libjpeg; treat them as
// fatal rather than return a partly gray image.
void jpeg_emit_message(j_common_ptr info, int level) {
  if (level < 0) jpeg_error_exit(info);
}

// Keeps only trivially destructible locals so longjmp out of libjpeg is safe.
// On failure returns false and leaves err.message set.
bool decode_jpeg(std::FILE* file, ImageBuffer& image, JpegErrorManager& err) {
  jpeg_decompress_struct info;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_emit_message;
  if (setjmp(err.jump) != 0) {
    jpeg_destroy_decompress(&info);
    return false;
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file);
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  image.height = info.output_height;
  image.width = info.output_width;
  image.pixels.assign(image.height * image.width * 3, 0);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = image.pixels.data() + std::size_t{info.output_scanline} * image.width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return true;
}

ImageBuffer read_jpeg(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image " + path.string());
  ImageBuffer image;
  JpegErrorManager err{};
  if (!decode_jpeg(file.get(), image, err)) {
    throw IoError("cannot decode JPEG " + path.string() + ": " + err.message);
  }
  return image;
}

std::uint8_t to_byte(double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 255.0)));
}

std::size_t source_channel(ChannelOrder order, std::size_t c) {
  return order == ChannelOrder::rgb ? c : 2 - c;
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
  std::vector<unsigned char> head(8, 0);
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
  }
  if (has_prefix(head, {0x89, 'P', 'N', 'G'})) return read_png(path);
  if (has_prefix(head, {0xFF, 0xD8, 0xFF})) return read_jpeg(path);
  throw IoError("unsupported image format: " + path.string());
}

ImageBuffer load_image(const std::filesystem::path& path, std::size_t target_h,
                       std::size_t target_w) {
  if (target_h == 0 || target_w == 0) {
    throw ArgumentError("target image size must be positive");
  }
  return resize_bilinear(read_image(path), target_h, target_w);
}

void save_png(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.pixels.size() != image.height * image.width * 3) {
    throw ShapeError("image buffer size does not match its dimensions");
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

ImageBuffer resize_bilinear(const ImageBuffer& image, std::size_t target_h,
                            std::size_t target_w) {
  if (target_h == 0 || target_w == 0) {
    throw ArgumentError("target image size must be positive");
  }
  if (image.height == 0 || image.width == 0) throw ArgumentError("cannot resize an empty image");
  if (image.height == target_h && image.width == target_w) return image;

  auto source_coord = [](std::size_t dst, std::size_t dst_n, std::size_t src_n) {
    if (dst_n == 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(src_n - 1) /
           static_cast<double>(dst_n - 1);
  };
  ImageBuffer out(target_h, target_w);
  for (std::size_t y = 0; y < target_h; ++y) {
    const double sy = source_coord(y, target_h, image.height);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < target_w; ++x) {
      const double sx = source_coord(x, target_w, image.width);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c);
        const double bottom = (1.0 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c);
        out.at(y, x, c) = to_byte((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

std::array<std::size_t, 2> fit_long_edge(std::size_t height, std::size_t width,
                                         std::size_t long_edge) {
  if (height == 0 || width == 0 || long_edge == 0) {
    throw ArgumentError("image sizes must be positive");
  }
  if (height >= width) {
    const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(width) *
                                                        static_cast<double>(long_edge) /
                                                        static_cast<double>(height)));
    return {long_edge, std::max<std::size_t>(w, 1)};
  }
  const auto h = static_cast<std::size_t>(std::lround(static_cast<double>(height) *
                                                      static_cast<double>(long_edge) /
                                                      static_cast<double>(width)));
  return {std::max<std::size_t>(h, 1), long_edge};
}

template <typename T>
FeatureTensor<T> preprocess(const ImageBuffer& image, const PreprocessSpec& spec) {
  FeatureTensor<T> t(Shape{3, image.height, image.width});
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src = source_channel(spec.channel_order, c);
    const T mean = static_cast<T>(spec.channel_mean[c]);
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        t.at(c, y, x) = static_cast<T>(image.at(y, x, src)) - mean;
      }
    }
  }
  return t;
}

template <typename T>
ImageBuffer postprocess(const FeatureTensor<T>& tensor, const PreprocessSpec& spec) {
  if (tensor.channels() != 3) {
    throw ShapeError("postprocess needs 3 channels, got " + tensor.shape().to_string());
  }
  ImageBuffer image(tensor.height(), tensor.width());
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t dst = source_channel(spec.channel_order, c);
    const double mean = static_cast<double>(static_cast<T>(spec.channel_mean[c]));
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        image.at(y, x, dst) = to_byte(static_cast<double>(tensor.at(c, y, x)) + mean);
      }
    }
  }
  return image;
}

template FeatureTensor<float> preprocess(const ImageBuffer&, const PreprocessSpec&);
template FeatureTensor<double> preprocess(const ImageBuffer&, const PreprocessSpec&);
template ImageBuffer postprocess(const FeatureTensor<float>&, const PreprocessSpec&);
template ImageBuffer postprocess(const FeatureTensor<double>&, const PreprocessSpec&);

}  // namespace neuralcanvas
