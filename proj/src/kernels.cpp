#include "neuralcanvas/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

namespace neuralcanvas {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

// Upper bound on im2col buffer entries; rows of output are processed in bands
// small enough to stay under it.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

constexpr std::size_t kTaps = kKernelSize * kKernelSize;

std::size_t band_rows(const Shape& s) {
  const std::size_t per_row = s.channels * kTaps * s.width;
  if (per_row == 0) return std::max<std::size_t>(s.height, 1);
  return std::clamp<std::size_t>(kColumnBudget / per_row, 1, std::max<std::size_t>(s.height, 1));
}

// Fills col (channels*9 x band*width) with the padded neighbourhood of output
// rows [y0, y0 + band).
template <typename T>
void im2col_band(const FeatureTensor<T>& input, std::size_t y0, std::size_t band,
                 RowMatrix<T>& col) {
  const auto& s = input.shape();
  const std::size_t W = s.width;
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto Wi = static_cast<std::ptrdiff_t>(W);
  col.resize(static_cast<Eigen::Index>(s.channels * kTaps),
             static_cast<Eigen::Index>(band * W));
  for (std::size_t c = 0; c < s.channels; ++c) {
    const T* plane = input.data() + c * s.spatial();
    for (std::size_t ky = 0; ky < kKernelSize; ++ky) {
      for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
        T* dst = col.row(static_cast<Eigen::Index>((c * kKernelSize + ky) * kKernelSize + kx)).data();
        for (std::size_t r = 0; r < band; ++r) {
          const auto sy = static_cast<std::ptrdiff_t>(y0 + r + ky) - 1;
          T* out = dst + r * W;
          if (sy < 0 || sy >= H) {
            std::fill(out, out + W, T{});
            continue;
          }
          const T* src = plane + sy * Wi;
          for (std::ptrdiff_t x = 0; x < Wi; ++x) {
            const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(kx) - 1;
            out[x] = (sx < 0 || sx >= Wi) ? T{} : src[sx];
          }
        }
      }
    }
  }
}

// Scatter-adds col back onto grad_in (adjoint of im2col_band).
template <typename T>
void col2im_band(const RowMatrix<T>& col, std::size_t y0, std::size_t band,
                 FeatureTensor<T>& grad_in) {
  const auto& s = grad_in.shape();
  const std::size_t W = s.width;
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto Wi = static_cast<std::ptrdiff_t>(W);
  for (std::size_t c = 0; c < s.channels; ++c) {
    T* plane = grad_in.data() + c * s.spatial();
    for (std::size_t ky = 0; ky < kKernelSize; ++ky) {
      for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
        const T* src = col.row(static_cast<Eigen::Index>((c * kKernelSize + ky) * kKernelSize + kx)).data();
        for (std::size_t r = 0; r < band; ++r) {
          const auto sy = static_cast<std::ptrdiff_t>(y0 + r + ky) - 1;
          if (sy < 0 || sy >= H) continue;
          T* dst = plane + sy * Wi;
          const T* in = src + r * W;
          for (std::ptrdiff_t x = 0; x < Wi; ++x) {
            const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(kx) - 1;
            if (sx >= 0 && sx < Wi) dst[sx] += in[x];
          }
        }
      }
    }
  }
}

void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape " + a.to_string() +
                     " does not match " + b.to_string());
  }
}

void require_poolable(const Shape& s) {
  if (s.height < 2 || s.width < 2) {
    throw ShapeError("pooling needs at least 2x2 input, got " + s.to_string());
  }
}

}  // namespace

template <typename T>
ConvKernelSet<T>::ConvKernelSet(std::size_t out, std::size_t in, std::vector<T> w,
                                std::vector<T> b)
    : out_channels(out), in_channels(in), weights(std::move(w)), bias(std::move(b)) {
  if (weights.size() != out * in * kTaps) {
    throw ShapeError("kernel set " + std::to_string(out) + "x" + std::to_string(in) +
                     "x3x3 given " + std::to_string(weights.size()) + " weights");
  }
  if (bias.size() != out) {
    throw ShapeError("kernel set with " + std::to_string(out) +
                     " outputs given " + std::to_string(bias.size()) + " biases");
  }
}

Shape pooled_shape(const Shape& input) {
  return {input.channels, input.height / 2, input.width / 2};
}

template <typename T>
FeatureTensor<T> conv2d_forward(const FeatureTensor<T>& input,
                                const ConvKernelSet<T>& kernels) {
  const Shape& s = input.shape();
  if (s.channels != kernels.in_channels) {
    throw ShapeError("conv2d: input " + s.to_string() + " has " +
                     std::to_string(s.channels) + " channels, kernels expect " +
                     std::to_string(kernels.out_channels) + "x" +
                     std::to_string(kernels.in_channels) + "x3x3");
  }
  FeatureTensor<T> out(Shape{kernels.out_channels, s.height, s.width});
  if (s.spatial() == 0 || kernels.out_channels == 0) return out;

  const auto O = static_cast<Eigen::Index>(kernels.out_channels);
  const auto K = static_cast<Eigen::Index>(kernels.in_channels * kTaps);
  Eigen::Map<const RowMatrix<T>> w(kernels.weights.data(), O, K);
  RowMatrix<T> col;
  const std::size_t step = band_rows(s);
  for (std::size_t y0 = 0; y0 < s.height; y0 += step) {
    const std::size_t band = std::min(step, s.height - y0);
    im2col_band(input, y0, band, col);
    StridedMap<T> dst(out.data() + y0 * s.width, O,
                      static_cast<Eigen::Index>(band * s.width),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(s.spatial())));
    dst.noalias() = w * col;
  }
  for (std::size_t o = 0; o < kernels.out_channels; ++o) {
    T* plane = out.data() + o * s.spatial();
    const T b = kernels.bias[o];
    for (std::size_t k = 0; k < s.spatial(); ++k) plane[k] += b;
  }
  return out;
}

template <typename T>
FeatureTensor<T> conv2d_backward(const Shape& input_shape,
                                 const ConvKernelSet<T>& kernels,
                                 const FeatureTensor<T>& grad_out) {
  if (input_shape.channels != kernels.in_channels) {
    throw ShapeError("conv2d backward: input " + input_shape.to_string() +
                     " does not fit kernels with " +
                     std::to_string(kernels.in_channels) + " input channels");
  }
  require_same(grad_out.shape(),
               Shape{kernels.out_channels, input_shape.height, input_shape.width},
               "conv2d backward gradient");
  FeatureTensor<T> grad_in(input_shape);
  if (input_shape.spatial() == 0) return grad_in;

  const auto O = static_cast<Eigen::Index>(kernels.out_channels);
  const auto K = static_cast<Eigen::Index>(kernels.in_channels * kTaps);
  Eigen::Map<const RowMatrix<T>> w(kernels.weights.data(), O, K);
  RowMatrix<T> col;
  const std::size_t step = band_rows(input_shape);
  for (std::size_t y0 = 0; y0 < input_shape.height; y0 += step) {
    const std::size_t band = std::min(step, input_shape.height - y0);
    Eigen::Map<const RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>> g(
        grad_out.data() + y0 * input_shape.width, O,
        static_cast<Eigen::Index>(band * input_shape.width),
        Eigen::OuterStride<>(static_cast<Eigen::Index>(input_shape.spatial())));
    col.noalias() = w.transpose() * g;
    col2im_band(col, y0, band, grad_in);
  }
  return grad_in;
}

template <typename T>
FeatureTensor<T> relu_forward(const FeatureTensor<T>& input) {
  FeatureTensor<T> out(input.shape());
  for (std::size_t k = 0; k < input.size(); ++k) out[k] = input[k] > T{} ? input[k] : T{};
  return out;
}

template <typename T>
FeatureTensor<T> relu_backward(const FeatureTensor<T>& forward_output,
                               const FeatureTensor<T>& grad_out) {
  require_same(grad_out.shape(), forward_output.shape(), "relu backward gradient");
  FeatureTensor<T> grad_in(forward_output.shape());
  for (std::size_t k = 0; k < grad_in.size(); ++k) {
    grad_in[k] = forward_output[k] > T{} ? grad_out[k] : T{};
  }
  return grad_in;
}

template <typename T>
FeatureTensor<T> avgpool_forward(const FeatureTensor<T>& input) {
  require_poolable(input.shape());
  const Shape os = pooled_shape(input.shape());
  FeatureTensor<T> out(os);
  for (std::size_t c = 0; c < os.channels; ++c) {
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        const T sum = input.at(c, 2 * y, 2 * x) + input.at(c, 2 * y, 2 * x + 1) +
                      input.at(c, 2 * y + 1, 2 * x) + input.at(c, 2 * y + 1, 2 * x + 1);
        out.at(c, y, x) = sum / T(4);
      }
    }
  }
  return out;
}

template <typename T>
FeatureTensor<T> avgpool_backward(const Shape& input_shape,
                                  const FeatureTensor<T>& grad_out) {
  require_poolable(input_shape);
  require_same(grad_out.shape(), pooled_shape(input_shape), "avgpool backward gradient");
  FeatureTensor<T> grad_in(input_shape);
  const Shape& os = grad_out.shape();
  for (std::size_t c = 0; c < os.channels; ++c) {
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        const T g = grad_out.at(c, y, x) / T(4);
        grad_in.at(c, 2 * y, 2 * x) = g;
        grad_in.at(c, 2 * y, 2 * x + 1) = g;
        grad_in.at(c, 2 * y + 1, 2 * x) = g;
        grad_in.at(c, 2 * y + 1, 2 * x + 1) = g;
      }
    }
  }
  return grad_in;
}

namespace {

// Row-major index (0..3) of the window maximum, first wins on ties.
template <typename T>
int window_argmax(const FeatureTensor<T>& input, std::size_t c, std::size_t y,
                  std::size_t x) {
  int best = 0;
  T best_value = input.at(c, 2 * y, 2 * x);
  for (int k = 1; k < 4; ++k) {
    const T v = input.at(c, 2 * y + static_cast<std::size_t>(k / 2),
                         2 * x + static_cast<std::size_t>(k % 2));
    if (v > best_value) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

}  // namespace

template <typename T>
FeatureTensor<T> maxpool_forward(const FeatureTensor<T>& input) {
  require_poolable(input.shape());
  const Shape os = pooled_shape(input.shape());
  FeatureTensor<T> out(os);
  for (std::size_t c = 0; c < os.channels; ++c) {
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        const int k = window_argmax(input, c, y, x);
        out.at(c, y, x) = input.at(c, 2 * y + static_cast<std::size_t>(k / 2),
                                   2 * x + static_cast<std::size_t>(k % 2));
      }
    }
  }
  return out;
}

template <typename T>
FeatureTensor<T> maxpool_backward(const FeatureTensor<T>& input,
                                  const FeatureTensor<T>& grad_out) {
  require_poolable(input.shape());
  require_same(grad_out.shape(), pooled_shape(input.shape()), "maxpool backward gradient");
  FeatureTensor<T> grad_in(input.shape());
  const Shape& os = grad_out.shape();
  for (std::size_t c = 0; c < os.channels; ++c) {
    for (std::size_t y = 0; y < os.height; ++y) {
      for (std::size_t x = 0; x < os.width; ++x) {
        const int k = window_argmax(input, c, y, x);
        grad_in.at(c, 2 * y + static_cast<std::size_t>(k / 2),
                   2 * x + static_cast<std::size_t>(k % 2)) = grad_out.at(c, y, x);
      }
    }
  }
  return grad_in;
}

#define NEURALCANVAS_INSTANTIATE_KERNELS(T)                                              \
  template struct ConvKernelSet<T>;                                                      \
  template FeatureTensor<T> conv2d_forward(const FeatureTensor<T>&, const ConvKernelSet<T>&); \
  template FeatureTensor<T> conv2d_backward(const Shape&, const ConvKernelSet<T>&,       \
                                            const FeatureTensor<T>&);                    \
  template FeatureTensor<T> relu_forward(const FeatureTensor<T>&);                       \
  template FeatureTensor<T> relu_backward(const FeatureTensor<T>&, const FeatureTensor<T>&); \
  template FeatureTensor<T> avgpool_forward(const FeatureTensor<T>&);                    \
  template FeatureTensor<T> avgpool_backward(const Shape&, const FeatureTensor<T>&);     \
  template FeatureTensor<T> maxpool_forward(const FeatureTensor<T>&);                    \
  template FeatureTensor<T> maxpool_backward(const FeatureTensor<T>&, const FeatureTensor<T>&);

NEURALCANVAS_INSTANTIATE_KERNELS(float)
NEURALCANVAS_INSTANTIATE_KERNELS(double)

#undef NEURALCANVAS_INSTANTIATE_KERNELS

}  // namespace neuralcanvas
