#pragma once

#include <cstddef>
#include <vector>

#include "neuralcanvas/tensor.hpp"

namespace neuralcanvas {

inline constexpr std::size_t kKernelSize = 3;

// A bank of 3x3 filters. weights are laid out (out, in, ky, kx).
template <typename T>
struct ConvKernelSet {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvKernelSet() = default;
  ConvKernelSet(std::size_t out, std::size_t in, std::vector<T> w, std::vector<T> b);

  const T& weight(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + c) * kKernelSize + ky) * kKernelSize + kx];
  }

  template <typename U>
  ConvKernelSet<U> cast() const {
    return ConvKernelSet<U>(out_channels, in_channels,
                            std::vector<U>(weights.begin(), weights.end()),
                            std::vector<U>(bias.begin(), bias.end()));
  }

  friend bool operator==(const ConvKernelSet&, const ConvKernelSet&) = default;
};

// 3x3 convolution, stride 1, zero padding 1. Output spatial size equals input.
template <typename T>
FeatureTensor<T> conv2d_forward(const FeatureTensor<T>& input,
                                const ConvKernelSet<T>& kernels);

// Gradient with respect to the input only; kernels are frozen.
template <typename T>
FeatureTensor<T> conv2d_backward(const Shape& input_shape,
                                 const ConvKernelSet<T>& kernels,
                                 const FeatureTensor<T>& grad_out);

template <typename T>
FeatureTensor<T> relu_forward(const FeatureTensor<T>& input);

// Passes grad_out where forward_output > 0. A rectified output of exactly zero
// passes no gradient.
template <typename T>
FeatureTensor<T> relu_backward(const FeatureTensor<T>& forward_output,
                               const FeatureTensor<T>& grad_out);

// 2x2 windows, stride 2. A trailing odd row/column is dropped.
template <typename T>
FeatureTensor<T> avgpool_forward(const FeatureTensor<T>& input);

template <typename T>
FeatureTensor<T> avgpool_backward(const Shape& input_shape,
                                  const FeatureTensor<T>& grad_out);

template <typename T>
FeatureTensor<T> maxpool_forward(const FeatureTensor<T>& input);

// Routes each window's gradient to its maximum; ties go to the first cell in
// row-major order.
template <typename T>
FeatureTensor<T> maxpool_backward(const FeatureTensor<T>& input,
                                  const FeatureTensor<T>& grad_out);

Shape pooled_shape(const Shape& input);

}  // namespace neuralcanvas
