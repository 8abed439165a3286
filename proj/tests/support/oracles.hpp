#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "neuralcanvas/image.hpp"
#include "neuralcanvas/kernels.hpp"
#include "neuralcanvas/network.hpp"
#include "neuralcanvas/tensor.hpp"
#include "neuralcanvas/weights.hpp"

namespace testsupport {

using neuralcanvas::ConvKernelSet;
using neuralcanvas::FeatureTensor;
using neuralcanvas::Shape;

// Direct summation 3x3 pad-1 convolution, accumulated in double.
template <typename T>
FeatureTensor<double> direct_conv(const FeatureTensor<T>& in, const ConvKernelSet<T>& k) {
  const Shape& s = in.shape();
  FeatureTensor<double> out(Shape{k.out_channels, s.height, s.width});
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        double acc = static_cast<double>(k.bias[o]);
        for (std::size_t c = 0; c < s.channels; ++c) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const long yy = static_cast<long>(y) + dy;
              const long xx = static_cast<long>(x) + dx;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(s.height) ||
                  xx >= static_cast<long>(s.width)) {
                continue;
              }
              acc += static_cast<double>(in.at(c, static_cast<std::size_t>(yy),
                                               static_cast<std::size_t>(xx))) *
                     static_cast<double>(k.weight(o, c, static_cast<std::size_t>(dy + 1),
                                                  static_cast<std::size_t>(dx + 1)));
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
  return out;
}

template <typename T>
FeatureTensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  FeatureTensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
ConvKernelSet<T> random_kernels(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 0.5);
  std::vector<T> w(out * in * 9);
  std::vector<T> b(out);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  for (auto& v : b) v = static_cast<T>(dist(rng));
  return {out, in, std::move(w), std::move(b)};
}

template <typename T>
double dot(const FeatureTensor<T>& a, const FeatureTensor<T>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return s;
}

// Central differences of f at every coordinate of x (or only `indices`).
inline std::vector<double> central_differences(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double step, const std::vector<std::size_t>& indices = {}) {
  std::vector<std::size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
  }
  std::vector<double> grad;
  grad.reserve(idx.size());
  for (std::size_t i : idx) {
    const double orig = x[i];
    x[i] = orig + step;
    const double plus = f(x);
    x[i] = orig - step;
    const double minus = f(x);
    x[i] = orig;
    grad.push_back((plus - minus) / (2.0 * step));
  }
  return grad;
}

// Norm-wise relative error ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

template <typename T>
std::vector<double> to_doubles(const FeatureTensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

template <typename T>
FeatureTensor<T> from_doubles(const Shape& s, const std::vector<double>& v) {
  return FeatureTensor<T>(s, std::vector<T>(v.begin(), v.end()));
}

// G = F F^T by explicit triple loop; f is row-major rows x cols.
inline std::vector<double> direct_gram(std::size_t rows, std::size_t cols,
                                       const std::vector<double>& f) {
  std::vector<double> g(rows * rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < cols; ++k) s += f[i * cols + k] * f[j * cols + k];
      g[i * rows + j] = s;
    }
  }
  return g;
}

inline double direct_content_loss(const std::vector<double>& f, const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += 0.5 * (f[k] - p[k]) * (f[k] - p[k]);
  return s;
}

// Per-layer style loss of features f against target Gram a.
inline double direct_style_loss(std::size_t rows, std::size_t cols, const std::vector<double>& f,
                                const std::vector<double>& a) {
  const auto g = direct_gram(rows, cols, f);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += (g[k] - a[k]) * (g[k] - a[k]);
  const double n = static_cast<double>(rows);
  const double m = static_cast<double>(cols);
  return s / (4.0 * n * n * m * m);
}

inline std::vector<double> random_values(std::size_t count, std::mt19937_64& rng, double lo,
                                         double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline neuralcanvas::WeightSet fixture_weights() {
  return neuralcanvas::load_weights(NEURALCANVAS_FIXTURE);
}

template <typename T>
neuralcanvas::Network<T> fixture_network(
    neuralcanvas::PoolingMode pooling = neuralcanvas::PoolingMode::average) {
  const auto w = fixture_weights();
  return neuralcanvas::Network<T>(neuralcanvas::NetworkSpec::infer(w, pooling), w);
}

// Deterministic smooth colour image with a few hard edges.
inline neuralcanvas::ImageBuffer test_pattern(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cx = u(rng) * static_cast<double>(w);
  const double cy = u(rng) * static_cast<double>(h);
  const double r = (0.2 + 0.2 * u(rng)) * static_cast<double>(std::min(h, w));
  const double phase = u(rng) * 6.28;
  neuralcanvas::ImageBuffer img(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(w);
      const double fy = static_cast<double>(y) / static_cast<double>(h);
      const bool inside = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy) < r;
      const double base[3] = {255.0 * fx, 255.0 * fy,
                              127.5 + 127.5 * std::sin(phase + 9.0 * fx * fy)};
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = inside ? 255.0 - base[c] : base[c];
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

}  // namespace testsupport
