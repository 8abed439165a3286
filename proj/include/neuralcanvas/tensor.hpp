#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neuralcanvas/error.hpp"

namespace neuralcanvas {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t spatial() const { return height * width; }
  std::size_t size() const { return channels * height * width; }
  std::string to_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Read-only N x M view of a layer's responses: row i is filter i, column j is
// the flattened (row-major) spatial position j.
template <typename T>
struct FeatureMatrixView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const T> entries;

  const T& operator()(std::size_t i, std::size_t j) const {
    return entries[i * cols + j];
  }
};

template <typename T>
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> entries;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, T fill = T{})
      : rows(r), cols(c), entries(r * c, fill) {}
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<T> values)
      : rows(r), cols(c), entries(std::move(values)) {
    if (entries.size() != rows * cols) {
      throw ShapeError("matrix " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " given " +
                       std::to_string(entries.size()) + " entries");
    }
  }

  T& operator()(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return entries[i * cols + j];
  }
  FeatureMatrixView<T> view() const { return {rows, cols, entries}; }
};

// Channel-major activation block (channels x height x width).
template <typename T>
class FeatureTensor {
 public:
  using value_type = T;

  FeatureTensor() = default;
  explicit FeatureTensor(Shape shape, T fill = T{})
      : shape_(shape), values_(shape.size(), fill) {}
  FeatureTensor(Shape shape, std::vector<T> values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw ShapeError("tensor " + shape_.to_string() + " given " +
                       std::to_string(values_.size()) + " values");
    }
  }
  // Reinterprets an N x M matrix as N x height x width.
  FeatureTensor(FeatureMatrix<T> matrix, std::size_t height, std::size_t width)
      : FeatureTensor(Shape{matrix.rows, height, width},
                      std::move(matrix.entries)) {}

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }
  T& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * shape_.height + y) * shape_.width + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * shape_.height + y) * shape_.width + x];
  }

  FeatureMatrixView<T> matrix() const {
    return {shape_.channels, shape_.spatial(), values_};
  }

  template <typename U>
  FeatureTensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return FeatureTensor<U>(shape_, std::move(out));
  }

  FeatureTensor& operator+=(const FeatureTensor& other) {
    if (other.shape_ != shape_) {
      throw ShapeError("cannot add " + other.shape_.to_string() + " to " +
                       shape_.to_string());
    }
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
  }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

}  // namespace neuralcanvas
