#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "neuralcanvas/network.hpp"
#include "neuralcanvas/tensor.hpp"

namespace neuralcanvas {

// Feature correlations of one layer: entry (i, j) is the inner product of
// filter responses i and j over all spatial positions. Always accumulated and
// stored in double precision.
struct GramMatrix {
  std::size_t size = 0;
  std::vector<double> entries;

  GramMatrix() = default;
  explicit GramMatrix(std::size_t n) : size(n), entries(n * n, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return entries[i * size + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries[i * size + j]; }

  friend bool operator==(const GramMatrix&, const GramMatrix&) = default;
};

// 1/2 * sum (F - P)^2.
template <typename T>
double content_loss(FeatureMatrixView<T> features, FeatureMatrixView<T> target);

// (F - P) where F > 0, zero elsewhere.
template <typename T>
FeatureMatrix<T> content_grad(FeatureMatrixView<T> features, FeatureMatrixView<T> target);

// F F^T, unnormalized. Each unordered pair is computed once and mirrored, so
// the result is exactly symmetric.
template <typename T>
GramMatrix gram(FeatureMatrixView<T> features);

// sum (G - A)^2 / (4 N^2 M^2) with N filters and M spatial positions.
double style_layer_loss(const GramMatrix& gram, const GramMatrix& target,
                        std::size_t filters, std::size_t positions);

// ((G - A) F) / (N^2 M^2) where F > 0, zero elsewhere.
template <typename T>
FeatureMatrix<T> style_layer_grad(FeatureMatrixView<T> features, const GramMatrix& gram,
                                  const GramMatrix& target, std::size_t filters,
                                  std::size_t positions);

// Equal weights 1/|active| on the given layers.
std::map<LayerId, double> normalize_layer_weights(const std::vector<LayerId>& active);

template <typename T>
struct ContentTarget {
  LayerId layer;
  FeatureTensor<T> features;       // P, the source's responses at `layer`
  FeatureTensor<T> source;         // preprocessed source image
};

struct StyleLayerTarget {
  GramMatrix gram;  // A
  double weight = 0.0;
  std::size_t filters = 0;    // N
  std::size_t positions = 0;  // M
};

template <typename T>
struct StyleTarget {
  std::map<LayerId, StyleLayerTarget> layers;
  FeatureTensor<T> source;
};

// Sum of w_l E_l over layers with w_l > 0. Throws StateError naming any such
// layer without a gram in `grams`.
template <typename T>
double style_loss(const StyleTarget<T>& target, const std::map<LayerId, GramMatrix>& grams);

struct LossBreakdown {
  double content = 0.0;
  std::map<LayerId, double> style_terms;  // E_l
  double style = 0.0;
  double total = 0.0;
};

// alpha * L_content + beta * L_style over a candidate image.
template <typename T>
struct Objective {
  std::optional<ContentTarget<T>> content;
  StyleTarget<T> style;
  double alpha = 1.0;
  double beta = 1.0;

  // Resolution the targets were captured at.
  Shape image_shape() const;

  // Layers a forward pass must produce to evaluate this objective.
  std::vector<LayerId> layers() const;
  void validate() const;
};

template <typename T>
ContentTarget<T> capture_content(const Network<T>& network, const FeatureTensor<T>& image,
                                 const LayerId& layer);

template <typename T>
StyleTarget<T> capture_style(const Network<T>& network, const FeatureTensor<T>& image,
                             const std::map<LayerId, double>& layer_weights);

template <typename T>
struct Evaluation {
  LossBreakdown loss;
  LayerGradients<T> gradients;  // d total / d F, per layer
};

template <typename T>
Evaluation<T> evaluate(const Objective<T>& objective, const ActivationRecord<T>& record);

}  // namespace neuralcanvas
