#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuralcanvas/kernels.hpp"
#include "neuralcanvas/tensor.hpp"
#include "neuralcanvas/weights.hpp"

namespace neuralcanvas {

// Layer names follow the VGG convention: convB_K for the K-th convolution of
// block B (each implicitly followed by a ReLU) and poolB closing block B.
using LayerId = std::string;

enum class LayerKind { conv, pool };
enum class PoolingMode { average, max };

const char* to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(const std::string& text);

struct LayerDef {
  LayerId name;
  LayerKind kind = LayerKind::conv;
  std::size_t out_channels = 0;  // conv only; pools keep their input width

  friend bool operator==(const LayerDef&, const LayerDef&) = default;
};

struct NetworkSpec {
  std::vector<LayerDef> layers;
  PoolingMode pooling = PoolingMode::average;
  std::size_t input_channels = 3;

  // The 16 conv + 5 pool feature extractor of VGG-19.
  static NetworkSpec vgg19(PoolingMode pooling = PoolingMode::average);

  // Topology implied by the conv layers of a weight set: convs ordered by
  // (block, index) with a pool between consecutive blocks. A complete VGG-19
  // weight set yields vgg19().
  static NetworkSpec infer(const WeightSet& weights,
                           PoolingMode pooling = PoolingMode::average);

  std::optional<std::size_t> index_of(const LayerId& name) const;
  std::size_t conv_count() const;
  std::size_t pool_count() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Activations from one forward pass. Conv entries are post-ReLU responses.
// Layers past the deepest wanted one are never computed; pool outputs are
// kept only when wanted since backward passes do not need them.
template <typename T>
class ActivationRecord {
 public:
  const Shape& input_shape() const { return input_shape_; }
  std::size_t depth() const { return shapes_.size(); }
  const std::vector<LayerId>& wanted() const { return wanted_; }

  bool computed(const LayerId& name) const;
  bool contains(const LayerId& name) const;
  // Throws StateError when the layer was not retained.
  const FeatureTensor<T>& at(const LayerId& name) const;
  const Shape& shape_of(const LayerId& name) const;

  friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;

 private:
  template <typename>
  friend class Network;

  std::vector<LayerId> names_;
  std::vector<Shape> shapes_;
  std::vector<FeatureTensor<T>> values_;
  std::vector<LayerId> wanted_;
  Shape input_shape_;
};

template <typename T>
using LayerGradients = std::map<LayerId, FeatureTensor<T>>;

// Immutable feature extractor. Weights are converted to T at build time.
template <typename T>
class Network {
 public:
  // Throws ConfigError naming a missing layer or describing a shape mismatch.
  Network(NetworkSpec spec, const WeightSet& weights);

  const NetworkSpec& spec() const { return spec_; }
  const ConvKernelSet<T>& kernels(const LayerId& name) const;

  // Shape of every layer's output for an input of the given shape, in topology
  // order.
  std::vector<Shape> layer_shapes(const Shape& input) const;

  ActivationRecord<T> forward_collect(const FeatureTensor<T>& input,
                                      const std::vector<LayerId>& wanted) const;

  // Back-propagates per-layer gradients (with respect to the recorded
  // activations) to the input. Gradients injected at several layers add up.
  FeatureTensor<T> backward_to_image(const ActivationRecord<T>& record,
                                     const LayerGradients<T>& layer_grads) const;

 private:
  struct Stage {
    LayerDef def;
    std::optional<ConvKernelSet<T>> conv;
  };

  NetworkSpec spec_;
  std::vector<Stage> stages_;
};

template <typename T>
Network<T> build_network(NetworkSpec spec, const WeightSet& weights) {
  return Network<T>(std::move(spec), weights);
}

}  // namespace neuralcanvas
