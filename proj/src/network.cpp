#include "neuralcanvas/network.hpp"

#include <algorithm>
#include <charconv>
#include <tuple>

namespace neuralcanvas {

const char* to_string(PoolingMode mode) {
  return mode == PoolingMode::average ? "avg" : "max";
}

PoolingMode parse_pooling_mode(const std::string& text) {
  if (text == "avg" || text == "average") return PoolingMode::average;
  if (text == "max") return PoolingMode::max;
  throw ArgumentError("unknown pooling mode '" + text + "' (expected avg or max)");
}

NetworkSpec NetworkSpec::vgg19(PoolingMode pooling) {
  static constexpr std::size_t kWidths[5] = {64, 128, 256, 512, 512};
  static constexpr std::size_t kDepths[5] = {2, 2, 4, 4, 4};
  NetworkSpec spec;
  spec.pooling = pooling;
  for (std::size_t b = 0; b < 5; ++b) {
    const std::string block = std::to_string(b + 1);
    for (std::size_t k = 0; k < kDepths[b]; ++k) {
      spec.layers.push_back({"conv" + block + "_" + std::to_string(k + 1), LayerKind::conv,
                             kWidths[b]});
    }
    spec.layers.push_back({"pool" + block, LayerKind::pool, 0});
  }
  return spec;
}

namespace {

// Parses "convB_K" into (B, K).
std::optional<std::pair<int, int>> parse_conv_name(const std::string& name) {
  if (name.rfind("conv", 0) != 0) return std::nullopt;
  const char* first = name.data() + 4;
  const char* last = name.data() + name.size();
  int block = 0;
  int index = 0;
  auto r1 = std::from_chars(first, last, block);
  if (r1.ec != std::errc{} || r1.ptr == last || *r1.ptr != '_') return std::nullopt;
  auto r2 = std::from_chars(r1.ptr + 1, last, index);
  if (r2.ec != std::errc{} || r2.ptr != last) return std::nullopt;
  return std::pair{block, index};
}

std::string shape_text(std::size_t out, std::size_t in) {
  return std::to_string(out) + "x" + std::to_string(in) + "x3x3";
}

}  // namespace

NetworkSpec NetworkSpec::infer(const WeightSet& weights, PoolingMode pooling) {
  if (weights.layers.empty()) throw ConfigError("weight set has no conv layers");
  std::vector<std::tuple<int, int, const WeightEntry*>> convs;
  for (const auto& entry : weights.layers) {
    auto parsed = parse_conv_name(entry.name);
    if (!parsed) throw ConfigError("cannot place layer '" + entry.name + "' in a VGG topology");
    convs.emplace_back(parsed->first, parsed->second, &entry);
  }
  std::sort(convs.begin(), convs.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });

  NetworkSpec spec;
  spec.pooling = pooling;
  spec.input_channels = std::get<2>(convs.front())->kernels.in_channels;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& [block, index, entry] = convs[i];
    if (i > 0 && std::get<0>(convs[i - 1]) != block) {
      spec.layers.push_back({"pool" + std::to_string(std::get<0>(convs[i - 1])),
                             LayerKind::pool, 0});
    }
    spec.layers.push_back({entry->name, LayerKind::conv, entry->kernels.out_channels});
  }

  NetworkSpec full = vgg19(pooling);
  std::vector<LayerDef> full_convs;
  std::copy_if(full.layers.begin(), full.layers.end(), std::back_inserter(full_convs),
               [](const LayerDef& d) { return d.kind == LayerKind::conv; });
  std::vector<LayerDef> ours;
  std::copy_if(spec.layers.begin(), spec.layers.end(), std::back_inserter(ours),
               [](const LayerDef& d) { return d.kind == LayerKind::conv; });
  if (ours == full_convs && spec.input_channels == 3) return full;
  return spec;
}

std::optional<std::size_t> NetworkSpec::index_of(const LayerId& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t NetworkSpec::conv_count() const {
  return static_cast<std::size_t>(std::count_if(
      layers.begin(), layers.end(), [](const LayerDef& d) { return d.kind == LayerKind::conv; }));
}

std::size_t NetworkSpec::pool_count() const { return layers.size() - conv_count(); }

template <typename T>
bool ActivationRecord<T>::computed(const LayerId& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

template <typename T>
bool ActivationRecord<T>::contains(const LayerId& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it != names_.end() && !values_[static_cast<std::size_t>(it - names_.begin())].empty();
}

template <typename T>
const FeatureTensor<T>& ActivationRecord<T>::at(const LayerId& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw StateError("layer " + name + " was not computed");
  const auto& v = values_[static_cast<std::size_t>(it - names_.begin())];
  if (v.empty()) throw StateError("layer " + name + " was not retained");
  return v;
}

template <typename T>
const Shape& ActivationRecord<T>::shape_of(const LayerId& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw StateError("layer " + name + " was not computed");
  return shapes_[static_cast<std::size_t>(it - names_.begin())];
}

template <typename T>
Network<T>::Network(NetworkSpec spec, const WeightSet& weights) : spec_(std::move(spec)) {
  if (spec_.layers.empty() || spec_.layers.front().kind != LayerKind::conv) {
    throw ConfigError("network topology must start with a conv layer");
  }
  std::size_t channels = spec_.input_channels;
  for (const auto& def : spec_.layers) {
    Stage stage{def, std::nullopt};
    if (def.kind == LayerKind::conv) {
      const ConvKernelSet<float>* k = weights.find(def.name);
      if (k == nullptr) throw ConfigError("weight set is missing layer " + def.name);
      if (k->out_channels != def.out_channels || k->in_channels != channels) {
        throw ConfigError("layer " + def.name + ": expected kernels " +
                          shape_text(def.out_channels, channels) + ", got " +
                          shape_text(k->out_channels, k->in_channels));
      }
      stage.conv = k->template cast<T>();
      channels = def.out_channels;
    }
    stages_.push_back(std::move(stage));
  }
}

template <typename T>
const ConvKernelSet<T>& Network<T>::kernels(const LayerId& name) const {
  for (const auto& s : stages_) {
    if (s.def.name == name && s.conv) return *s.conv;
  }
  throw ConfigError("no conv layer named " + name);
}

template <typename T>
std::vector<Shape> Network<T>::layer_shapes(const Shape& input) const {
  std::vector<Shape> shapes;
  Shape s = input;
  for (const auto& stage : stages_) {
    s = stage.conv ? Shape{stage.def.out_channels, s.height, s.width} : pooled_shape(s);
    shapes.push_back(s);
  }
  return shapes;
}

template <typename T>
ActivationRecord<T> Network<T>::forward_collect(const FeatureTensor<T>& input,
                                                const std::vector<LayerId>& wanted) const {
  if (wanted.empty()) throw ArgumentError("forward pass requested no layers");
  if (input.channels() != spec_.input_channels) {
    throw ShapeError("network expects " + std::to_string(spec_.input_channels) +
                     " input channels, got " + input.shape().to_string());
  }
  std::size_t depth = 0;
  std::vector<bool> keep(stages_.size(), false);
  for (const auto& name : wanted) {
    auto idx = spec_.index_of(name);
    if (!idx) throw ConfigError("layer " + name + " is not in the network topology");
    depth = std::max(depth, *idx + 1);
    keep[*idx] = true;
  }
  for (std::size_t i = 0; i < depth; ++i) {
    const bool feeds_pool = i + 1 < depth && !stages_[i + 1].conv;
    if (stages_[i].conv || feeds_pool) keep[i] = true;
  }

  ActivationRecord<T> record;
  record.input_shape_ = input.shape();
  record.wanted_ = wanted;
  record.values_.reserve(depth);
  const FeatureTensor<T>* previous = &input;
  FeatureTensor<T> scratch;
  for (std::size_t i = 0; i < depth; ++i) {
    const Stage& stage = stages_[i];
    FeatureTensor<T> out;
    if (stage.conv) {
      out = relu_forward(conv2d_forward(*previous, *stage.conv));
    } else if (spec_.pooling == PoolingMode::average) {
      out = avgpool_forward(*previous);
    } else {
      out = maxpool_forward(*previous);
    }
    record.names_.push_back(stage.def.name);
    record.shapes_.push_back(out.shape());
    if (keep[i]) {
      record.values_.push_back(std::move(out));
      previous = &record.values_.back();
    } else {
      record.values_.emplace_back();
      scratch = std::move(out);
      previous = &scratch;
    }
  }
  return record;
}

template <typename T>
FeatureTensor<T> Network<T>::backward_to_image(const ActivationRecord<T>& record,
                                               const LayerGradients<T>& layer_grads) const {
  const std::size_t depth = record.names_.size();

  std::vector<const FeatureTensor<T>*> injected(depth, nullptr);
  std::size_t deepest = 0;
  bool any = false;
  for (const auto& [name, grad] : layer_grads) {
    auto idx = spec_.index_of(name);
    if (!idx || *idx >= depth) {
      throw StateError("gradient supplied for layer " + name +
                       " which the activation record does not retain");
    }
    if (grad.shape() != record.shapes_[*idx]) {
      throw ShapeError("gradient for " + name + " has shape " + grad.shape().to_string() +
                       ", activation is " + record.shapes_[*idx].to_string());
    }
    injected[*idx] = &grad;
    deepest = std::max(deepest, *idx);
    any = true;
  }
  if (!any) return FeatureTensor<T>(record.input_shape_);

  FeatureTensor<T> grad = *injected[deepest];
  for (std::size_t i = deepest + 1; i-- > 0;) {
    if (i < deepest && injected[i] != nullptr) grad += *injected[i];
    const Stage& stage = stages_[i];
    const Shape& in_shape = i == 0 ? record.input_shape_ : record.shapes_[i - 1];
    if (stage.conv) {
      grad = conv2d_backward(in_shape, *stage.conv,
                             relu_backward(record.values_[i], grad));
    } else if (spec_.pooling == PoolingMode::average) {
      grad = avgpool_backward(in_shape, grad);
    } else {
      grad = maxpool_backward(record.values_[i - 1], grad);
    }
  }
  return grad;
}

template class ActivationRecord<float>;
template class ActivationRecord<double>;
template class Network<float>;
template class Network<double>;

}  // namespace neuralcanvas
