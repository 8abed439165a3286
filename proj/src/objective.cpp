#include "neuralcanvas/objective.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace neuralcanvas {

namespace {

using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void require_same(FeatureMatrixView<T> a, FeatureMatrixView<T> b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols));
  }
}

void require_gram_sizes(const GramMatrix& g, const GramMatrix& a, std::size_t filters) {
  if (g.size != a.size || g.size != filters) {
    throw ShapeError("gram sizes " + std::to_string(g.size) + " and " +
                     std::to_string(a.size) + " for a layer of " + std::to_string(filters) +
                     " filters");
  }
}

template <typename T>
RowMatrixD to_double(FeatureMatrixView<T> f) {
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      f.entries.data(), static_cast<Eigen::Index>(f.rows), static_cast<Eigen::Index>(f.cols));
  return m.template cast<double>();
}

}  // namespace

template <typename T>
double content_loss(FeatureMatrixView<T> features, FeatureMatrixView<T> target) {
  require_same(features, target, "content loss");
  double sum = 0.0;
  for (std::size_t k = 0; k < features.entries.size(); ++k) {
    const double d = static_cast<double>(features.entries[k]) - static_cast<double>(target.entries[k]);
    sum += d * d;
  }
  return 0.5 * sum;
}

template <typename T>
FeatureMatrix<T> content_grad(FeatureMatrixView<T> features, FeatureMatrixView<T> target) {
  require_same(features, target, "content gradient");
  FeatureMatrix<T> grad(features.rows, features.cols);
  for (std::size_t k = 0; k < features.entries.size(); ++k) {
    const T f = features.entries[k];
    grad.entries[k] = f > T{} ? f - target.entries[k] : T{};
  }
  return grad;
}

template <typename T>
GramMatrix gram(FeatureMatrixView<T> features) {
  GramMatrix g(features.rows);
  if (features.rows == 0) return g;
  const RowMatrixD f = to_double(features);
  RowMatrixD lower = RowMatrixD::Zero(f.rows(), f.rows());
  lower.selfadjointView<Eigen::Lower>().rankUpdate(f);
  for (std::size_t i = 0; i < g.size; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

double style_layer_loss(const GramMatrix& gram, const GramMatrix& target, std::size_t filters,
                        std::size_t positions) {
  require_gram_sizes(gram, target, filters);
  double sum = 0.0;
  for (std::size_t k = 0; k < gram.entries.size(); ++k) {
    const double d = gram.entries[k] - target.entries[k];
    sum += d * d;
  }
  const double n = static_cast<double>(filters);
  const double m = static_cast<double>(positions);
  return sum / (4.0 * n * n * m * m);
}

template <typename T>
FeatureMatrix<T> style_layer_grad(FeatureMatrixView<T> features, const GramMatrix& gram,
                                  const GramMatrix& target, std::size_t filters,
                                  std::size_t positions) {
  require_gram_sizes(gram, target, filters);
  if (features.rows != filters || features.cols != positions) {
    throw ShapeError("style gradient: features " + std::to_string(features.rows) + "x" +
                     std::to_string(features.cols) + " for N=" + std::to_string(filters) +
                     ", M=" + std::to_string(positions));
  }
  const auto n = static_cast<Eigen::Index>(filters);
  RowMatrixD diff(n, n);
  for (std::size_t k = 0; k < gram.entries.size(); ++k) {
    diff.data()[k] = gram.entries[k] - target.entries[k];
  }
  const double nd = static_cast<double>(filters);
  const double md = static_cast<double>(positions);
  const RowMatrixD full = (diff * to_double(features)) / (nd * nd * md * md);

  FeatureMatrix<T> grad(features.rows, features.cols);
  for (std::size_t k = 0; k < grad.entries.size(); ++k) {
    grad.entries[k] = features.entries[k] > T{} ? static_cast<T>(full.data()[k]) : T{};
  }
  return grad;
}

std::map<LayerId, double> normalize_layer_weights(const std::vector<LayerId>& active) {
  if (active.empty()) throw ArgumentError("style layer set is empty");
  std::map<LayerId, double> weights;
  for (const auto& name : active) weights[name] = 0.0;
  const double w = 1.0 / static_cast<double>(weights.size());
  for (auto& [name, value] : weights) value = w;
  return weights;
}

template <typename T>
double style_loss(const StyleTarget<T>& target, const std::map<LayerId, GramMatrix>& grams) {
  double total = 0.0;
  for (const auto& [name, layer] : target.layers) {
    if (layer.weight <= 0.0) continue;
    auto it = grams.find(name);
    if (it == grams.end()) throw StateError("no gram supplied for style layer " + name);
    total += layer.weight * style_layer_loss(it->second, layer.gram, layer.filters, layer.positions);
  }
  return total;
}

template <typename T>
std::vector<LayerId> Objective<T>::layers() const {
  std::vector<LayerId> out;
  if (content) out.push_back(content->layer);
  for (const auto& [name, layer] : style.layers) {
    if (layer.weight > 0.0 && (out.empty() || out.front() != name)) {
      out.push_back(name);
    }
  }
  return out;
}

template <typename T>
Shape Objective<T>::image_shape() const {
  if (content) return content->source.shape();
  return style.source.shape();
}

template <typename T>
void Objective<T>::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ArgumentError("alpha and beta must be >= 0");
  if (alpha == 0.0 && beta == 0.0) throw ArgumentError("alpha and beta cannot both be zero");
  if (alpha > 0.0 && !content) throw ArgumentError("alpha > 0 needs a content target");
  if (beta > 0.0) {
    bool any = false;
    for (const auto& [name, layer] : style.layers) {
      if (layer.weight < 0.0) throw ArgumentError("negative weight on style layer " + name);
      any = any || layer.weight > 0.0;
    }
    if (!any) throw ArgumentError("beta > 0 needs at least one weighted style layer");
  }
}

template <typename T>
ContentTarget<T> capture_content(const Network<T>& network, const FeatureTensor<T>& image,
                                 const LayerId& layer) {
  auto record = network.forward_collect(image, {layer});
  return {layer, record.at(layer), image};
}

template <typename T>
StyleTarget<T> capture_style(const Network<T>& network, const FeatureTensor<T>& image,
                             const std::map<LayerId, double>& layer_weights) {
  std::vector<LayerId> names;
  for (const auto& [name, w] : layer_weights) names.push_back(name);
  auto record = network.forward_collect(image, names);
  StyleTarget<T> target;
  target.source = image;
  for (const auto& [name, w] : layer_weights) {
    const auto& f = record.at(name);
    target.layers[name] = {gram(f.matrix()), w, f.channels(), f.shape().spatial()};
  }
  return target;
}

template <typename T>
Evaluation<T> evaluate(const Objective<T>& objective, const ActivationRecord<T>& record) {
  Evaluation<T> result;
  auto accumulate = [&](const LayerId& name, const Shape& shape, FeatureMatrix<T> g,
                        double scale) {
    for (auto& v : g.entries) v = static_cast<T>(scale * static_cast<double>(v));
    FeatureTensor<T> t(std::move(g), shape.height, shape.width);
    auto [it, inserted] = result.gradients.try_emplace(name, std::move(t));
    if (!inserted) it->second += t;
  };

  if (objective.content) {
    const auto& target = *objective.content;
    if (!record.contains(target.layer)) {
      throw StateError("activation record lacks content layer " + target.layer);
    }
    const auto& f = record.at(target.layer);
    result.loss.content = content_loss(f.matrix(), target.features.matrix());
    if (objective.alpha != 0.0) {
      accumulate(target.layer, f.shape(), content_grad(f.matrix(), target.features.matrix()),
                 objective.alpha);
    }
  }

  for (const auto& [name, layer] : objective.style.layers) {
    if (layer.weight <= 0.0) continue;
    if (!record.contains(name)) throw StateError("activation record lacks style layer " + name);
    const auto& f = record.at(name);
    const GramMatrix g = gram(f.matrix());
    const double e = style_layer_loss(g, layer.gram, layer.filters, layer.positions);
    result.loss.style_terms[name] = e;
    result.loss.style += layer.weight * e;
    if (objective.beta != 0.0) {
      accumulate(name, f.shape(),
                 style_layer_grad(f.matrix(), g, layer.gram, layer.filters, layer.positions),
                 objective.beta * layer.weight);
    }
  }
  result.loss.total = objective.alpha * result.loss.content + objective.beta * result.loss.style;
  return result;
}

#define NEURALCANVAS_INSTANTIATE_OBJECTIVE(T)                                                 \
  template double content_loss(FeatureMatrixView<T>, FeatureMatrixView<T>);                    \
  template FeatureMatrix<T> content_grad(FeatureMatrixView<T>, FeatureMatrixView<T>);          \
  template GramMatrix gram(FeatureMatrixView<T>);                                              \
  template FeatureMatrix<T> style_layer_grad(FeatureMatrixView<T>, const GramMatrix&,         \
                                             const GramMatrix&, std::size_t, std::size_t);     \
  template double style_loss(const StyleTarget<T>&, const std::map<LayerId, GramMatrix>&);   \
  template struct Objective<T>;                                                                \
  template ContentTarget<T> capture_content(const Network<T>&, const FeatureTensor<T>&,        \
                                            const LayerId&);                                   \
  template StyleTarget<T> capture_style(const Network<T>&, const FeatureTensor<T>&,            \
                                        const std::map<LayerId, double>&);                     \
  template Evaluation<T> evaluate(const Objective<T>&, const ActivationRecord<T>&);

NEURALCANVAS_INSTANTIATE_OBJECTIVE(float)
NEURALCANVAS_INSTANTIATE_OBJECTIVE(double)

#undef NEURALCANVAS_INSTANTIATE_OBJECTIVE

}  // namespace neuralcanvas
