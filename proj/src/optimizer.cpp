#include "neuralcanvas/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace neuralcanvas {

DescentMethod parse_descent_method(const std::string& text) {
  if (text == "plain-gd" || text == "plain") return DescentMethod::plain;
  if (text == "momentum-gd" || text == "momentum") return DescentMethod::momentum;
  if (text == "adaptive-moments" || text == "adam") return DescentMethod::adam;
  throw ArgumentError("unknown optimizer method '" + text +
                      "' (expected plain-gd, momentum-gd or adaptive-moments)");
}

InitKind parse_init_kind(const std::string& text) {
  if (text == "white-noise" || text == "noise") return InitKind::white_noise;
  if (text == "content-image" || text == "content") return InitKind::content_image;
  if (text == "style-image" || text == "style") return InitKind::style_image;
  throw ArgumentError("unknown init '" + text +
                      "' (expected white-noise, content-image or style-image)");
}

const char* to_string(DescentMethod method) {
  switch (method) {
    case DescentMethod::plain: return "plain-gd";
    case DescentMethod::momentum: return "momentum-gd";
    case DescentMethod::adam: return "adaptive-moments";
  }
  return "?";
}

const char* to_string(InitKind init) {
  switch (init) {
    case InitKind::white_noise: return "white-noise";
    case InitKind::content_image: return "content-image";
    case InitKind::style_image: return "style-image";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw ArgumentError("step size must be positive");
  if (max_iters < 1) throw ArgumentError("max_iters must be at least 1");
  if (!(rel_tol >= 0.0)) throw ArgumentError("rel_tol must be >= 0");
  if (tol_window < 1) throw ArgumentError("tolerance window must be at least 1");
  if (!(noise_stddev >= 0.0)) throw ArgumentError("noise stddev must be >= 0");
}

void write_trace_csv(std::ostream& out, const LossTrace& trace) {
  const auto old_precision = out.precision(17);
  out << "iter,content_loss,style_loss,total,grad_max_norm\n";
  for (const auto& e : trace) {
    out << e.iteration << ',' << e.loss.content << ',' << e.loss.style << ','
        << e.loss.total << ',' << e.grad_max_norm << '\n';
  }
  out.precision(old_precision);
}

DivergenceError::DivergenceError(std::size_t iteration, LossTrace trace)
    : Error("optimization diverged at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      trace_(std::move(trace)) {}

template <typename T>
FeatureTensor<T> init_image(const Shape& shape, const OptimizerConfig& config,
                            const Objective<T>& objective) {
  if (shape != objective.image_shape()) {
    throw ArgumentError("candidate shape " + shape.to_string() +
                        " does not match the objective's capture shape " +
                        objective.image_shape().to_string());
  }
  switch (config.init) {
    case InitKind::content_image:
      if (!objective.content || objective.content->source.empty()) {
        throw ArgumentError("content-image init needs a content target");
      }
      return objective.content->source;
    case InitKind::style_image:
      if (objective.style.source.shape() != shape) {
        throw ArgumentError("style-image init needs a style source of shape " +
                            shape.to_string());
      }
      return objective.style.source;
    case InitKind::white_noise:
      break;
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, config.noise_stddev);
  FeatureTensor<T> image(shape);
  for (auto& v : image.values()) v = static_cast<T>(noise(rng));
  return image;
}

template <typename T>
ImageGradient<T> image_gradient(const Objective<T>& objective, const Network<T>& network,
                                const FeatureTensor<T>& image) {
  const auto record = network.forward_collect(image, objective.layers());
  auto eval = evaluate(objective, record);
  return {std::move(eval.loss), network.backward_to_image(record, eval.gradients)};
}

namespace {

template <typename T>
double max_abs(const FeatureTensor<T>& t) {
  double m = 0.0;
  for (T v : t.values()) {
    const double a = std::abs(static_cast<double>(v));
    if (!(a <= m)) m = a;  // propagates NaN
  }
  return m;
}

bool converged(const LossTrace& trace, const OptimizerConfig& config) {
  if (config.rel_tol <= 0.0 || trace.size() <= config.tol_window) return false;
  const double now = trace.back().loss.total;
  const double then = trace[trace.size() - 1 - config.tol_window].loss.total;
  if (now == 0.0) return true;
  return std::abs(then - now) / std::abs(now) < config.rel_tol;
}

}  // namespace

template <typename T>
MinimizeResult<T> minimize(const Objective<T>& objective, const Network<T>& network,
                           const OptimizerConfig& config, const IterationCallback& on_iteration) {
  return minimize_from(objective, network, config,
                       init_image(objective.image_shape(), config, objective), on_iteration);
}

template <typename T>
MinimizeResult<T> minimize_from(const Objective<T>& objective, const Network<T>& network,
                                const OptimizerConfig& config, FeatureTensor<T> image,
                                const IterationCallback& on_iteration) {
  objective.validate();
  config.validate();
  if (image.shape() != objective.image_shape()) {
    throw ArgumentError("candidate shape " + image.shape().to_string() +
                        " does not match the objective's capture shape " +
                        objective.image_shape().to_string());
  }

  MinimizeResult<T> result;
  std::vector<double> first(image.size(), 0.0);   // velocity or first moment
  std::vector<double> second(image.size(), 0.0);  // adam second moment
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    auto step = image_gradient(objective, network, image);
    TraceEntry entry{iter, std::move(step.loss), max_abs(step.gradient)};
    if (!std::isfinite(entry.loss.total) || !std::isfinite(entry.grad_max_norm)) {
      throw DivergenceError(iter, std::move(result.trace));
    }
    result.trace.push_back(entry);
    if (on_iteration) on_iteration(result.trace.back());
    if (converged(result.trace, config)) break;

    auto x = image.values();
    const auto g = step.gradient.values();
    switch (config.method) {
      case DescentMethod::plain:
        for (std::size_t k = 0; k < x.size(); ++k) {
          x[k] = static_cast<T>(static_cast<double>(x[k]) - config.step_size * g[k]);
        }
        break;
      case DescentMethod::momentum:
        for (std::size_t k = 0; k < x.size(); ++k) {
          first[k] = config.momentum * first[k] - config.step_size * g[k];
          x[k] = static_cast<T>(static_cast<double>(x[k]) + first[k]);
        }
        break;
      case DescentMethod::adam: {
        beta1_power *= config.adam_beta1;
        beta2_power *= config.adam_beta2;
        const double c1 = 1.0 - beta1_power;
        const double c2 = 1.0 - beta2_power;
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double gk = g[k];
          first[k] = config.adam_beta1 * first[k] + (1.0 - config.adam_beta1) * gk;
          second[k] = config.adam_beta2 * second[k] + (1.0 - config.adam_beta2) * gk * gk;
          const double m_hat = first[k] / c1;
          const double v_hat = second[k] / c2;
          x[k] = static_cast<T>(static_cast<double>(x[k]) -
                                config.step_size * m_hat / (std::sqrt(v_hat) + config.adam_epsilon));
        }
        break;
      }
    }
  }
  result.image = std::move(image);
  return result;
}

template <typename T>
std::vector<double> numerical_image_gradient(const Objective<T>& objective,
                                             const Network<T>& network,
                                             const FeatureTensor<T>& image,
                                             const std::vector<std::size_t>& indices,
                                             double step) {
  const auto layers = objective.layers();
  auto total_at = [&](const FeatureTensor<T>& x) {
    return evaluate(objective, network.forward_collect(x, layers)).loss.total;
  };
  std::vector<double> out;
  out.reserve(indices.size());
  FeatureTensor<T> probe = image;
  for (std::size_t idx : indices) {
    if (idx >= image.size()) {
      throw ArgumentError("pixel index " + std::to_string(idx) + " outside image of " +
                          std::to_string(image.size()) + " values");
    }
    const T original = probe[idx];
    probe[idx] = static_cast<T>(static_cast<double>(original) + step);
    const double plus = total_at(probe);
    probe[idx] = static_cast<T>(static_cast<double>(original) - step);
    const double minus = total_at(probe);
    probe[idx] = original;
    out.push_back((plus - minus) / (2.0 * step));
  }
  return out;
}

#define NEURALCANVAS_INSTANTIATE_OPTIMIZER(T)                                                   \
  template FeatureTensor<T> init_image(const Shape&, const OptimizerConfig&, const Objective<T>&); \
  template ImageGradient<T> image_gradient(const Objective<T>&, const Network<T>&,               \
                                           const FeatureTensor<T>&);                             \
  template MinimizeResult<T> minimize(const Objective<T>&, const Network<T>&,                    \
                                      const OptimizerConfig&, const IterationCallback&);         \
  template MinimizeResult<T> minimize_from(const Objective<T>&, const Network<T>&,               \
                                           const OptimizerConfig&, FeatureTensor<T>,             \
                                           const IterationCallback&);                            \
  template std::vector<double> numerical_image_gradient(const Objective<T>&, const Network<T>&,  \
                                                        const FeatureTensor<T>&,                 \
                                                        const std::vector<std::size_t>&, double);

NEURALCANVAS_INSTANTIATE_OPTIMIZER(float)
NEURALCANVAS_INSTANTIATE_OPTIMIZER(double)

#undef NEURALCANVAS_INSTANTIATE_OPTIMIZER

}  // namespace neuralcanvas
