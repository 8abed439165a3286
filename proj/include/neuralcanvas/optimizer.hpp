#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "neuralcanvas/network.hpp"
#include "neuralcanvas/objective.hpp"

namespace neuralcanvas {

enum class DescentMethod { plain, momentum, adam };
enum class InitKind { white_noise, content_image, style_image };

DescentMethod parse_descent_method(const std::string& text);
InitKind parse_init_kind(const std::string& text);
const char* to_string(DescentMethod method);
const char* to_string(InitKind init);

struct OptimizerConfig {
  DescentMethod method = DescentMethod::adam;
  double step_size = 10.0;
  std::size_t max_iters = 500;
  // Stop once |L[k-window] - L[k]| / L[k] < rel_tol. Zero runs the full budget.
  double rel_tol = 0.0;
  std::size_t tol_window = 10;
  std::uint64_t seed = 0;
  InitKind init = InitKind::white_noise;
  double noise_stddev = 64.0;  // preprocessed units

  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  LossBreakdown loss;
  double grad_max_norm = 0.0;
};

using LossTrace = std::vector<TraceEntry>;

// CSV with header "iter,content_loss,style_loss,total,grad_max_norm".
void write_trace_csv(std::ostream& out, const LossTrace& trace);

// Loss or gradient became NaN/inf. trace() holds every finite entry before it.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, LossTrace trace);
  std::size_t iteration() const noexcept { return iteration_; }
  const LossTrace& trace() const noexcept { return trace_; }

 private:
  std::size_t iteration_;
  LossTrace trace_;
};

// Seeded Gaussian white noise, or a copy of the objective's content/style
// source image.
template <typename T>
FeatureTensor<T> init_image(const Shape& shape, const OptimizerConfig& config,
                            const Objective<T>& objective);

template <typename T>
struct ImageGradient {
  LossBreakdown loss;
  FeatureTensor<T> gradient;
};

// Loss and analytic d total / d image for one candidate.
template <typename T>
ImageGradient<T> image_gradient(const Objective<T>& objective, const Network<T>& network,
                                const FeatureTensor<T>& image);

template <typename T>
struct MinimizeResult {
  FeatureTensor<T> image;
  LossTrace trace;
};

using IterationCallback = std::function<void(const TraceEntry&)>;

// One trace entry per iteration records the loss of the image before that
// iteration's update.
template <typename T>
MinimizeResult<T> minimize(const Objective<T>& objective, const Network<T>& network,
                           const OptimizerConfig& config,
                           const IterationCallback& on_iteration = {});

template <typename T>
MinimizeResult<T> minimize_from(const Objective<T>& objective, const Network<T>& network,
                                const OptimizerConfig& config, FeatureTensor<T> image,
                                const IterationCallback& on_iteration = {});

// Central differences of the total loss at flat image indices.
template <typename T>
std::vector<double> numerical_image_gradient(const Objective<T>& objective,
                                             const Network<T>& network,
                                             const FeatureTensor<T>& image,
                                             const std::vector<std::size_t>& indices,
                                             double step = 1e-3);

}  // namespace neuralcanvas
