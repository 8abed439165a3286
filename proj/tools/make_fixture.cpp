// Writes the small random-weight network the test suite runs against:
// conv1_1 (3->4), conv2_1 (4->8), conv3_1 (8->8), Caffe VGG preprocessing.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <random>

#include "neuralcanvas/weights.hpp"

namespace {

neuralcanvas::ConvKernelSet<float> random_kernels(std::mt19937_64& rng, std::size_t out,
                                                  std::size_t in) {
  // He initialization keeps responses at a similar scale from layer to layer.
  std::normal_distribution<double> weight(0.0, std::sqrt(2.0 / (9.0 * static_cast<double>(in))));
  std::uniform_real_distribution<double> bias(-1.0, 1.0);
  std::vector<float> w(out * in * 9);
  std::vector<float> b(out);
  for (auto& v : w) v = static_cast<float>(weight(rng));
  for (auto& v : b) v = static_cast<float>(bias(rng));
  return {out, in, std::move(w), std::move(b)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the mini fixture network (NCW1)"};
  std::string output = "mini_fixture.ncw1";
  std::uint64_t seed = 20150826;
  app.add_option("output", output, "Output path")->capture_default_str();
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(seed);
  neuralcanvas::WeightSet weights;
  weights.preprocess = neuralcanvas::PreprocessSpec::caffe_vgg();
  weights.layers.push_back({"conv1_1", random_kernels(rng, 4, 3)});
  weights.layers.push_back({"conv2_1", random_kernels(rng, 8, 4)});
  weights.layers.push_back({"conv3_1", random_kernels(rng, 8, 8)});
  try {
    neuralcanvas::save_weights(output, weights);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 3;
  }
  std::cout << "wrote " << output << '\n';
  return 0;
}
