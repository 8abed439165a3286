#include <doctest.h>

#include <random>

#include "neuralcanvas/kernels.hpp"
#include "neuralcanvas/network.hpp"
#include "support/oracles.hpp"

using namespace neuralcanvas;
using testsupport::fixture_network;
using testsupport::random_tensor;

namespace {

// Zero-valued weights with VGG-19 shapes; only the topology matters here.
WeightSet vgg19_zero_weights() {
  WeightSet w;
  w.preprocess = PreprocessSpec::caffe_vgg();
  std::size_t in = 3;
  for (const auto& def : NetworkSpec::vgg19().layers) {
    if (def.kind != LayerKind::conv) continue;
    const std::size_t out = def.out_channels;
    w.layers.push_back({def.name, ConvKernelSet<float>(out, in, std::vector<float>(out * in * 9),
                                                       std::vector<float>(out))});
    in = out;
  }
  return w;
}

const std::vector<LayerId> kFixtureConvs = {"conv1_1", "conv2_1", "conv3_1"};

}  // namespace

TEST_CASE("vgg19 topology") {
  const NetworkSpec spec = NetworkSpec::vgg19();
  CHECK(spec.conv_count() == 16);
  CHECK(spec.pool_count() == 5);
  CHECK(spec.pooling == PoolingMode::average);
  CHECK(spec.layers.front().name == "conv1_1");
  CHECK(spec.layers.back().name == "pool5");
  const std::map<std::string, std::size_t> widths = {
      {"conv1_2", 64}, {"conv2_2", 128}, {"conv3_4", 256}, {"conv4_2", 512}, {"conv5_4", 512}};
  for (const auto& [name, n] : widths) {
    CAPTURE(name);
    REQUIRE(spec.index_of(name).has_value());
    CHECK(spec.layers[*spec.index_of(name)].out_channels == n);
  }

  const WeightSet w = vgg19_zero_weights();
  CHECK(NetworkSpec::infer(w) == spec);
  const Network<float> net(spec, w);
  CHECK(net.kernels("conv1_1").out_channels == 64);
  CHECK(net.kernels("conv1_1").in_channels == 3);
}

TEST_CASE("construction errors name the offending layer") {
  WeightSet w = vgg19_zero_weights();
  std::erase_if(w.layers, [](const WeightEntry& e) { return e.name == "conv3_2"; });
  try {
    Network<float> net(NetworkSpec::vgg19(), w);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conv3_2") != std::string::npos);
  }

  WeightSet bad = vgg19_zero_weights();
  for (auto& e : bad.layers) {
    if (e.name == "conv2_1") e.kernels = ConvKernelSet<float>(128, 32, std::vector<float>(128 * 32 * 9), std::vector<float>(128));
  }
  try {
    Network<float> net(NetworkSpec::vgg19(), bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("conv2_1") != std::string::npos);
    CHECK(msg.find("64") != std::string::npos);
    CHECK(msg.find("32") != std::string::npos);
  }

  NetworkSpec leading_pool = NetworkSpec::infer(testsupport::fixture_weights());
  leading_pool.layers.insert(leading_pool.layers.begin(), LayerDef{"pool0", LayerKind::pool, 0});
  CHECK_THROWS_AS(Network<float>(leading_pool, testsupport::fixture_weights()), ConfigError);
}

TEST_CASE("shape ladder on full vgg19") {
  const Network<float> net(NetworkSpec::vgg19(), vgg19_zero_weights());
  for (const Shape input : {Shape{3, 64, 64}, Shape{3, 37, 51}}) {
    const auto shapes = net.layer_shapes(input);
    const auto& layers = net.spec().layers;
    REQUIRE(shapes.size() == layers.size());
    std::size_t h = input.height;
    std::size_t w = input.width;
    std::size_t c = 3;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].kind == LayerKind::pool) {
        h /= 2;
        w /= 2;
      } else {
        c = layers[i].out_channels;
      }
      CAPTURE(layers[i].name);
      CHECK(shapes[i] == Shape{c, h, w});
    }
  }

  const FeatureTensor<float> x(Shape{3, 64, 64}, 1.0F);
  const auto record = net.forward_collect(x, {"conv1_1", "conv2_1"});
  CHECK(record.at("conv1_1").shape() == Shape{64, 64, 64});
  CHECK(record.at("conv1_1").shape().spatial() == 4096);
  CHECK(record.at("conv2_1").shape() == Shape{128, 32, 32});
  CHECK_FALSE(record.computed("conv2_2"));
}

TEST_CASE("fixture topology is inferred from its weights") {
  const auto net = fixture_network<double>();
  const auto& layers = net.spec().layers;
  REQUIRE(layers.size() == 5);
  const std::vector<std::string> names = {"conv1_1", "pool1", "conv2_1", "pool2", "conv3_1"};
  for (std::size_t i = 0; i < names.size(); ++i) CHECK(layers[i].name == names[i]);
  CHECK(net.spec().conv_count() == 3);
  CHECK(net.spec().pool_count() == 2);
}

TEST_CASE("forward_collect") {
  const auto net = fixture_network<double>();
  std::mt19937_64 rng(5);
  const auto x = random_tensor<double>(Shape{3, 12, 10}, rng, -50.0, 50.0);

  SUBCASE("deterministic") {
    const auto a = net.forward_collect(x, kFixtureConvs);
    const auto b = net.forward_collect(x, kFixtureConvs);
    CHECK(a == b);
  }
  SUBCASE("first layer equals relu of conv") {
    const auto r = net.forward_collect(x, {"conv1_1"});
    CHECK(r.at("conv1_1") == relu_forward(conv2d_forward(x, net.kernels("conv1_1"))));
    CHECK_FALSE(r.computed("pool1"));
    CHECK(r.depth() == 1);
  }
  SUBCASE("unwanted pool outputs are not retained") {
    const auto r = net.forward_collect(x, {"conv2_1"});
    CHECK(r.computed("pool1"));
    CHECK_THROWS_AS(r.at("pool1"), StateError);
    CHECK_THROWS_AS(r.at("conv3_1"), StateError);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(net.forward_collect(x, {}), ArgumentError);
    CHECK_THROWS_AS(net.forward_collect(x, {"conv4_2"}), ConfigError);
    CHECK_THROWS_AS(net.forward_collect(FeatureTensor<double>(Shape{1, 8, 8}), {"conv1_1"}),
                    ShapeError);
  }
}

TEST_CASE("pooling mode only affects layers from pool1 onward") {
  const auto avg = fixture_network<double>(PoolingMode::average);
  const auto max = fixture_network<double>(PoolingMode::max);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor<double>(Shape{3, 16, 16}, rng, -100.0, 100.0);
    const std::vector<LayerId> wanted = {"conv1_1", "pool1", "conv2_1", "conv3_1"};
    const auto a = avg.forward_collect(x, wanted);
    const auto m = max.forward_collect(x, wanted);
    CHECK(a.at("conv1_1") == m.at("conv1_1"));
    CHECK_FALSE(a.at("pool1") == m.at("pool1"));
    CHECK_FALSE(a.at("conv2_1") == m.at("conv2_1"));
    CHECK_FALSE(a.at("conv3_1") == m.at("conv3_1"));
  }
}

TEST_CASE("backward_to_image") {
  const auto net = fixture_network<double>();
  std::mt19937_64 rng(21);
  const Shape in_shape{3, 12, 12};
  const auto x = random_tensor<double>(in_shape, rng, -60.0, 60.0);
  const auto record = net.forward_collect(x, kFixtureConvs);

  SUBCASE("zero gradients") {
    LayerGradients<double> grads;
    for (const auto& l : kFixtureConvs) grads.emplace(l, FeatureTensor<double>(record.at(l).shape()));
    const auto g = net.backward_to_image(record, grads);
    CHECK(g.shape() == in_shape);
    for (double v : g.values()) CHECK(v == 0.0);
    const auto none = net.backward_to_image(record, {});
    for (double v : none.values()) CHECK(v == 0.0);
  }

  SUBCASE("single injection at conv1_1 is one relu/conv backward step") {
    const auto g1 = random_tensor<double>(record.at("conv1_1").shape(), rng);
    const auto got = net.backward_to_image(record, {{"conv1_1", g1}});
    const auto expected =
        conv2d_backward(in_shape, net.kernels("conv1_1"), relu_backward(record.at("conv1_1"), g1));
    CHECK(testsupport::relative_error(testsupport::to_doubles(got),
                                      testsupport::to_doubles(expected)) == 0.0);
  }

  SUBCASE("multi-layer injection is the sum of single injections") {
    for (int trial = 0; trial < 20; ++trial) {
      LayerGradients<double> all;
      std::vector<double> summed(in_shape.size(), 0.0);
      for (const auto& l : kFixtureConvs) {
        auto g = random_tensor<double>(record.at(l).shape(), rng);
        const auto single = net.backward_to_image(record, {{l, g}});
        for (std::size_t i = 0; i < summed.size(); ++i) summed[i] += single[i];
        all.emplace(l, std::move(g));
      }
      const auto joint = net.backward_to_image(record, all);
      CHECK(testsupport::relative_error(testsupport::to_doubles(joint), summed) < 1e-6);
    }
  }

  SUBCASE("errors") {
    const auto shallow = net.forward_collect(x, {"conv1_1"});
    CHECK_THROWS_AS(
        net.backward_to_image(shallow, {{"conv2_1", FeatureTensor<double>(Shape{8, 6, 6})}}),
        StateError);
    CHECK_THROWS_AS(
        net.backward_to_image(record, {{"conv2_1", FeatureTensor<double>(Shape{8, 5, 5})}}),
        ShapeError);
  }
}

TEST_CASE("end-to-end gradient matches finite differences") {
  for (const PoolingMode mode : {PoolingMode::average, PoolingMode::max}) {
    CAPTURE(to_string(mode));
    const auto net = fixture_network<double>(mode);
    std::mt19937_64 rng(mode == PoolingMode::average ? 31 : 32);
    const Shape in_shape{3, 8, 8};
    // Scalar loss: sum_l <R_l, F_l> + 1/2 |F_l|^2, so dL/dF_l = R_l + F_l.
    LayerGradients<double> probes;
    const auto x0 = random_tensor<double>(in_shape, rng, -40.0, 40.0);
    const auto base = net.forward_collect(x0, kFixtureConvs);
    for (const auto& l : kFixtureConvs) probes.emplace(l, random_tensor<double>(base.at(l).shape(), rng));

    auto loss = [&](const std::vector<double>& v) {
      const auto r = net.forward_collect(testsupport::from_doubles<double>(in_shape, v), kFixtureConvs);
      double s = 0.0;
      for (const auto& l : kFixtureConvs) {
        const auto& f = r.at(l);
        s += testsupport::dot(probes.at(l), f) + 0.5 * testsupport::dot(f, f);
      }
      return s;
    };

    LayerGradients<double> grads;
    for (const auto& l : kFixtureConvs) {
      FeatureTensor<double> g = probes.at(l);
      g += base.at(l);
      grads.emplace(l, std::move(g));
    }
    const auto analytic = net.backward_to_image(base, grads);
    const auto numeric = testsupport::central_differences(loss, testsupport::to_doubles(x0), 1e-5);
    CHECK(testsupport::relative_error(testsupport::to_doubles(analytic), numeric) < 1e-4);
  }
}

TEST_CASE("float and double networks agree") {
  const auto nd = fixture_network<double>();
  const auto nf = fixture_network<float>();
  std::mt19937_64 rng(3);
  const auto x = random_tensor<double>(Shape{3, 16, 16}, rng, -100.0, 100.0);
  const auto rd = nd.forward_collect(x, {"conv3_1"});
  const auto rf = nf.forward_collect(x.cast<float>(), {"conv3_1"});
  CHECK(testsupport::relative_error(testsupport::to_doubles(rd.at("conv3_1")),
                                    testsupport::to_doubles(rf.at("conv3_1"))) < 1e-5);
}
