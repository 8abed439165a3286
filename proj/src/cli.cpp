#include "neuralcanvas/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <ostream>

#include "neuralcanvas/image.hpp"
#include "neuralcanvas/network.hpp"
#include "neuralcanvas/objective.hpp"
#include "neuralcanvas/optimizer.hpp"
#include "neuralcanvas/presets.hpp"
#include "neuralcanvas/weights.hpp"

namespace neuralcanvas {

namespace {

using Scalar = float;

struct RunOptions {
  std::string weights;
  std::size_t size = TransferSettings{}.size;
  std::string pooling = "avg";
  std::uint64_t seed = 0;
  std::string method = "adaptive-moments";
  double step = OptimizerConfig{}.step_size;
  std::size_t iters = OptimizerConfig{}.max_iters;
  double rel_tol = OptimizerConfig{}.rel_tol;
  std::string init = "white-noise";
  std::string output = "output.png";
  std::string trace;
  std::size_t log_every = 50;
};

void add_run_options(CLI::App& cmd, RunOptions& o) {
  cmd.add_option("-o,--output", o.output, "Output PNG path")->capture_default_str();
  cmd.add_option("--weights", o.weights,
                 std::string("NCW1 weight file (default: $") + kWeightPathEnv + " or " +
                     kDefaultWeightPath + ")");
  cmd.add_option("--size", o.size, "Long edge of the working resolution in pixels (0 keeps the input size)")
      ->capture_default_str();
  cmd.add_option("--pooling", o.pooling, "Pooling mode: avg or max")->capture_default_str();
  cmd.add_option("--seed", o.seed, "White-noise seed")->capture_default_str();
  cmd.add_option("--method", o.method, "plain-gd, momentum-gd or adaptive-moments")
      ->capture_default_str();
  cmd.add_option("--step", o.step, "Step size")->capture_default_str();
  cmd.add_option("--iters", o.iters, "Maximum iterations")->capture_default_str();
  cmd.add_option("--rel-tol", o.rel_tol,
                 "Stop when the relative loss change over 10 iterations falls below this")
      ->capture_default_str();
  cmd.add_option("--init", o.init, "white-noise, content-image or style-image")
      ->capture_default_str();
  cmd.add_option("--trace", o.trace, "Write the per-iteration loss trace as CSV");
  cmd.add_option("--log-every", o.log_every, "Progress line interval (0 disables)")
      ->capture_default_str();
}

OptimizerConfig optimizer_config(const RunOptions& o) {
  OptimizerConfig c;
  c.method = parse_descent_method(o.method);
  c.step_size = o.step;
  c.max_iters = o.iters;
  c.rel_tol = o.rel_tol;
  c.seed = o.seed;
  c.init = parse_init_kind(o.init);
  c.validate();
  return c;
}

// Loaded weights and the network built from them.
struct Engine {
  WeightSet weights;
  Network<Scalar> network;
};

Engine load_engine(const RunOptions& o) {
  const auto path = resolve_weight_path(o.weights);
  WeightSet weights = load_weights(path);
  auto spec = NetworkSpec::infer(weights, parse_pooling_mode(o.pooling));
  Network<Scalar> network(std::move(spec), weights);
  return {std::move(weights), std::move(network)};
}

void require_conv_layers(const NetworkSpec& spec, const std::vector<LayerId>& layers) {
  for (const auto& name : layers) {
    auto idx = spec.index_of(name);
    if (!idx || spec.layers[*idx].kind != LayerKind::conv) {
      throw ArgumentError("layer " + name + " is not a conv layer of the loaded network");
    }
  }
}

std::vector<LayerId> resolve_layers(const std::vector<LayerPreset>& presets,
                                    const std::string& name, const NetworkSpec& spec) {
  if (const LayerPreset* p = find_preset(presets, name)) {
    require_conv_layers(spec, p->layers);
    return p->layers;
  }
  auto idx = spec.index_of(name);
  if (idx && spec.layers[*idx].kind == LayerKind::conv) return {name};
  throw ArgumentError("unknown preset or layer '" + name + "'; presets: " +
                      preset_names(presets));
}

ImageBuffer load_sized(const std::string& path, std::size_t long_edge) {
  ImageBuffer img = read_image(path);
  if (long_edge == 0) return img;
  const auto [h, w] = fit_long_edge(img.height, img.width, long_edge);
  return resize_bilinear(img, h, w);
}

int optimize_and_save(const Objective<Scalar>& objective, const Engine& engine,
                      const RunOptions& o, std::ostream& out, std::ostream& err) {
  const OptimizerConfig config = optimizer_config(o);
  const auto start = std::chrono::steady_clock::now();
  auto log = [&](const TraceEntry& e) {
    if (o.log_every == 0 || e.iteration % o.log_every != 0) return;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    err << "iter " << e.iteration << "  total " << e.loss.total << "  content "
        << e.loss.content << "  style " << e.loss.style << "  (" << elapsed.count() << " s)\n";
  };
  auto write_trace = [&](const LossTrace& trace) {
    if (o.trace.empty()) return;
    std::ofstream file(o.trace);
    if (!file) throw IoError("cannot write trace " + o.trace);
    write_trace_csv(file, trace);
  };

  MinimizeResult<Scalar> result;
  try {
    result = minimize(objective, engine.network, config, log);
  } catch (const DivergenceError& e) {
    write_trace(e.trace());
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  }
  save_png(o.output, postprocess(result.image, engine.weights.preprocess));
  write_trace(result.trace);
  out << "wrote " << o.output << " after " << result.trace.size() << " iterations, final loss "
      << result.trace.back().loss.total << '\n';
  return kExitOk;
}

int cmd_content(const RunOptions& o, const std::string& image_path, const std::string& preset,
                std::ostream& out, std::ostream& err) {
  const Engine engine = load_engine(o);
  const auto layers = resolve_layers(content_presets(), preset, engine.network.spec());
  if (layers.size() != 1) throw ArgumentError("content reconstruction takes a single layer");
  const auto image = preprocess<Scalar>(load_sized(image_path, o.size), engine.weights.preprocess);

  Objective<Scalar> objective;
  objective.content = capture_content(engine.network, image, layers.front());
  objective.style.source = image;
  objective.alpha = 1.0;
  objective.beta = 0.0;
  return optimize_and_save(objective, engine, o, out, err);
}

int cmd_style(const RunOptions& o, const std::string& image_path, const std::string& preset,
              std::ostream& out, std::ostream& err) {
  const Engine engine = load_engine(o);
  const auto layers = resolve_layers(style_presets(), preset, engine.network.spec());
  const auto image = preprocess<Scalar>(load_sized(image_path, o.size), engine.weights.preprocess);

  Objective<Scalar> objective;
  objective.style = capture_style(engine.network, image, normalize_layer_weights(layers));
  objective.alpha = 0.0;
  objective.beta = 1.0;
  return optimize_and_save(objective, engine, o, out, err);
}

int cmd_transfer(const RunOptions& o, const TransferSettings& t, const std::string& content_path,
                 const std::string& style_path, std::ostream& out, std::ostream& err) {
  if (!(t.ratio > 0.0)) throw ArgumentError("--ratio must be positive");
  const Engine engine = load_engine(o);
  require_conv_layers(engine.network.spec(), {t.content_layer});
  const auto style_layers = resolve_layers(style_presets(), t.style_preset, engine.network.spec());

  const ImageBuffer content_img = load_sized(content_path, o.size);
  const ImageBuffer style_img =
      resize_bilinear(read_image(style_path), content_img.height, content_img.width);
  const auto& pre = engine.weights.preprocess;
  const auto content = preprocess<Scalar>(content_img, pre);
  const auto style = preprocess<Scalar>(style_img, pre);

  Objective<Scalar> objective;
  objective.content = capture_content(engine.network, content, t.content_layer);
  objective.style = capture_style(engine.network, style, normalize_layer_weights(style_layers));
  objective.alpha = t.ratio;
  objective.beta = 1.0;
  return optimize_and_save(objective, engine, o, out, err);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural style transfer: content and style reconstruction by pixel-space descent"};
  app.name("neuralcanvas");
  app.require_subcommand(1);

  RunOptions content_opts;
  std::string content_image;
  std::string content_preset = "content-a";
  auto* content = app.add_subcommand("content", "Reconstruct an image from one layer's responses");
  content->add_option("image", content_image, "Input image (PNG or JPEG)")->required();
  content->add_option("--preset", content_preset,
                      "content-a..content-e (conv1_1..conv5_1) or a conv layer name")
      ->capture_default_str();
  add_run_options(*content, content_opts);

  RunOptions style_opts;
  std::string style_image;
  std::string style_preset = "style-e";
  auto* style = app.add_subcommand("style", "Synthesize a texture matching an image's style");
  style->add_option("image", style_image, "Input image (PNG or JPEG)")->required();
  style->add_option("--preset", style_preset,
                    "style-a..style-e (conv1_1 up to conv1_1..conv5_1) or a conv layer name")
      ->capture_default_str();
  add_run_options(*style, style_opts);

  RunOptions transfer_opts;
  TransferSettings transfer_settings;
  std::string transfer_content;
  std::string transfer_style;
  auto* transfer = app.add_subcommand("transfer", "Render a content image in the style of another");
  transfer->add_option("content", transfer_content, "Content image (PNG or JPEG)")->required();
  transfer->add_option("style", transfer_style, "Style image (PNG or JPEG)")->required();
  transfer->add_option("--ratio", transfer_settings.ratio, "alpha/beta content-to-style weighting")
      ->capture_default_str();
  transfer->add_option("--content-layer", transfer_settings.content_layer, "Content layer")
      ->capture_default_str();
  transfer->add_option("--style-preset", transfer_settings.style_preset,
                       "style-a..style-e or a conv layer name")
      ->capture_default_str();
  add_run_options(*transfer, transfer_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (content->parsed()) return cmd_content(content_opts, content_image, content_preset, out, err);
    if (style->parsed()) return cmd_style(style_opts, style_image, style_preset, out, err);
    transfer_settings.pooling = parse_pooling_mode(transfer_opts.pooling);
    transfer_settings.size = transfer_opts.size;
    return cmd_transfer(transfer_opts, transfer_settings, transfer_content, transfer_style, out,
                        err);
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "weight file error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace neuralcanvas
