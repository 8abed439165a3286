#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "neuralcanvas/network.hpp"
#include "neuralcanvas/optimizer.hpp"

namespace neuralcanvas {

struct LayerPreset {
  std::string name;
  std::vector<LayerId> layers;
};

// content-a..e: single layers conv1_1 .. conv5_1.
const std::vector<LayerPreset>& content_presets();
// style-a..e: conv1_1, then cumulatively up to conv1_1..conv5_1.
const std::vector<LayerPreset>& style_presets();

const LayerPreset* find_preset(const std::vector<LayerPreset>& presets, const std::string& name);
std::string preset_names(const std::vector<LayerPreset>& presets);

inline constexpr const char* kDefaultWeightPath = "models/vgg19.ncw1";
inline constexpr const char* kWeightPathEnv = "NEURALCANVAS_WEIGHTS";

// An explicit path wins, then $NEURALCANVAS_WEIGHTS, then kDefaultWeightPath.
std::filesystem::path resolve_weight_path(const std::string& explicit_path);

// Defaults of the `transfer` command: content on conv4_2, style on
// conv1_1..conv5_1 with equal weights, alpha/beta = 1e-3, average pooling.
struct TransferSettings {
  LayerId content_layer = "conv4_2";
  std::string style_preset = "style-e";
  double ratio = 1e-3;
  PoolingMode pooling = PoolingMode::average;
  std::size_t size = 512;
  OptimizerConfig optimizer;
};

// Common alpha/beta settings: the default, and a stronger emphasis on style.
inline constexpr double kRatioStrongStyle = 1e-4;
inline constexpr double kRatioDefault = 1e-3;

}  // namespace neuralcanvas
