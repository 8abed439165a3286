#include "neuralcanvas/presets.hpp"

#include <cstdlib>

namespace neuralcanvas {

namespace {

const std::vector<LayerId> kFirstOfBlock = {"conv1_1", "conv2_1", "conv3_1", "conv4_1",
                                            "conv5_1"};

std::vector<LayerPreset> make_presets(const std::string& prefix, bool cumulative) {
  std::vector<LayerPreset> presets;
  for (std::size_t i = 0; i < kFirstOfBlock.size(); ++i) {
    LayerPreset p{prefix + static_cast<char>('a' + i), {}};
    if (cumulative) {
      p.layers.assign(kFirstOfBlock.begin(),
                      kFirstOfBlock.begin() + static_cast<std::ptrdiff_t>(i + 1));
    } else {
      p.layers = {kFirstOfBlock[i]};
    }
    presets.push_back(std::move(p));
  }
  return presets;
}

}  // namespace

const std::vector<LayerPreset>& content_presets() {
  static const auto presets = make_presets("content-", false);
  return presets;
}

const std::vector<LayerPreset>& style_presets() {
  static const auto presets = make_presets("style-", true);
  return presets;
}

const LayerPreset* find_preset(const std::vector<LayerPreset>& presets, const std::string& name) {
  for (const auto& p : presets) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::string preset_names(const std::vector<LayerPreset>& presets) {
  std::string out;
  for (const auto& p : presets) {
    if (!out.empty()) out += ", ";
    out += p.name;
  }
  return out;
}

std::filesystem::path resolve_weight_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv(kWeightPathEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return kDefaultWeightPath;
}

}  // namespace neuralcanvas
