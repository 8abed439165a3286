#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neuralcanvas/image.hpp"
#include "neuralcanvas/kernels.hpp"

namespace neuralcanvas {

// NCW1 weight file, all integers and floats little-endian:
//
//   "NCW1" | u32 version (1) | u32 layer_count
//   per layer: u16 name_len | name (UTF-8) | u32 out, in, kh, kw
//              | out*in*kh*kw f32 weights | u32 bias_len | bias_len f32
//   f32 mean[3] | u8 channel_order (0 rgb, 1 bgr)
//   u64 FNV-1a of every preceding byte
inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct WeightEntry {
  std::string name;
  ConvKernelSet<float> kernels;

  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

// Pretrained conv parameters in file order, plus the preprocessing convention
// they were trained with.
struct WeightSet {
  std::vector<WeightEntry> layers;
  PreprocessSpec preprocess;

  const ConvKernelSet<float>* find(const std::string& name) const;

  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_weights(const WeightSet& weights);

// Validates magic, version, shapes and checksum. Throws FormatError,
// CorruptionError or TruncationError; never returns a partial set.
WeightSet parse_weights(std::span<const std::uint8_t> bytes);

WeightSet load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const WeightSet& weights);

}  // namespace neuralcanvas
