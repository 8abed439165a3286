#include "neuralcanvas/weights.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

namespace neuralcanvas {

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'C', 'W', '1'};
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { little(v, 2); }
  void u32(std::uint32_t v) { little(v, 4); }
  void u64(std::uint64_t v) { little(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void truncated(const char* what) const {
    throw TruncationError("weight file truncated at byte " + std::to_string(bytes_.size()) +
                              " while reading " + what + " at offset " +
                              std::to_string(pos_),
                          bytes_.size());
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (remaining() < n) truncated(what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(little(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(little(4, what)); }
  std::uint64_t u64(const char* what) { return little(8, what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  std::uint64_t little(std::size_t n, const char* what) {
    auto s = take(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<float> read_floats(ByteReader& in, std::size_t count, const char* what) {
  if (count > in.remaining() / 4) in.truncated(what);
  auto raw = in.take(count * 4, what);
  std::vector<float> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (std::size_t i = 0; i < 4; ++i) bits |= std::uint32_t{raw[4 * k + i]} << (8 * i);
    out[k] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace

const ConvKernelSet<float>* WeightSet::find(const std::string& name) const {
  for (const auto& entry : layers) {
    if (entry.name == name) return &entry.kernels;
  }
  return nullptr;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = kFnvOffset;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::vector<std::uint8_t> serialize_weights(const WeightSet& weights) {
  ByteWriter out;
  out.bytes(kMagic);
  out.u32(kWeightFormatVersion);
  out.u32(static_cast<std::uint32_t>(weights.layers.size()));
  for (const auto& entry : weights.layers) {
    if (entry.name.size() > 0xFFFF) throw ArgumentError("layer name too long: " + entry.name);
    out.u16(static_cast<std::uint16_t>(entry.name.size()));
    out.bytes({reinterpret_cast<const std::uint8_t*>(entry.name.data()), entry.name.size()});
    const auto& k = entry.kernels;
    out.u32(static_cast<std::uint32_t>(k.out_channels));
    out.u32(static_cast<std::uint32_t>(k.in_channels));
    out.u32(static_cast<std::uint32_t>(kKernelSize));
    out.u32(static_cast<std::uint32_t>(kKernelSize));
    for (float w : k.weights) out.f32(w);
    out.u32(static_cast<std::uint32_t>(k.bias.size()));
    for (float b : k.bias) out.f32(b);
  }
  for (float m : weights.preprocess.channel_mean) out.f32(m);
  out.u8(static_cast<std::uint8_t>(weights.preprocess.channel_order));
  const std::uint64_t checksum = fnv1a64(out.buffer());
  out.u64(checksum);
  return std::move(out.buffer());
}

WeightSet parse_weights(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("not an NCW1 weight file (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("layer count");

  WeightSet result;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint16_t name_len = in.u16("layer name length");
    auto name_bytes = in.take(name_len, "layer name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t out_c = in.u32("dims");
    const std::uint32_t in_c = in.u32("dims");
    const std::uint32_t kh = in.u32("dims");
    const std::uint32_t kw = in.u32("dims");
    if (kh != kKernelSize || kw != kKernelSize) {
      throw FormatError("layer " + name + " has " + std::to_string(kh) + "x" +
                        std::to_string(kw) + " kernels; only 3x3 is supported");
    }
    if (result.find(name) != nullptr) throw FormatError("duplicate layer " + name);
    const std::size_t n = std::size_t{out_c} * in_c * kh * kw;
    auto w = read_floats(in, n, "weights");
    const std::uint32_t bias_len = in.u32("bias length");
    if (bias_len != out_c) {
      throw FormatError("layer " + name + " has " + std::to_string(bias_len) +
                        " biases for " + std::to_string(out_c) + " filters");
    }
    auto b = read_floats(in, bias_len, "bias");
    result.layers.push_back({std::move(name),
                             ConvKernelSet<float>(out_c, in_c, std::move(w), std::move(b))});
  }
  for (auto& m : result.preprocess.channel_mean) m = in.f32("channel mean");
  const std::uint8_t order = in.u8("channel order");
  if (order > 1) throw FormatError("unknown channel order " + std::to_string(order));
  result.preprocess.channel_order = static_cast<ChannelOrder>(order);

  const std::size_t body_end = in.offset();
  const std::uint64_t stored = in.u64("checksum");
  if (in.remaining() != 0) {
    throw FormatError(std::to_string(in.remaining()) + " unexpected bytes after checksum");
  }
  if (fnv1a64(bytes.first(body_end)) != stored) {
    throw CorruptionError("weight file checksum mismatch");
  }
  return result;
}

WeightSet load_weights(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  if (file.bad()) throw IoError("error reading weight file " + path.string());
  return parse_weights(bytes);
}

void save_weights(const std::filesystem::path& path, const WeightSet& weights) {
  const auto bytes = serialize_weights(weights);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot create weight file " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!file) throw IoError("error writing weight file " + path.string());
}

}  // namespace neuralcanvas
