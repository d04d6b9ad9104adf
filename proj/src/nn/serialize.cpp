#include "hybridsig/nn/serialize.hpp"

#include <bit>
#include <cstring>

namespace hybridsig::nn {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void f32s(const Eigen::VectorXf& values) {
    for (float v : values) put(std::bit_cast<std::uint32_t>(v), 4);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void f32s(Eigen::VectorXf& out) {
    need(static_cast<std::size_t>(out.size()) * 4);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get(4)));
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("model file truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kFlagAdam = 1;

bool valid_kind(std::uint8_t tag) { return tag >= 1 && tag <= 6; }

}  // namespace

std::size_t layer_descriptor_bytes(const Layer<float>& layer) { return 1 + 4 + 4 * layer.input_shape.size() + 4; }

std::vector<std::uint8_t> save_model(const CnnModel<float>& model, const AdamState<float>* optimizer) {
  Writer w;
  for (char c : {'H', 'S', 'I', 'G'}) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  w.u32(optimizer ? kFlagAdam : 0);
  for (const auto& l : model.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.input_shape.size()));
    for (Index d : l.input_shape) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(l.units));
    if (l.trainable()) {
      w.f32s(l.weight.values());
      w.f32s(l.bias.values());
    }
  }
  if (optimizer) {
    const auto params = model.parameters();
    if (optimizer->m.size() != params.size() || optimizer->v.size() != params.size()) {
      throw std::invalid_argument("save_model: optimizer state does not match model");
    }
    w.u64(static_cast<std::uint64_t>(optimizer->step));
    w.f64(optimizer->lr);
    w.f64(optimizer->beta1);
    w.f64(optimizer->beta2);
    w.f64(optimizer->epsilon);
    for (std::size_t i = 0; i < params.size(); i += 2) {
      w.f32s(optimizer->m[i].values());
      w.f32s(optimizer->m[i + 1].values());
      w.f32s(optimizer->v[i].values());
      w.f32s(optimizer->v[i + 1].values());
    }
  }
  return w.take();
}

LoadedModel load_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kModelHeaderBytes || std::memcmp(bytes.data(), "HSIG", 4) != 0) {
    throw FormatError("model file: bad magic");
  }
  Reader r(bytes.subspan(4));
  if (r.u32() != kModelFormatVersion) throw FormatError("model file: unsupported version");
  const std::uint32_t count = r.u32();
  const std::uint32_t flags = r.u32();
  if (count == 0 || count > 1024) throw FormatError("model file: implausible layer count");
  if (flags & ~kFlagAdam) throw FormatError("model file: unknown flags");

  struct Record {
    LayerSpec spec;
    Shape input_shape;
  };
  std::vector<Record> records;
  std::vector<std::pair<Eigen::VectorXf, Eigen::VectorXf>> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t tag = r.u8();
    if (!valid_kind(tag)) throw FormatError("model file: unknown layer kind");
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 3) throw FormatError("model file: bad layer rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0 || d > (1 << 20)) throw FormatError("model file: bad layer dimension");
    }
    const std::uint32_t units = r.u32();
    const auto kind = static_cast<LayerKind>(tag);
    records.push_back({{kind, static_cast<Index>(units)}, shape});
    if (kind == LayerKind::Conv3x3 || kind == LayerKind::Dense) {
      if (units == 0 || units > (1 << 20)) throw FormatError("model file: bad unit count");
      const Index fan_in = kind == LayerKind::Conv3x3 ? kKernel * kKernel * shape.back() : shape_size(shape);
      Eigen::VectorXf weights(fan_in * units);
      Eigen::VectorXf bias(units);
      r.f32s(weights);
      r.f32s(bias);
      params.emplace_back(std::move(weights), std::move(bias));
    }
  }

  std::vector<LayerSpec> specs;
  for (const auto& rec : records) specs.push_back(rec.spec);
  if (records.front().input_shape.size() != 3) throw FormatError("model file: input must be H x W x C");
  LoadedModel out;
  try {
    out.model = CnnModel<float>(records.front().input_shape, specs);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model file: inconsistent layers: ") + e.what());
  }
  std::size_t p = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& layer = out.model.layers()[i];
    if (layer.input_shape != records[i].input_shape) throw FormatError("model file: layer shapes do not chain");
    if (!layer.trainable()) continue;
    layer.weight.values() = std::move(params[p].first);
    layer.bias.values() = std::move(params[p].second);
    ++p;
  }

  if (flags & kFlagAdam) {
    AdamState<float> state(out.model.parameters(), 0.0);
    state.step = static_cast<std::int64_t>(r.u64());
    state.lr = r.f64();
    state.beta1 = r.f64();
    state.beta2 = r.f64();
    state.epsilon = r.f64();
    for (std::size_t i = 0; i < state.m.size(); i += 2) {
      r.f32s(state.m[i].values());
      r.f32s(state.m[i + 1].values());
      r.f32s(state.v[i].values());
      r.f32s(state.v[i + 1].values());
    }
    out.optimizer = std::move(state);
  }
  if (!r.done()) throw FormatError("model file: trailing bytes");
  return out;
}

}  // namespace hybridsig::nn
