#include "dalkit/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dalkit {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'L', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void array(const Eigen::ArrayXd& a) {
    u64(static_cast<std::uint64_t>(a.size()));
    for (Index i = 0; i < a.size(); ++i) f64(a[i]);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    if (pos_ >= bytes_.size()) throw FormatError("model file truncated");
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::ArrayXd array() {
    const std::uint64_t n = u64();
    if (n > bytes_.size() / 8) throw FormatError("model file truncated");
    Eigen::ArrayXd a(static_cast<Index>(n));
    for (Index i = 0; i < a.size(); ++i) a[i] = f64();
    return a;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void write_mixed_stats(ByteWriter& w, const MixedStats& s) {
  w.f64(s.alpha_used);
  w.f64(s.eps);
  w.array(s.mu_st);
  w.array(s.var_st);
  w.array(s.mu_ts);
  w.array(s.var_ts);
}

MixedStats read_mixed_stats(ByteReader& r) {
  MixedStats s;
  s.alpha_used = r.f64();
  s.eps = r.f64();
  s.mu_st = r.array();
  s.var_st = r.array();
  s.mu_ts = r.array();
  s.var_ts = r.array();
  return s;
}

enum LayerTag : std::uint8_t { kDense = 0, kRelu = 1, kAlign = 2, kSoftmax = 3 };

void write_payload(ByteWriter& w, const Network& net) {
  w.u32(static_cast<std::uint32_t>(net.input_dim()));
  w.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (Index i = 0; i < net.layer_count(); ++i) {
    const Layer& layer = net.layer(i);
    if (auto* dense = dynamic_cast<const DenseLayer*>(&layer)) {
      w.u8(kDense);
      w.u32(static_cast<std::uint32_t>(dense->in_features()));
      w.u32(static_cast<std::uint32_t>(dense->out_features(0)));
      for (Index r = 0; r < dense->weights().rows(); ++r)
        for (Index c = 0; c < dense->weights().cols(); ++c)
          w.f64(dense->weights()(r, c));
      for (Index r = 0; r < dense->bias().size(); ++r) w.f64(dense->bias()[r]);
    } else if (dynamic_cast<const ReluLayer*>(&layer)) {
      w.u8(kRelu);
    } else if (auto* align = dynamic_cast<const AlignLayer*>(&layer)) {
      w.u8(kAlign);
      const DaLayerState& s = align->state();
      w.u32(static_cast<std::uint32_t>(s.channels));
      w.u8(align->alpha_trainable() ? 1 : 0);
      w.f64(s.alpha);
      w.f64(s.eps);
      w.f64(s.momentum_ma);
      w.i64(s.updates);
      w.u8(s.mode == DaMode::frozen ? 1 : 0);
      w.array(s.moving_mu_s);
      w.array(s.moving_var_s);
      w.array(s.moving_mu_t);
      w.array(s.moving_var_t);
      w.u8(s.frozen_stats ? 1 : 0);
      if (s.frozen_stats) write_mixed_stats(w, *s.frozen_stats);
    } else if (dynamic_cast<const SoftmaxLayer*>(&layer)) {
      w.u8(kSoftmax);
    } else {
      throw FormatError("unknown layer kind in network");
    }
  }
}

Network read_payload(ByteReader& r) {
  const Index input_dim = static_cast<Index>(r.u32());
  const Index layer_count = static_cast<Index>(r.u32());
  Network net(input_dim);
  for (Index i = 0; i < layer_count; ++i) {
    const std::uint8_t tag = r.u8();
    switch (tag) {
      case kDense: {
        const Index in = static_cast<Index>(r.u32());
        const Index out = static_cast<Index>(r.u32());
        net.add_dense(out);
        auto& dense = static_cast<DenseLayer&>(net.layer(net.layer_count() - 1));
        if (dense.in_features() != in)
          throw FormatError("dense layer extent mismatch");
        for (Index row = 0; row < out; ++row)
          for (Index col = 0; col < in; ++col) dense.weights()(row, col) = r.f64();
        for (Index row = 0; row < out; ++row) dense.bias()[row] = r.f64();
        break;
      }
      case kRelu:
        net.add_relu();
        break;
      case kAlign: {
        const Index channels = static_cast<Index>(r.u32());
        const bool trainable = r.u8() != 0;
        const double alpha = r.f64();
        const double eps = r.f64();
        const double momentum = r.f64();
        net.add_align(alpha, trainable, eps, momentum);
        auto& align = static_cast<AlignLayer&>(net.layer(net.layer_count() - 1));
        DaLayerState& s = align.state();
        if (s.channels != channels)
          throw FormatError("alignment layer extent mismatch");
        s.updates = r.i64();
        s.mode = r.u8() != 0 ? DaMode::frozen : DaMode::train;
        s.moving_mu_s = r.array();
        s.moving_var_s = r.array();
        s.moving_mu_t = r.array();
        s.moving_var_t = r.array();
        if (r.u8() != 0) s.frozen_stats = read_mixed_stats(r);
        break;
      }
      case kSoftmax:
        net.add_softmax();
        break;
      default:
        throw FormatError("unknown layer tag in model file");
    }
  }
  if (!r.exhausted()) throw FormatError("trailing bytes after model payload");
  return net;
}

}  // namespace

std::string serialize_model(const Network& net) {
  ByteWriter payload;
  write_payload(payload, net);

  ByteWriter out;
  out.u8(kMagic[0]);
  out.u8(kMagic[1]);
  out.u8(kMagic[2]);
  out.u8(kMagic[3]);
  out.u32(kFormatVersion);
  out.u64(payload.bytes().size());
  std::string bytes = out.bytes();
  bytes += payload.bytes();
  ByteWriter tail;
  tail.u64(fnv1a(payload.bytes()));
  bytes += tail.bytes();
  return bytes;
}

Network deserialize_model(std::string_view bytes) {
  constexpr std::size_t kHeaderSize = 4 + 4 + 8;
  if (bytes.size() < kHeaderSize + 8) throw FormatError("model file truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a model file (bad magic)");

  ByteReader header(bytes.substr(4, 12));
  const std::uint32_t version = header.u32();
  if (version != kFormatVersion)
    throw FormatError("unsupported model format version " +
                      std::to_string(version));
  const std::uint64_t payload_size = header.u64();
  if (bytes.size() != kHeaderSize + payload_size + 8)
    throw FormatError("model file truncated");

  const std::string_view payload = bytes.substr(kHeaderSize, payload_size);
  ByteReader tail(bytes.substr(kHeaderSize + payload_size, 8));
  if (tail.u64() != fnv1a(payload))
    throw FormatError("model file checksum mismatch");

  ByteReader r(payload);
  return read_payload(r);
}

void save_model(const Network& net, const std::string& path) {
  const std::string bytes = serialize_model(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

Network load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::string tensor_to_bytes(const Tensor& t) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (Index e : t.shape()) w.u64(static_cast<std::uint64_t>(e));
  for (Index i = 0; i < t.size(); ++i) w.f64(t.array()[i]);
  return w.bytes();
}

Tensor tensor_from_bytes(std::string_view bytes) {
  ByteReader r(bytes);
  const Index rank = static_cast<Index>(r.u32());
  Tensor::Shape shape(static_cast<std::size_t>(rank));
  for (auto& e : shape) e = static_cast<Index>(r.u64());
  Index n = 1;
  for (Index e : shape) n *= e;
  Eigen::ArrayXd data(n);
  for (Index i = 0; i < n; ++i) data[i] = r.f64();
  if (!r.exhausted()) throw FormatError("trailing bytes after tensor payload");
  return {std::move(shape), std::move(data)};
}

}  // namespace dalkit
