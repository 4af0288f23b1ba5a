#ifndef BPR_NN_CHECKPOINT_HPP
#define BPR_NN_CHECKPOINT_HPP

#include <string>

#include "bpr/binary_io.hpp"
#include "bpr/nn/dense_net.hpp"

namespace bpr::nn {

// Layout: "BPRW", version u32, role (u8 length + UTF-8), layer count u32,
// (in, out) u32 pairs per layer, (activation u8, flags u8) per layer, then per
// layer row-major float32: weight, bias, [ln gain, ln shift], [sn u, sn v].
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_checkpoint(io::Writer& w, const DenseNet<T>& net, const std::string& role) {
  w.magic("BPRW");
  w.u32(kCheckpointVersion);
  w.short_string(role);
  w.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.spec.in));
    w.u32(static_cast<std::uint32_t>(l.spec.out));
  }
  for (const auto& l : net.layers()) {
    w.u8(static_cast<std::uint8_t>(l.spec.act));
    w.u8(static_cast<std::uint8_t>((l.spec.layer_norm ? 1 : 0) | (l.spec.spectral_norm ? 2 : 0)));
  }
  auto put = [&w](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v.data()[i]));
  };
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f32(static_cast<float>(l.weight(r, c)));
    put(l.bias);
    if (l.spec.layer_norm) {
      put(l.ln_gain);
      put(l.ln_shift);
    }
    if (l.spec.spectral_norm) {
      put(l.sn_u);
      put(l.sn_v);
    }
  }
}

template <class T>
DenseNet<T> read_checkpoint(io::Reader& r, std::string* role_out = nullptr) {
  r.expect_magic("BPRW");
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(r.source() + ": unsupported checkpoint version " + std::to_string(version) +
                      " at byte offset " + std::to_string(version_at) + " (supported: " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::string role = r.short_string();
  if (role_out) *role_out = role;
  const auto count = r.u32();
  if (count == 0 || count > 4096) throw FormatError(r.source() + ": implausible layer count");
  std::vector<LayerSpec> specs(count);
  for (auto& s : specs) {
    s.in = static_cast<int>(r.u32());
    s.out = static_cast<int>(r.u32());
  }
  for (auto& s : specs) {
    const auto act = r.u8();
    if (act > 2) throw FormatError(r.source() + ": unknown activation code at byte offset " + std::to_string(r.offset() - 1));
    s.act = static_cast<Activation>(act);
    const auto flags = r.u8();
    s.layer_norm = flags & 1;
    s.spectral_norm = flags & 2;
  }
  DenseNet<T> net;
  auto get = [&r](Vec<T>& v, int n) {
    v.resize(n);
    for (int i = 0; i < n; ++i) v[i] = static_cast<T>(r.f32());
  };
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& s = specs[k];
    if (k > 0 && specs[k - 1].out != s.in) throw FormatError(r.source() + ": layer dims do not chain");
    Layer<T> l;
    l.spec = s;
    l.weight.resize(s.out, s.in);
    for (int row = 0; row < s.out; ++row)
      for (int c = 0; c < s.in; ++c) l.weight(row, c) = static_cast<T>(r.f32());
    get(l.bias, s.out);
    if (s.layer_norm) {
      get(l.ln_gain, s.out);
      get(l.ln_shift, s.out);
    }
    if (s.spectral_norm) {
      get(l.sn_u, s.out);
      get(l.sn_v, s.in);
    }
    net.push_layer(std::move(l));
  }
  return net;
}

template <class T>
void save_checkpoint(const std::string& path, const DenseNet<T>& net, const std::string& role) {
  io::Writer w;
  write_checkpoint(w, net, role);
  w.save(path);
}

template <class T>
DenseNet<T> load_checkpoint(const std::string& path, std::string* role_out = nullptr) {
  auto r = io::Reader::from_file(path);
  auto net = read_checkpoint<T>(r, role_out);
  if (!r.at_end()) {
    throw FormatError(path + ": trailing bytes after checkpoint at byte offset " + std::to_string(r.offset()));
  }
  return net;
}

}  // namespace bpr::nn

#endif  // BPR_NN_CHECKPOINT_HPP
