#pragma once

// Model checkpoint container.
//
//   "MMRM"                      4 ASCII bytes
//   u32 version (= 1)
//   u32 loss kind               0 softmax-cross-entropy, 1 sigmoid-bce
//   3 x MLP section             audio encoder, video encoder, head
//     u32 n_layers
//     per layer: u32 in, u32 out, u32 activation (0 identity, 1 relu, 2 tanh),
//                in*out f64 weights (row-major, out x in), out f64 biases
//
// All integers and floats little-endian.

#include <string>
#include <string_view>

#include "mmr/byteio.hpp"
#include "mmr/models.hpp"

namespace mmr {

inline constexpr std::string_view kCheckpointMagic = "MMRM";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<char> encode_checkpoint(const FusionModel& m) {
  m.validate();
  byteio::Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(m.loss_kind == LossKind::SoftmaxCrossEntropy ? 0 : 1);
  for (const Mlp* mlp : {&m.audio_encoder, &m.video_encoder, &m.head}) {
    w.u32(static_cast<std::uint32_t>(mlp->size()));
    for (const Layer& l : *mlp) {
      w.u32(static_cast<std::uint32_t>(l.in));
      w.u32(static_cast<std::uint32_t>(l.out));
      w.u32(static_cast<std::uint32_t>(l.activation));
      for (double x : l.weight) w.f64(x);
      for (double x : l.bias) w.f64(x);
    }
  }
  return w.buffer();
}

inline FusionModel decode_checkpoint(std::string_view bytes) {
  byteio::Reader r(bytes);
  if (r.bytes(4, "magic") != kCheckpointMagic) throw FormatError("bad checkpoint magic", 0);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
  const std::size_t loss_at = r.offset();
  const std::uint32_t loss = r.u32("loss kind");
  if (loss > 1) throw FormatError("unknown loss kind", loss_at);
  FusionModel m;
  m.loss_kind = loss == 0 ? LossKind::SoftmaxCrossEntropy : LossKind::SigmoidBce;
  for (Mlp* mlp : {&m.audio_encoder, &m.video_encoder, &m.head}) {
    const std::uint32_t n_layers = r.u32("layer count");
    for (std::uint32_t k = 0; k < n_layers; ++k) {
      Layer l;
      l.in = r.u32("layer input dimension");
      l.out = r.u32("layer output dimension");
      const std::size_t act_at = r.offset();
      const std::uint32_t act = r.u32("activation tag");
      if (act > 2) throw FormatError("unknown activation tag", act_at);
      l.activation = static_cast<Activation>(act);
      r.need((l.in * l.out + l.out) * 8, "layer payload");
      l.weight.resize(l.in * l.out);
      l.bias.resize(l.out);
      for (double& x : l.weight) x = r.f64("weight");
      for (double& x : l.bias) x = r.f64("bias");
      mlp->push_back(std::move(l));
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what(), 0);
  }
  return m;
}

inline void save_checkpoint(const FusionModel& m, const std::string& path) {
  byteio::write_file(path, encode_checkpoint(m));
}

inline FusionModel load_checkpoint(const std::string& path) {
  return decode_checkpoint(byteio::read_file(path));
}

}  // namespace mmr
