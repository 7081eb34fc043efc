#include "fovea/checkpoint.hpp"

#include <cstring>

#include "fovea/binary_io.hpp"
#include "fovea/error.hpp"

namespace fovea {

namespace {
constexpr char kMagic[8] = {'F', 'O', 'V', 'E', 'A', 'C', 'K', '\0'};
}

std::string_view to_string(ModelRole role) noexcept {
  switch (role) {
    case ModelRole::Ventral: return "ventral";
    case ModelRole::Fixation: return "m1";
    case ModelRole::Policy: return "dorsal";
  }
  return "?";
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  const auto& spec = ck.model.spec();
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic));
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(ck.role));
  w.u64(ck.config_hash);
  w.str(ck.config_text);
  w.u32(static_cast<std::uint32_t>(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(spec.widths.size()));
  for (int v : spec.widths) w.i32(v);
  for (auto a : spec.hidden) w.u8(static_cast<std::uint8_t>(a));
  w.u32(static_cast<std::uint32_t>(spec.heads.size()));
  for (const auto& h : spec.heads) {
    w.str(h.name);
    w.i32(h.width);
    w.u8(static_cast<std::uint8_t>(h.map));
  }
  const auto params = ck.model.parameters();
  w.u64(params.size());
  for (double p : params) w.f64(p);
  w.seal();
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.bytes(sizeof kMagic, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  verify_crc(bytes, "checkpoint");

  Checkpoint ck;
  const std::uint8_t role = r.u8("role");
  if (role > static_cast<std::uint8_t>(ModelRole::Policy)) throw FormatError("unknown checkpoint role");
  ck.role = static_cast<ModelRole>(role);
  ck.config_hash = r.u64("config hash");
  ck.config_text = r.str("config text");
  const std::uint32_t n_meta = r.u32("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str("metadata key");
    ck.meta[k] = r.str("metadata value");
  }
  nn::MlpSpec spec;
  const std::uint32_t n_widths = r.u32("layer count");
  if (n_widths < 3 || n_widths > 64) throw FormatError("implausible layer count in checkpoint");
  for (std::uint32_t i = 0; i < n_widths; ++i) spec.widths.push_back(r.i32("layer width"));
  for (std::uint32_t i = 0; i + 2 < n_widths; ++i) {
    const auto a = r.u8("activation");
    if (a > static_cast<std::uint8_t>(nn::Activation::Identity)) throw FormatError("unknown activation");
    spec.hidden.push_back(static_cast<nn::Activation>(a));
  }
  const std::uint32_t n_heads = r.u32("head count");
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    nn::HeadSpec h;
    h.name = r.str("head name");
    h.width = r.i32("head width");
    const auto m = r.u8("head map");
    if (m > static_cast<std::uint8_t>(nn::OutputMap::Softmax)) throw FormatError("unknown output map");
    h.map = static_cast<nn::OutputMap>(m);
    spec.heads.push_back(std::move(h));
  }
  ck.model = nn::Mlp(spec, 0);
  const std::uint64_t n_params = r.u64("parameter count");
  if (n_params != ck.model.parameters().size()) throw FormatError("parameter count disagrees with the layer widths");
  std::vector<double> params(n_params);
  for (auto& p : params) p = r.f64("parameters");
  ck.model.set_parameters(params);
  if (r.remaining() != 4) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace fovea
