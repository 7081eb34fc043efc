#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "fovea/neural.hpp"

namespace fovea {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelRole : std::uint8_t { Ventral = 0, Fixation = 1, Policy = 2 };

std::string_view to_string(ModelRole role) noexcept;

/// A trained network plus provenance: the hash of the configuration lineage
/// that produced it, the configuration text itself, and free-form metadata
/// (similarity mode, input geometry, ...).
struct Checkpoint {
  ModelRole role = ModelRole::Ventral;
  nn::Mlp model;
  std::uint64_t config_hash = 0;
  std::string config_text;
  std::map<std::string, std::string> meta;
};

/// Versioned little-endian binary: magic "FOVEACK\0", u32 version, u8 role,
/// u64 config hash, config text, metadata pairs, layer widths, activations,
/// heads, raw float64 parameters, trailing CRC-32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace fovea
