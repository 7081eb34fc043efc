#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fovea/scene.hpp"

namespace fovea {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  SceneDistribution dist;
  std::uint64_t config_hash = 0;
  std::vector<Scene> scenes;
};

/// Layout (little-endian): magic "FOVEADS\0", u32 version, u64 config hash,
/// embedded distribution text, u32 width/height/channels/K/C/count, then one
/// record per scene (u64 seed, i32 bbox[4], i32 class, u8 attributes[K],
/// i32 anchors[K][2], f32 pixels[C*H*W]) and a trailing CRC-32.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Throws VersionError, TruncatedError, ChecksumError, or SchemaError (when
/// `expected` is given and dims/K/C differ). Never returns a partial dataset.
Dataset load_dataset(const std::filesystem::path& path, const std::optional<SceneDistribution>& expected = {});

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes, const std::optional<SceneDistribution>& expected = {});

}  // namespace fovea
