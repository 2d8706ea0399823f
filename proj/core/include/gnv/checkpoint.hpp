// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint container.
//
// Layout (all integers little-endian):
//   "GNVX"                      4 bytes
//   version                     u32
//   metadata length, metadata   u32 + UTF-8 JSON
//   sections until end of file:
//     name length, name         u32 + bytes
//     dtype                     u8 (0 = f32, 1 = f64)
//     rank, dims                u32 + u32[rank]
//     payload                   product(dims) values, IEEE-754
// The metadata carries "section_count"; readers reject files whose section
// list does not match it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gnv {

inline constexpr char kCheckpointMagic[4] = {'G', 'N', 'V', 'X'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct TensorSection {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::size_t> dims;
  std::vector<double> values;
};

struct CheckpointFile {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorSection> sections;

  const TensorSection* find(std::string_view name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file);
/// Throws CheckpointError with a kind per failure mode.
CheckpointFile decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames it into place.
void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

}  // namespace gnv
