// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Feature grids over an axis-aligned box with trilinear and multi-distance
// interpolation. Values are stored channel-last: [Nx][Ny][Nz][C].

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gnv/math.hpp"

namespace gnv {

struct GridLayout {
  std::size_t channels = 6;
  std::array<std::size_t, 3> dims{160, 160, 160};
  Aabb aabb;

  /// Throws ConfigError unless dims >= 2, channels >= 1 and the box is valid.
  void validate() const;
  std::size_t node_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
  std::size_t value_count() const noexcept { return node_count() * channels; }
  std::size_t node_offset(std::size_t ix, std::size_t iy, std::size_t iz) const noexcept {
    return ((ix * dims[1] + iy) * dims[2] + iz) * channels;
  }
  std::vector<std::size_t> tensor_shape() const { return {dims[0], dims[1], dims[2], channels}; }
  bool operator==(const GridLayout& o) const {
    return channels == o.channels && dims == o.dims && aabb.min == o.aabb.min && aabb.max == o.aabb.max;
  }
};

struct VoxelGrid {
  GridLayout layout;
  std::vector<double> data;

  static VoxelGrid zeros(const GridLayout& layout);
};

/// Interpolation strides in lattice cells; {1} is plain trilinear.
struct InterpConfig {
  std::vector<int> scales{1, 2, 4};

  /// Scales must be strictly increasing, positive and below min(dims)/2.
  void validate(const GridLayout& layout) const;
  std::size_t output_size(const GridLayout& layout) const noexcept { return scales.size() * layout.channels; }
};

/// Continuous lattice index of `p`, or nullopt when p lies outside the box.
std::optional<Vec3> world_to_grid(const GridLayout& layout, const Vec3& p);

/// 8-corner blend of all channels at p; zero outside the box.
void trilinear_sample(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                      std::span<double> out);

/// Per-scale trilinear blends on stride-s sub-lattices, concatenated in scale
/// order. Output size |scales| * channels; zero outside the box.
void mdi_sample(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                const InterpConfig& config, std::span<double> out);

/// Accumulates d_out into grid-value gradients `d_data` and, when `d_p` is
/// non-null, into the position gradient.
void mdi_sample_backward(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                         const InterpConfig& config, std::span<const double> d_out,
                         std::span<double> d_data, Vec3* d_p);

/// Trilinear sample of a single channel. When `d_p` is non-null it receives
/// (overwrites) the spatial gradient.
double sample_channel(const GridLayout& layout, std::span<const double> data, const Vec3& p,
                      std::size_t channel, Vec3* d_p = nullptr);

/// Scatters d_out * (trilinear weights) into channel `channel` of `d_data`.
void sample_channel_backward(const GridLayout& layout, const Vec3& p, std::size_t channel,
                             double d_out, std::span<double> d_data);

}  // namespace gnv
