// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Skinning-weight volume generated from a per-subject embedding, blend-weight
// lookup and the observation-to-canonical point deformation.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "gnv/autodiff.hpp"
#include "gnv/math.hpp"
#include "gnv/skeleton.hpp"
#include "gnv/voxel_grid.hpp"

namespace gnv {

inline constexpr double kBlendEpsilon = 1e-8;

struct WeightNetConfig {
  std::size_t embedding_dim = 128;
  std::size_t expand = 1024;
  // Hidden volume widths at 4^3, 8^3, 16^3, ...
  std::vector<std::size_t> channels{256, 128, 64};

  std::size_t resolution() const noexcept { return std::size_t{4} << channels.size(); }
};

/// Affine expansion of the embedding to a 1^3 x expand volume followed by
/// non-overlapping transposed 3D convolutions (x4, then x2 per stage) up to
/// resolution^3 x (K+1). Hidden activations are ReLU; the output passes
/// through softplus so every entry is non-negative. The last channel is
/// background.
class WeightVolumeNet {
 public:
  struct Cache {
    RowMatrix embedding;             // 1 x D_z
    std::vector<RowMatrix> volumes;  // post-activation volume per stage, stage 0 = expanded vector
  };

  WeightVolumeNet() = default;
  WeightVolumeNet(std::size_t bone_count, const WeightNetConfig& config, const Aabb& aabb);

  const WeightNetConfig& config() const noexcept { return config_; }
  std::size_t output_channels() const noexcept { return bone_count_ + 1; }
  GridLayout output_layout() const;

  void add_params(ParameterStore& store, std::mt19937_64& rng) const;

  /// Generates the weight volume. When `prior` is non-empty (one value per
  /// output entry) the softplus output is multiplied by it elementwise.
  VoxelGrid forward(const ParameterStore& store, std::span<const double> z, std::span<const double> prior,
                    Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `store` and the embedding gradient
  /// into `d_z`.
  void backward(ParameterStore& store, const Cache& cache, std::span<const double> prior,
                std::span<const double> d_volume, std::span<double> d_z) const;

 private:
  std::size_t bone_count_ = 0;
  WeightNetConfig config_;
  Aabb aabb_;
};

/// Fixed multiplicative prior on the weight volume: for bone i a Gaussian of
/// the distance to its rest segment (width `sigma`), and a constant level for
/// the background channel.
std::vector<double> bone_weight_prior(const GridLayout& layout, const Skeleton& skeleton, double sigma,
                                      double background_level);

enum class WeightSampling {
  kCanonical,  // bone i's weight read at R_c^i x + T_c^i
  kObserved,   // all weights read at x
};

struct BlendWeights {
  std::vector<double> bone;
  double background = 0.0;

  double bone_sum() const;
};

BlendWeights blend_weights(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling = WeightSampling::kCanonical);

struct DeformedPoint {
  Vec3 x_canonical = Vec3::Zero();
  // Total bone weight; below 1 when background weight is present.
  double confidence = 0.0;
};

/// x_c = sum_i w^i(x) (R_c^i x + T_c^i).
DeformedPoint deform_point(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling = WeightSampling::kCanonical);

/// Accumulates gradients of (x_c, confidence) into the volume data and the
/// bone transforms.
void deform_point_backward(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling, const Vec3& d_x_canonical, double d_confidence,
                           std::span<double> d_volume, std::span<Mat3> d_rotation, std::span<Vec3> d_translation);

}  // namespace gnv
