// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Bone hierarchy, forward kinematics, observation-to-canonical bone
// transforms and the learned pose correction.

#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnv/autodiff.hpp"
#include "gnv/math.hpp"
#include "gnv/mlp.hpp"

namespace gnv {

struct Skeleton {
  std::vector<int> parent;  // parent[0] == -1, parent[i] < i otherwise
  std::vector<Vec3> rest_joints;
  // Rest-pose end point of each bone; empty when unknown.
  std::vector<Vec3> rest_tips;
  std::vector<std::string> names;

  std::size_t bone_count() const noexcept { return parent.size(); }
  /// Throws ConfigError unless bones are topologically ordered under a single root.
  void validate() const;
  /// Tip of bone i, falling back to its first child joint, then to its own joint.
  Vec3 tip(std::size_t bone) const;
};

struct Pose {
  std::vector<Vec3> omega;  // axis-angle per bone, radians
  Vec3 root_translation = Vec3::Zero();
  std::vector<Vec3> joints;  // posed joint positions, derived by FK
};

using BoneTransforms = std::vector<RigidTransform>;

Mat3 rodrigues(const Vec3& omega);
/// Partial derivatives dR/d omega_k, k = 0..2.
std::array<Mat3, 3> rodrigues_derivatives(const Vec3& omega);

/// Per-bone world transforms A^i mapping rest-pose points of bone i to their
/// posed locations.
BoneTransforms forward_kinematics(const Skeleton& skeleton, const Vec3& root_translation,
                                  std::span<const Vec3> omega);

/// Builds a pose whose joints are consistent with FK.
Pose make_pose(const Skeleton& skeleton, const Vec3& root_translation, std::vector<Vec3> omega);

/// Rest pose: zero rotations, zero translation.
Pose rest_pose(const Skeleton& skeleton);

/// Per-bone rigid maps (R_c, T_c) from observation space to the canonical
/// rest pose, i.e. A_rest^i (A_obs^i)^{-1} with A_rest = identity.
BoneTransforms obs_to_canonical_transforms(const Skeleton& skeleton, const Pose& pose);

struct PoseDelta {
  std::vector<Vec3> delta_omega;
  std::vector<Vec3> delta_t;
};

struct CorrectedPose {
  Pose pose;  // joints preserved from the input pose
  PoseDelta delta;
};

/// Composes the correction onto the base transforms: (R^i dR^i, T^i + dT^i).
BoneTransforms obs_to_canonical_transforms(const Skeleton& skeleton, const CorrectedPose& corrected);

struct PoseRefinerConfig {
  std::size_t hidden = 256;
  std::size_t hidden_layers = 3;
  bool translation_branch = true;
};

/// Pose-refinement MLP: flattened rotations (3K) -> hidden ReLU layers ->
/// linear correction (3K rotations, plus 3K translations when enabled).
/// The output layer starts at zero so the correction starts as the identity.
class PoseRefiner {
 public:
  struct Cache {
    Mlp::Cache mlp;
    BoneTransforms base;
    PoseDelta delta;
  };

  PoseRefiner() = default;
  PoseRefiner(std::size_t bone_count, const PoseRefinerConfig& config);

  const Mlp& network() const noexcept { return mlp_; }
  std::size_t bone_count() const noexcept { return bone_count_; }
  const PoseRefinerConfig& config() const noexcept { return config_; }

  void add_params(ParameterStore& store, std::mt19937_64& rng) const;

  CorrectedPose refine(const ParameterStore& store, const Pose& pose, Cache* cache = nullptr) const;

  /// refine() followed by obs_to_canonical_transforms().
  BoneTransforms corrected_transforms(const ParameterStore& store, const Skeleton& skeleton, const Pose& pose,
                                      Cache* cache = nullptr) const;

  /// Backpropagates cotangents of the corrected transforms into the network.
  void backward(ParameterStore& store, const Cache& cache, std::span<const Mat3> d_rotation,
                std::span<const Vec3> d_translation) const;

 private:
  std::size_t bone_count_ = 0;
  PoseRefinerConfig config_;
  Mlp mlp_;
};

}  // namespace gnv
