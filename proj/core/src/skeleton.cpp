// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/skeleton.hpp"

#include <cmath>

#include "gnv/error.hpp"

namespace gnv {

void Skeleton::validate() const {
  if (parent.empty()) throw ConfigError("skeleton has no bones");
  if (rest_joints.size() != parent.size()) throw ConfigError("skeleton joint count does not match bone count");
  if (parent[0] != -1) throw ConfigError("bone 0 must be the root");
  for (std::size_t i = 1; i < parent.size(); ++i) {
    if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= i) {
      throw ConfigError("bone " + std::to_string(i) + " must have a parent with a lower index");
    }
  }
  if (!rest_tips.empty() && rest_tips.size() != parent.size()) {
    throw ConfigError("skeleton tip count does not match bone count");
  }
}

Vec3 Skeleton::tip(std::size_t bone) const {
  if (bone < rest_tips.size()) return rest_tips[bone];
  for (std::size_t j = bone + 1; j < parent.size(); ++j) {
    if (parent[j] == static_cast<int>(bone)) return rest_joints[j];
  }
  return rest_joints[bone];
}

namespace {

Mat3 skew(const Vec3& w) {
  Mat3 k;
  k << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return k;
}

}  // namespace

Mat3 rodrigues(const Vec3& omega) {
  const double th2 = omega.squaredNorm();
  const double th = std::sqrt(th2);
  double a, b;
  if (th < 1e-4) {
    a = 1.0 - th2 / 6.0;
    b = 0.5 - th2 / 24.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / th2;
  }
  const Mat3 k = skew(omega);
  return Mat3::Identity() + a * k + b * k * k;
}

std::array<Mat3, 3> rodrigues_derivatives(const Vec3& omega) {
  const double th2 = omega.squaredNorm();
  const double th = std::sqrt(th2);
  double a, b, c, d;  // c = a'(th)/th, d = b'(th)/th
  if (th < 1e-2) {
    const double th4 = th2 * th2;
    a = 1.0 - th2 / 6.0 + th4 / 120.0;
    b = 0.5 - th2 / 24.0 + th4 / 720.0;
    c = -1.0 / 3.0 + th2 / 30.0 - th4 / 840.0;
    d = -1.0 / 12.0 + th2 / 180.0 - th4 / 6720.0;
  } else {
    const double s = std::sin(th), co = std::cos(th);
    a = s / th;
    b = (1.0 - co) / th2;
    c = (th * co - s) / (th2 * th);
    d = (th * s - 2.0 * (1.0 - co)) / (th2 * th2);
  }
  const Mat3 k = skew(omega);
  const Mat3 k2 = k * k;
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    out[i] = c * omega[i] * k + a * e + d * omega[i] * k2 + b * (e * k + k * e);
  }
  return out;
}

BoneTransforms forward_kinematics(const Skeleton& skeleton, const Vec3& root_translation,
                                  std::span<const Vec3> omega) {
  skeleton.validate();
  const std::size_t K = skeleton.bone_count();
  if (omega.size() != K) throw ConfigError("pose rotation count does not match skeleton");
  BoneTransforms world(K);
  for (std::size_t i = 0; i < K; ++i) {
    const Vec3& j = skeleton.rest_joints[i];
    const Mat3 R = rodrigues(omega[i]);
    const RigidTransform local{R, j - R * j};
    world[i] = i == 0 ? RigidTransform::translation(root_translation) * local
                      : world[static_cast<std::size_t>(skeleton.parent[i])] * local;
  }
  return world;
}

Pose make_pose(const Skeleton& skeleton, const Vec3& root_translation, std::vector<Vec3> omega) {
  const BoneTransforms world = forward_kinematics(skeleton, root_translation, omega);
  Pose pose;
  pose.omega = std::move(omega);
  pose.root_translation = root_translation;
  pose.joints.resize(world.size());
  for (std::size_t i = 0; i < world.size(); ++i) pose.joints[i] = world[i].apply(skeleton.rest_joints[i]);
  return pose;
}

Pose rest_pose(const Skeleton& skeleton) {
  return make_pose(skeleton, Vec3::Zero(), std::vector<Vec3>(skeleton.bone_count(), Vec3::Zero()));
}

BoneTransforms obs_to_canonical_transforms(const Skeleton& skeleton, const Pose& pose) {
  BoneTransforms world = forward_kinematics(skeleton, pose.root_translation, pose.omega);
  for (auto& t : world) t = t.inverse();
  return world;
}

BoneTransforms obs_to_canonical_transforms(const Skeleton& skeleton, const CorrectedPose& corrected) {
  BoneTransforms base = obs_to_canonical_transforms(skeleton, corrected.pose);
  const auto& delta = corrected.delta;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (i < delta.delta_omega.size()) base[i].R = base[i].R * rodrigues(delta.delta_omega[i]);
    if (i < delta.delta_t.size()) base[i].t += delta.delta_t[i];
  }
  return base;
}

PoseRefiner::PoseRefiner(std::size_t bone_count, const PoseRefinerConfig& config)
    : bone_count_(bone_count), config_(config) {
  std::vector<std::size_t> widths{3 * bone_count};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) widths.push_back(config.hidden);
  widths.push_back((config.translation_branch ? 6 : 3) * bone_count);
  mlp_ = Mlp("pose_refine", std::move(widths), Activation::kRelu, Activation::kIdentity);
}

void PoseRefiner::add_params(ParameterStore& store, std::mt19937_64& rng) const {
  mlp_.add_params(store, rng, {.zero_last_layer = true});
}

CorrectedPose PoseRefiner::refine(const ParameterStore& store, const Pose& pose, Cache* cache) const {
  if (pose.omega.size() != bone_count_) throw ConfigError("pose refiner bone count mismatch");
  RowMatrix x(1, 3 * bone_count_);
  for (std::size_t i = 0; i < bone_count_; ++i) {
    for (int a = 0; a < 3; ++a) x(0, 3 * i + a) = pose.omega[i][a];
  }
  const RowMatrix y = mlp_.forward(store, x, cache ? &cache->mlp : nullptr);
  CorrectedPose out;
  out.pose = pose;
  out.delta.delta_omega.resize(bone_count_);
  for (std::size_t i = 0; i < bone_count_; ++i) out.delta.delta_omega[i] = Vec3(y(0, 3 * i), y(0, 3 * i + 1), y(0, 3 * i + 2));
  if (config_.translation_branch) {
    const std::size_t o = 3 * bone_count_;
    out.delta.delta_t.resize(bone_count_);
    for (std::size_t i = 0; i < bone_count_; ++i) {
      out.delta.delta_t[i] = Vec3(y(0, o + 3 * i), y(0, o + 3 * i + 1), y(0, o + 3 * i + 2));
    }
  }
  if (cache) cache->delta = out.delta;
  return out;
}

BoneTransforms PoseRefiner::corrected_transforms(const ParameterStore& store, const Skeleton& skeleton,
                                                 const Pose& pose, Cache* cache) const {
  const CorrectedPose corrected = refine(store, pose, cache);
  if (cache) cache->base = obs_to_canonical_transforms(skeleton, pose);
  return obs_to_canonical_transforms(skeleton, corrected);
}

void PoseRefiner::backward(ParameterStore& store, const Cache& cache, std::span<const Mat3> d_rotation,
                           std::span<const Vec3> d_translation) const {
  if (d_rotation.size() != bone_count_ || d_translation.size() != bone_count_ || cache.base.size() != bone_count_) {
    throw ConfigError("pose refiner backward size mismatch");
  }
  RowMatrix d_y = RowMatrix::Zero(1, mlp_.output_size());
  for (std::size_t i = 0; i < bone_count_; ++i) {
    // R_c = R dR  =>  d(dR) = R^T d(R_c)
    const Mat3 d_delta_r = cache.base[i].R.transpose() * d_rotation[i];
    const auto partials = rodrigues_derivatives(cache.delta.delta_omega[i]);
    for (int a = 0; a < 3; ++a) d_y(0, 3 * i + a) = d_delta_r.cwiseProduct(partials[a]).sum();
    if (config_.translation_branch) {
      for (int a = 0; a < 3; ++a) d_y(0, 3 * bone_count_ + 3 * i + a) = d_translation[i][a];
    }
  }
  mlp_.backward(store, cache.mlp, d_y);
}

}  // namespace gnv
