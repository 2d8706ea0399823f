// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>

namespace gnv {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  bool valid() const { return (min.array() < max.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  /// Grows every side by `fraction` of the extent on that axis.
  Aabb padded(double fraction) const {
    const Vec3 m = fraction * extent();
    return {min - m, max + m};
  }
  Aabb united(const Aabb& o) const { return {min.cwiseMin(o.min), max.cwiseMax(o.max)}; }
};

/// Rigid map x -> R x + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  RigidTransform operator*(const RigidTransform& o) const { return {R * o.R, R * o.t + t}; }
  static RigidTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }
};

}  // namespace gnv
