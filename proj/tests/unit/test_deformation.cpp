// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gnv/deformation.hpp"
#include "gnv/skeleton.hpp"

using namespace gnv;

namespace {

Skeleton chain2() {
  Skeleton s;
  s.parent = {-1, 0};
  s.rest_joints = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  s.rest_tips = {Vec3(1, 0, 0), Vec3(2, 0, 0)};
  s.names = {"upper", "fore"};
  return s;
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Channel i is 1 at nodes within 0.1 of rest bone i, 0 elsewhere; no background.
VoxelGrid oracle_volume(const Skeleton& s, double cell) {
  GridLayout l;
  l.channels = 3;
  l.aabb = Aabb{Vec3(-0.2, -0.2, -0.2), Vec3(2.2, 1.3, 0.2)};
  for (int a = 0; a < 3; ++a) {
    l.dims[a] = static_cast<std::size_t>(std::lround((l.aabb.max[a] - l.aabb.min[a]) / cell)) + 1;
  }
  VoxelGrid g = VoxelGrid::zeros(l);
  for (std::size_t i = 0; i < l.dims[0]; ++i)
    for (std::size_t j = 0; j < l.dims[1]; ++j)
      for (std::size_t k = 0; k < l.dims[2]; ++k) {
        const Vec3 p = l.aabb.min + Vec3(i * cell, j * cell, k * cell);
        for (std::size_t b = 0; b < 2; ++b) {
          if (segment_distance(p, s.rest_joints[b], s.rest_tips[b]) <= 0.1) g.data[l.node_offset(i, j, k) + b] = 1.0;
        }
      }
  return g;
}

VoxelGrid random_volume(std::size_t channels, std::uint64_t seed, double bg) {
  GridLayout l{channels, {9, 9, 9}, Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)}};
  VoxelGrid g = VoxelGrid::zeros(l);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (std::size_t n = 0; n < l.node_count(); ++n) {
    for (std::size_t c = 0; c + 1 < channels; ++c) g.data[n * channels + c] = u(rng);
    g.data[n * channels + channels - 1] = bg;
  }
  return g;
}

}  // namespace

TEST_CASE("T-pose deform is the identity") {
  const VoxelGrid vol = random_volume(4, 1, 0.0);
  const BoneTransforms id(3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 200; ++n) {
    const Vec3 x(u(rng), u(rng), u(rng));
    for (auto mode : {WeightSampling::kCanonical, WeightSampling::kObserved}) {
      const DeformedPoint d = deform_point(vol, x, id, mode);
      CHECK((d.x_canonical - x).norm() <= 1e-8);
      CHECK(d.confidence == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("blend weight normalization") {
  SUBCASE("uniform volume") {
    GridLayout l{4, {3, 3, 3}, Aabb{}};
    VoxelGrid g{l, std::vector<double>(l.value_count(), 0.7)};
    const BlendWeights w = blend_weights(g, Vec3(0.3, 0.4, 0.5), BoneTransforms(3));
    // The normalizer carries a small epsilon, so the weights sit just under 1/4.
    for (double b : w.bone) CHECK(b == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(w.background == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(w.bone_sum() < 1.0);
  }
  SUBCASE("background lowers confidence and displaces nothing") {
    const VoxelGrid vol = random_volume(3, 5, 1.0);
    BoneTransforms t(2, RigidTransform::translation(Vec3(0.1, 0, 0)));
    const Vec3 x(0.2, -0.3, 0.1);
    const BlendWeights w = blend_weights(vol, x, t, WeightSampling::kObserved);
    const DeformedPoint d = deform_point(vol, x, t, WeightSampling::kObserved);
    CHECK(d.confidence == doctest::Approx(w.bone_sum()).epsilon(1e-14));
    CHECK(d.confidence < 1.0);
    CHECK((d.x_canonical - w.bone_sum() * (x + Vec3(0.1, 0, 0))).norm() < 1e-14);
  }
  SUBCASE("all-zero volume") {
    GridLayout l{3, {3, 3, 3}, Aabb{}};
    const VoxelGrid g = VoxelGrid::zeros(l);
    const DeformedPoint d = deform_point(g, Vec3(0.5, 0.5, 0.5), BoneTransforms(2));
    CHECK(d.confidence == 0.0);
    CHECK(d.x_canonical == Vec3::Zero());
  }
  SUBCASE("single bone translation") {
    GridLayout l{2, {3, 3, 3}, Aabb{Vec3::Constant(-2.0), Vec3::Constant(2.0)}};
    VoxelGrid g = VoxelGrid::zeros(l);
    for (std::size_t n = 0; n < l.node_count(); ++n) g.data[2 * n] = 1.0;
    const Vec3 x(0.1, 0.2, 0.3), t(0.5, -0.25, 0.0);
    const DeformedPoint d = deform_point(g, x, {RigidTransform::translation(t)});
    CHECK((d.x_canonical - (x + t)).norm() < 1e-7);
  }
}

TEST_CASE("inverse skinning of a bent two-bone chain") {
  const Skeleton s = chain2();
  const Pose pose = make_pose(s, Vec3::Zero(), {Vec3::Zero(), Vec3(0, 0, std::numbers::pi / 2)});
  const BoneTransforms C = obs_to_canonical_transforms(s, pose);
  const VoxelGrid vol = oracle_volume(s, 0.02);
  const double r = 0.05;
  int checked = 0;
  for (double sv : {0.15, 0.2, 0.25, 0.3, 0.35}) {
    for (int k = 0; k < 8; ++k) {
      const double phi = k * std::numbers::pi / 4;
      // Forearm now runs from (1,0,0) along +y; a surface point and its rest
      // location, rotated back about z by -pi/2.
      const Vec3 x_obs(1.0 + r * std::cos(phi), sv, r * std::sin(phi));
      const Vec3 expected(1.0 + sv, -r * std::cos(phi), r * std::sin(phi));
      const DeformedPoint d = deform_point(vol, x_obs, C);
      CHECK((d.x_canonical - expected).norm() <= 1e-6);
      CHECK(segment_distance(d.x_canonical, s.rest_joints[1], s.rest_tips[1]) ==
            doctest::Approx(r).epsilon(1e-5));
      ++checked;
    }
  }
  for (double xv : {0.05, 0.15, 0.25}) {
    for (int k = 0; k < 8; ++k) {
      const double phi = k * std::numbers::pi / 4;
      const Vec3 x_obs(xv, r * std::cos(phi), r * std::sin(phi));
      const DeformedPoint d = deform_point(vol, x_obs, C);
      CHECK((d.x_canonical - x_obs).norm() <= 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 64);
}

TEST_CASE("weight volume net shape and prior") {
  const Skeleton s = chain2();
  const Aabb box{Vec3(-0.5, -0.5, -0.5), Vec3(2.5, 1.5, 0.5)};
  const WeightVolumeNet net(2, WeightNetConfig{4, 6, {3}}, box);
  const GridLayout l = net.output_layout();
  CHECK(l.dims == std::array<std::size_t, 3>{8, 8, 8});
  CHECK(l.channels == 3);
  ParameterStore store;
  std::mt19937_64 rng(3);
  net.add_params(store, rng);
  const std::vector<double> z{0.1, -0.2, 0.3, 0.05};
  const VoxelGrid a = net.forward(store, z, {});
  const VoxelGrid b = net.forward(store, z, {});
  CHECK(a.data == b.data);
  for (double v : a.data) CHECK(v >= 0.0);

  const std::vector<double> prior = bone_weight_prior(l, s, 0.3, 0.5);
  CHECK(prior.size() == l.value_count());
  const std::size_t on0 = l.node_offset(2, 2, 4);  // near bone 0
  const double dx = 3.0 / 7.0;
  const Vec3 p0 = box.min + Vec3(2 * dx, 2 * (2.0 / 7.0), 4 * (1.0 / 7.0));
  const double d0 = segment_distance(p0, s.rest_joints[0], s.rest_tips[0]);
  CHECK(prior[on0] == doctest::Approx(std::exp(-d0 * d0 / (2 * 0.09))).epsilon(1e-12));
  CHECK(prior[on0 + 2] == 0.5);
  const VoxelGrid c = net.forward(store, z, prior);
  for (std::size_t i = 0; i < c.data.size(); ++i) CHECK(c.data[i] == doctest::Approx(a.data[i] * prior[i]));
}
