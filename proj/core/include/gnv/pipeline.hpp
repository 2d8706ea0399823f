// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Full render path for one frame: weight volume and corrected bone
// transforms, ray clipping against the posed body, point deformation,
// feature lookup in both grids, radiance and compositing; plus its backward
// pass into shared and subject parameters.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "gnv/autodiff.hpp"
#include "gnv/deformation.hpp"
#include "gnv/image.hpp"
#include "gnv/model.hpp"
#include "gnv/radiance.hpp"
#include "gnv/renderer.hpp"
#include "gnv/skeleton.hpp"

namespace gnv {

/// Everything about one frame except the camera.
struct SceneFrame {
  const Skeleton* skeleton = nullptr;
  // Weight prior for this subject's skeleton; empty when disabled.
  std::span<const double> prior;
  Pose pose;
  double time = 0.0;  // normalized to [0, 1]
};

/// Box around the posed joints and bone tips, grown by `padding` meters and
/// then by 10% of its extent.
Aabb posed_body_box(const Skeleton& skeleton, const Pose& pose, double padding);

class Pipeline {
 public:
  struct Cache {
    VoxelGrid weights;
    WeightVolumeNet::Cache weight_cache;
    PoseRefiner::Cache pose_cache;
    BoneTransforms transforms;
    std::vector<Ray> rays;
    std::vector<std::size_t> ray_begin;  // first sample of each ray; size rays+1
    std::vector<double> t;
    std::vector<double> t_far;  // per ray
    std::vector<Vec3> x_obs;
    std::vector<Vec3> x_canonical;
    std::vector<double> confidence;
    std::vector<long> active_row;  // radiance row per sample, -1 when skipped
    RadianceInputs inputs;
    RadianceNet::Cache radiance_cache;
    RadianceOutputs outputs;
  };

  explicit Pipeline(const Model& model) : model_(&model) {}

  const Model& model() const noexcept { return *model_; }

  /// Renders one pixel color per ray. Samples are stratified with `rng`, or
  /// bin midpoints when rng is null. `cache` is filled for backward().
  std::vector<Vec3> render_rays(const ParameterStore& shared, const ParameterStore& subject, const SceneFrame& frame,
                                std::span<const Ray> rays, const RenderConfig& config, std::mt19937_64* rng,
                                Cache* cache = nullptr) const;

  /// Accumulates gradients of the pixel cotangents into the allocated grad
  /// buffers of `shared` and `subject`.
  void backward(ParameterStore& shared, ParameterStore& subject, const SceneFrame& frame, const Cache& cache,
                const RenderConfig& config, std::span<const Vec3> d_pixels) const;

  /// Deterministic full-image render with midpoint sampling.
  Image render_image(const ParameterStore& shared, const ParameterStore& subject, const SceneFrame& frame,
                     const Camera& camera, const RenderConfig& config) const;

 private:
  const Model* model_;
};

}  // namespace gnv
