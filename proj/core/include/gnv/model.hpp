// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Model architecture, shared/per-subject parameter stores and component
// load masks.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnv/autodiff.hpp"
#include "gnv/deformation.hpp"
#include "gnv/radiance.hpp"
#include "gnv/skeleton.hpp"
#include "gnv/voxel_grid.hpp"

namespace gnv {

inline constexpr std::string_view kGeneralVoxels = "general_voxels";
inline constexpr std::string_view kIndividualVoxels = "individual_voxels";
inline constexpr std::string_view kEmbedding = "embedding";

struct ModelConfig {
  std::size_t bone_count = 8;
  GridLayout voxels;  // shared by general and individual grids
  InterpConfig interp;
  RadianceConfig radiance;
  PoseRefinerConfig pose_refine;
  WeightNetConfig weight_net;
  WeightSampling weight_sampling = WeightSampling::kCanonical;
  // Multiplies the generated weight volume by a fixed bone-distance prior.
  bool weight_prior = true;
  double prior_sigma = 0.1;
  double prior_background = 0.05;
  // Scales density by the total bone weight of the deformed point.
  bool confidence_density = true;

  void validate() const;

  /// Full-size architecture (160^3 grids, 128-wide radiance net, 32^3 weights).
  static ModelConfig full(const Aabb& canonical_box, std::size_t bone_count);
  /// Reduced sizes for single-core CPU runs.
  static ModelConfig desk(const Aabb& canonical_box, std::size_t bone_count);
};

nlohmann::json to_json(const ModelConfig& config);
/// Throws ConfigError on missing or unknown keys.
ModelConfig model_config_from_json(const nlohmann::json& j);

struct SharedState {
  ParameterStore params;
  AdamState adam;
};

struct SubjectState {
  ParameterStore params;
  AdamState adam;
};

/// Shared components that can be loaded from a pretrained state or
/// re-initialized when fine-tuning.
enum class Component { kGeneralVoxels, kRadiance, kWeightNet, kPoseRefine };

std::string_view component_name(Component c);
/// Component owning a shared parameter.
Component component_of(std::string_view param_name);

struct LoadMask {
  bool general_voxels = true;
  bool radiance = true;
  bool weight_net = true;
  bool pose_refine = true;

  bool loads(Component c) const;
  static LoadMask all() { return {}; }
  static LoadMask none() { return {false, false, false, false}; }
  /// "all", "none", or a comma-separated list of components to load, e.g.
  /// "radiance,weight_net,pose_refine".
  static LoadMask parse(std::string_view text);
  std::string to_string() const;
};

class Model {
 public:
  Model() = default;
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const GridLayout& voxel_layout() const noexcept { return config_.voxels; }
  const RadianceNet& radiance() const noexcept { return radiance_; }
  const PoseRefiner& refiner() const noexcept { return refiner_; }
  const WeightVolumeNet& weight_net() const noexcept { return weight_net_; }

  /// Zero general voxels plus freshly initialized networks.
  SharedState init_shared(std::uint64_t seed) const;
  /// Zero individual voxels and embedding.
  SubjectState init_subject() const;

  /// Fresh shared state whose masked-in components are copied from `pretrained`.
  SharedState load_shared(const SharedState& pretrained, const LoadMask& mask, std::uint64_t seed) const;

  /// Prior for this subject's rest skeleton; empty when disabled.
  std::vector<double> weight_prior(const Skeleton& skeleton) const;

  /// Throws ConfigError naming the offending components when a store does not
  /// match this architecture.
  void check_shared(const ParameterStore& params) const;
  void check_subject(const ParameterStore& params) const;

 private:
  ModelConfig config_;
  RadianceNet radiance_;
  PoseRefiner refiner_;
  WeightVolumeNet weight_net_;
};

}  // namespace gnv
