// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// JSON run configuration shared by every command. Every key is optional;
// unknown keys are rejected.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnv/model.hpp"
#include "gnv/synthdata.hpp"
#include "gnv/trainer.hpp"

namespace gnv {

struct ModelOverrides {
  std::string preset = "full";  // "full" or "desk"
  std::optional<std::array<std::size_t, 3>> voxel_dims;
  std::optional<std::size_t> voxel_channels;
  std::optional<std::vector<int>> interp_scales;
  std::optional<std::size_t> radiance_width;
  std::optional<std::size_t> radiance_depth;
  std::optional<bool> weight_prior;
  std::optional<bool> confidence_density;
  std::optional<WeightSampling> weight_sampling;
  std::optional<bool> pose_translation;

  ModelConfig build(const Aabb& canonical_box, std::size_t bone_count) const;
};

struct GenDataConfig {
  std::size_t subjects = 5;
  std::uint64_t seed = 1;
  DatasetSpec spec;
};

struct RunConfig {
  std::filesystem::path dataset = "data";
  std::filesystem::path out = "runs/default";
  std::uint64_t seed = 0;
  // Empty selects every subject except the target.
  std::vector<std::size_t> pretrain_subjects;
  // Defaults to the last subject.
  std::optional<std::size_t> target_subject;
  std::size_t pretrain_iterations = 50000;
  std::size_t scratch_iterations = 10000;
  std::size_t finetune_iterations = 1000;
  LearningRates lr;
  LossSchedule loss;
  RenderConfig render;
  SubjectOrder order = SubjectOrder::kRoundRobin;
  LoadMask load_mask;
  std::filesystem::path pretrained;  // finetune source; default <out>/pretrain/final.gnvx
  std::size_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  std::size_t eval_every = 0;        // 0 evaluates only at the end
  std::size_t eval_images = 8;
  std::uint64_t perceptual_seed = 7;
  std::filesystem::path perceptual_weights;
  ModelOverrides model;
  GenDataConfig gen_data;

  std::size_t iterations_for(Phase phase) const;
  TrainConfig train_config(Phase phase) const;
};

/// Throws ConfigError on unknown keys or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace gnv
