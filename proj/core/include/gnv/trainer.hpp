// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Pretraining across subjects, per-subject fine-tuning and from-scratch
// training, evaluation and training-state checkpoints.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnv/losses.hpp"
#include "gnv/model.hpp"
#include "gnv/pipeline.hpp"
#include "gnv/synthdata.hpp"

namespace gnv {

enum class SubjectOrder { kRoundRobin, kRandom };

struct TrainConfig {
  Phase phase = Phase::kPretrain;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  LearningRates lr;
  LossSchedule loss;
  RenderConfig render;
  SubjectOrder order = SubjectOrder::kRoundRobin;
  std::uint64_t perceptual_seed = 7;
  // Optional external perceptual weights; empty uses the seeded network.
  std::filesystem::path perceptual_weights;

  void validate() const;
};

/// Mutable training state. `iteration` counts completed steps of the
/// current phase.
struct TrainingState {
  Phase phase = Phase::kPretrain;
  std::size_t iteration = 0;
  SharedState shared;
  std::vector<SubjectState> subjects;
};

struct StepRecord {
  std::size_t iteration = 0;
  std::size_t subject = 0;
  std::size_t image = 0;  // index into the subject's train split
  double mse = 0.0;
  double perceptual = 0.0;
  double loss = 0.0;
};

using StepCallback = std::function<void(const TrainingState&, const StepRecord&)>;

/// Seed of the step-local generator; depends only on (seed, iteration) so a
/// resumed run draws exactly what the unbroken run would have.
std::uint64_t step_seed(std::uint64_t seed, std::uint64_t iteration);

class Trainer {
 public:
  /// `subjects` must outlive the trainer; one SubjectState per entry.
  Trainer(const Model& model, TrainConfig config, std::vector<const SubjectData*> subjects);

  const TrainConfig& config() const noexcept { return config_; }
  const Pipeline& pipeline() const noexcept { return pipeline_; }
  const PerceptualNet& perceptual() const noexcept { return perceptual_; }

  /// Fresh shared state (zero general voxels) and zero subject states.
  TrainingState init_fresh() const;
  /// Shared state loaded from `pretrained` through `mask`; zero subject states.
  TrainingState init_finetune(const SharedState& pretrained, const LoadMask& mask) const;

  /// Subject trained at `iteration`.
  std::size_t subject_for(std::size_t iteration) const;

  StepRecord step(TrainingState& state) const;
  /// Steps until state.iteration == min(until, config.iterations).
  void run(TrainingState& state, std::size_t until, const StepCallback& on_step = {}) const;

  SceneFrame scene(std::size_t subject, std::size_t frame) const;

 private:
  const Model* model_;
  TrainConfig config_;
  std::vector<const SubjectData*> subjects_;
  std::vector<std::vector<double>> priors_;
  Pipeline pipeline_;
  PerceptualNet perceptual_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct FrameMetrics {
  std::size_t frame = 0;
  std::size_t camera = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  double perceptual = 0.0;
};

struct EvalReport {
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;  // frame/camera unused
};

/// Up to `count` evaluation images spread evenly over the eval split.
std::vector<const LabeledImage*> eval_subset(const SubjectData& subject, std::size_t count);

/// Deterministic renders (midpoint sampling) of each image's frame and camera.
EvalReport evaluate(const Pipeline& pipeline, const ParameterStore& shared, const ParameterStore& subject_params,
                    const SubjectData& subject, std::span<const LabeledImage* const> images,
                    const RenderConfig& config, const PerceptualNet& perceptual);

/// Rows: iter,split,frame,camera,psnr,ssim,mse,perceptual; one per frame plus a
/// "mean" summary row. Writes the header when the file is new.
void append_metrics_csv(const std::filesystem::path& path, std::size_t iteration, const std::string& split,
                        const EvalReport& report);

// ---------------------------------------------------------------------------
// Training-state checkpoints

/// Metadata holds the model config, phase, iteration, seed and subject count;
/// sections hold every parameter plus its Adam moments.
void save_training_state(const std::filesystem::path& path, const Model& model, const TrainingState& state,
                         std::uint64_t seed, const nlohmann::json& extra = nlohmann::json::object());

struct LoadedState {
  ModelConfig model;
  TrainingState state;
  std::uint64_t seed = 0;
  nlohmann::json extra;
};

/// Validates every section against the model config stored in the metadata.
/// When `expected` is given the stored config must match it.
LoadedState load_training_state(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace gnv
