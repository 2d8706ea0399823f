// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Run-level orchestration: dataset + model from a RunConfig, one training
// phase with periodic evaluation and checkpoints, rendering from checkpoints.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gnv/model.hpp"
#include "gnv/run_config.hpp"
#include "gnv/synthdata.hpp"
#include "gnv/trainer.hpp"

namespace gnv {

class Experiment {
 public:
  /// Loads the dataset and builds the model; validates subject indices.
  explicit Experiment(RunConfig config);
  Experiment(RunConfig config, Dataset dataset);

  const RunConfig& config() const noexcept { return config_; }
  const Dataset& dataset() const noexcept { return dataset_; }
  const Model& model() const noexcept { return model_; }

  std::size_t target_subject() const;
  std::vector<std::size_t> pretrain_subjects() const;
  /// Subjects trained by `phase`, as dataset indices.
  std::vector<std::size_t> phase_subjects(Phase phase) const;

  std::filesystem::path phase_dir(Phase phase) const;
  std::filesystem::path pretrained_path() const;

 private:
  RunConfig config_;
  Dataset dataset_;
  Model model_;
};

struct EvalPoint {
  std::size_t iteration = 0;
  EvalReport report;
};

struct PhaseResult {
  TrainingState state;
  std::filesystem::path final_checkpoint;
  std::vector<EvalPoint> evals;
  std::vector<StepRecord> steps;  // steps run by this call
};

struct PhaseOptions {
  // Resume from this checkpoint instead of initializing.
  std::optional<std::filesystem::path> resume;
  // Stop after this many completed iterations (default: the phase length).
  std::optional<std::size_t> stop_at;
  // Write checkpoints, metrics.csv and losses.csv under the phase directory.
  bool write_files = true;
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EvalPoint&)> on_eval;
};

/// Trains one phase. Evaluation runs on the phase's first subject (the target
/// for scratch and finetune) every config.eval_every steps and at the end.
PhaseResult run_phase(const Experiment& experiment, Phase phase, const PhaseOptions& options = {});

/// Which voxel grids feed the radiance field when rendering.
enum class VoxelView { kBoth, kGeneral, kIndividual };

/// Renders one of the checkpoint's subjects (index into its subject list) at
/// a dataset frame and camera.
struct RenderRequest {
  std::filesystem::path checkpoint;
  std::size_t subject = 0;
  std::size_t frame = 0;
  std::size_t camera = 0;
  std::optional<double> time;  // overrides the frame time
  VoxelView view = VoxelView::kBoth;
};

Image render_from_checkpoint(const Experiment& experiment, const RenderRequest& request);

/// Copy of `params` with the named voxel grid's values set to zero.
ParameterStore with_zeroed(const ParameterStore& params, std::string_view name);

}  // namespace gnv
