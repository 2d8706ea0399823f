// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "gnv/error.hpp"

namespace gnv {

namespace fs = std::filesystem;

Experiment::Experiment(RunConfig config) : Experiment(config, load_dataset(config.dataset)) {}

Experiment::Experiment(RunConfig config, Dataset dataset) : config_(std::move(config)), dataset_(std::move(dataset)) {
  if (dataset_.subjects.empty()) throw ConfigError("dataset has no subjects");
  const std::size_t K = dataset_.subjects.front().skeleton.bone_count();
  for (const auto& s : dataset_.subjects) {
    if (s.skeleton.bone_count() != K) throw ConfigError("subjects in one dataset must share the bone count");
  }
  model_ = Model(config_.model.build(dataset_.canonical_box, K));
  const std::size_t n = dataset_.subjects.size();
  if (target_subject() >= n) throw ConfigError("target_subject out of range");
  for (std::size_t id : pretrain_subjects()) {
    if (id >= n) throw ConfigError("pretrain_subjects index out of range");
  }
}

std::size_t Experiment::target_subject() const {
  return config_.target_subject.value_or(dataset_.subjects.size() - 1);
}

std::vector<std::size_t> Experiment::pretrain_subjects() const {
  if (!config_.pretrain_subjects.empty()) return config_.pretrain_subjects;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < dataset_.subjects.size(); ++i) {
    if (i != target_subject()) ids.push_back(i);
  }
  return ids;
}

std::vector<std::size_t> Experiment::phase_subjects(Phase phase) const {
  if (phase == Phase::kPretrain) return pretrain_subjects();
  return {target_subject()};
}

fs::path Experiment::phase_dir(Phase phase) const { return config_.out / std::string(phase_name(phase)); }

fs::path Experiment::pretrained_path() const {
  if (!config_.pretrained.empty()) return config_.pretrained;
  return phase_dir(Phase::kPretrain) / "final.gnvx";
}

namespace {

std::string checkpoint_name(std::size_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%07zu.gnvx", iteration);
  return buf;
}

void append_loss(const fs::path& path, const StepRecord& r) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  if (fresh) out << "iter,subject,image,mse,perceptual,loss\n";
  out << r.iteration << ',' << r.subject << ',' << r.image << ',' << r.mse << ',' << r.perceptual << ',' << r.loss
      << '\n';
}

}  // namespace

PhaseResult run_phase(const Experiment& ex, Phase phase, const PhaseOptions& options) {
  const RunConfig& rc = ex.config();
  const TrainConfig tc = rc.train_config(phase);
  const std::vector<std::size_t> ids = ex.phase_subjects(phase);
  std::vector<const SubjectData*> subjects;
  for (std::size_t id : ids) subjects.push_back(&ex.dataset().subjects[id]);
  const Trainer trainer(ex.model(), tc, subjects);

  PhaseResult result;
  TrainingState& state = result.state;
  if (options.resume) {
    LoadedState loaded = load_training_state(*options.resume, &ex.model().config());
    if (loaded.state.phase != phase) {
      throw ConfigError("cannot resume " + std::string(phase_name(phase)) + " from a " +
                        std::string(phase_name(loaded.state.phase)) + " checkpoint");
    }
    if (loaded.state.subjects.size() != ids.size()) throw ConfigError("resume checkpoint subject count mismatch");
    if (loaded.seed != tc.seed) throw ConfigError("resume checkpoint was trained with a different seed");
    state = std::move(loaded.state);
  } else if (phase == Phase::kFinetune) {
    const LoadedState pre = load_training_state(ex.pretrained_path(), &ex.model().config());
    state = trainer.init_finetune(pre.state.shared, rc.load_mask);
  } else {
    state = trainer.init_fresh();
  }

  const fs::path dir = ex.phase_dir(phase);
  if (options.write_files) fs::create_directories(dir);
  nlohmann::json extra;
  extra["subjects"] = ids;
  if (phase == Phase::kFinetune) {
    extra["load_mask"] = rc.load_mask.to_string();
    extra["pretrained"] = ex.pretrained_path().string();
  }

  const SubjectData& eval_subject = *subjects.front();
  const std::vector<const LabeledImage*> eval_images = eval_subset(eval_subject, rc.eval_images);
  auto run_eval = [&] {
    EvalPoint p;
    p.iteration = state.iteration;
    p.report = evaluate(trainer.pipeline(), state.shared.params, state.subjects.front().params, eval_subject,
                        eval_images, tc.render, trainer.perceptual());
    if (options.write_files) append_metrics_csv(dir / "metrics.csv", p.iteration, "eval", p.report);
    if (options.on_eval) options.on_eval(p);
    result.evals.push_back(std::move(p));
  };

  const std::size_t stop = std::min(options.stop_at.value_or(tc.iterations), tc.iterations);
  while (state.iteration < stop) {
    const StepRecord rec = trainer.step(state);
    result.steps.push_back(rec);
    if (options.write_files) append_loss(dir / "losses.csv", rec);
    if (options.on_step) options.on_step(rec);
    const std::size_t done = state.iteration;
    if (rc.eval_every != 0 && done % rc.eval_every == 0) run_eval();
    if (options.write_files && rc.checkpoint_every != 0 && done % rc.checkpoint_every == 0 && done != tc.iterations) {
      save_training_state(dir / checkpoint_name(done), ex.model(), state, tc.seed, extra);
    }
  }

  const bool complete = state.iteration == tc.iterations;
  if (complete && (result.evals.empty() || result.evals.back().iteration != state.iteration)) run_eval();
  if (options.write_files) {
    result.final_checkpoint = dir / (complete ? std::string("final.gnvx") : checkpoint_name(state.iteration));
    save_training_state(result.final_checkpoint, ex.model(), state, tc.seed, extra);
  }
  return result;
}

ParameterStore with_zeroed(const ParameterStore& params, std::string_view name) {
  ParameterStore out = params;
  auto& t = out.at(name);
  std::fill(t.values.begin(), t.values.end(), 0.0);
  return out;
}

Image render_from_checkpoint(const Experiment& ex, const RenderRequest& req) {
  const LoadedState loaded = load_training_state(req.checkpoint, &ex.model().config());
  const TrainingState& st = loaded.state;
  if (req.subject >= st.subjects.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(st.subjects.size()) + " subjects; requested index " +
                      std::to_string(req.subject));
  }
  std::size_t dataset_index = ex.target_subject();
  if (loaded.extra.contains("subjects")) dataset_index = loaded.extra.at("subjects").at(req.subject).get<std::size_t>();
  if (dataset_index >= ex.dataset().subjects.size()) throw ConfigError("checkpoint subject is not in the dataset");
  const SubjectData& sd = ex.dataset().subjects[dataset_index];
  if (req.frame >= sd.frames.size()) throw ConfigError("frame index out of range");
  if (req.camera >= sd.cameras.size()) throw ConfigError("camera index out of range");

  const Pipeline pipeline(ex.model());
  const std::vector<double> prior = ex.model().weight_prior(sd.skeleton);
  const FrameRecord& f = sd.frames[req.frame];
  const SceneFrame frame{&sd.skeleton, prior, f.pose, req.time.value_or(f.time)};
  const RenderConfig& rc = ex.config().render;
  const ParameterStore& subject = st.subjects[req.subject].params;
  switch (req.view) {
    case VoxelView::kGeneral:
      return pipeline.render_image(st.shared.params, with_zeroed(subject, kIndividualVoxels), frame,
                                   sd.cameras[req.camera], rc);
    case VoxelView::kIndividual:
      return pipeline.render_image(with_zeroed(st.shared.params, kGeneralVoxels), subject, frame,
                                   sd.cameras[req.camera], rc);
    case VoxelView::kBoth:
      break;
  }
  return pipeline.render_image(st.shared.params, subject, frame, sd.cameras[req.camera], rc);
}

}  // namespace gnv
