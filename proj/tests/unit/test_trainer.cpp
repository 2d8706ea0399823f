// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "gnv/error.hpp"
#include "gnv/workflow.hpp"

using namespace gnv;
namespace fs = std::filesystem;

namespace {

bool bitwise_equal(const ParameterStore& a, const ParameterStore& b) {
  if (a.tensors().size() != b.tensors().size()) return false;
  for (std::size_t i = 0; i < a.tensors().size(); ++i) {
    const auto& x = a.tensors()[i].values;
    const auto& y = b.tensors()[i].values;
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("step seeds") {
  CHECK(step_seed(1, 5) == step_seed(1, 5));
  CHECK(step_seed(1, 5) != step_seed(1, 6));
  CHECK(step_seed(1, 5) != step_seed(2, 5));
}

TEST_CASE("experiment subject selection") {
  const Experiment ex(test::tiny_run_config(test::scratch_dir("ex_sel")));
  CHECK(ex.target_subject() == 2);
  CHECK(ex.pretrain_subjects() == std::vector<std::size_t>{0, 1});
  CHECK(ex.phase_subjects(Phase::kScratch) == std::vector<std::size_t>{2});
  CHECK(ex.pretrained_path().filename() == "final.gnvx");
  auto j = test::tiny_config_json(test::scratch_dir("ex_sel"));
  j["target_subject"] = 7;
  CHECK_THROWS_AS(Experiment(run_config_from_json(j)), ConfigError);
}

TEST_CASE("pretraining alternates subjects and writes its outputs") {
  const fs::path out = test::scratch_dir("pretrain");
  const Experiment ex(test::tiny_run_config(out));
  const PhaseResult r = run_phase(ex, Phase::kPretrain);
  REQUIRE(r.steps.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(r.steps[i].iteration == i);
    CHECK(r.steps[i].subject == i % 2);
    CHECK(std::isfinite(r.steps[i].loss));
    CHECK(r.steps[i].loss == doctest::Approx(0.2 * r.steps[i].mse + r.steps[i].perceptual).epsilon(1e-12));
  }
  CHECK(r.state.iteration == 6);
  CHECK(r.state.subjects.size() == 2);
  REQUIRE(r.evals.size() == 2);
  CHECK(r.evals[0].iteration == 3);
  CHECK(r.evals[1].iteration == 6);
  CHECK(fs::exists(out / "pretrain" / "final.gnvx"));
  CHECK(fs::exists(out / "pretrain" / "ckpt_0000002.gnvx"));
  CHECK(fs::exists(out / "pretrain" / "ckpt_0000004.gnvx"));
  CHECK_FALSE(fs::exists(out / "pretrain" / "ckpt_0000006.gnvx"));
  CHECK(count_lines(out / "pretrain" / "losses.csv") == 7);
  // Two evaluations of one image: a row each plus a mean row, and the header.
  CHECK(count_lines(out / "pretrain" / "metrics.csv") == 5);
  // Parameters moved away from their initialization.
  const SharedState init = ex.model().init_shared(3);
  CHECK_FALSE(bitwise_equal(init.params, r.state.shared.params));
}

TEST_CASE("resumed training reproduces the unbroken run") {
  const fs::path out_a = test::scratch_dir("resume_a"), out_b = test::scratch_dir("resume_b");
  const Experiment a(test::tiny_run_config(out_a)), b(test::tiny_run_config(out_b));
  const PhaseResult full = run_phase(a, Phase::kScratch);

  PhaseOptions first;
  first.stop_at = 3;
  const PhaseResult part1 = run_phase(b, Phase::kScratch, first);
  CHECK(part1.final_checkpoint.filename() == "ckpt_0000003.gnvx");
  PhaseOptions second;
  second.resume = part1.final_checkpoint;
  const PhaseResult part2 = run_phase(b, Phase::kScratch, second);
  REQUIRE(part1.steps.size() + part2.steps.size() == full.steps.size());
  for (std::size_t i = 0; i < full.steps.size(); ++i) {
    const StepRecord& r = i < 3 ? part1.steps[i] : part2.steps[i - 3];
    CHECK(r.iteration == full.steps[i].iteration);
    CHECK(r.image == full.steps[i].image);
    CHECK(r.loss == full.steps[i].loss);
    CHECK(r.mse == full.steps[i].mse);
  }
  CHECK(bitwise_equal(part2.state.shared.params, full.state.shared.params));
  CHECK(bitwise_equal(part2.state.subjects[0].params, full.state.subjects[0].params));

  // Resuming from a different phase or seed is refused.
  CHECK_THROWS_AS(run_phase(b, Phase::kPretrain, second), ConfigError);
  auto j = test::tiny_config_json(out_b);
  j["seed"] = 4;
  const Experiment other(run_config_from_json(j));
  CHECK_THROWS_AS(run_phase(other, Phase::kScratch, second), ConfigError);
}

TEST_CASE("fine-tuning") {
  const fs::path out = test::scratch_dir("finetune");
  const Experiment ex(test::tiny_run_config(out));
  const PhaseResult pre = run_phase(ex, Phase::kPretrain);
  const auto before = fs::file_size(pre.final_checkpoint);
  const LoadedState pretrained = load_training_state(pre.final_checkpoint);

  const PhaseResult ft = run_phase(ex, Phase::kFinetune);
  // Warm-up uses (10, 0) before mse_only_iters, then (0.2, 1).
  REQUIRE(ft.steps.size() == 6);
  for (std::size_t i = 0; i < 2; ++i) CHECK(ft.steps[i].loss == 10.0 * ft.steps[i].mse);
  for (std::size_t i = 2; i < 6; ++i) {
    CHECK(ft.steps[i].loss == doctest::Approx(0.2 * ft.steps[i].mse + ft.steps[i].perceptual).epsilon(1e-12));
  }
  // The pretrained checkpoint is read only.
  CHECK(fs::file_size(pre.final_checkpoint) == before);
  CHECK(bitwise_equal(load_training_state(pre.final_checkpoint).state.shared.params, pretrained.state.shared.params));

  const TrainConfig tc = ex.config().train_config(Phase::kFinetune);
  const Trainer trainer(ex.model(), tc, {&ex.dataset().subjects[2]});
  const TrainingState none = trainer.init_finetune(pretrained.state.shared, LoadMask::none());
  const TrainingState fresh = trainer.init_fresh();
  CHECK(bitwise_equal(none.shared.params, fresh.shared.params));
  const TrainingState all = trainer.init_finetune(pretrained.state.shared, LoadMask::all());
  CHECK(bitwise_equal(all.shared.params, pretrained.state.shared.params));
  CHECK(all.shared.adam.step == 0);
}

TEST_CASE("voxel views render from checkpoints") {
  const fs::path out = test::scratch_dir("views");
  const Experiment ex(test::tiny_run_config(out));
  const PhaseResult pre = run_phase(ex, Phase::kPretrain);
  const LoadedState loaded = load_training_state(pre.final_checkpoint);
  const Pipeline pipeline(ex.model());
  const SubjectData& sd = ex.dataset().subjects[1];
  const std::vector<double> prior = ex.model().weight_prior(sd.skeleton);
  const SceneFrame frame{&sd.skeleton, prior, sd.frames[1].pose, sd.frames[1].time};
  const RenderConfig& rc = ex.config().render;

  RenderRequest req{pre.final_checkpoint, 1, 1, 1, std::nullopt, VoxelView::kBoth};
  const Image both = render_from_checkpoint(ex, req);
  CHECK(both.rgb == pipeline.render_image(loaded.state.shared.params, loaded.state.subjects[1].params, frame,
                                          sd.cameras[1], rc)
                        .rgb);

  // A checkpoint whose individual grid is zeroed renders exactly like the general view.
  TrainingState zeroed = loaded.state;
  auto& iv = zeroed.subjects[1].params.at(kIndividualVoxels).values;
  std::fill(iv.begin(), iv.end(), 0.0);
  const fs::path zpath = out / "zeroed.gnvx";
  save_training_state(zpath, ex.model(), zeroed, loaded.seed, loaded.extra);
  req.view = VoxelView::kGeneral;
  const Image general = render_from_checkpoint(ex, req);
  const Image reference = render_from_checkpoint(ex, RenderRequest{zpath, 1, 1, 1, std::nullopt, VoxelView::kBoth});
  CHECK(general.rgb == reference.rgb);
  CHECK(general.rgb != both.rgb);
  req.view = VoxelView::kIndividual;
  CHECK(render_from_checkpoint(ex, req).rgb != both.rgb);

  // Fresh fine-tune state: the zero individual grid contributes nothing.
  const TrainConfig tc = ex.config().train_config(Phase::kFinetune);
  const Trainer trainer(ex.model(), tc, {&ex.dataset().subjects[2]});
  const TrainingState ft = trainer.init_finetune(loaded.state.shared, LoadMask::all());
  const SubjectData& target = ex.dataset().subjects[2];
  const std::vector<double> target_prior = ex.model().weight_prior(target.skeleton);
  const SceneFrame tf{&target.skeleton, target_prior, target.frames[0].pose, target.frames[0].time};
  CHECK(pipeline.render_image(ft.shared.params, ft.subjects[0].params, tf, target.cameras[1], rc).rgb ==
        pipeline.render_image(ft.shared.params, with_zeroed(ft.subjects[0].params, kIndividualVoxels), tf,
                              target.cameras[1], rc)
            .rgb);

  req.subject = 5;
  CHECK_THROWS_AS(render_from_checkpoint(ex, req), ConfigError);
  req = RenderRequest{out / "absent.gnvx"};
  CHECK_THROWS_AS(render_from_checkpoint(ex, req), CheckpointError);
}

TEST_CASE("evaluation") {
  const Experiment ex(test::tiny_run_config(test::scratch_dir("eval")));
  const SubjectData& sd = ex.dataset().subjects[2];
  CHECK(eval_subset(sd, 2).size() == 2);
  CHECK(eval_subset(sd, 10).size() == sd.eval.size());
  const TrainConfig tc = ex.config().train_config(Phase::kScratch);
  const Trainer trainer(ex.model(), tc, {&sd});
  const TrainingState st = trainer.init_fresh();
  const auto images = eval_subset(sd, 2);
  const EvalReport r = evaluate(trainer.pipeline(), st.shared.params, st.subjects[0].params, sd, images, tc.render,
                                trainer.perceptual());
  REQUIRE(r.frames.size() == 2);
  CHECK(r.mean.psnr == doctest::Approx(0.5 * (r.frames[0].psnr + r.frames[1].psnr)));
  CHECK(r.frames[0].camera == images[0]->camera);
  const EvalReport again = evaluate(trainer.pipeline(), st.shared.params, st.subjects[0].params, sd, images,
                                    tc.render, trainer.perceptual());
  CHECK(again.mean.psnr == r.mean.psnr);
  const fs::path csv = test::scratch_dir("eval") / "m.csv";
  append_metrics_csv(csv, 7, "eval", r);
  append_metrics_csv(csv, 8, "eval", r);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iter,split,frame,camera,psnr,ssim,mse,perceptual");
  CHECK(count_lines(csv) == 7);
}
