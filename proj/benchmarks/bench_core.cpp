// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "gnv/deformation.hpp"
#include "gnv/gradient_suite.hpp"
#include "gnv/model.hpp"
#include "gnv/renderer.hpp"
#include "gnv/synthdata.hpp"
#include "gnv/trainer.hpp"
#include "gnv/voxel_grid.hpp"

namespace {

using namespace gnv;

void BM_MdiSample(benchmark::State& state) {
  const GridLayout layout{6, {48, 48, 16}, Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)}};
  std::vector<double> data(layout.value_count(), 0.5);
  const InterpConfig cfg{{1, 2, 4}};
  std::vector<double> out(18);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto _ : state) {
    mdi_sample(layout, data, Vec3(u(rng), u(rng), u(rng)), cfg, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_MdiSample);

void BM_VolumeRender(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Vec3> colors(n, Vec3(0.2, 0.5, 0.7));
  std::vector<double> sigmas(n, 3.0);
  const std::vector<double> t = sample_points(1.0, 3.0, n, nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(volume_render(colors, sigmas, t, 3.0, Vec3::Zero()));
}
BENCHMARK(BM_VolumeRender)->Arg(32)->Arg(128)->Arg(1024);

void BM_WeightVolume(benchmark::State& state) {
  const Model model(ModelConfig::desk(canonical_envelope(), 8));
  const SharedState shared = model.init_shared(1);
  const std::vector<double> z(model.config().weight_net.embedding_dim, 0.1);
  const std::vector<double> prior = model.weight_prior(humanoid_skeleton());
  for (auto _ : state) benchmark::DoNotOptimize(model.weight_net().forward(shared.params, z, prior));
}
BENCHMARK(BM_WeightVolume)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const SyntheticSubject s = make_subjects(1, 1).front();
  SubjectData sd;
  sd.id = "bench";
  sd.skeleton = s.skeleton;
  sd.cameras = camera_rig(2, 64, 64);
  FrameRecord f;
  f.pose = MotionSpec{}.pose_at(s, 0.3);
  f.time = 0.3;
  sd.frames.push_back(f);
  sd.train.push_back(LabeledImage{0, 0, render_gt(s, f.pose, sd.cameras[0], 256)});
  const Model model(ModelConfig::desk(canonical_envelope(), 8));
  TrainConfig tc;
  tc.phase = Phase::kScratch;
  tc.iterations = 1u << 30;
  tc.render.n_samples = 32;
  tc.render.patch_count = 2;
  tc.render.patch_size = 16;
  const Trainer trainer(model, tc, {&sd});
  TrainingState st = trainer.init_fresh();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(st));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_GradientSuiteSeed(benchmark::State& state) {
  std::vector<std::uint64_t> seed{0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_gradient_suite(seed));
    ++seed[0];
  }
}
BENCHMARK(BM_GradientSuiteSeed)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
