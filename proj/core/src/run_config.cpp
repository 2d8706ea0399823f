// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/run_config.hpp"

#include <fstream>

#include "gnv/error.hpp"
#include "json_util.hpp"

namespace gnv {

using detail::json;
using detail::StrictObject;

ModelConfig ModelOverrides::build(const Aabb& box, std::size_t bone_count) const {
  ModelConfig c;
  if (preset == "full") {
    c = ModelConfig::full(box, bone_count);
  } else if (preset == "desk") {
    c = ModelConfig::desk(box, bone_count);
  } else {
    throw ConfigError("unknown model preset '" + preset + "'");
  }
  if (voxel_dims) c.voxels.dims = *voxel_dims;
  if (voxel_channels) c.voxels.channels = *voxel_channels;
  if (interp_scales) c.interp.scales = *interp_scales;
  c.radiance.feature_dim = c.interp.output_size(c.voxels);
  if (radiance_width) c.radiance.width = *radiance_width;
  if (radiance_depth) c.radiance.depth = *radiance_depth;
  if (weight_prior) c.weight_prior = *weight_prior;
  if (confidence_density) c.confidence_density = *confidence_density;
  if (weight_sampling) c.weight_sampling = *weight_sampling;
  if (pose_translation) c.pose_refine.translation_branch = *pose_translation;
  c.validate();
  return c;
}

std::size_t RunConfig::iterations_for(Phase phase) const {
  switch (phase) {
    case Phase::kPretrain:
      return pretrain_iterations;
    case Phase::kScratch:
      return scratch_iterations;
    case Phase::kFinetune:
      return finetune_iterations;
  }
  return 0;
}

TrainConfig RunConfig::train_config(Phase phase) const {
  TrainConfig t;
  t.phase = phase;
  t.iterations = iterations_for(phase);
  t.seed = seed;
  t.lr = lr;
  t.loss = loss;
  t.render = render;
  t.order = order;
  t.perceptual_seed = perceptual_seed;
  t.perceptual_weights = perceptual_weights;
  t.validate();
  return t;
}

namespace {

void read_iterations(StrictObject o, RunConfig& c) {
  c.pretrain_iterations = o.get_or("pretrain", c.pretrain_iterations);
  c.scratch_iterations = o.get_or("scratch", c.scratch_iterations);
  c.finetune_iterations = o.get_or("finetune", c.finetune_iterations);
  o.finish();
}

void read_lr(StrictObject o, LearningRates& lr) {
  lr.base = o.get_or("base", lr.base);
  lr.voxels = o.get_or("voxels", lr.voxels);
  lr.radiance = o.get_or("radiance", lr.radiance);
  lr.decay_period = o.get_or("decay_period", lr.decay_period);
  o.finish();
}

void read_loss(StrictObject o, LossSchedule& s) {
  s.full.lambda_m = o.get_or("lambda_m", s.full.lambda_m);
  s.full.lambda_l = o.get_or("lambda_l", s.full.lambda_l);
  s.warmup.lambda_m = o.get_or("warmup_lambda_m", s.warmup.lambda_m);
  s.warmup.lambda_l = o.get_or("warmup_lambda_l", s.warmup.lambda_l);
  s.mse_only_iters = o.get_or("mse_only_iters", s.mse_only_iters);
  o.finish();
  s.validate();
}

void read_render(StrictObject o, RenderConfig& r, const std::string& ctx) {
  r.n_samples = o.get_or("n_samples", r.n_samples);
  r.patch_count = o.get_or("patch_count", r.patch_count);
  r.patch_size = o.get_or("patch_size", r.patch_size);
  if (o.has("background")) r.background = detail::vec3_from(o.raw("background"), ctx + ".background");
  r.body_padding = o.get_or("body_padding", r.body_padding);
  o.finish();
  if (r.n_samples < 2) throw ConfigError(ctx + ".n_samples must be >= 2");
  if (r.patch_count == 0 || r.patch_size == 0) throw ConfigError(ctx + ": patches must be non-empty");
}

WeightSampling parse_sampling(const std::string& s) {
  if (s == "canonical") return WeightSampling::kCanonical;
  if (s == "observed") return WeightSampling::kObserved;
  throw ConfigError("unknown weight_sampling '" + s + "'");
}

void read_model(StrictObject o, ModelOverrides& m) {
  m.preset = o.get_or<std::string>("preset", m.preset);
  if (o.has("voxel_dims")) m.voxel_dims = o.get<std::array<std::size_t, 3>>("voxel_dims");
  if (o.has("voxel_channels")) m.voxel_channels = o.get<std::size_t>("voxel_channels");
  if (o.has("interp_scales")) m.interp_scales = o.get<std::vector<int>>("interp_scales");
  if (o.has("radiance_width")) m.radiance_width = o.get<std::size_t>("radiance_width");
  if (o.has("radiance_depth")) m.radiance_depth = o.get<std::size_t>("radiance_depth");
  if (o.has("weight_prior")) m.weight_prior = o.get<bool>("weight_prior");
  if (o.has("confidence_density")) m.confidence_density = o.get<bool>("confidence_density");
  if (o.has("weight_sampling")) m.weight_sampling = parse_sampling(o.get<std::string>("weight_sampling"));
  if (o.has("pose_translation")) m.pose_translation = o.get<bool>("pose_translation");
  o.finish();
  if (m.preset != "full" && m.preset != "desk") throw ConfigError("unknown model preset '" + m.preset + "'");
}

void read_gen(StrictObject o, GenDataConfig& g) {
  g.subjects = o.get_or("subjects", g.subjects);
  g.seed = o.get_or("seed", g.seed);
  g.spec.frames = o.get_or("frames", g.spec.frames);
  g.spec.cameras = o.get_or("cameras", g.spec.cameras);
  g.spec.width = o.get_or("width", g.spec.width);
  g.spec.height = o.get_or("height", g.spec.height);
  g.spec.gt_samples = o.get_or("gt_samples", g.spec.gt_samples);
  if (o.has("background")) g.spec.background = detail::vec3_from(o.raw("background"), "gen_data.background");
  o.finish();
  if (g.subjects == 0 || g.spec.frames == 0 || g.spec.cameras < 2) {
    throw ConfigError("gen_data needs subjects >= 1, frames >= 1 and cameras >= 2");
  }
  if (g.spec.gt_samples < 256) throw ConfigError("gen_data.gt_samples must be >= 256");
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  StrictObject o(j, "config");
  RunConfig c;
  if (o.has("dataset")) c.dataset = o.get<std::string>("dataset");
  if (o.has("out")) c.out = o.get<std::string>("out");
  c.seed = o.get_or("seed", c.seed);
  c.pretrain_subjects = o.get_or("pretrain_subjects", c.pretrain_subjects);
  if (o.has("target_subject")) c.target_subject = o.get<std::size_t>("target_subject");
  if (o.has("iterations")) read_iterations(StrictObject(o.raw("iterations"), "config.iterations"), c);
  if (o.has("learning_rates")) read_lr(StrictObject(o.raw("learning_rates"), "config.learning_rates"), c.lr);
  if (o.has("loss")) read_loss(StrictObject(o.raw("loss"), "config.loss"), c.loss);
  if (o.has("render")) read_render(StrictObject(o.raw("render"), "config.render"), c.render, "config.render");
  if (o.has("subject_order")) {
    const auto s = o.get<std::string>("subject_order");
    if (s == "round_robin") {
      c.order = SubjectOrder::kRoundRobin;
    } else if (s == "random") {
      c.order = SubjectOrder::kRandom;
    } else {
      throw ConfigError("unknown subject_order '" + s + "'");
    }
  }
  if (o.has("load_mask")) c.load_mask = LoadMask::parse(o.get<std::string>("load_mask"));
  if (o.has("pretrained")) c.pretrained = o.get<std::string>("pretrained");
  c.checkpoint_every = o.get_or("checkpoint_every", c.checkpoint_every);
  if (o.has("eval")) {
    StrictObject e(o.raw("eval"), "config.eval");
    c.eval_every = e.get_or("every", c.eval_every);
    c.eval_images = e.get_or("images", c.eval_images);
    e.finish();
  }
  if (o.has("perceptual")) {
    StrictObject p(o.raw("perceptual"), "config.perceptual");
    c.perceptual_seed = p.get_or("seed", c.perceptual_seed);
    if (p.has("weights")) c.perceptual_weights = p.get<std::string>("weights");
    p.finish();
  }
  if (o.has("model")) read_model(StrictObject(o.raw("model"), "config.model"), c.model);
  if (o.has("gen_data")) read_gen(StrictObject(o.raw("gen_data"), "config.gen_data"), c.gen_data);
  o.finish();
  for (Phase p : {Phase::kPretrain, Phase::kScratch, Phase::kFinetune}) {
    if (c.iterations_for(p) == 0) throw ConfigError("config.iterations." + std::string(phase_name(p)) + " must be > 0");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace gnv
