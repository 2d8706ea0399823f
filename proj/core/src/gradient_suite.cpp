// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/gradient_suite.hpp"

#include <algorithm>
#include <memory>
#include <random>

#include "gnv/deformation.hpp"
#include "gnv/encoding.hpp"
#include "gnv/error.hpp"
#include "gnv/losses.hpp"
#include "gnv/model.hpp"
#include "gnv/pipeline.hpp"
#include "gnv/radiance.hpp"
#include "gnv/renderer.hpp"
#include "gnv/skeleton.hpp"
#include "gnv/voxel_grid.hpp"

namespace gnv {

namespace {

using Rng = std::mt19937_64;

void fill_normal(ParamTensor& t, Rng& rng, double std) {
  std::normal_distribution<double> d(0.0, std);
  for (double& v : t.values) v = d(rng);
}

void fill_uniform(ParamTensor& t, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values) v = d(rng);
}

// Re-draws every tensor whose name starts with `prefix`, so zero-initialized
// output layers do not hide upstream gradients.
void randomize_prefix(ParameterStore& store, const std::string& prefix, Rng& rng, double std) {
  for (auto& t : store.tensors()) {
    if (t.name.starts_with(prefix)) fill_normal(t, rng, std);
  }
}

// World points whose lattice coordinates sit well inside a cell, away from
// the kinks of trilinear interpolation.
void place_points(ParamTensor& p, const GridLayout& layout, Rng& rng) {
  std::uniform_real_distribution<double> frac(0.15, 0.85);
  const std::size_t n = p.size() / 3;
  for (std::size_t k = 0; k < n; ++k) {
    for (int a = 0; a < 3; ++a) {
      std::uniform_int_distribution<std::size_t> cell(0, layout.dims[a] - 2);
      const double u = static_cast<double>(cell(rng)) + frac(rng);
      p.values[3 * k + a] =
          layout.aabb.min[a] + u * layout.aabb.extent()[a] / static_cast<double>(layout.dims[a] - 1);
    }
  }
}

Vec3 vec_at(const ParamTensor& t, std::size_t k) { return {t.values[3 * k], t.values[3 * k + 1], t.values[3 * k + 2]}; }

DifferentiableBlock encoding_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "encoding";
  fill_uniform(b.store.add("x", {5}), rng, -2.0, 2.0);
  const EncodingSpec spec{3};
  b.forward = [spec](const ParameterStore& s) { return positional_encode(s.at("x").values, spec); };
  b.pullback = [spec](ParameterStore& s, std::span<const double> cot) {
    auto& x = s.at("x");
    const std::vector<double> enc = positional_encode(x.values, spec);
    positional_encode_backward(enc, spec, cot, x.grad);
  };
  return b;
}

DifferentiableBlock grid_block(const std::string& name, GridLayout layout, InterpConfig interp, Rng& rng) {
  DifferentiableBlock b;
  b.name = name;
  fill_normal(b.store.add("grid", layout.tensor_shape()), rng, 1.0);
  auto& p = b.store.add("points", {4, 3});
  place_points(p, layout, rng);
  b.forward = [layout, interp](const ParameterStore& s) {
    const auto& grid = s.at("grid").values;
    const auto& p = s.at("points");
    const std::size_t F = interp.output_size(layout);
    std::vector<double> out(4 * F);
    for (std::size_t k = 0; k < 4; ++k) {
      mdi_sample(layout, grid, vec_at(p, k), interp, std::span<double>(out).subspan(k * F, F));
    }
    return out;
  };
  b.pullback = [layout, interp](ParameterStore& s, std::span<const double> cot) {
    auto& grid = s.at("grid");
    auto& p = s.at("points");
    const std::size_t F = interp.output_size(layout);
    for (std::size_t k = 0; k < 4; ++k) {
      Vec3 dp = Vec3::Zero();
      mdi_sample_backward(layout, grid.values, vec_at(p, k), interp, cot.subspan(k * F, F), grid.grad, &dp);
      for (int a = 0; a < 3; ++a) p.grad[3 * k + a] += dp[a];
    }
  };
  return b;
}

Skeleton chain_skeleton(std::size_t bones) {
  Skeleton s;
  for (std::size_t i = 0; i < bones; ++i) {
    s.parent.push_back(static_cast<int>(i) - 1);
    s.rest_joints.emplace_back(0.4 * static_cast<double>(i), 0.0, 0.0);
    s.rest_tips.emplace_back(0.4 * static_cast<double>(i + 1), 0.0, 0.0);
  }
  return s;
}

Pose random_pose(const Skeleton& skel, Rng& rng, double amplitude) {
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  std::vector<Vec3> omega(skel.bone_count());
  for (auto& w : omega) w = Vec3(d(rng), d(rng), d(rng));
  return make_pose(skel, Vec3(d(rng), d(rng), d(rng)) * 0.2, std::move(omega));
}

DifferentiableBlock pose_refine_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "pose_refine";
  const Skeleton skel = chain_skeleton(3);
  const PoseRefiner refiner(3, {6, 2, true});
  refiner.add_params(b.store, rng);
  randomize_prefix(b.store, "pose_refine.", rng, 0.4);
  const Pose pose = random_pose(skel, rng, 0.8);
  b.forward = [=](const ParameterStore& s) {
    const BoneTransforms tr = refiner.corrected_transforms(s, skel, pose);
    std::vector<double> out;
    for (const auto& t : tr) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.push_back(t.R(r, c));
      for (int a = 0; a < 3; ++a) out.push_back(t.t[a]);
    }
    return out;
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    PoseRefiner::Cache cache;
    refiner.corrected_transforms(s, skel, pose, &cache);
    std::vector<Mat3> dr(3);
    std::vector<Vec3> dt(3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) dr[i](r, c) = cot[12 * i + 3 * r + c];
      for (int a = 0; a < 3; ++a) dt[i][a] = cot[12 * i + 9 + a];
    }
    refiner.backward(s, cache, dr, dt);
  };
  return b;
}

WeightNetConfig small_weight_net() { return {4, 6, {3}}; }

DifferentiableBlock weight_net_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "weight_net";
  const Aabb box{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  const WeightVolumeNet net(2, small_weight_net(), box);
  net.add_params(b.store, rng);
  randomize_prefix(b.store, "weight_net.", rng, 0.5);
  fill_normal(b.store.add("z", {4}), rng, 1.0);
  auto prior = std::make_shared<std::vector<double>>(net.output_layout().value_count());
  std::uniform_real_distribution<double> pd(0.5, 1.5);
  for (double& v : *prior) v = pd(rng);
  b.forward = [net, prior](const ParameterStore& s) { return net.forward(s, s.at("z").values, *prior).data; };
  b.pullback = [net, prior](ParameterStore& s, std::span<const double> cot) {
    WeightVolumeNet::Cache cache;
    net.forward(s, s.at("z").values, *prior, &cache);
    net.backward(s, cache, *prior, cot, s.at("z").grad);
  };
  return b;
}

DifferentiableBlock deform_block(const std::string& name, WeightSampling sampling, Rng& rng) {
  DifferentiableBlock b;
  b.name = name;
  const Aabb box{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  const std::size_t K = 2;
  const Skeleton skel = chain_skeleton(K);
  const WeightVolumeNet net(K, small_weight_net(), box);
  const PoseRefiner refiner(K, {6, 1, true});
  net.add_params(b.store, rng);
  randomize_prefix(b.store, "weight_net.", rng, 0.5);
  refiner.add_params(b.store, rng);
  randomize_prefix(b.store, "pose_refine.", rng, 0.2);
  fill_normal(b.store.add("z", {4}), rng, 1.0);
  const Pose pose = random_pose(skel, rng, 0.5);
  auto prior = std::make_shared<std::vector<double>>(
      bone_weight_prior(net.output_layout(), skel, 0.5, 0.3));
  std::vector<Vec3> xs(4);
  std::uniform_real_distribution<double> xd(-0.5, 0.5);
  for (auto& x : xs) x = Vec3(xd(rng), xd(rng), xd(rng));

  b.forward = [=](const ParameterStore& s) {
    const VoxelGrid vol = net.forward(s, s.at("z").values, *prior);
    const BoneTransforms tr = refiner.corrected_transforms(s, skel, pose);
    std::vector<double> out;
    for (const auto& x : xs) {
      const DeformedPoint d = deform_point(vol, x, tr, sampling);
      out.insert(out.end(), {d.x_canonical.x(), d.x_canonical.y(), d.x_canonical.z(), d.confidence});
    }
    return out;
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    WeightVolumeNet::Cache wc;
    PoseRefiner::Cache pc;
    const VoxelGrid vol = net.forward(s, s.at("z").values, *prior, &wc);
    const BoneTransforms tr = refiner.corrected_transforms(s, skel, pose, &pc);
    std::vector<double> d_vol(vol.data.size(), 0.0);
    std::vector<Mat3> dr(K, Mat3::Zero());
    std::vector<Vec3> dt(K, Vec3::Zero());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const Vec3 dx(cot[4 * k], cot[4 * k + 1], cot[4 * k + 2]);
      deform_point_backward(vol, xs[k], tr, sampling, dx, cot[4 * k + 3], d_vol, dr, dt);
    }
    net.backward(s, wc, *prior, d_vol, s.at("z").grad);
    refiner.backward(s, pc, dr, dt);
  };
  return b;
}

RadianceInputs inputs_from(const ParameterStore& s, std::size_t P, std::size_t F) {
  auto mat = [&](const char* name, std::size_t cols) {
    return RowMatrix(Eigen::Map<const RowMatrix>(s.at(name).values.data(), static_cast<Eigen::Index>(P),
                                                 static_cast<Eigen::Index>(cols)));
  };
  RadianceInputs in;
  in.v_general = mat("in.v_general", F);
  in.v_individual = mat("in.v_individual", F);
  in.time = Eigen::Map<const Eigen::VectorXd>(s.at("in.time").values.data(), static_cast<Eigen::Index>(P));
  in.x_obs = mat("in.x_obs", 3);
  in.direction = mat("in.direction", 3);
  return in;
}

void add_into(ParamTensor& t, const double* src) {
  for (std::size_t i = 0; i < t.size(); ++i) t.grad[i] += src[i];
}

DifferentiableBlock radiance_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "radiance";
  RadianceConfig cfg;
  cfg.feature_dim = 4;
  cfg.feature_encoding = {2};
  cfg.time_encoding = {2};
  cfg.coord_encoding = {3};
  cfg.direction_encoding = {2};
  cfg.width = 8;
  cfg.depth = 2;
  cfg.color_width = 6;
  const RadianceNet net(cfg);
  net.add_params(b.store, rng);
  randomize_prefix(b.store, "radiance.", rng, 0.4);
  const std::size_t P = 3, F = cfg.feature_dim;
  fill_normal(b.store.add("in.v_general", {P, F}), rng, 0.5);
  fill_normal(b.store.add("in.v_individual", {P, F}), rng, 0.5);
  fill_uniform(b.store.add("in.time", {P}), rng, 0.0, 1.0);
  fill_uniform(b.store.add("in.x_obs", {P, 3}), rng, -1.0, 1.0);
  fill_normal(b.store.add("in.direction", {P, 3}), rng, 1.0);
  b.forward = [=](const ParameterStore& s) {
    const RadianceOutputs o = net.forward(s, inputs_from(s, P, F));
    std::vector<double> out(o.rgb.data(), o.rgb.data() + o.rgb.size());
    out.insert(out.end(), o.sigma.data(), o.sigma.data() + o.sigma.size());
    return out;
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    RadianceNet::Cache cache;
    net.forward(s, inputs_from(s, P, F), &cache);
    const RowMatrix d_rgb = Eigen::Map<const RowMatrix>(cot.data(), static_cast<Eigen::Index>(P), 3);
    const Eigen::VectorXd d_sigma = Eigen::Map<const Eigen::VectorXd>(cot.data() + 3 * P, static_cast<Eigen::Index>(P));
    RadianceInputs d_in;
    net.backward(s, cache, d_rgb, d_sigma, &d_in);
    add_into(s.at("in.v_general"), d_in.v_general.data());
    add_into(s.at("in.v_individual"), d_in.v_individual.data());
    add_into(s.at("in.time"), d_in.time.data());
    add_into(s.at("in.x_obs"), d_in.x_obs.data());
    add_into(s.at("in.direction"), d_in.direction.data());
  };
  return b;
}

DifferentiableBlock volume_render_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "volume_render";
  const std::size_t N = 6;
  fill_uniform(b.store.add("colors", {N, 3}), rng, 0.0, 1.0);
  fill_uniform(b.store.add("sigmas", {N}), rng, 0.1, 3.0);
  std::vector<double> t(N);
  std::uniform_real_distribution<double> gap(0.05, 0.3);
  double acc = 0.5;
  for (auto& v : t) v = acc += gap(rng);
  const double t_far = acc + gap(rng);
  std::uniform_real_distribution<double> bd(0.0, 1.0);
  const Vec3 bg(bd(rng), bd(rng), bd(rng));
  auto colors_of = [N](const ParameterStore& s) {
    std::vector<Vec3> c(N);
    for (std::size_t i = 0; i < N; ++i) c[i] = vec_at(s.at("colors"), i);
    return c;
  };
  b.forward = [=](const ParameterStore& s) {
    const Composite c = volume_render(colors_of(s), s.at("sigmas").values, t, t_far, bg);
    return std::vector<double>{c.pixel.x(), c.pixel.y(), c.pixel.z()};
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    std::vector<Vec3> dc(N);
    std::vector<double> ds(N);
    volume_render_backward(colors_of(s), s.at("sigmas").values, t, t_far, bg, Vec3(cot[0], cot[1], cot[2]), dc, ds);
    auto& c = s.at("colors");
    auto& sg = s.at("sigmas");
    for (std::size_t i = 0; i < N; ++i) {
      for (int a = 0; a < 3; ++a) c.grad[3 * i + a] += dc[i][a];
      sg.grad[i] += ds[i];
    }
  };
  return b;
}

DifferentiableBlock mse_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "mse_loss";
  fill_uniform(b.store.add("pred", {20}), rng, 0.0, 1.0);
  std::vector<double> gt(20);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& v : gt) v = d(rng);
  b.forward = [gt](const ParameterStore& s) { return std::vector<double>{mse_loss(s.at("pred").values, gt)}; };
  b.pullback = [gt](ParameterStore& s, std::span<const double> cot) {
    mse_loss_backward(s.at("pred").values, gt, cot[0], s.at("pred").grad);
  };
  return b;
}

DifferentiableBlock perceptual_block(std::uint64_t seed, Rng& rng) {
  DifferentiableBlock b;
  b.name = "perceptual_loss";
  const std::size_t H = 6;
  auto net = std::make_shared<PerceptualNet>(PerceptualNet::seeded(seed, {4, 6}));
  fill_uniform(b.store.add("pred", {H, H, 3}), rng, 0.0, 1.0);
  Image gt = Image::filled(H, H, Vec3::Zero());
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& v : gt.rgb) v = d(rng);
  b.forward = [=](const ParameterStore& s) {
    const auto& pv = s.at("pred").values;
    const Image pred{H, H, std::vector<double>(pv.begin(), pv.end())};
    return std::vector<double>{net->distance(pred, gt)};
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    const auto& pv = s.at("pred").values;
    const Image pred{H, H, std::vector<double>(pv.begin(), pv.end())};
    std::vector<double> d_pred;
    net->distance(pred, gt, &d_pred);
    auto& g = s.at("pred").grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += cot[0] * d_pred[i];
  };
  return b;
}


// The whole render path on a tiny model. Shared and subject parameters share
// one store; their names do not collide.
DifferentiableBlock pipeline_block(Rng& rng) {
  DifferentiableBlock b;
  b.name = "pipeline";
  const Aabb box{Vec3(-0.6, -0.6, -0.6), Vec3(1.4, 0.6, 0.6)};
  const std::size_t K = 2;
  auto skel = std::make_shared<Skeleton>(chain_skeleton(K));
  ModelConfig mc;
  mc.bone_count = K;
  mc.voxels = GridLayout{2, {7, 6, 6}, box};
  mc.interp.scales = {1, 2};
  mc.radiance.feature_dim = mc.interp.output_size(mc.voxels);
  mc.radiance.feature_encoding = {2};
  mc.radiance.time_encoding = {1};
  mc.radiance.coord_encoding = {2};
  mc.radiance.direction_encoding = {1};
  mc.radiance.width = 8;
  mc.radiance.depth = 2;
  mc.radiance.color_width = 6;
  mc.pose_refine = {6, 1, true};
  mc.weight_net = small_weight_net();
  mc.prior_sigma = 0.3;
  auto model = std::make_shared<Model>(mc);
  SharedState shared = model->init_shared(rng());
  SubjectState subject = model->init_subject();
  for (auto* store : {&shared.params, &subject.params}) {
    for (auto& t : store->tensors()) b.store.add(t.name, t.shape) = t;
  }
  randomize_prefix(b.store, std::string(kGeneralVoxels), rng, 0.5);
  randomize_prefix(b.store, std::string(kIndividualVoxels), rng, 0.5);
  randomize_prefix(b.store, std::string(kEmbedding), rng, 1.0);
  randomize_prefix(b.store, "radiance.", rng, 0.4);
  randomize_prefix(b.store, "weight_net.", rng, 0.5);
  randomize_prefix(b.store, "pose_refine.", rng, 0.1);
  auto prior = std::make_shared<std::vector<double>>(model->weight_prior(*skel));
  const Pose pose = random_pose(*skel, rng, 0.3);
  std::uniform_real_distribution<double> td(0.0, 1.0);
  const double time = td(rng);
  const Camera cam = Camera::look_at(Vec3(0.4, 0.3, 3.0), Vec3(0.4, 0.0, 0.0), Vec3(0, 1, 0), 6.0, 4, 4);
  std::vector<Ray> rays;
  for (const Pixel px : {Pixel{1, 1}, Pixel{2, 2}, Pixel{1, 2}}) rays.push_back(generate_rays(cam, {&px, 1}).front());
  RenderConfig rc;
  rc.n_samples = 8;
  rc.body_padding = 0.2;
  auto frame_of = [skel, prior, pose, time] { return SceneFrame{skel.get(), *prior, pose, time}; };
  b.forward = [=](const ParameterStore& s) {
    const Pipeline pipe(*model);
    const std::vector<Vec3> px = pipe.render_rays(s, s, frame_of(), rays, rc, nullptr);
    std::vector<double> out;
    for (const auto& p : px) out.insert(out.end(), {p.x(), p.y(), p.z()});
    return out;
  };
  b.pullback = [=](ParameterStore& s, std::span<const double> cot) {
    const Pipeline pipe(*model);
    Pipeline::Cache cache;
    pipe.render_rays(s, s, frame_of(), rays, rc, nullptr, &cache);
    std::vector<Vec3> d(rays.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = Vec3(cot[3 * i], cot[3 * i + 1], cot[3 * i + 2]);
    pipe.backward(s, s, frame_of(), cache, rc, d);
  };
  return b;
}

}  // namespace

std::vector<std::string> gradient_block_names() {
  return {"encoding",      "trilinear",      "mdi",           "pose_refine",   "weight_net",
          "deform",        "deform_observed", "radiance",     "volume_render", "mse_loss",
          "perceptual_loss", "pipeline"};
}

DifferentiableBlock make_gradient_block(const std::string& name, std::uint64_t seed) {
  Rng rng(seed * 1000003ULL + std::hash<std::string>{}(name));
  const Aabb box{Vec3(-1.0, -0.5, 0.0), Vec3(1.0, 1.5, 0.8)};
  if (name == "encoding") return encoding_block(rng);
  if (name == "trilinear") return grid_block(name, GridLayout{2, {4, 5, 3}, box}, InterpConfig{{1}}, rng);
  if (name == "mdi") return grid_block(name, GridLayout{2, {9, 10, 9}, box}, InterpConfig{{1, 2, 4}}, rng);
  if (name == "pose_refine") return pose_refine_block(rng);
  if (name == "weight_net") return weight_net_block(rng);
  if (name == "deform") return deform_block(name, WeightSampling::kCanonical, rng);
  if (name == "deform_observed") return deform_block(name, WeightSampling::kObserved, rng);
  if (name == "radiance") return radiance_block(rng);
  if (name == "volume_render") return volume_render_block(rng);
  if (name == "mse_loss") return mse_block(rng);
  if (name == "perceptual_loss") return perceptual_block(seed, rng);
  if (name == "pipeline") return pipeline_block(rng);
  throw ConfigError("unknown gradient block '" + name + "'");
}

std::vector<GradCheckReport> run_gradient_suite(std::span<const std::uint64_t> seeds, const GradCheckOptions& options) {
  std::vector<GradCheckReport> reports;
  for (std::uint64_t seed : seeds) {
    for (const auto& name : gradient_block_names()) {
      DifferentiableBlock block = make_gradient_block(name, seed);
      GradCheckReport r = check_gradients(block, seed, options);
      r.block = name + "@seed" + std::to_string(seed);
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

}  // namespace gnv
