// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/pipeline.hpp"

#include <algorithm>

#include "gnv/error.hpp"

namespace gnv {

Aabb posed_body_box(const Skeleton& skeleton, const Pose& pose, double padding) {
  const BoneTransforms world = forward_kinematics(skeleton, pose.root_translation, pose.omega);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < world.size(); ++i) {
    for (const Vec3& p : {world[i].apply(skeleton.rest_joints[i]), world[i].apply(skeleton.tip(i))}) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const Aabb box{lo - Vec3::Constant(padding), hi + Vec3::Constant(padding)};
  return box.padded(0.1);
}

namespace {

std::span<double> grad_or(ParamTensor& t, std::vector<double>& scratch) {
  if (t.has_grad()) return t.grad;
  scratch.assign(t.size(), 0.0);
  return scratch;
}

}  // namespace

std::vector<Vec3> Pipeline::render_rays(const ParameterStore& shared, const ParameterStore& subject,
                                        const SceneFrame& frame, std::span<const Ray> rays,
                                        const RenderConfig& config, std::mt19937_64* rng, Cache* cache) const {
  if (!frame.skeleton) throw ConfigError("frame has no skeleton");
  const Model& m = *model_;
  const ModelConfig& mc = m.config();
  const std::size_t K = mc.bone_count;
  if (frame.skeleton->bone_count() != K) throw ConfigError("frame skeleton does not match model bone count");

  Cache local;
  Cache& c = cache ? *cache : local;
  const auto& z = subject.at(kEmbedding).values;
  c.weights = m.weight_net().forward(shared, z, frame.prior, cache ? &c.weight_cache : nullptr);
  c.transforms = m.refiner().corrected_transforms(shared, *frame.skeleton, frame.pose, cache ? &c.pose_cache : nullptr);
  const Aabb box = posed_body_box(*frame.skeleton, frame.pose, config.body_padding);

  // Sample points along every ray that meets the body box.
  const std::size_t R = rays.size();
  c.rays.assign(rays.begin(), rays.end());
  c.ray_begin.assign(R + 1, 0);
  c.t_far.assign(R, 0.0);
  c.t.clear();
  c.x_obs.clear();
  for (std::size_t r = 0; r < R; ++r) {
    c.ray_begin[r] = c.t.size();
    const auto hit = ray_aabb(rays[r], box);
    if (!hit || hit->t_far <= hit->t_near) continue;
    c.t_far[r] = hit->t_far;
    for (double t : sample_points(hit->t_near, hit->t_far, config.n_samples, rng)) {
      c.t.push_back(t);
      c.x_obs.push_back(rays[r].origin + t * rays[r].direction);
    }
  }
  c.ray_begin[R] = c.t.size();
  const std::size_t S = c.t.size();

  // Deform; points with zero bone weight carry no density and are skipped.
  c.x_canonical.resize(S);
  c.confidence.resize(S);
  c.active_row.assign(S, -1);
  long active = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const DeformedPoint d = deform_point(c.weights, c.x_obs[s], c.transforms, mc.weight_sampling);
    c.x_canonical[s] = d.x_canonical;
    c.confidence[s] = mc.confidence_density ? d.confidence : 1.0;
    if (c.confidence[s] > 0.0) c.active_row[s] = active++;
  }

  const std::size_t F = mc.radiance.feature_dim;
  RadianceInputs& in = c.inputs;
  in.v_general.resize(active, static_cast<Eigen::Index>(F));
  in.v_individual.resize(active, static_cast<Eigen::Index>(F));
  in.time = Eigen::VectorXd::Constant(active, frame.time);
  in.x_obs.resize(active, 3);
  in.direction.resize(active, 3);
  const auto& gv = shared.at(kGeneralVoxels).values;
  const auto& iv = subject.at(kIndividualVoxels).values;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t s = c.ray_begin[r]; s < c.ray_begin[r + 1]; ++s) {
      const long row = c.active_row[s];
      if (row < 0) continue;
      mdi_sample(mc.voxels, gv, c.x_canonical[s], mc.interp, std::span<double>(in.v_general.row(row).data(), F));
      mdi_sample(mc.voxels, iv, c.x_canonical[s], mc.interp, std::span<double>(in.v_individual.row(row).data(), F));
      in.x_obs.row(row) = c.x_obs[s].transpose();
      in.direction.row(row) = rays[r].direction.transpose();
    }
  }
  c.outputs = m.radiance().forward(shared, in, cache ? &c.radiance_cache : nullptr);

  std::vector<Vec3> pixels(R, config.background);
  std::vector<Vec3> colors;
  std::vector<double> sigmas;
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t b = c.ray_begin[r], e = c.ray_begin[r + 1];
    if (b == e) continue;
    colors.assign(e - b, Vec3::Zero());
    sigmas.assign(e - b, 0.0);
    for (std::size_t s = b; s < e; ++s) {
      const long row = c.active_row[s];
      if (row < 0) continue;
      colors[s - b] = c.outputs.rgb.row(row).transpose();
      sigmas[s - b] = c.outputs.sigma[row] * c.confidence[s];
    }
    pixels[r] = volume_render(colors, sigmas, std::span<const double>(c.t).subspan(b, e - b), c.t_far[r],
                              config.background)
                    .pixel;
  }
  return pixels;
}

void Pipeline::backward(ParameterStore& shared, ParameterStore& subject, const SceneFrame& frame, const Cache& c,
                        const RenderConfig& config, std::span<const Vec3> d_pixels) const {
  const Model& m = *model_;
  const ModelConfig& mc = m.config();
  const std::size_t K = mc.bone_count;
  const std::size_t R = c.rays.size();
  if (d_pixels.size() != R) throw ConfigError("pixel cotangent count does not match ray count");
  const Eigen::Index P = c.inputs.v_general.rows();

  // Compositor.
  RowMatrix d_rgb = RowMatrix::Zero(P, 3);
  Eigen::VectorXd d_sigma = Eigen::VectorXd::Zero(P);
  std::vector<double> d_conf(c.t.size(), 0.0);
  std::vector<Vec3> colors, d_colors;
  std::vector<double> sigmas, d_sigmas;
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t b = c.ray_begin[r], e = c.ray_begin[r + 1];
    if (b == e) continue;
    const std::size_t n = e - b;
    colors.assign(n, Vec3::Zero());
    sigmas.assign(n, 0.0);
    for (std::size_t s = b; s < e; ++s) {
      const long row = c.active_row[s];
      if (row < 0) continue;
      colors[s - b] = c.outputs.rgb.row(row).transpose();
      sigmas[s - b] = c.outputs.sigma[row] * c.confidence[s];
    }
    d_colors.assign(n, Vec3::Zero());
    d_sigmas.assign(n, 0.0);
    volume_render_backward(colors, sigmas, std::span<const double>(c.t).subspan(b, n), c.t_far[r],
                           config.background, d_pixels[r], d_colors, d_sigmas);
    for (std::size_t s = b; s < e; ++s) {
      const long row = c.active_row[s];
      if (row < 0) continue;
      d_rgb.row(row) = d_colors[s - b].transpose();
      d_sigma[row] = d_sigmas[s - b] * c.confidence[s];
      d_conf[s] = d_sigmas[s - b] * c.outputs.sigma[row];
    }
  }

  // Radiance field.
  RadianceInputs d_in;
  m.radiance().backward(shared, c.radiance_cache, d_rgb, d_sigma, &d_in);

  // Feature lookups and deformation.
  std::vector<double> scratch_g, scratch_i;
  ParamTensor& gv = shared.at(kGeneralVoxels);
  ParamTensor& iv = subject.at(kIndividualVoxels);
  std::span<double> d_gv = grad_or(gv, scratch_g);
  std::span<double> d_iv = grad_or(iv, scratch_i);
  std::vector<double> d_volume(c.weights.data.size(), 0.0);
  std::vector<Mat3> d_rot(K, Mat3::Zero());
  std::vector<Vec3> d_trans(K, Vec3::Zero());
  const std::size_t F = mc.radiance.feature_dim;
  for (std::size_t s = 0; s < c.t.size(); ++s) {
    const long row = c.active_row[s];
    if (row < 0) continue;
    Vec3 d_xc = Vec3::Zero();
    mdi_sample_backward(mc.voxels, gv.values, c.x_canonical[s], mc.interp,
                        std::span<const double>(d_in.v_general.row(row).data(), F), d_gv, &d_xc);
    mdi_sample_backward(mc.voxels, iv.values, c.x_canonical[s], mc.interp,
                        std::span<const double>(d_in.v_individual.row(row).data(), F), d_iv, &d_xc);
    const double dc = mc.confidence_density ? d_conf[s] : 0.0;
    deform_point_backward(c.weights, c.x_obs[s], c.transforms, mc.weight_sampling, d_xc, dc, d_volume, d_rot,
                          d_trans);
  }

  ParamTensor& z = subject.at(kEmbedding);
  std::vector<double> scratch_z;
  m.weight_net().backward(shared, c.weight_cache, frame.prior, d_volume, grad_or(z, scratch_z));
  m.refiner().backward(shared, c.pose_cache, d_rot, d_trans);
}

Image Pipeline::render_image(const ParameterStore& shared, const ParameterStore& subject, const SceneFrame& frame,
                             const Camera& camera, const RenderConfig& config) const {
  camera.validate();
  Image img = Image::filled(camera.width, camera.height, config.background);
  constexpr std::size_t kRowsPerChunk = 16;
  for (std::size_t y0 = 0; y0 < camera.height; y0 += kRowsPerChunk) {
    std::vector<Pixel> px;
    for (std::size_t y = y0; y < std::min(camera.height, y0 + kRowsPerChunk); ++y)
      for (std::size_t x = 0; x < camera.width; ++x) px.push_back({x, y});
    const std::vector<Ray> rays = generate_rays(camera, px);
    const std::vector<Vec3> colors = render_rays(shared, subject, frame, rays, config, nullptr);
    for (std::size_t i = 0; i < px.size(); ++i) img.set(px[i].x, px[i].y, colors[i]);
  }
  return img;
}

}  // namespace gnv
