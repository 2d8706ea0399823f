// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Pinhole rays, patch sampling, ray/box clipping, stratified samples and
// the emission-absorption compositor.

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gnv/math.hpp"

namespace gnv {

/// Pinhole camera. Camera axes follow the x-right, y-down, z-forward
/// convention; `rotation` maps camera axes to world axes.
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  std::size_t width = 1, height = 1;

  void validate() const;
  Vec3 forward() const { return rotation.col(2); }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double focal,
                        std::size_t width, std::size_t height);
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

struct Pixel {
  std::size_t x = 0, y = 0;
};

/// Ray through continuous image coordinates (u, v).
Ray ray_through(const Camera& camera, double u, double v);
/// Rays through pixel centers (x + 0.5, y + 0.5).
std::vector<Ray> generate_rays(const Camera& camera, std::span<const Pixel> pixels);

struct Patch {
  std::size_t x0 = 0, y0 = 0, size = 0;
};

/// `count` square patches of side `size` with uniform top-left corners, fully
/// inside the image.
std::vector<Patch> sample_patches(std::size_t width, std::size_t height, std::size_t count, std::size_t size,
                                  std::mt19937_64& rng);
/// Patch pixels in patch order, row-major within each patch.
std::vector<Pixel> patch_pixels(std::span<const Patch> patches);

struct RayInterval {
  double t_near = 0.0;
  double t_far = 0.0;
};

/// Slab intersection; nullopt when the ray misses or the box is behind it.
std::optional<RayInterval> ray_aabb(const Ray& ray, const Aabb& box);

/// Stratified samples: one uniform draw per equal-width bin. With no rng the
/// bin midpoints are returned.
std::vector<double> sample_points(double t_near, double t_far, std::size_t count, std::mt19937_64* rng);

struct RenderConfig {
  std::size_t n_samples = 128;
  std::size_t patch_count = 6;
  std::size_t patch_size = 32;
  Vec3 background = Vec3::Zero();
  // Padding around posed joints and bone tips when bounding the body (meters).
  double body_padding = 0.15;

  void validate(std::size_t width, std::size_t height) const;
};

struct Composite {
  Vec3 color = Vec3::Zero();  // accumulated color before background
  double alpha = 0.0;
  Vec3 pixel = Vec3::Zero();  // color + (1 - alpha) background
};

/// delta_i = t_{i+1} - t_i with the last interval ending at t_far;
/// T_i = exp(-sum_{j<i} sigma_j delta_j);
/// color = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i.
Composite volume_render(std::span<const Vec3> colors, std::span<const double> sigmas, std::span<const double> t,
                        double t_far, const Vec3& background);

/// Per-sample transmittance T_i and weights T_i (1 - exp(-sigma_i delta_i)).
void volume_render_weights(std::span<const double> sigmas, std::span<const double> t, double t_far,
                           std::span<double> transmittance, std::span<double> weights);

/// Writes dL/dc_i and dL/dsigma_i for the cotangent of the composited pixel.
void volume_render_backward(std::span<const Vec3> colors, std::span<const double> sigmas, std::span<const double> t,
                            double t_far, const Vec3& background, const Vec3& d_pixel, std::span<Vec3> d_colors,
                            std::span<double> d_sigmas);

}  // namespace gnv
