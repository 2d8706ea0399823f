// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/renderer.hpp"

#include <cmath>
#include <limits>

#include "gnv/error.hpp"

namespace gnv {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera focal lengths must be positive");
  if (width == 0 || height == 0) throw ConfigError("camera image size must be positive");
  if (!(rotation.transpose() * rotation).isApprox(Mat3::Identity(), 1e-9)) {
    throw ConfigError("camera rotation is not orthonormal");
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double focal, std::size_t width,
                       std::size_t height) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = z.cross(world_up).normalized();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.rotation.col(0) = x;
  cam.rotation.col(1) = y;
  cam.rotation.col(2) = z;
  cam.position = eye;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * static_cast<double>(width);
  cam.cy = 0.5 * static_cast<double>(height);
  cam.width = width;
  cam.height = height;
  return cam;
}

Ray ray_through(const Camera& camera, double u, double v) {
  const Vec3 d_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
  return {camera.position, (camera.rotation * d_cam).normalized()};
}

std::vector<Ray> generate_rays(const Camera& camera, std::span<const Pixel> pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const Pixel& p : pixels) {
    if (p.x >= camera.width || p.y >= camera.height) throw ConfigError("pixel outside the image");
    rays.push_back(ray_through(camera, static_cast<double>(p.x) + 0.5, static_cast<double>(p.y) + 0.5));
  }
  return rays;
}

std::vector<Patch> sample_patches(std::size_t width, std::size_t height, std::size_t count, std::size_t size,
                                  std::mt19937_64& rng) {
  if (size == 0 || size > width || size > height) throw ConfigError("patch size must fit inside the image");
  std::uniform_int_distribution<std::size_t> dx(0, width - size), dy(0, height - size);
  std::vector<Patch> patches(count);
  for (auto& p : patches) {
    p.x0 = dx(rng);
    p.y0 = dy(rng);
    p.size = size;
  }
  return patches;
}

std::vector<Pixel> patch_pixels(std::span<const Patch> patches) {
  std::vector<Pixel> pixels;
  for (const auto& p : patches) {
    for (std::size_t y = 0; y < p.size; ++y)
      for (std::size_t x = 0; x < p.size; ++x) pixels.push_back({p.x0 + x, p.y0 + y});
  }
  return pixels;
}

std::optional<RayInterval> ray_aabb(const Ray& ray, const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double ta = (box.min[a] - o) / d, tb = (box.max[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  t0 = std::max(t0, 0.0);
  if (!(t1 > t0)) return std::nullopt;
  return RayInterval{t0, t1};
}

std::vector<double> sample_points(double t_near, double t_far, std::size_t count, std::mt19937_64* rng) {
  if (!(t_far > t_near)) throw ConfigError("sample interval must have t_far > t_near");
  if (count == 0) throw ConfigError("sample count must be positive");
  const double delta = (t_far - t_near) / static_cast<double>(count);
  std::vector<double> t(count);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const double jitter = rng ? u(*rng) : 0.5;
    t[i] = t_near + (static_cast<double>(i) + jitter) * delta;
  }
  return t;
}

void RenderConfig::validate(std::size_t width, std::size_t height) const {
  if (n_samples < 2) throw ConfigError("render needs at least 2 samples per ray");
  if (patch_size == 0 || patch_size > std::min(width, height)) throw ConfigError("patch size must fit the image");
  if (patch_count == 0) throw ConfigError("patch count must be positive");
}

namespace {

double interval(std::span<const double> t, std::size_t i, double t_far) {
  return (i + 1 < t.size() ? t[i + 1] : t_far) - t[i];
}

}  // namespace

void volume_render_weights(std::span<const double> sigmas, std::span<const double> t, double t_far,
                           std::span<double> transmittance, std::span<double> weights) {
  double optical = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double trans = std::exp(-optical);
    const double tau = sigmas[i] * interval(t, i, t_far);
    transmittance[i] = trans;
    weights[i] = trans * -std::expm1(-tau);
    optical += tau;
  }
}

Composite volume_render(std::span<const Vec3> colors, std::span<const double> sigmas, std::span<const double> t,
                        double t_far, const Vec3& background) {
  if (colors.size() != sigmas.size() || t.size() != sigmas.size()) {
    throw ConfigError("volume_render inputs must have equal lengths");
  }
  Composite out;
  double optical = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double tau = sigmas[i] * interval(t, i, t_far);
    out.color += std::exp(-optical) * -std::expm1(-tau) * colors[i];
    optical += tau;
  }
  const double residual = std::exp(-optical);
  out.alpha = 1.0 - residual;
  out.pixel = out.color + residual * background;
  return out;
}

void volume_render_backward(std::span<const Vec3> colors, std::span<const double> sigmas, std::span<const double> t,
                            double t_far, const Vec3& background, const Vec3& d_pixel, std::span<Vec3> d_colors,
                            std::span<double> d_sigmas) {
  const std::size_t n = sigmas.size();
  std::vector<double> trans_after(n), weight(n), delta(n);
  double optical = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    delta[i] = interval(t, i, t_far);
    const double tau = sigmas[i] * delta[i];
    weight[i] = std::exp(-optical) * -std::expm1(-tau);
    optical += tau;
    trans_after[i] = std::exp(-optical);
  }
  // d pixel / d sigma_i = delta_i (T_{i+1} c_i - behind_i), where behind_i is
  // everything composited after sample i, background included.
  double behind = d_pixel.dot(background) * std::exp(-optical);
  for (std::size_t i = n; i-- > 0;) {
    const double proj = d_pixel.dot(colors[i]);
    d_colors[i] = weight[i] * d_pixel;
    d_sigmas[i] = delta[i] * (trans_after[i] * proj - behind);
    behind += weight[i] * proj;
  }
}

}  // namespace gnv
