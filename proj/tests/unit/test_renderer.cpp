// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gnv/error.hpp"
#include "gnv/renderer.hpp"

using namespace gnv;

namespace {

Camera test_camera() {
  Camera c;
  c.fx = 50.0;
  c.fy = 50.0;
  c.cx = 32.0;
  c.cy = 24.0;
  c.width = 64;
  c.height = 48;
  c.position = Vec3(1.0, 2.0, 3.0);
  c.rotation = Eigen::AngleAxisd(0.4, Vec3(0.2, 1.0, -0.3).normalized()).toRotationMatrix();
  return c;
}

}  // namespace

TEST_CASE("principal point ray runs along the camera forward axis") {
  const Camera c = test_camera();
  const Ray r = ray_through(c, c.cx, c.cy);
  CHECK((r.direction - c.forward()).norm() < 1e-12);
  CHECK((r.origin - c.position).norm() == 0.0);
}

TEST_CASE("one focal length right of the principal point is 45 degrees off axis") {
  const Camera c = test_camera();
  const Ray r = ray_through(c, c.cx + c.fx, c.cy);
  const Vec3 local = c.rotation.transpose() * r.direction;
  CHECK(std::abs(local.y()) < 1e-12);
  CHECK(std::atan2(local.x(), local.z()) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
}

TEST_CASE("pixel rays share the origin and are unit length") {
  const Camera c = test_camera();
  const std::vector<Pixel> px{{0, 0}, {63, 47}, {10, 30}};
  const auto rays = generate_rays(c, px);
  for (const auto& r : rays) {
    CHECK(r.origin == c.position);
    CHECK(r.direction.norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Ray centre = ray_through(c, 10.5, 30.5);
  CHECK((rays[2].direction - centre.direction).norm() < 1e-15);
}

TEST_CASE("look_at places the target on the optical axis") {
  const Camera c = Camera::look_at(Vec3(0, 1, 4), Vec3(0.5, 0, 0), Vec3(0, 1, 0), 80.0, 64, 64);
  CHECK((c.forward() - (Vec3(0.5, 0, 0) - Vec3(0, 1, 4)).normalized()).norm() < 1e-12);
  CHECK((c.rotation.transpose() * c.rotation - Mat3::Identity()).norm() < 1e-12);
  // Image y runs down, so world up projects to negative camera y.
  CHECK((c.rotation.transpose() * Vec3(0, 1, 0)).y() < 0.0);
}

TEST_CASE("ray-box intersection") {
  const Aabb box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  SUBCASE("hit from outside") {
    const auto h = ray_aabb(Ray{Vec3(0, 0, -5), Vec3(0, 0, 1)}, box);
    REQUIRE(h);
    CHECK(h->t_near == doctest::Approx(4.0));
    CHECK(h->t_far == doctest::Approx(6.0));
  }
  SUBCASE("origin inside clamps the near distance to zero") {
    const auto h = ray_aabb(Ray{Vec3(0, 0, 0), Vec3(1, 0, 0)}, box);
    REQUIRE(h);
    CHECK(h->t_near == 0.0);
    CHECK(h->t_far == doctest::Approx(1.0));
  }
  SUBCASE("miss") { CHECK_FALSE(ray_aabb(Ray{Vec3(0, 3, -5), Vec3(0, 0, 1)}, box)); }
  SUBCASE("box behind the origin") { CHECK_FALSE(ray_aabb(Ray{Vec3(0, 0, 5), Vec3(0, 0, 1)}, box)); }
  SUBCASE("axis-parallel ray on a slab with zero direction component") {
    CHECK_FALSE(ray_aabb(Ray{Vec3(2, 0, -5), Vec3(0, 0, 1)}, box));
    CHECK(ray_aabb(Ray{Vec3(0.5, 0, -5), Vec3(0, 0, 1)}, box));
  }
}

TEST_CASE("point sampling") {
  const auto mid = sample_points(1.0, 3.0, 4, nullptr);
  REQUIRE(mid.size() == 4);
  CHECK(mid[0] == doctest::Approx(1.25));
  CHECK(mid[3] == doctest::Approx(2.75));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_points(2.0, 4.0, 8, &rng);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(s[i] >= 2.0 + 0.25 * i);
      CHECK(s[i] <= 2.0 + 0.25 * (i + 1));
    }
  }
}

TEST_CASE("patches stay inside the image") {
  std::mt19937_64 rng(4);
  const auto patches = sample_patches(20, 12, 50, 8, rng);
  CHECK(patches.size() == 50);
  for (const auto& p : patches) {
    CHECK(p.x0 + p.size <= 20);
    CHECK(p.y0 + p.size <= 12);
  }
  const auto px = patch_pixels(std::span<const Patch>(patches).first(2));
  REQUIRE(px.size() == 128);
  CHECK(px[0].x == patches[0].x0);
  CHECK(px[1].x == patches[0].x0 + 1);
  CHECK(px[8].y == patches[0].y0 + 1);
  CHECK(px[64].x == patches[1].x0);
  CHECK_THROWS_AS(sample_patches(8, 8, 1, 9, rng), ConfigError);
}

TEST_CASE("homogeneous medium matches Beer-Lambert") {
  const double sigma = 1.7, t0 = 0.5, t1 = 2.0;
  const Vec3 c(0.2, 0.6, 0.9);
  const std::size_t n = 1024;
  const auto t = sample_points(t0, t1, n, nullptr);
  const std::vector<Vec3> colors(n, c);
  const std::vector<double> sig(n, sigma);
  const Composite out = volume_render(colors, sig, t, t1, Vec3::Zero());
  const double alpha = 1.0 - std::exp(-sigma * (t1 - t0));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(out.color[k] - c[k] * alpha) < 1e-3);
}

TEST_CASE("zero density shows the background exactly") {
  const auto t = sample_points(1.0, 2.0, 16, nullptr);
  const std::vector<Vec3> colors(16, Vec3(1, 0, 0));
  const std::vector<double> sig(16, 0.0);
  const Vec3 bg(0.25, 0.5, 0.75);
  const Composite out = volume_render(colors, sig, t, 2.0, bg);
  CHECK(out.pixel == bg);
  CHECK(out.alpha == 0.0);
}

TEST_CASE("transmittance is non-increasing and weights sum to alpha") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int ray = 0; ray < 50; ++ray) {
    const auto t = sample_points(0.0, 2.0, 32, &rng);
    std::vector<double> sig(32), T(32), w(32);
    for (auto& s : sig) s = u(rng);
    volume_render_weights(sig, t, 2.0, T, w);
    CHECK(T[0] == 1.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < 32; ++i) {
      if (i > 0) CHECK(T[i] <= T[i - 1]);
      CHECK(w[i] >= 0.0);
      sum += w[i];
    }
    const std::vector<Vec3> colors(32, Vec3::Ones());
    const Composite c = volume_render(colors, sig, t, 2.0, Vec3::Zero());
    CHECK(c.alpha == doctest::Approx(sum).epsilon(1e-12));
    CHECK(c.alpha <= 1.0);
  }
}

TEST_CASE("pixel is accumulated color plus the unabsorbed background") {
  const std::vector<double> t{0.0, 0.5, 1.0};
  const std::vector<double> sig{0.4, 2.0, 1.0};
  const std::vector<Vec3> colors{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const Vec3 bg(0.1, 0.2, 0.3);
  const Composite c = volume_render(colors, sig, t, 1.5, bg);
  // Hand evaluation with deltas 0.5 each.
  const double a0 = 1 - std::exp(-0.2), a1 = 1 - std::exp(-1.0), a2 = 1 - std::exp(-0.5);
  const double T1 = std::exp(-0.2), T2 = std::exp(-1.2);
  const Vec3 color = a0 * colors[0] + T1 * a1 * colors[1] + T2 * a2 * colors[2];
  CHECK((c.color - color).norm() < 1e-14);
  const double alpha = a0 + T1 * a1 + T2 * a2;
  CHECK((c.pixel - (color + (1 - alpha) * bg)).norm() < 1e-14);
}
