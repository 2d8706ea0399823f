// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "doctest.h"
#include "gnv/error.hpp"
#include "gnv/image.hpp"
#include "gnv/losses.hpp"

using namespace gnv;

namespace {

Image noise_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Image im = Image::filled(w, h, Vec3::Zero());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : im.rgb) v = u(rng);
  return im;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gnv_losses_" + name);
}

}  // namespace

TEST_CASE("psnr of a uniform 0.1 offset is 20 dB") {
  const Image a = Image::filled(16, 12, Vec3::Constant(0.5));
  const Image b = Image::filled(16, 12, Vec3::Constant(0.6));
  CHECK(mse_loss(a.rgb, b.rgb) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(std::abs(psnr(a, b) - 20.0) <= 1e-9);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(psnr(a, Image::filled(4, 4, Vec3::Zero())), ConfigError);
}

TEST_CASE("ssim") {
  const Image a = noise_image(24, 20, 1);
  CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-9);
  const Image b = noise_image(24, 20, 2);
  CHECK(ssim(a, b) < 0.2);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));

  // Constant images: variances vanish and SSIM reduces to the luminance term.
  const double mu_a = 0.3, mu_b = 0.5, c1 = 0.01 * 0.01;
  const double expected = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  CHECK(ssim(Image::filled(16, 16, Vec3::Constant(mu_a)), Image::filled(16, 16, Vec3::Constant(mu_b))) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(Image::filled(8, 8, Vec3::Zero()), Image::filled(8, 8, Vec3::Zero())), ConfigError);
}

TEST_CASE("mse gradient") {
  const std::vector<double> p{0.1, 0.4, 0.9, 0.2}, g{0.0, 0.5, 1.0, 0.2};
  std::vector<double> d(4, 0.0);
  mse_loss_backward(p, g, 2.0, d);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d[i] == doctest::Approx(2.0 * 2.0 * (p[i] - g[i]) / 4.0));
  CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(mse_loss(p, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("perceptual distance") {
  const PerceptualNet net = PerceptualNet::seeded(3);
  const Image a = noise_image(16, 16, 4), b = noise_image(16, 16, 5);
  CHECK(net.distance(a, a) == 0.0);
  const double d = net.distance(a, b);
  CHECK(d > 0.0);
  CHECK(PerceptualNet::seeded(3).distance(a, b) == d);

  std::vector<double> grad(a.rgb.size(), 0.0);
  CHECK(net.distance(b, a, &grad) == doctest::Approx(d).epsilon(1e-12));
  // Central difference on a few entries.
  for (std::size_t i : {0u, 100u, 400u, 767u}) {
    Image bp = b, bm = b;
    bp.rgb[i] += 1e-6;
    bm.rgb[i] -= 1e-6;
    const double fd = (net.distance(bp, a) - net.distance(bm, a)) / 2e-6;
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
  }

  const auto path = temp_path("perceptual.gnvx");
  net.save(path);
  const PerceptualNet loaded = PerceptualNet::load(path);
  CHECK(loaded.distance(a, b) == d);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(net.distance(Image::filled(2, 2, Vec3::Zero()), Image::filled(2, 2, Vec3::Zero())),
                  ConfigError);
}

TEST_CASE("loss schedule") {
  const LossSchedule s;
  CHECK(s.at(Phase::kPretrain, 0).lambda_m == 0.2);
  CHECK(s.at(Phase::kScratch, 10).lambda_l == 1.0);
  CHECK(s.at(Phase::kFinetune, 0).lambda_m == 10.0);
  CHECK(s.at(Phase::kFinetune, 299).lambda_l == 0.0);
  CHECK(s.at(Phase::kFinetune, 300).lambda_m == 0.2);
  CHECK(s.at(Phase::kFinetune, 300).lambda_l == 1.0);
  CHECK(total_loss(s, 0, Phase::kFinetune, 0.5, 7.0) == 5.0);
  CHECK(total_loss(s, 0, Phase::kScratch, 0.5, 7.0) == doctest::Approx(7.1));
  LossSchedule bad;
  bad.full.lambda_m = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_phase("finetune") == Phase::kFinetune);
  CHECK(phase_name(Phase::kScratch) == "scratch");
  CHECK_THROWS_AS(parse_phase("warmup"), ConfigError);
}

TEST_CASE("image files") {
  const Image a = noise_image(7, 5, 6);
  const auto dump = temp_path("a.gnvimg");
  write_float_dump(a, dump);
  const Image b = read_float_dump(dump);
  REQUIRE(b.same_size(a));
  for (std::size_t i = 0; i < a.rgb.size(); ++i) CHECK(b.rgb[i] == static_cast<double>(static_cast<float>(a.rgb[i])));
  const auto png = temp_path("a.png");
  write_png(a, png);
  const Image c = read_png(png);
  REQUIRE(c.same_size(a));
  for (std::size_t i = 0; i < a.rgb.size(); ++i) CHECK(std::abs(c.rgb[i] - a.rgb[i]) <= 0.5 / 255.0 + 1e-12);
  std::filesystem::remove(dump);
  std::filesystem::remove(png);
  CHECK_THROWS_AS(read_png(temp_path("missing.png")), IoError);
}
