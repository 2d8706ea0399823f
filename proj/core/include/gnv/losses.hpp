// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Photometric and perceptual training losses, the two-term loss schedule and
// the PSNR/SSIM evaluation metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "gnv/image.hpp"

namespace gnv {

/// Mean of squared channel differences. Throws ConfigError on empty or
/// mismatched inputs.
double mse_loss(std::span<const double> pred, std::span<const double> gt);
/// Accumulates d_loss * dMSE/dpred into d_pred.
void mse_loss_backward(std::span<const double> pred, std::span<const double> gt, double d_loss,
                       std::span<double> d_pred);

/// Fixed, non-trainable convolutional feature pyramid used as a perceptual
/// distance. Each stage is a zero-padded 3x3 convolution followed by tanh;
/// stages are separated by 2x2 average pooling. Features are unit-normalized
/// across channels per pixel before comparison.
class PerceptualNet {
 public:
  struct Stage {
    std::size_t in = 0, out = 0;
    std::vector<double> weight;  // [out][in][3][3]
    std::vector<double> bias;    // [out]
  };

  PerceptualNet() = default;
  explicit PerceptualNet(std::vector<Stage> stages);

  /// Random weights drawn from `seed`; identical for identical seeds.
  static PerceptualNet seeded(std::uint64_t seed, std::vector<std::size_t> channels = {8, 16, 32});
  /// Loads stage weights stored as checkpoint sections
  /// "perceptual.stage<i>.weight" [out,in,3,3] and "perceptual.stage<i>.bias" [out].
  static PerceptualNet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<Stage>& stages() const noexcept { return stages_; }
  static constexpr std::size_t kMinPatch = 3;

  /// Mean over stages of the mean per-pixel squared distance between
  /// normalized features. When `d_pred` is non-null it receives (accumulates)
  /// the gradient w.r.t. the prediction's rgb values.
  double distance(const Image& pred, const Image& gt, std::vector<double>* d_pred = nullptr) const;

 private:
  std::vector<Stage> stages_;
};

enum class Phase { kPretrain, kScratch, kFinetune };

std::string_view phase_name(Phase phase);
Phase parse_phase(std::string_view name);

struct LossWeights {
  double lambda_m = 0.2;
  double lambda_l = 1.0;
};

/// Pretraining and from-scratch runs use (0.2, 1). Fine-tuning uses (10, 0)
/// for the first `mse_only_iters` iterations and (0.2, 1) afterwards.
struct LossSchedule {
  LossWeights full{0.2, 1.0};
  LossWeights warmup{10.0, 0.0};
  std::size_t mse_only_iters = 300;

  void validate() const;
  LossWeights at(Phase phase, std::size_t iteration) const;
};

double total_loss(const LossSchedule& schedule, std::size_t iteration, Phase phase, double mse, double perceptual);

/// 10 log10(1 / mse); +infinity for identical images.
double psnr(const Image& a, const Image& b);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM of the channel-mean grayscale images over every position
/// where the Gaussian window fits.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

}  // namespace gnv
