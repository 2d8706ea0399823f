// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/losses.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gnv/checkpoint.hpp"
#include "gnv/error.hpp"

namespace gnv {

double mse_loss(std::span<const double> pred, std::span<const double> gt) {
  if (pred.empty()) throw ConfigError("mse of an empty set");
  if (pred.size() != gt.size()) throw ConfigError("mse inputs differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

void mse_loss_backward(std::span<const double> pred, std::span<const double> gt, double d_loss,
                       std::span<double> d_pred) {
  const double scale = 2.0 * d_loss / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) d_pred[i] += scale * (pred[i] - gt[i]);
}

// ---------------------------------------------------------------------------
// Perceptual distance

namespace {

// Channel-first feature map.
struct FeatureMap {
  std::size_t channels = 0, width = 0, height = 0;
  std::vector<double> v;  // [c][y][x]

  double& at(std::size_t c, std::size_t y, std::size_t x) { return v[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return v[(c * height + y) * width + x]; }
};

FeatureMap from_image(const Image& img) {
  FeatureMap m{3, img.width, img.height, std::vector<double>(3 * img.pixel_count())};
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) m.at(c, y, x) = 2.0 * img.rgb[3 * (y * img.width + x) + c] - 1.0;
  return m;
}

FeatureMap conv3x3(const FeatureMap& in, const PerceptualNet::Stage& s) {
  FeatureMap out{s.out, in.width, in.height, std::vector<double>(s.out * in.width * in.height)};
  const auto W = static_cast<long>(in.width), H = static_cast<long>(in.height);
  for (std::size_t o = 0; o < s.out; ++o)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double acc = s.bias[o];
        for (std::size_t i = 0; i < s.in; ++i) {
          const double* w = s.weight.data() + (o * s.in + i) * 9;
          for (long ky = -1; ky <= 1; ++ky) {
            const long yy = y + ky;
            if (yy < 0 || yy >= H) continue;
            for (long kx = -1; kx <= 1; ++kx) {
              const long xx = x + kx;
              if (xx < 0 || xx >= W) continue;
              acc += w[(ky + 1) * 3 + (kx + 1)] * in.at(i, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
          }
        }
        out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = std::tanh(acc);
      }
  return out;
}

// d_out is the cotangent of the tanh output; returns d_in.
FeatureMap conv3x3_backward(const FeatureMap& in, const FeatureMap& out, const PerceptualNet::Stage& s,
                            const FeatureMap& d_out) {
  FeatureMap d_in{in.channels, in.width, in.height, std::vector<double>(in.v.size(), 0.0)};
  const auto W = static_cast<long>(in.width), H = static_cast<long>(in.height);
  for (std::size_t o = 0; o < s.out; ++o)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        const double t = out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        const double g = d_out.at(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) * (1.0 - t * t);
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < s.in; ++i) {
          const double* w = s.weight.data() + (o * s.in + i) * 9;
          for (long ky = -1; ky <= 1; ++ky) {
            const long yy = y + ky;
            if (yy < 0 || yy >= H) continue;
            for (long kx = -1; kx <= 1; ++kx) {
              const long xx = x + kx;
              if (xx < 0 || xx >= W) continue;
              d_in.at(i, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) += w[(ky + 1) * 3 + (kx + 1)] * g;
            }
          }
        }
      }
  return d_in;
}

bool can_pool(const FeatureMap& m) { return m.width >= 2 && m.height >= 2; }

FeatureMap avg_pool2(const FeatureMap& in) {
  FeatureMap out{in.channels, in.width / 2, in.height / 2, {}};
  out.v.assign(out.channels * out.width * out.height, 0.0);
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) + in.at(c, 2 * y + 1, 2 * x) +
                                  in.at(c, 2 * y + 1, 2 * x + 1));
      }
  return out;
}

FeatureMap avg_pool2_backward(const FeatureMap& in_shape, const FeatureMap& d_out) {
  FeatureMap d_in{in_shape.channels, in_shape.width, in_shape.height, std::vector<double>(in_shape.v.size(), 0.0)};
  for (std::size_t c = 0; c < d_out.channels; ++c)
    for (std::size_t y = 0; y < d_out.height; ++y)
      for (std::size_t x = 0; x < d_out.width; ++x) {
        const double g = 0.25 * d_out.at(c, y, x);
        d_in.at(c, 2 * y, 2 * x) += g;
        d_in.at(c, 2 * y, 2 * x + 1) += g;
        d_in.at(c, 2 * y + 1, 2 * x) += g;
        d_in.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
  return d_in;
}

constexpr double kNormEps = 1e-10;

// Mean over pixels of || n(a) - n(b) ||^2 with n the channel-wise unit
// normalization. Accumulates d/da into d_a when non-null.
double normalized_distance(const FeatureMap& a, const FeatureMap& b, FeatureMap* d_a) {
  const std::size_t npx = a.width * a.height;
  const std::size_t C = a.channels;
  double total = 0.0;
  std::vector<double> na(C), nb(C);
  for (std::size_t p = 0; p < npx; ++p) {
    double ra = kNormEps, rb = kNormEps;
    for (std::size_t c = 0; c < C; ++c) {
      ra += a.v[c * npx + p] * a.v[c * npx + p];
      rb += b.v[c * npx + p] * b.v[c * npx + p];
    }
    ra = std::sqrt(ra);
    rb = std::sqrt(rb);
    double dot_gn = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      na[c] = a.v[c * npx + p] / ra;
      nb[c] = b.v[c * npx + p] / rb;
      const double diff = na[c] - nb[c];
      total += diff * diff;
    }
    if (d_a) {
      // g = d/dn_a = 2 (n_a - n_b) / npx ; d/da = (g - n_a (n_a . g)) / r_a
      for (std::size_t c = 0; c < C; ++c) dot_gn += na[c] * 2.0 * (na[c] - nb[c]);
      for (std::size_t c = 0; c < C; ++c) {
        const double g = 2.0 * (na[c] - nb[c]);
        d_a->v[c * npx + p] += (g - na[c] * dot_gn) / ra / static_cast<double>(npx);
      }
    }
  }
  return total / static_cast<double>(npx);
}

}  // namespace

PerceptualNet::PerceptualNet(std::vector<Stage> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw ConfigError("perceptual net needs at least one stage");
  std::size_t in = 3;
  for (const auto& s : stages_) {
    if (s.in != in || s.weight.size() != s.out * s.in * 9 || s.bias.size() != s.out || s.out == 0) {
      throw ConfigError("perceptual stage shapes are inconsistent");
    }
    in = s.out;
  }
}

PerceptualNet PerceptualNet::seeded(std::uint64_t seed, std::vector<std::size_t> channels) {
  std::mt19937_64 rng(seed);
  std::vector<Stage> stages;
  std::size_t in = 3;
  for (std::size_t out : channels) {
    Stage s{in, out, std::vector<double>(out * in * 9), std::vector<double>(out)};
    const double bound = std::sqrt(3.0 / (9.0 * static_cast<double>(in)));
    std::uniform_real_distribution<double> wd(-bound, bound);
    std::normal_distribution<double> bd(0.0, 0.1);
    for (double& w : s.weight) w = wd(rng);
    for (double& b : s.bias) b = bd(rng);
    stages.push_back(std::move(s));
    in = out;
  }
  return PerceptualNet(std::move(stages));
}

PerceptualNet PerceptualNet::load(const std::filesystem::path& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  std::vector<Stage> stages;
  for (std::size_t i = 0;; ++i) {
    const std::string prefix = "perceptual.stage" + std::to_string(i);
    const TensorSection* w = file.find(prefix + ".weight");
    const TensorSection* b = file.find(prefix + ".bias");
    if (!w && !b) break;
    if (!w || !b || w->dims.size() != 4 || w->dims[2] != 3 || w->dims[3] != 3 || b->dims.size() != 1 ||
        b->dims[0] != w->dims[0]) {
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "bad perceptual stage '" + prefix + "'");
    }
    stages.push_back({w->dims[1], w->dims[0], w->values, b->values});
  }
  return PerceptualNet(std::move(stages));
}

void PerceptualNet::save(const std::filesystem::path& path) const {
  CheckpointFile file;
  file.metadata = {{"kind", "perceptual"}, {"stages", stages_.size()}};
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto& s = stages_[i];
    const std::string prefix = "perceptual.stage" + std::to_string(i);
    file.sections.push_back({prefix + ".weight", DType::kF64, {s.out, s.in, 3, 3}, s.weight});
    file.sections.push_back({prefix + ".bias", DType::kF64, {s.out}, s.bias});
  }
  write_checkpoint_file(file, path);
}

double PerceptualNet::distance(const Image& pred, const Image& gt, std::vector<double>* d_pred) const {
  if (!pred.same_size(gt)) throw ConfigError("perceptual inputs differ in size");
  if (pred.width < kMinPatch || pred.height < kMinPatch) {
    throw ConfigError("patch smaller than the perceptual receptive field");
  }
  // Forward both images, keeping the prediction's activations.
  std::vector<FeatureMap> conv_in, conv_out;  // per stage, prediction path
  std::vector<FeatureMap> gt_feats;
  FeatureMap a = from_image(pred), b = from_image(gt);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) {
      if (!can_pool(a)) break;
      a = avg_pool2(a);
      b = avg_pool2(b);
    }
    conv_in.push_back(a);
    a = conv3x3(a, stages_[s]);
    b = conv3x3(b, stages_[s]);
    conv_out.push_back(a);
    gt_feats.push_back(b);
  }
  const std::size_t used = conv_out.size();
  double loss = 0.0;
  std::vector<FeatureMap> d_feat;
  for (std::size_t s = 0; s < used; ++s) {
    FeatureMap d{conv_out[s].channels, conv_out[s].width, conv_out[s].height,
                 std::vector<double>(conv_out[s].v.size(), 0.0)};
    loss += normalized_distance(conv_out[s], gt_feats[s], d_pred ? &d : nullptr);
    d_feat.push_back(std::move(d));
  }
  loss /= static_cast<double>(used);
  if (!d_pred) return loss;

  // Backward through the prediction path, last stage first.
  FeatureMap carry;
  for (std::size_t s = used; s-- > 0;) {
    FeatureMap d_out = d_feat[s];
    for (double& v : d_out.v) v /= static_cast<double>(used);
    if (s + 1 < used) {
      for (std::size_t i = 0; i < d_out.v.size(); ++i) d_out.v[i] += carry.v[i];
    }
    FeatureMap d_in = conv3x3_backward(conv_in[s], conv_out[s], stages_[s], d_out);
    if (s > 0) {
      carry = avg_pool2_backward(conv_out[s - 1], d_in);
    } else {
      carry = std::move(d_in);
    }
  }
  d_pred->resize(pred.rgb.size(), 0.0);
  for (std::size_t y = 0; y < pred.height; ++y)
    for (std::size_t x = 0; x < pred.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) (*d_pred)[3 * (y * pred.width + x) + c] += 2.0 * carry.at(c, y, x);
  return loss;
}

// ---------------------------------------------------------------------------
// Schedule

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kPretrain:
      return "pretrain";
    case Phase::kScratch:
      return "scratch";
    case Phase::kFinetune:
      return "finetune";
  }
  return "unknown";
}

Phase parse_phase(std::string_view name) {
  if (name == "pretrain") return Phase::kPretrain;
  if (name == "scratch") return Phase::kScratch;
  if (name == "finetune") return Phase::kFinetune;
  throw ConfigError("unknown phase '" + std::string(name) + "'");
}

void LossSchedule::validate() const {
  for (const LossWeights& w : {full, warmup}) {
    if (w.lambda_m < 0.0 || w.lambda_l < 0.0) throw ConfigError("loss weights must be non-negative");
    if (w.lambda_m == 0.0 && w.lambda_l == 0.0) throw ConfigError("loss weights cannot both be zero");
  }
}

LossWeights LossSchedule::at(Phase phase, std::size_t iteration) const {
  if (phase == Phase::kFinetune && iteration < mse_only_iters) return warmup;
  return full;
}

double total_loss(const LossSchedule& schedule, std::size_t iteration, Phase phase, double mse, double perceptual) {
  const LossWeights w = schedule.at(phase, iteration);
  return w.lambda_m * mse + w.lambda_l * perceptual;
}

// ---------------------------------------------------------------------------
// Metrics

double psnr(const Image& a, const Image& b) {
  if (!a.same_size(b)) throw ConfigError("psnr images differ in size");
  const double m = mse_loss(a.rgb, b.rgb);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

namespace {

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(img.pixel_count());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (img.rgb[3 * i] + img.rgb[3 * i + 1] + img.rgb[3 * i + 2]) / 3.0;
  return g;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& o) {
  if (!a.same_size(b)) throw ConfigError("ssim images differ in size");
  if (a.width < o.window || a.height < o.window) throw ConfigError("image smaller than the ssim window");
  const std::vector<double> ga = grayscale(a), gb = grayscale(b);
  std::vector<double> kernel(o.window);
  const double half = 0.5 * static_cast<double>(o.window - 1);
  double ksum = 0.0;
  for (std::size_t i = 0; i < o.window; ++i) {
    const double d = static_cast<double>(i) - half;
    kernel[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);

  const std::size_t W = a.width;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + o.window <= a.height; ++y0)
    for (std::size_t x0 = 0; x0 + o.window <= W; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t ky = 0; ky < o.window; ++ky)
        for (std::size_t kx = 0; kx < o.window; ++kx) {
          const double w = kernel[ky] * kernel[kx];
          const double va = ga[(y0 + ky) * W + x0 + kx], vb = gb[(y0 + ky) * W + x0 + kx];
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace gnv
