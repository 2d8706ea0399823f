// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/deformation.hpp"

#include <cmath>
#include <string>

#include "gnv/error.hpp"
#include "gnv/mlp.hpp"

namespace gnv {

namespace {

std::string stage_weight(std::size_t l) { return "weight_net.deconv" + std::to_string(l) + ".weight"; }
std::string stage_bias(std::size_t l) { return "weight_net.deconv" + std::to_string(l) + ".bias"; }
constexpr const char* kExpandWeight = "weight_net.expand.weight";
constexpr const char* kExpandBias = "weight_net.expand.bias";

std::size_t stage_factor(std::size_t l) { return l == 0 ? 4 : 2; }

// Row index of lattice node (x, y, z) in a res^3 volume, channel-last.
std::size_t node(std::size_t res, std::size_t x, std::size_t y, std::size_t z) { return (x * res + y) * res + z; }

// Non-overlapping transposed convolution with kernel == stride == f.
// in: (r^3, Cin), weight: [f^3][Cin][Cout] -> out: ((r f)^3, Cout).
RowMatrix upsample_forward(const RowMatrix& in, std::size_t r, std::size_t f, const ParamTensor& w,
                           const ParamTensor& b) {
  const std::size_t cin = static_cast<std::size_t>(in.cols());
  const std::size_t cout = b.size();
  const std::size_t R = r * f;
  RowMatrix out(R * R * R, cout);
  Eigen::Map<const Eigen::RowVectorXd> bias(b.values.data(), static_cast<Eigen::Index>(cout));
  RowMatrix part(in.rows(), cout);
  for (std::size_t k = 0; k < f * f * f; ++k) {
    const std::size_t a = k / (f * f), bb = (k / f) % f, c = k % f;
    Eigen::Map<const RowMatrix> wk(w.values.data() + k * cin * cout, cin, cout);
    part.noalias() = in * wk;
    for (std::size_t x = 0; x < r; ++x)
      for (std::size_t y = 0; y < r; ++y)
        for (std::size_t z = 0; z < r; ++z) {
          out.row(node(R, x * f + a, y * f + bb, z * f + c)) = part.row(node(r, x, y, z)) + bias;
        }
  }
  return out;
}

// Returns d_in; accumulates weight and bias gradients when allocated.
RowMatrix upsample_backward(const RowMatrix& in, std::size_t r, std::size_t f, ParamTensor& w, ParamTensor& b,
                            const RowMatrix& d_out) {
  const std::size_t cin = static_cast<std::size_t>(in.cols());
  const std::size_t cout = b.size();
  const std::size_t R = r * f;
  RowMatrix d_in = RowMatrix::Zero(in.rows(), cin);
  RowMatrix gathered(in.rows(), cout);
  for (std::size_t k = 0; k < f * f * f; ++k) {
    const std::size_t a = k / (f * f), bb = (k / f) % f, c = k % f;
    for (std::size_t x = 0; x < r; ++x)
      for (std::size_t y = 0; y < r; ++y)
        for (std::size_t z = 0; z < r; ++z) {
          gathered.row(node(r, x, y, z)) = d_out.row(node(R, x * f + a, y * f + bb, z * f + c));
        }
    Eigen::Map<const RowMatrix> wk(w.values.data() + k * cin * cout, cin, cout);
    d_in.noalias() += gathered * wk.transpose();
    if (w.has_grad()) {
      Eigen::Map<RowMatrix> dwk(w.grad.data() + k * cin * cout, cin, cout);
      dwk.noalias() += in.transpose() * gathered;
    }
    if (b.has_grad()) {
      Eigen::Map<Eigen::RowVectorXd> db(b.grad.data(), static_cast<Eigen::Index>(cout));
      db += gathered.colwise().sum();
    }
  }
  return d_in;
}

}  // namespace

WeightVolumeNet::WeightVolumeNet(std::size_t bone_count, const WeightNetConfig& config, const Aabb& aabb)
    : bone_count_(bone_count), config_(config), aabb_(aabb) {
  if (bone_count == 0) throw ConfigError("weight volume needs at least one bone");
  if (config.embedding_dim == 0 || config.expand == 0) throw ConfigError("weight net widths must be positive");
}

GridLayout WeightVolumeNet::output_layout() const {
  const std::size_t r = config_.resolution();
  return GridLayout{output_channels(), {r, r, r}, aabb_};
}

void WeightVolumeNet::add_params(ParameterStore& store, std::mt19937_64& rng) const {
  auto& ew = store.add(kExpandWeight, {config_.expand, config_.embedding_dim});
  auto& eb = store.add(kExpandBias, {config_.expand});
  std::uniform_real_distribution<double> ed(-std::sqrt(6.0 / config_.embedding_dim),
                                            std::sqrt(6.0 / config_.embedding_dim));
  for (double& v : ew.values) v = ed(rng);
  // The embedding starts at zero, so the expanded vector is the bias alone.
  std::normal_distribution<double> bias_dist(0.0, 0.5);
  for (double& v : eb.values) v = bias_dist(rng);

  std::size_t cin = config_.expand;
  const std::size_t stages = config_.channels.size() + 1;
  for (std::size_t l = 0; l < stages; ++l) {
    const bool last = l + 1 == stages;
    const std::size_t cout = last ? output_channels() : config_.channels[l];
    const std::size_t f = stage_factor(l);
    auto& w = store.add(stage_weight(l), {f * f * f, cin, cout});
    auto& b = store.add(stage_bias(l), {cout});
    if (!last) {
      std::uniform_real_distribution<double> d(-std::sqrt(6.0 / cin), std::sqrt(6.0 / cin));
      for (double& v : w.values) v = d(rng);
      std::normal_distribution<double> bd(0.0, 0.05);
      for (double& v : b.values) v = bd(rng);
    }
    cin = cout;
  }
}

VoxelGrid WeightVolumeNet::forward(const ParameterStore& store, std::span<const double> z,
                                   std::span<const double> prior, Cache* cache) const {
  if (z.size() != config_.embedding_dim) throw ConfigError("embedding size does not match weight net");
  const GridLayout layout = output_layout();
  if (!prior.empty() && prior.size() != layout.value_count()) throw ConfigError("weight prior size mismatch");

  const auto& ew = store.at(kExpandWeight);
  const auto& eb = store.at(kExpandBias);
  Eigen::Map<const RowMatrix> W(ew.values.data(), config_.expand, config_.embedding_dim);
  Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  Eigen::Map<const Eigen::VectorXd> bv(eb.values.data(), static_cast<Eigen::Index>(config_.expand));
  RowMatrix h = (W * zv + bv).transpose().cwiseMax(0.0);
  if (cache) {
    cache->embedding = zv.transpose();
    cache->volumes.clear();
    cache->volumes.push_back(h);
  }
  std::size_t r = 1;
  const std::size_t stages = config_.channels.size() + 1;
  for (std::size_t l = 0; l < stages; ++l) {
    const std::size_t f = stage_factor(l);
    RowMatrix next = upsample_forward(h, r, f, store.at(stage_weight(l)), store.at(stage_bias(l)));
    r *= f;
    if (l + 1 == stages) {
      next = next.unaryExpr([](double v) { return softplus(v); });
    } else {
      next = next.cwiseMax(0.0);
    }
    h = std::move(next);
    if (cache) cache->volumes.push_back(h);
  }
  VoxelGrid grid{layout, std::vector<double>(h.data(), h.data() + h.size())};
  if (!prior.empty()) {
    for (std::size_t i = 0; i < grid.data.size(); ++i) grid.data[i] *= prior[i];
  }
  return grid;
}

void WeightVolumeNet::backward(ParameterStore& store, const Cache& cache, std::span<const double> prior,
                               std::span<const double> d_volume, std::span<double> d_z) const {
  const GridLayout layout = output_layout();
  if (d_volume.size() != layout.value_count()) throw ConfigError("weight volume cotangent size mismatch");
  const std::size_t stages = config_.channels.size() + 1;
  if (cache.volumes.size() != stages + 1) throw ConfigError("weight net backward without cache");

  const RowMatrix& out = cache.volumes.back();
  RowMatrix d(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double g = d_volume[static_cast<std::size_t>(i)] * (prior.empty() ? 1.0 : prior[static_cast<std::size_t>(i)]);
    // softplus'(x) = 1 - exp(-softplus(x))
    d.data()[i] = g * (1.0 - std::exp(-out.data()[i]));
  }
  std::size_t r = layout.dims[0];
  for (std::size_t l = stages; l-- > 0;) {
    const std::size_t f = stage_factor(l);
    r /= f;
    RowMatrix d_in = upsample_backward(cache.volumes[l], r, f, store.at(stage_weight(l)), store.at(stage_bias(l)), d);
    d_in = (cache.volumes[l].array() > 0.0).select(d_in, 0.0);
    d = std::move(d_in);
  }
  // d is now the cotangent of the expanded pre-activation (1 x expand).
  auto& ew = store.at(kExpandWeight);
  auto& eb = store.at(kExpandBias);
  if (d_z.size() != config_.embedding_dim) throw ConfigError("embedding gradient size mismatch");
  Eigen::Map<const RowMatrix> W(ew.values.data(), config_.expand, config_.embedding_dim);
  if (ew.has_grad()) {
    Eigen::Map<RowMatrix> dW(ew.grad.data(), config_.expand, config_.embedding_dim);
    dW.noalias() += d.transpose() * cache.embedding;
  }
  if (eb.has_grad()) {
    Eigen::Map<Eigen::RowVectorXd> db(eb.grad.data(), static_cast<Eigen::Index>(config_.expand));
    db += d;
  }
  const Eigen::RowVectorXd dz = d * W;
  for (std::size_t i = 0; i < d_z.size(); ++i) d_z[i] += dz[static_cast<Eigen::Index>(i)];
}

std::vector<double> bone_weight_prior(const GridLayout& layout, const Skeleton& skeleton, double sigma,
                                      double background_level) {
  const std::size_t K = skeleton.bone_count();
  if (layout.channels != K + 1) throw ConfigError("prior layout needs K+1 channels");
  std::vector<double> prior(layout.value_count());
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t x = 0; x < layout.dims[0]; ++x)
    for (std::size_t y = 0; y < layout.dims[1]; ++y)
      for (std::size_t z = 0; z < layout.dims[2]; ++z) {
        Vec3 p;
        const std::array<std::size_t, 3> idx{x, y, z};
        for (int a = 0; a < 3; ++a) {
          p[a] = layout.aabb.min[a] + layout.aabb.extent()[a] * static_cast<double>(idx[a]) /
                                          static_cast<double>(layout.dims[a] - 1);
        }
        double* out = prior.data() + layout.node_offset(x, y, z);
        for (std::size_t i = 0; i < K; ++i) {
          const Vec3 a = skeleton.rest_joints[i];
          const Vec3 ab = skeleton.tip(i) - a;
          const double len2 = ab.squaredNorm();
          const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
          const double d2 = (p - (a + s * ab)).squaredNorm();
          out[i] = std::exp(-d2 * inv);
        }
        out[K] = background_level;
      }
  return prior;
}

double BlendWeights::bone_sum() const {
  double s = 0.0;
  for (double w : bone) s += w;
  return s;
}

namespace {

struct PointEval {
  std::vector<Vec3> y;       // R_i x + T_i
  std::vector<Vec3> q;       // weight lookup location per bone
  std::vector<double> raw;   // K bone raws
  std::vector<Vec3> grad;    // spatial gradient of raw_i at q_i
  double raw_bg = 0.0;
  double denom = 0.0;
};

PointEval evaluate_point(const VoxelGrid& volume, const Vec3& x, const BoneTransforms& transforms,
                         WeightSampling sampling, bool want_grad) {
  const std::size_t K = transforms.size();
  if (volume.layout.channels != K + 1) throw ConfigError("weight volume channel count must be bones + 1");
  PointEval e;
  e.y.resize(K);
  e.q.resize(K);
  e.raw.resize(K);
  if (want_grad) e.grad.resize(K);
  double sum = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    e.y[i] = transforms[i].apply(x);
    e.q[i] = sampling == WeightSampling::kCanonical ? e.y[i] : x;
    e.raw[i] = sample_channel(volume.layout, volume.data, e.q[i], i, want_grad ? &e.grad[i] : nullptr);
    sum += e.raw[i];
  }
  e.raw_bg = sample_channel(volume.layout, volume.data, x, K);
  e.denom = sum + e.raw_bg + kBlendEpsilon;
  return e;
}

}  // namespace

BlendWeights blend_weights(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling) {
  const PointEval e = evaluate_point(volume, x_obs, transforms, sampling, false);
  BlendWeights w;
  w.bone.resize(transforms.size());
  for (std::size_t i = 0; i < transforms.size(); ++i) w.bone[i] = e.raw[i] / e.denom;
  w.background = e.raw_bg / e.denom;
  return w;
}

DeformedPoint deform_point(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling) {
  const PointEval e = evaluate_point(volume, x_obs, transforms, sampling, false);
  DeformedPoint out;
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    const double w = e.raw[i] / e.denom;
    out.x_canonical += w * e.y[i];
    out.confidence += w;
  }
  return out;
}

void deform_point_backward(const VoxelGrid& volume, const Vec3& x_obs, const BoneTransforms& transforms,
                           WeightSampling sampling, const Vec3& d_x_canonical, double d_confidence,
                           std::span<double> d_volume, std::span<Mat3> d_rotation, std::span<Vec3> d_translation) {
  const std::size_t K = transforms.size();
  const PointEval e = evaluate_point(volume, x_obs, transforms, sampling, true);
  // dL/dw_i = <g, y_i> + h ;  w_i = raw_i / denom
  std::vector<double> dw(K);
  double m = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    dw[i] = d_x_canonical.dot(e.y[i]) + d_confidence;
    m += dw[i] * e.raw[i] / e.denom;
  }
  for (std::size_t i = 0; i < K; ++i) {
    const double w = e.raw[i] / e.denom;
    const double d_raw = (dw[i] - m) / e.denom;
    Vec3 dy = w * d_x_canonical;
    if (sampling == WeightSampling::kCanonical) dy += d_raw * e.grad[i];
    sample_channel_backward(volume.layout, e.q[i], i, d_raw, d_volume);
    d_rotation[i] += dy * x_obs.transpose();
    d_translation[i] += dy;
  }
  sample_channel_backward(volume.layout, x_obs, K, -m / e.denom, d_volume);
}

}  // namespace gnv
