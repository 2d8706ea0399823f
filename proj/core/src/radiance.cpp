// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/radiance.hpp"

#include <span>

#include "gnv/error.hpp"

namespace gnv {

RadianceNet::RadianceNet(const RadianceConfig& config) : config_(config) {
  if (config.width == 0 || config.depth == 0 || config.color_width == 0) {
    throw ConfigError("radiance widths must be positive");
  }
  std::vector<std::size_t> trunk{config.trunk_input_size()};
  for (std::size_t l = 0; l < config.depth; ++l) trunk.push_back(config.width);
  trunk_ = Mlp("radiance.trunk", trunk, Activation::kRelu, Activation::kRelu);
  density_ = Mlp("radiance.density", {config.width, 1}, Activation::kSoftplus, Activation::kSoftplus);
  feature_ = Mlp("radiance.feature", {config.width, config.width}, Activation::kIdentity, Activation::kIdentity);
  color_ = Mlp("radiance.color", {config.width + config.direction_input_size(), config.color_width, 3},
               Activation::kRelu, Activation::kSigmoid);
}

void RadianceNet::add_params(ParameterStore& store, std::mt19937_64& rng) const {
  trunk_.add_params(store, rng, {});
  density_.add_params(store, rng, {.last_bias = config_.density_bias});
  feature_.add_params(store, rng, {});
  color_.add_params(store, rng, {});
}

namespace {

void encode_rows(const RowMatrix& src, EncodingSpec spec, RowMatrix& dst, Eigen::Index col) {
  const std::size_t n = static_cast<std::size_t>(src.cols());
  const std::size_t width = spec.output_size(n);
  for (Eigen::Index r = 0; r < src.rows(); ++r) {
    positional_encode(std::span<const double>(src.row(r).data(), n), spec,
                      std::span<double>(dst.row(r).data() + col, width));
  }
}

void encode_backward_rows(const RowMatrix& enc, const RowMatrix& d_enc, EncodingSpec spec, Eigen::Index col,
                          RowMatrix& d_src) {
  const std::size_t n = static_cast<std::size_t>(d_src.cols());
  const std::size_t width = spec.output_size(n);
  for (Eigen::Index r = 0; r < enc.rows(); ++r) {
    positional_encode_backward(std::span<const double>(enc.row(r).data() + col, width), spec,
                               std::span<const double>(d_enc.row(r).data() + col, width),
                               std::span<double>(d_src.row(r).data(), n));
  }
}

}  // namespace

RadianceOutputs RadianceNet::forward(const ParameterStore& store, const RadianceInputs& in, Cache* cache) const {
  const Eigen::Index P = in.v_general.rows();
  const auto F = static_cast<Eigen::Index>(config_.feature_dim);
  if (in.v_general.cols() != F || in.v_individual.cols() != F || in.v_individual.rows() != P ||
      in.time.size() != P || in.x_obs.rows() != P || in.x_obs.cols() != 3 || in.direction.rows() != P ||
      in.direction.cols() != 3) {
    throw ConfigError("radiance input dimensions do not match the network");
  }
  const auto fe = static_cast<Eigen::Index>(config_.feature_encoding.output_size(config_.feature_dim));
  const auto te = static_cast<Eigen::Index>(config_.time_encoding.output_size(1));

  RowMatrix trunk_in(P, static_cast<Eigen::Index>(config_.trunk_input_size()));
  encode_rows(in.v_general, config_.feature_encoding, trunk_in, 0);
  encode_rows(in.v_individual, config_.feature_encoding, trunk_in, fe);
  const RowMatrix t = in.time;
  encode_rows(t, config_.time_encoding, trunk_in, 2 * fe);
  encode_rows(in.x_obs, config_.coord_encoding, trunk_in, 2 * fe + te);

  RowMatrix dir_enc(P, static_cast<Eigen::Index>(config_.direction_input_size()));
  encode_rows(in.direction, config_.direction_encoding, dir_enc, 0);

  Cache local;
  Cache& c = cache ? *cache : local;
  const RowMatrix h = trunk_.forward(store, trunk_in, &c.trunk);
  RadianceOutputs out;
  out.sigma = density_.forward(store, h, &c.density).col(0);
  const RowMatrix feat = feature_.forward(store, h, &c.feature);
  RowMatrix color_in(P, feat.cols() + dir_enc.cols());
  color_in << feat, dir_enc;
  out.rgb = color_.forward(store, color_in, &c.color);
  if (cache) {
    c.trunk_in = std::move(trunk_in);
    c.direction_enc = std::move(dir_enc);
  }
  return out;
}

void RadianceNet::backward(ParameterStore& store, const Cache& cache, const RowMatrix& d_rgb,
                           const Eigen::VectorXd& d_sigma, RadianceInputs* d_in) const {
  const RowMatrix d_color_in = color_.backward(store, cache.color, d_rgb);
  const auto W = static_cast<Eigen::Index>(config_.width);
  RowMatrix d_h = feature_.backward(store, cache.feature, d_color_in.leftCols(W));
  d_h += density_.backward(store, cache.density, RowMatrix(d_sigma));
  const RowMatrix d_trunk_in = trunk_.backward(store, cache.trunk, d_h);
  if (!d_in) return;

  const Eigen::Index P = d_rgb.rows();
  const auto F = static_cast<Eigen::Index>(config_.feature_dim);
  const auto fe = static_cast<Eigen::Index>(config_.feature_encoding.output_size(config_.feature_dim));
  const auto te = static_cast<Eigen::Index>(config_.time_encoding.output_size(1));
  d_in->v_general = RowMatrix::Zero(P, F);
  d_in->v_individual = RowMatrix::Zero(P, F);
  RowMatrix d_t = RowMatrix::Zero(P, 1);
  d_in->x_obs = RowMatrix::Zero(P, 3);
  d_in->direction = RowMatrix::Zero(P, 3);
  encode_backward_rows(cache.trunk_in, d_trunk_in, config_.feature_encoding, 0, d_in->v_general);
  encode_backward_rows(cache.trunk_in, d_trunk_in, config_.feature_encoding, fe, d_in->v_individual);
  encode_backward_rows(cache.trunk_in, d_trunk_in, config_.time_encoding, 2 * fe, d_t);
  encode_backward_rows(cache.trunk_in, d_trunk_in, config_.coord_encoding, 2 * fe + te, d_in->x_obs);
  const RowMatrix d_dir_enc = d_color_in.rightCols(d_color_in.cols() - W);
  encode_backward_rows(cache.direction_enc, d_dir_enc, config_.direction_encoding, 0, d_in->direction);
  d_in->time = d_t.col(0);
}

}  // namespace gnv
