// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>

#include "gnv/autodiff.hpp"
#include "gnv/encoding.hpp"
#include "gnv/math.hpp"
#include "gnv/mlp.hpp"

namespace gnv {

struct RadianceConfig {
  std::size_t feature_dim = 18;  // per grid: |scales| * channels
  EncodingSpec feature_encoding = kFeatureEncoding;
  EncodingSpec time_encoding = kTimeEncoding;
  EncodingSpec coord_encoding = kCoordEncoding;
  EncodingSpec direction_encoding = kDirectionEncoding;
  std::size_t width = 128;
  std::size_t depth = 4;
  std::size_t color_width = 64;
  double density_bias = -1.0;

  std::size_t trunk_input_size() const noexcept {
    return 2 * feature_encoding.output_size(feature_dim) + time_encoding.output_size(1) +
           coord_encoding.output_size(3);
  }
  std::size_t direction_input_size() const noexcept { return direction_encoding.output_size(3); }
};

/// One row per sample point.
struct RadianceInputs {
  RowMatrix v_general;     // P x feature_dim
  RowMatrix v_individual;  // P x feature_dim
  Eigen::VectorXd time;    // P
  RowMatrix x_obs;         // P x 3
  RowMatrix direction;     // P x 3, unit rows
};

struct RadianceOutputs {
  RowMatrix rgb;          // P x 3, in (0, 1)
  Eigen::VectorXd sigma;  // P, >= 0
};

/// Encoded inputs -> ReLU trunk -> softplus density; the trunk features are
/// concatenated with the encoded direction before a sigmoid color head, so
/// density never depends on direction.
class RadianceNet {
 public:
  struct Cache {
    RowMatrix trunk_in;
    RowMatrix direction_enc;
    Mlp::Cache trunk, density, feature, color;
  };

  RadianceNet() = default;
  explicit RadianceNet(const RadianceConfig& config);

  const RadianceConfig& config() const noexcept { return config_; }

  void add_params(ParameterStore& store, std::mt19937_64& rng) const;

  RadianceOutputs forward(const ParameterStore& store, const RadianceInputs& in, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `store`. When `d_in` is non-null it
  /// receives gradients for all five input groups (shapes as in RadianceInputs).
  void backward(ParameterStore& store, const Cache& cache, const RowMatrix& d_rgb, const Eigen::VectorXd& d_sigma,
                RadianceInputs* d_in = nullptr) const;

 private:
  RadianceConfig config_;
  Mlp trunk_, density_, feature_, color_;
};

}  // namespace gnv
