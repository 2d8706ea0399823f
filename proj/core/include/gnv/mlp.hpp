// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "gnv/autodiff.hpp"
#include "gnv/math.hpp"

namespace gnv {

enum class Activation { kIdentity, kRelu, kSoftplus, kSigmoid };

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

/// Batched fully connected network. Rows of the input matrix are samples.
/// Layer l owns "<prefix>.l<l>.weight" [out, in] and "<prefix>.l<l>.bias" [out].
class Mlp {
 public:
  struct InitOptions {
    bool zero_last_layer = false;
    double last_bias = 0.0;
    double hidden_bias_std = 0.0;
  };

  struct Cache {
    std::vector<RowMatrix> inputs;   // input of each layer
    std::vector<RowMatrix> outputs;  // post-activation output of each layer
  };

  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> widths, std::vector<Activation> activations);
  Mlp(std::string prefix, std::vector<std::size_t> widths, Activation hidden, Activation output);

  const std::string& prefix() const noexcept { return prefix_; }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_size() const noexcept { return widths_.front(); }
  std::size_t output_size() const noexcept { return widths_.back(); }
  std::size_t layer_count() const noexcept { return widths_.size() - 1; }
  std::string weight_name(std::size_t layer) const;
  std::string bias_name(std::size_t layer) const;

  void add_params(ParameterStore& store, std::mt19937_64& rng, const InitOptions& options) const;

  RowMatrix forward(const ParameterStore& store, const RowMatrix& x, Cache* cache) const;

  /// Returns dL/dx. Parameter gradients accumulate into the store's grad
  /// buffers when they are allocated.
  RowMatrix backward(ParameterStore& store, const Cache& cache, const RowMatrix& d_y) const;

 private:
  std::string prefix_;
  std::vector<std::size_t> widths_;
  std::vector<Activation> activations_;
};

}  // namespace gnv
