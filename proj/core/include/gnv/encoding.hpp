// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gnv {

/// Frequency count L of a sinusoidal encoding. L = 0 disables the signal.
struct EncodingSpec {
  int frequencies = 0;

  constexpr std::size_t output_size(std::size_t input_size) const noexcept {
    return 2 * static_cast<std::size_t>(frequencies) * input_size;
  }
};

// Default frequency counts.
inline constexpr EncodingSpec kFeatureEncoding{2};
inline constexpr EncodingSpec kCoordEncoding{10};
inline constexpr EncodingSpec kDirectionEncoding{4};
inline constexpr EncodingSpec kTimeEncoding{4};

/// Writes (sin(2^0 x_k), cos(2^0 x_k), ..., sin(2^{L-1} x_k), cos(2^{L-1} x_k))
/// for each component x_k in order. `out` must hold spec.output_size(x.size()).
void positional_encode(std::span<const double> x, EncodingSpec spec, std::span<double> out);
std::vector<double> positional_encode(std::span<const double> x, EncodingSpec spec);

/// Accumulates dL/dx into `d_x` given dL/d(encoding) and the forward output
/// `encoded` (the derivative only needs the sin/cos values already computed).
void positional_encode_backward(std::span<const double> encoded, EncodingSpec spec,
                                std::span<const double> d_encoded, std::span<double> d_x);

}  // namespace gnv
