// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/encoding.hpp"

#include <cmath>

#include "gnv/error.hpp"

namespace gnv {

void positional_encode(std::span<const double> x, EncodingSpec spec, std::span<double> out) {
  if (spec.frequencies < 0) throw ConfigError("negative encoding frequency count");
  if (out.size() != spec.output_size(x.size())) throw ConfigError("encoding output size mismatch");
  const int L = spec.frequencies;
  std::size_t o = 0;
  for (double xk : x) {
    double freq = 1.0;
    for (int j = 0; j < L; ++j, freq *= 2.0) {
      const double a = freq * xk;
      out[o++] = std::sin(a);
      out[o++] = std::cos(a);
    }
  }
}

std::vector<double> positional_encode(std::span<const double> x, EncodingSpec spec) {
  std::vector<double> out(spec.output_size(x.size()));
  positional_encode(x, spec, out);
  return out;
}

void positional_encode_backward(std::span<const double> encoded, EncodingSpec spec,
                                std::span<const double> d_encoded, std::span<double> d_x) {
  const int L = spec.frequencies;
  if (encoded.size() != spec.output_size(d_x.size()) || d_encoded.size() != encoded.size()) {
    throw ConfigError("encoding cotangent size mismatch");
  }
  std::size_t o = 0;
  for (double& dx : d_x) {
    double freq = 1.0;
    double acc = 0.0;
    for (int j = 0; j < L; ++j, freq *= 2.0, o += 2) {
      // d sin(fx) = f cos(fx), d cos(fx) = -f sin(fx)
      acc += freq * (d_encoded[o] * encoded[o + 1] - d_encoded[o + 1] * encoded[o]);
    }
    dx += acc;
  }
}

}  // namespace gnv
