// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Small randomized instances of every differentiable block, for the
// finite-difference gradient check.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gnv/autodiff.hpp"

namespace gnv {

/// Names of the registered blocks, in suite order.
std::vector<std::string> gradient_block_names();

/// Builds the named block with parameters and inputs drawn from `seed`.
DifferentiableBlock make_gradient_block(const std::string& name, std::uint64_t seed);

/// Every block at every seed.
std::vector<GradCheckReport> run_gradient_suite(std::span<const std::uint64_t> seeds,
                                                const GradCheckOptions& options = {});

}  // namespace gnv
