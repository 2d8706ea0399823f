// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Trainable parameter storage, Adam, learning-rate schedules and the
// finite-difference gradient checker used by every differentiable block.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gnv {

// Parameter storage aligned for Eigen's packets, so vectorized reductions
// over mapped tensors sum in the same order wherever the heap places them.
using ParamBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  ParamBuffer values;
  // Empty until the owning store's zero_grads() runs.
  ParamBuffer grad;

  std::size_t size() const noexcept { return values.size(); }
  bool has_grad() const noexcept { return grad.size() == values.size(); }
};

std::size_t shape_product(std::span<const std::size_t> shape) noexcept;
std::string shape_to_string(std::span<const std::size_t> shape);

/// Ordered collection of named tensors. Names are unique; iteration order is
/// insertion order, which keeps serialization and optimizer updates
/// deterministic. References returned by add() and at() stay valid while
/// more tensors are added.
class ParameterStore {
 public:
  ParamTensor& add(std::string name, std::vector<std::size_t> shape, double fill = 0.0);

  bool contains(std::string_view name) const;
  ParamTensor& at(std::string_view name);
  const ParamTensor& at(std::string_view name) const;

  std::deque<ParamTensor>& tensors() noexcept { return tensors_; }
  const std::deque<ParamTensor>& tensors() const noexcept { return tensors_; }

  /// Allocates (if needed) and clears every gradient buffer.
  void zero_grads();
  /// Releases gradient buffers.
  void drop_grads();

  std::size_t parameter_count() const noexcept;

 private:
  std::deque<ParamTensor> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  std::map<std::string, AdamMoments, std::less<>> moments;
};

/// Learning rate per parameter, resolved from its name.
using LrResolver = std::function<double(std::string_view name)>;

/// One bias-corrected Adam update of every tensor in `store`. Gradients are
/// read, never cleared. Throws ConfigError naming the first tensor without a
/// gradient buffer.
void adam_step(ParameterStore& store, AdamState& state, double lr);
void adam_step(ParameterStore& store, AdamState& state, const LrResolver& lr_for);

inline constexpr std::uint64_t kDefaultDecayPeriod = 500000;

/// Step decay: base_lr * 0.1^floor(iteration / decay_period).
double lr_schedule(double base_lr, std::uint64_t iteration,
                   std::uint64_t decay_period = kDefaultDecayPeriod);

/// Group-wise base rates. Voxel grids and the radiance field get their own
/// rates; everything else (pose refinement, weight-volume net, embeddings)
/// uses `base`.
struct LearningRates {
  double base = 5e-5;
  double voxels = 2e-2;
  double radiance = 5e-4;
  std::uint64_t decay_period = kDefaultDecayPeriod;

  double base_for(std::string_view param_name) const;
  double at(std::string_view param_name, std::uint64_t iteration) const;
};

// ---------------------------------------------------------------------------
// Differentiable block contract.
//
// A block owns a store holding both its parameters and its inputs (inputs are
// stored as tensors too, so input cotangents and parameter gradients come out
// of the same pullback). `forward` is the pure function. `pullback` receives
// an output cotangent and accumulates the vector-Jacobian product into the
// grad buffers of `store`.

struct DifferentiableBlock {
  std::string name;
  ParameterStore store;
  std::function<std::vector<double>(const ParameterStore&)> forward;
  std::function<void(ParameterStore&, std::span<const double> cotangent)> pullback;
};

struct GradCheckReport {
  std::string block;
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_tensor;
  std::string diagnostic;
};

struct GradCheckOptions {
  double fd_step = 1e-5;
  double tol = 1e-4;
  // Entries checked per tensor; larger tensors are sub-sampled.
  std::size_t max_entries_per_tensor = 40;
  // Floor on the per-tensor gradient scale used to normalize errors.
  double scale_floor = 1e-6;
  // Failing entries are retried with the step divided by 10 this many times.
  std::size_t refinements = 2;
};

/// Runs the forward/pullback pair against central finite differences of the
/// scalarized output <w, forward(store)>, w drawn from `seed`. The error of a
/// tensor is max_i |g_i - fd_i| / max(max_i |fd_i|, scale_floor).
GradCheckReport check_gradients(DifferentiableBlock& block, std::uint64_t seed,
                                const GradCheckOptions& options = {});

}  // namespace gnv
