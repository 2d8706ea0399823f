// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "gnv/error.hpp"

namespace gnv {

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

ParamTensor& ParameterStore::add(std::string name, std::vector<std::size_t> shape, double fill) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("parameter '" + name + "' has a zero dimension");
  }
  ParamTensor t;
  t.values.assign(shape_product(shape), fill);
  t.shape = std::move(shape);
  t.name = name;
  index_.emplace(std::move(name), tensors_.size());
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

ParamTensor& ParameterStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

const ParamTensor& ParameterStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

void ParameterStore::zero_grads() {
  for (auto& t : tensors_) t.grad.assign(t.values.size(), 0.0);
}

void ParameterStore::drop_grads() {
  for (auto& t : tensors_) {
    t.grad.clear();
    t.grad.shrink_to_fit();
  }
}

std::size_t ParameterStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

void adam_step(ParameterStore& store, AdamState& state, double lr) {
  adam_step(store, state, [lr](std::string_view) { return lr; });
}

void adam_step(ParameterStore& store, AdamState& state, const LrResolver& lr_for) {
  for (const auto& t : store.tensors()) {
    if (!t.has_grad()) throw ConfigError("missing gradient for parameter '" + t.name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (auto& p : store.tensors()) {
    auto& mom = state.moments[p.name];
    if (mom.m.size() != p.size()) {
      mom.m.assign(p.size(), 0.0);
      mom.v.assign(p.size(), 0.0);
    }
    const double lr = lr_for(p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      mom.m[i] = state.beta1 * mom.m[i] + (1.0 - state.beta1) * g;
      mom.v[i] = state.beta2 * mom.v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      p.values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double lr_schedule(double base_lr, std::uint64_t iteration, std::uint64_t decay_period) {
  if (decay_period == 0) return base_lr;
  const auto decays = iteration / decay_period;
  return base_lr * std::pow(0.1, static_cast<double>(decays));
}

double LearningRates::base_for(std::string_view name) const {
  if (name.starts_with("general_voxels") || name.starts_with("individual_voxels")) return voxels;
  if (name.starts_with("radiance.")) return radiance;
  return base;
}

double LearningRates::at(std::string_view name, std::uint64_t iteration) const {
  return lr_schedule(base_for(name), iteration, decay_period);
}

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t max_entries, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= max_entries) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

GradCheckReport check_gradients(DifferentiableBlock& block, std::uint64_t seed,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  report.block = block.name;

  const std::vector<double> y0 = block.forward(block.store);
  for (double v : y0) {
    if (!std::isfinite(v)) {
      report.diagnostic = "non-finite forward output in block '" + block.name + "'";
      return report;
    }
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> cotangent(y0.size());
  for (double& w : cotangent) w = normal(rng);

  block.store.zero_grads();
  block.pullback(block.store, cotangent);

  for (auto& t : block.store.tensors()) {
    const auto entries = pick_entries(t.size(), options.max_entries_per_tensor, rng);
    auto central = [&](std::size_t i, double h) {
      const double saved = t.values[i];
      t.values[i] = saved + h;
      const double fp = dot(cotangent, block.forward(block.store));
      t.values[i] = saved - h;
      const double fm = dot(cotangent, block.forward(block.store));
      t.values[i] = saved;
      return (fp - fm) / (2.0 * h);
    };
    std::vector<double> fd(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) fd[k] = central(entries[k], options.fd_step);
    double scale = options.scale_floor;
    for (double v : fd) scale = std::max(scale, std::abs(v));
    double err = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      double e = std::abs(t.grad[entries[k]] - fd[k]) / scale;
      // A kink (cell face, ReLU, box edge) inside the stencil spoils the
      // difference quotient; smaller stencils step off it, a wrong
      // gradient stays wrong at every step.
      double h = options.fd_step;
      for (std::size_t r = 0; r < options.refinements && e > options.tol; ++r) {
        h /= 10.0;
        e = std::min(e, std::abs(t.grad[entries[k]] - central(entries[k], h)) / scale);
      }
      err = std::max(err, e);
    }
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    if (err >= report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_tensor = t.name;
    }
  }
  block.store.drop_grads();
  report.pass = report.max_rel_err <= options.tol;
  if (!report.pass) {
    std::ostringstream os;
    os << "block '" << block.name << "': tensor '" << report.worst_tensor << "' relative error "
       << report.max_rel_err << " > " << options.tol;
    report.diagnostic = os.str();
  }
  return report;
}

}  // namespace gnv
