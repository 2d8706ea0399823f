// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/mlp.hpp"

#include <cmath>

#include "gnv/error.hpp"

namespace gnv {

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void apply_activation(Activation act, RowMatrix& m) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::kSoftplus:
      m = m.unaryExpr([](double v) { return softplus(v); });
      break;
    case Activation::kSigmoid:
      m = m.unaryExpr([](double v) { return sigmoid(v); });
      break;
  }
}

// Multiplies the cotangent by the activation derivative, expressed through
// the post-activation output y.
void activation_backward(Activation act, const RowMatrix& y, RowMatrix& d) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      d = (y.array() > 0.0).select(d, 0.0);
      break;
    case Activation::kSoftplus:
      d.array() *= 1.0 - (-y.array()).exp();
      break;
    case Activation::kSigmoid:
      d.array() *= y.array() * (1.0 - y.array());
      break;
  }
}

}  // namespace

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, std::vector<Activation> activations)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), activations_(std::move(activations)) {
  if (widths_.size() < 2) throw ConfigError("mlp '" + prefix_ + "' needs at least one layer");
  if (activations_.size() != widths_.size() - 1) {
    throw ConfigError("mlp '" + prefix_ + "' activation count does not match layer count");
  }
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, Activation hidden, Activation output)
    : Mlp(std::move(prefix), widths, [&] {
        std::vector<Activation> acts(widths.size() > 1 ? widths.size() - 1 : 0, hidden);
        if (!acts.empty()) acts.back() = output;
        return acts;
      }()) {}

std::string Mlp::weight_name(std::size_t layer) const { return prefix_ + ".l" + std::to_string(layer) + ".weight"; }
std::string Mlp::bias_name(std::size_t layer) const { return prefix_ + ".l" + std::to_string(layer) + ".bias"; }

void Mlp::add_params(ParameterStore& store, std::mt19937_64& rng, const InitOptions& options) const {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t in = widths_[l], out = widths_[l + 1];
    const bool last = l + 1 == layer_count();
    auto& w = store.add(weight_name(l), {out, in});
    auto& b = store.add(bias_name(l), {out});
    if (last && options.zero_last_layer) {
      // values already zero
    } else {
      const double gain = activations_[l] == Activation::kRelu ? 6.0 : 3.0;
      std::uniform_real_distribution<double> dist(-std::sqrt(gain / in), std::sqrt(gain / in));
      for (double& v : w.values) v = dist(rng);
    }
    if (last) {
      std::fill(b.values.begin(), b.values.end(), options.last_bias);
    } else if (options.hidden_bias_std > 0.0) {
      std::normal_distribution<double> dist(0.0, options.hidden_bias_std);
      for (double& v : b.values) v = dist(rng);
    }
  }
}

RowMatrix Mlp::forward(const ParameterStore& store, const RowMatrix& x, Cache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_size()) {
    throw ConfigError("mlp '" + prefix_ + "' expects " + std::to_string(input_size()) + " inputs, got " +
                      std::to_string(x.cols()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  RowMatrix h = x;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const auto& w = store.at(weight_name(l));
    const auto& b = store.at(bias_name(l));
    Eigen::Map<const RowMatrix> W(w.values.data(), widths_[l + 1], widths_[l]);
    Eigen::Map<const Eigen::RowVectorXd> B(b.values.data(), widths_[l + 1]);
    RowMatrix y(h.rows(), widths_[l + 1]);
    y.noalias() = h * W.transpose();
    y.rowwise() += B;
    apply_activation(activations_[l], y);
    if (cache) cache->inputs.push_back(std::move(h));
    h = std::move(y);
    if (cache) cache->outputs.push_back(h);
  }
  return h;
}

RowMatrix Mlp::backward(ParameterStore& store, const Cache& cache, const RowMatrix& d_y) const {
  if (cache.outputs.size() != layer_count()) throw ConfigError("mlp '" + prefix_ + "' backward without cache");
  RowMatrix d = d_y;
  for (std::size_t l = layer_count(); l-- > 0;) {
    activation_backward(activations_[l], cache.outputs[l], d);
    auto& w = store.at(weight_name(l));
    auto& b = store.at(bias_name(l));
    Eigen::Map<const RowMatrix> W(w.values.data(), widths_[l + 1], widths_[l]);
    if (w.has_grad()) {
      Eigen::Map<RowMatrix> dW(w.grad.data(), widths_[l + 1], widths_[l]);
      dW.noalias() += d.transpose() * cache.inputs[l];
    }
    if (b.has_grad()) {
      Eigen::Map<Eigen::RowVectorXd> dB(b.grad.data(), widths_[l + 1]);
      dB += d.colwise().sum();
    }
    RowMatrix dx(d.rows(), widths_[l]);
    dx.noalias() = d * W;
    d = std::move(dx);
  }
  return d;
}

}  // namespace gnv
