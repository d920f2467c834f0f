// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "componerf/types.hpp"

namespace componerf {

/// A named trainable block. `values` points into the owning model.
template <typename Scalar>
struct ParamBlock {
  std::string name;
  VecX<Scalar>* values = nullptr;
};

/// Gradients aligned block-for-block with a parameter registry.
template <typename Scalar>
struct GradientSet {
  std::vector<std::string> names;
  std::vector<VecX<Scalar>> blocks;

  static GradientSet zeros_like(std::span<const ParamBlock<Scalar>> params) {
    GradientSet g;
    for (const auto& p : params) {
      g.names.push_back(p.name);
      g.blocks.push_back(VecX<Scalar>::Zero(p.values->size()));
    }
    return g;
  }

  void set_zero() {
    for (auto& b : blocks) b.setZero();
  }

  bool same_registry(const GradientSet& other) const {
    if (names != other.names) return false;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].size() != other.blocks[i].size()) return false;
    return true;
  }

  void add_scaled(const GradientSet& other, Scalar scale) {
    if (!same_registry(other)) throw Error(ErrorCode::RegistryMismatch, "gradient registries differ");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] += scale * other.blocks[i];
  }

  bool all_finite() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const VecX<Scalar>& b) { return b.allFinite(); });
  }

  Scalar max_abs() const {
    Scalar m = 0;
    for (const auto& b : blocks)
      if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
  }

  const VecX<Scalar>& block(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorCode::RegistryMismatch, "no gradient block '" + name + "'");
    return blocks[std::size_t(it - names.begin())];
  }
};

struct LossWeights {
  double alpha_global = 100.0;
  double alpha_local = 100.0;
  double beta = 5e-4;

  bool operator==(const LossWeights&) const = default;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<VecX<Scalar>> first;
  std::vector<VecX<Scalar>> second;

  bool initialized() const { return !first.empty(); }
};

/// Bias-corrected Adam. Blocks with `update_mask[i] == false` keep their values
/// and moments untouched; the step count is shared.
template <typename Scalar>
void adam_step(std::span<const ParamBlock<Scalar>> params, const GradientSet<Scalar>& grads, AdamState<Scalar>& state,
               const std::vector<bool>& update_mask = {}) {
  if (grads.blocks.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: block count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values->size() != grads.blocks[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "adam: block '" + params[i].name + "' has mismatched gradient size");
    }
  }
  if (!state.initialized()) {
    for (const auto& p : params) {
      state.first.push_back(VecX<Scalar>::Zero(p.values->size()));
      state.second.push_back(VecX<Scalar>::Zero(p.values->size()));
    }
  }
  if (state.first.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: state/parameter mismatch");
  ++state.step;
  const AdamConfig& c = state.config;
  const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
  const Scalar corr1 = Scalar(1.0 - std::pow(c.beta1, double(state.step)));
  const Scalar corr2 = Scalar(1.0 - std::pow(c.beta2, double(state.step)));
  const Scalar lr = Scalar(c.lr), eps = Scalar(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!update_mask.empty() && !update_mask[i]) continue;
    auto& m = state.first[i];
    auto& v = state.second[i];
    const auto& g = grads.blocks[i];
    auto& p = *params[i].values;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (Scalar(1) - b1) * g[k];
      v[k] = b2 * v[k] + (Scalar(1) - b2) * g[k] * g[k];
      const Scalar m_hat = m[k] / corr1;
      const Scalar v_hat = v[k] / corr2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

inline constexpr double kEntropyClamp = 1e-5;

/// Binary entropy -w ln(w~) - (1-w) ln(1-w~), w~ = clamp(w, 1e-5, 1-1e-5).
template <typename Scalar>
Scalar binary_entropy(Scalar w) {
  const Scalar c = std::clamp(w, Scalar(kEntropyClamp), Scalar(1.0 - kEntropyClamp));
  return -w * std::log(c) - (Scalar(1) - w) * std::log(Scalar(1) - c);
}

/// d/dw of binary_entropy: ln((1-w~)/w~), positive below 0.5 and negative above.
template <typename Scalar>
Scalar binary_entropy_grad(Scalar w) {
  const Scalar c = std::clamp(w, Scalar(kEntropyClamp), Scalar(1.0 - kEntropyClamp));
  return std::log(Scalar(1) - c) - std::log(c);
}

/// Mean binary entropy of per-sample rendering weights.
template <typename Scalar>
Scalar sparsity_loss(std::span<const Scalar> weights) {
  if (weights.empty()) return Scalar(0);
  Scalar sum = 0;
  for (Scalar w : weights) sum += binary_entropy(w);
  return sum / Scalar(weights.size());
}

template <typename Scalar>
std::vector<Scalar> sparsity_loss_grad(std::span<const Scalar> weights) {
  std::vector<Scalar> g(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) g[i] = binary_entropy_grad(weights[i]) / Scalar(weights.size());
  return g;
}

/// alpha_g * global + alpha_l * sum(locals) + beta * sparsity. Every term must
/// share the registry of `global`.
template <typename Scalar>
GradientSet<Scalar> assemble_total_gradient(const GradientSet<Scalar>& global,
                                            const std::map<std::string, GradientSet<Scalar>>& locals,
                                            const GradientSet<Scalar>& sparsity, const LossWeights& w) {
  GradientSet<Scalar> total = global;
  total.set_zero();
  total.add_scaled(global, Scalar(w.alpha_global));
  for (const auto& [id, g] : locals) {
    if (!total.same_registry(g)) throw Error(ErrorCode::RegistryMismatch, "local gradient for '" + id + "'");
    total.add_scaled(g, Scalar(w.alpha_local));
  }
  total.add_scaled(sparsity, Scalar(w.beta));
  return total;
}

}  // namespace componerf
