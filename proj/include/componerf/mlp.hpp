// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "componerf/random.hpp"
#include "componerf/types.hpp"

namespace componerf {

/// Fully connected ReLU network with a linear output layer. All weights live in
/// one flat vector: for each layer, W (out x in, column-major) then b.
template <typename Scalar>
class Mlp {
 public:
  struct Cache {
    std::vector<MatX<Scalar>> inputs;  // input of every layer
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(off);
      off += std::size_t(dims_[l + 1]) * dims_[l] + dims_[l + 1];
    }
    params = VecX<Scalar>::Zero(off);
  }

  VecX<Scalar> params;

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return int(offsets_.size()); }

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  void init(Rng& rng, bool zero_last_layer) {
    params.setZero();
    for (int l = 0; l < num_layers(); ++l) {
      if (zero_last_layer && l + 1 == num_layers()) break;
      const double bound = 1.0 / std::sqrt(double(dims_[l]));
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(rng.uniform(-bound, bound));
    }
  }

  Eigen::Map<MatX<Scalar>> weight(int l) {
    return {params.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<const MatX<Scalar>> weight(int l) const {
    return {params.data() + offsets_[l], dims_[l + 1], dims_[l]};
  }
  Eigen::Map<VecX<Scalar>> bias(int l) {
    return {params.data() + offsets_[l] + std::size_t(dims_[l + 1]) * dims_[l], dims_[l + 1]};
  }
  Eigen::Map<const VecX<Scalar>> bias(int l) const {
    return {params.data() + offsets_[l] + std::size_t(dims_[l + 1]) * dims_[l], dims_[l + 1]};
  }

  /// `in` is input_dim x n; returns output_dim x n.
  MatX<Scalar> forward(const MatX<Scalar>& in, Cache* cache = nullptr) const {
    if (cache) cache->inputs.resize(num_layers());
    MatX<Scalar> a = in;
    for (int l = 0; l < num_layers(); ++l) {
      MatX<Scalar> z = weight(l) * a;
      z.colwise() += bias(l);
      if (l + 1 < num_layers()) z = z.cwiseMax(Scalar(0));
      if (cache) cache->inputs[l] = std::move(a);
      a = std::move(z);
    }
    return a;
  }

  /// Accumulates parameter gradients into `grad` (same layout as params) and
  /// optionally writes d(loss)/d(input).
  void backward(const Cache& cache, const MatX<Scalar>& d_out, Scalar* grad, MatX<Scalar>* d_in = nullptr) const {
    MatX<Scalar> d = d_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
      const MatX<Scalar>& a = cache.inputs[l];
      Eigen::Map<MatX<Scalar>> gw(grad + offsets_[l], dims_[l + 1], dims_[l]);
      Eigen::Map<VecX<Scalar>> gb(grad + offsets_[l] + std::size_t(dims_[l + 1]) * dims_[l], dims_[l + 1]);
      gw.noalias() += d * a.transpose();
      gb += d.rowwise().sum();
      if (l == 0 && !d_in) break;
      MatX<Scalar> da = weight(l).transpose() * d;
      if (l > 0) {
        // ReLU gate: the layer input is the previous layer's activation.
        da = (a.array() > Scalar(0)).select(da.array(), Scalar(0)).matrix();
        d = std::move(da);
      } else {
        *d_in = std::move(da);
      }
    }
  }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
};

}  // namespace componerf
