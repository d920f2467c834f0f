// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "componerf/random.hpp"
#include "componerf/types.hpp"

namespace componerf {

struct HashGridConfig {
  int levels = 16;
  int features = 2;
  int coarsest = 16;
  int finest = 512;
  std::uint32_t table_size = 1u << 16;

  int output_dim() const { return levels * features; }
  bool operator==(const HashGridConfig&) const = default;
};

void check_hash_grid_config(const HashGridConfig& cfg);

/// Per-level vertex resolution: geometric progression from coarsest to finest.
std::vector<int> hash_grid_resolutions(const HashGridConfig& cfg);

inline constexpr std::uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

/// Multiresolution hash encoding over [-1,1]^3 with trilinear interpolation.
/// Levels whose (N+1)^3 vertices fit in the table are indexed densely; finer
/// levels use the XOR-of-primes spatial hash.
template <typename Scalar>
class HashGrid {
 public:
  HashGrid() = default;
  explicit HashGrid(const HashGridConfig& cfg) : cfg_(cfg), resolutions_(hash_grid_resolutions(cfg)) {
    check_hash_grid_config(cfg);
    table = VecX<Scalar>::Zero(std::size_t(cfg.levels) * cfg.table_size * cfg.features);
  }

  VecX<Scalar> table;

  const HashGridConfig& config() const { return cfg_; }
  int resolution(int level) const { return resolutions_[level]; }
  int output_dim() const { return cfg_.output_dim(); }

  void init_uniform(Rng& rng, double scale = 1e-4) {
    for (Eigen::Index i = 0; i < table.size(); ++i) table[i] = Scalar(rng.uniform(-scale, scale));
  }

  std::uint32_t vertex_index(int level, std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
    const std::uint64_t side = std::uint64_t(resolutions_[level]) + 1;
    if (side * side * side <= cfg_.table_size) return std::uint32_t(ix + side * (iy + side * iz));
    return ((ix * kHashPrimes[0]) ^ (iy * kHashPrimes[1]) ^ (iz * kHashPrimes[2])) & (cfg_.table_size - 1);
  }

  std::size_t entry_offset(int level, std::uint32_t index) const {
    return (std::size_t(level) * cfg_.table_size + index) * cfg_.features;
  }

  struct Corners {
    std::array<std::uint32_t, 8> index;
    std::array<Scalar, 8> weight;
  };

  Corners corners(int level, const Vec3<Scalar>& x) const {
    const int n = resolutions_[level];
    std::array<std::uint32_t, 3> base;
    std::array<Scalar, 3> frac;
    for (int a = 0; a < 3; ++a) {
      const Scalar u = std::clamp((x[a] + Scalar(1)) * Scalar(0.5), Scalar(0), Scalar(1));
      const Scalar pos = u * Scalar(n);
      int i = int(std::floor(pos));
      if (i >= n) i = n - 1;
      base[a] = std::uint32_t(i);
      frac[a] = pos - Scalar(i);
    }
    Corners c;
    for (int k = 0; k < 8; ++k) {
      const std::uint32_t dx = k & 1, dy = (k >> 1) & 1, dz = (k >> 2) & 1;
      c.index[k] = vertex_index(level, base[0] + dx, base[1] + dy, base[2] + dz);
      c.weight[k] = (dx ? frac[0] : Scalar(1) - frac[0]) * (dy ? frac[1] : Scalar(1) - frac[1]) *
                    (dz ? frac[2] : Scalar(1) - frac[2]);
    }
    return c;
  }

  /// Writes levels * features values to `out`.
  void encode(const Vec3<Scalar>& x, Scalar* out) const {
    const int f = cfg_.features;
    for (int l = 0; l < cfg_.levels; ++l) {
      const Corners c = corners(l, x);
      Scalar* o = out + l * f;
      for (int j = 0; j < f; ++j) o[j] = Scalar(0);
      for (int k = 0; k < 8; ++k) {
        const Scalar* e = table.data() + entry_offset(l, c.index[k]);
        for (int j = 0; j < f; ++j) o[j] += c.weight[k] * e[j];
      }
    }
  }

  VecX<Scalar> encode(const Vec3<Scalar>& x) const {
    VecX<Scalar> out(output_dim());
    encode(x, out.data());
    return out;
  }

  /// Columns of `x` are points; result is output_dim x n.
  MatX<Scalar> encode_batch(const Mat3X<Scalar>& x) const {
    MatX<Scalar> out(output_dim(), x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) encode(x.col(i), out.col(i).data());
    return out;
  }

  /// Scatters d(loss)/d(encoding) into a table-shaped gradient buffer.
  void backward(const Vec3<Scalar>& x, const Scalar* d_out, Scalar* grad_table) const {
    const int f = cfg_.features;
    for (int l = 0; l < cfg_.levels; ++l) {
      const Corners c = corners(l, x);
      const Scalar* g = d_out + l * f;
      for (int k = 0; k < 8; ++k) {
        Scalar* e = grad_table + entry_offset(l, c.index[k]);
        for (int j = 0; j < f; ++j) e[j] += c.weight[k] * g[j];
      }
    }
  }

  void backward_batch(const Mat3X<Scalar>& x, const MatX<Scalar>& d_out, Scalar* grad_table) const {
    for (Eigen::Index i = 0; i < x.cols(); ++i) backward(x.col(i), d_out.col(i).data(), grad_table);
  }

 private:
  HashGridConfig cfg_;
  std::vector<int> resolutions_;
};

}  // namespace componerf
