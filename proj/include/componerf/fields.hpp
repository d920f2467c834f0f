// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "componerf/hash_grid.hpp"
#include "componerf/mlp.hpp"
#include "componerf/types.hpp"

namespace componerf {

enum class ColorSpace { Latent, Rgb };

struct LocalFieldConfig {
  HashGridConfig grid;
  int hidden_width = 64;
  int hidden_layers = 1;
  int color_dim = 4;
  ColorSpace color_space = ColorSpace::Latent;
  double density_bias = -1.0;

  bool operator==(const LocalFieldConfig&) const = default;
};

enum class CompositionMode { DensityBased, ColorBased };

struct CompositionConfig {
  CompositionMode mode = CompositionMode::DensityBased;
  double alpha_density = 1.0;
  double alpha_color = 1.0;
  int depth = 4;  // Linear layers per calibrator, 4 or 6
  int hidden_width = 64;
  int feature_dim = 15;  // h
  int color_dim = 4;
  HashGridConfig grid;

  bool operator==(const CompositionConfig&) const = default;
};

void check_local_field_config(const LocalFieldConfig& cfg);
void check_composition_config(const CompositionConfig& cfg);

inline constexpr int kDirectionEncodingDim = 16;

/// Real spherical harmonics up to degree 3 (16 coefficients) of a unit direction.
template <typename Scalar>
Eigen::Matrix<Scalar, kDirectionEncodingDim, 1> encode_direction(const Vec3<Scalar>& d) {
  const Scalar x = d.x(), y = d.y(), z = d.z();
  const Scalar xy = x * y, xz = x * z, yz = y * z, x2 = x * x, y2 = y * y, z2 = z * z;
  Eigen::Matrix<Scalar, kDirectionEncodingDim, 1> o;
  o[0] = Scalar(0.28209479177387814);
  o[1] = Scalar(-0.48860251190291987) * y;
  o[2] = Scalar(0.48860251190291987) * z;
  o[3] = Scalar(-0.48860251190291987) * x;
  o[4] = Scalar(1.0925484305920792) * xy;
  o[5] = Scalar(-1.0925484305920792) * yz;
  o[6] = Scalar(0.94617469575755997) * z2 - Scalar(0.31539156525251999);
  o[7] = Scalar(-1.0925484305920792) * xz;
  o[8] = Scalar(0.54627421529603959) * (x2 - y2);
  o[9] = Scalar(0.59004358992664352) * y * (Scalar(-3) * x2 + y2);
  o[10] = Scalar(2.8906114426405538) * xy * z;
  o[11] = Scalar(0.45704579946446572) * y * (Scalar(1) - Scalar(5) * z2);
  o[12] = Scalar(0.3731763325901154) * z * (Scalar(5) * z2 - Scalar(3));
  o[13] = Scalar(0.45704579946446572) * x * (Scalar(1) - Scalar(5) * z2);
  o[14] = Scalar(1.4453057213202769) * z * (x2 - y2);
  o[15] = Scalar(0.59004358992664352) * x * (-x2 + Scalar(3) * y2);
  return o;
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(20) ? x : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
struct FieldOutput {
  Scalar sigma = 0;
  VecX<Scalar> color;
};

/// One object's radiance field in its box-local frame: hash grid -> MLP ->
/// (density, view-independent color).
template <typename Scalar>
class LocalField {
 public:
  struct BatchCache {
    typename Mlp<Scalar>::Cache mlp;
    MatX<Scalar> raw;
  };

  LocalField() = default;
  LocalField(const LocalFieldConfig& cfg, std::uint64_t seed);

  LocalFieldConfig config;
  HashGrid<Scalar> grid;
  Mlp<Scalar> mlp;

  int color_dim() const { return config.color_dim; }
  std::size_t parameter_count() const { return std::size_t(grid.table.size() + mlp.params.size()); }

  void eval_batch(const Mat3X<Scalar>& x_local, VecX<Scalar>& sigma, MatX<Scalar>& color,
                  BatchCache* cache = nullptr) const;
  FieldOutput<Scalar> eval(const Vec3<Scalar>& x_local) const;

  /// Accumulates into table-shaped `grad_grid` and mlp-shaped `grad_mlp`.
  void backward_batch(const Mat3X<Scalar>& x_local, const BatchCache& cache, const VecX<Scalar>& d_sigma,
                      const MatX<Scalar>& d_color, Scalar* grad_grid, Scalar* grad_mlp) const;

  template <typename Other>
  LocalField<Other> cast() const {
    LocalField<Other> out;
    out.config = config;
    out.grid = HashGrid<Other>(config.grid);
    out.grid.table = grid.table.template cast<Other>();
    out.mlp = Mlp<Other>(mlp.dims());
    out.mlp.params = mlp.params.template cast<Other>();
    return out;
  }
};

/// Residual calibrators mapping local (sigma, C) to scene-consistent values.
template <typename Scalar>
class CompositionParams {
 public:
  struct BatchCache {
    MatX<Scalar> features;
    typename Mlp<Scalar>::Cache density;
    MatX<Scalar> density_out;
    typename Mlp<Scalar>::Cache color;
    VecX<Scalar> pre_clamp;
  };

  CompositionParams() = default;
  CompositionParams(const CompositionConfig& cfg, std::uint64_t seed);

  CompositionConfig config;
  HashGrid<Scalar> grid;  // encodes x_g over the global frame
  Mlp<Scalar> density;    // -> (residual, h)
  Mlp<Scalar> color;      // -> color residual

  CompositionMode mode() const { return config.mode; }
  Scalar alpha_density() const { return Scalar(config.alpha_density); }
  Scalar alpha_color() const { return Scalar(config.alpha_color); }

  /// Re-initializes every calibrator with zeroed output layers (identity composition).
  void reset(std::uint64_t seed);

  /// Batched composition for samples sharing one ray direction.
  void compose_batch(const Mat3X<Scalar>& x_global, const Vec3<Scalar>& direction, const VecX<Scalar>& sigma_local,
                     const MatX<Scalar>& color_local, VecX<Scalar>& sigma_global, MatX<Scalar>& color_global,
                     BatchCache* cache = nullptr) const;

  /// d_sigma_local / d_color_local receive the pass-through terms (overwritten).
  void backward_batch(const Mat3X<Scalar>& x_global, const Vec3<Scalar>& direction, const BatchCache& cache,
                      const VecX<Scalar>& d_sigma_global, const MatX<Scalar>& d_color_global,
                      VecX<Scalar>& d_sigma_local, MatX<Scalar>& d_color_local, Scalar* grad_grid,
                      Scalar* grad_density, Scalar* grad_color) const;

  template <typename Other>
  CompositionParams<Other> cast() const {
    CompositionParams<Other> out;
    out.config = config;
    out.grid = HashGrid<Other>(config.grid);
    out.grid.table = grid.table.template cast<Other>();
    out.density = Mlp<Other>(density.dims());
    out.density.params = density.params.template cast<Other>();
    out.color = Mlp<Other>(color.dims());
    out.color.params = color.params.template cast<Other>();
    return out;
  }
};

template <typename Scalar>
struct DensityComposition {
  Scalar sigma = 0;
  VecX<Scalar> feature;  // h
};

/// sigma_g = max(0, alpha_d * residual(x_g) + sigma_l). Throws WrongMode in ColorBased mode.
template <typename Scalar>
DensityComposition<Scalar> compose_density(const CompositionParams<Scalar>& params, const Vec3<Scalar>& x_global,
                                           Scalar sigma_local);

/// C_g = alpha_c * calibrator(h, dir) + C_l. Throws WrongMode in ColorBased mode.
template <typename Scalar>
VecX<Scalar> compose_color(const CompositionParams<Scalar>& params, const VecX<Scalar>& feature,
                           const Vec3<Scalar>& direction, const VecX<Scalar>& color_local);

/// Density passes through; C_g = alpha_c * calibrator(x_g, dir) + C_l. Throws WrongMode in DensityBased mode.
template <typename Scalar>
std::pair<Scalar, VecX<Scalar>> compose_color_only(const CompositionParams<Scalar>& params,
                                                   const Vec3<Scalar>& x_global, const Vec3<Scalar>& direction,
                                                   Scalar sigma_local, const VecX<Scalar>& color_local);

}  // namespace componerf
