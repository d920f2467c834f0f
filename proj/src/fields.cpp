// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/fields.hpp"

#include <cmath>
#include <string>

namespace componerf {

namespace {

std::vector<int> calibrator_dims(int in, int hidden, int depth, int out) {
  std::vector<int> dims{in};
  for (int i = 0; i + 1 < depth; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

}  // namespace

void check_hash_grid_config(const HashGridConfig& cfg) {
  if (cfg.levels < 1) bad_config("hash grid needs at least one level");
  if (cfg.features < 1) bad_config("hash grid needs at least one feature per level");
  if (cfg.coarsest < 2 || cfg.finest < cfg.coarsest) bad_config("hash grid requires finest >= coarsest >= 2");
  if (cfg.table_size == 0 || (cfg.table_size & (cfg.table_size - 1)) != 0) {
    bad_config("hash table size must be a power of two");
  }
}

std::vector<int> hash_grid_resolutions(const HashGridConfig& cfg) {
  std::vector<int> res(std::size_t(std::max(cfg.levels, 0)));
  if (res.empty()) return res;
  const double growth =
      cfg.levels > 1 ? std::exp((std::log(double(cfg.finest)) - std::log(double(cfg.coarsest))) / (cfg.levels - 1))
                     : 1.0;
  for (int l = 0; l < cfg.levels; ++l) {
    res[l] = int(std::floor(cfg.coarsest * std::pow(growth, l) + 1e-9));
  }
  res.back() = cfg.levels > 1 ? cfg.finest : cfg.coarsest;
  return res;
}

void check_local_field_config(const LocalFieldConfig& cfg) {
  check_hash_grid_config(cfg.grid);
  if (cfg.hidden_width < 1 || cfg.hidden_layers < 0) bad_config("local MLP needs positive width");
  if (cfg.color_dim < 1) bad_config("color dimension must be positive");
  if (cfg.color_space == ColorSpace::Rgb && cfg.color_dim != 3) bad_config("RGB fields need color_dim = 3");
}

void check_composition_config(const CompositionConfig& cfg) {
  check_hash_grid_config(cfg.grid);
  if (cfg.depth != 4 && cfg.depth != 6) bad_config("calibrator depth must be 4 or 6");
  if (cfg.hidden_width < 1 || cfg.feature_dim < 1 || cfg.color_dim < 1) bad_config("calibrator sizes must be positive");
  if (cfg.alpha_density < 0 || cfg.alpha_color < 0) bad_config("composition alphas must be non-negative");
}

template <typename Scalar>
LocalField<Scalar>::LocalField(const LocalFieldConfig& cfg, std::uint64_t seed) : config(cfg), grid(cfg.grid) {
  check_local_field_config(cfg);
  std::vector<int> dims{cfg.grid.output_dim()};
  for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.hidden_width);
  dims.push_back(1 + cfg.color_dim);
  mlp = Mlp<Scalar>(dims);
  Rng grid_rng(stream_seed(seed, 1));
  grid.init_uniform(grid_rng);
  Rng mlp_rng(stream_seed(seed, 2));
  mlp.init(mlp_rng, false);
}

template <typename Scalar>
void LocalField<Scalar>::eval_batch(const Mat3X<Scalar>& x_local, VecX<Scalar>& sigma, MatX<Scalar>& color,
                                    BatchCache* cache) const {
  const Eigen::Index n = x_local.cols();
  MatX<Scalar> raw = mlp.forward(grid.encode_batch(x_local), cache ? &cache->mlp : nullptr);
  const Scalar bias = Scalar(config.density_bias);
  sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma[i] = softplus(raw(0, i) + bias);
  color = raw.bottomRows(config.color_dim);
  if (config.color_space == ColorSpace::Rgb) color = color.unaryExpr([](Scalar v) { return sigmoid(v); });
  if (cache) cache->raw = std::move(raw);
}

template <typename Scalar>
FieldOutput<Scalar> LocalField<Scalar>::eval(const Vec3<Scalar>& x_local) const {
  Mat3X<Scalar> x(3, 1);
  x.col(0) = x_local;
  VecX<Scalar> sigma;
  MatX<Scalar> color;
  eval_batch(x, sigma, color);
  return {sigma[0], color.col(0)};
}

template <typename Scalar>
void LocalField<Scalar>::backward_batch(const Mat3X<Scalar>& x_local, const BatchCache& cache,
                                        const VecX<Scalar>& d_sigma, const MatX<Scalar>& d_color, Scalar* grad_grid,
                                        Scalar* grad_mlp) const {
  const Eigen::Index n = x_local.cols();
  const Scalar bias = Scalar(config.density_bias);
  MatX<Scalar> d_raw(1 + config.color_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) d_raw(0, i) = d_sigma[i] * sigmoid(cache.raw(0, i) + bias);
  if (config.color_space == ColorSpace::Rgb) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < config.color_dim; ++c) {
        const Scalar s = sigmoid(cache.raw(1 + c, i));
        d_raw(1 + c, i) = d_color(c, i) * s * (Scalar(1) - s);
      }
    }
  } else {
    d_raw.bottomRows(config.color_dim) = d_color;
  }
  MatX<Scalar> d_features;
  mlp.backward(cache.mlp, d_raw, grad_mlp, &d_features);
  grid.backward_batch(x_local, d_features, grad_grid);
}

template <typename Scalar>
CompositionParams<Scalar>::CompositionParams(const CompositionConfig& cfg, std::uint64_t seed) : config(cfg) {
  check_composition_config(cfg);
  reset(seed);
}

template <typename Scalar>
void CompositionParams<Scalar>::reset(std::uint64_t seed) {
  const CompositionConfig& cfg = config;
  grid = HashGrid<Scalar>(cfg.grid);
  Rng grid_rng(stream_seed(seed, 11));
  grid.init_uniform(grid_rng);
  density = Mlp<Scalar>(calibrator_dims(cfg.grid.output_dim(), cfg.hidden_width, cfg.depth, 1 + cfg.feature_dim));
  Rng density_rng(stream_seed(seed, 12));
  density.init(density_rng, true);
  const int color_in =
      (cfg.mode == CompositionMode::DensityBased ? cfg.feature_dim : cfg.grid.output_dim()) + kDirectionEncodingDim;
  color = Mlp<Scalar>(calibrator_dims(color_in, cfg.hidden_width, cfg.depth, cfg.color_dim));
  Rng color_rng(stream_seed(seed, 13));
  color.init(color_rng, true);
}

template <typename Scalar>
void CompositionParams<Scalar>::compose_batch(const Mat3X<Scalar>& x_global, const Vec3<Scalar>& direction,
                                              const VecX<Scalar>& sigma_local, const MatX<Scalar>& color_local,
                                              VecX<Scalar>& sigma_global, MatX<Scalar>& color_global,
                                              BatchCache* cache) const {
  const Eigen::Index n = x_global.cols();
  const auto dir = encode_direction<Scalar>(direction);
  MatX<Scalar> features = grid.encode_batch(x_global);
  MatX<Scalar> color_in;
  if (config.mode == CompositionMode::DensityBased) {
    MatX<Scalar> out = density.forward(features, cache ? &cache->density : nullptr);
    VecX<Scalar> pre = alpha_density() * out.row(0).transpose() + sigma_local;
    sigma_global = pre.cwiseMax(Scalar(0));
    color_in.resize(config.feature_dim + kDirectionEncodingDim, n);
    color_in.topRows(config.feature_dim) = out.bottomRows(config.feature_dim);
    if (cache) {
      cache->pre_clamp = std::move(pre);
      cache->density_out = std::move(out);
    }
  } else {
    sigma_global = sigma_local;
    color_in.resize(features.rows() + kDirectionEncodingDim, n);
    color_in.topRows(features.rows()) = features;
  }
  color_in.bottomRows(kDirectionEncodingDim) = dir.replicate(1, n);
  const MatX<Scalar> residual = color.forward(color_in, cache ? &cache->color : nullptr);
  color_global = alpha_color() * residual + color_local;
}

template <typename Scalar>
void CompositionParams<Scalar>::backward_batch(const Mat3X<Scalar>& x_global, const Vec3<Scalar>& /*direction*/,
                                               const BatchCache& cache, const VecX<Scalar>& d_sigma_global,
                                               const MatX<Scalar>& d_color_global, VecX<Scalar>& d_sigma_local,
                                               MatX<Scalar>& d_color_local, Scalar* grad_grid, Scalar* grad_density,
                                               Scalar* grad_color) const {
  const Eigen::Index n = x_global.cols();
  d_color_local = d_color_global;
  MatX<Scalar> d_color_in;
  color.backward(cache.color, alpha_color() * d_color_global, grad_color, &d_color_in);
  MatX<Scalar> d_features;
  if (config.mode == CompositionMode::DensityBased) {
    d_sigma_local.resize(n);
    MatX<Scalar> d_out(1 + config.feature_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar pass = cache.pre_clamp[i] > Scalar(0) ? d_sigma_global[i] : Scalar(0);
      d_sigma_local[i] = pass;
      d_out(0, i) = alpha_density() * pass;
    }
    d_out.bottomRows(config.feature_dim) = d_color_in.topRows(config.feature_dim);
    density.backward(cache.density, d_out, grad_density, &d_features);
  } else {
    d_sigma_local = d_sigma_global;
    d_features = d_color_in.topRows(grid.output_dim());
  }
  grid.backward_batch(x_global, d_features, grad_grid);
}

template <typename Scalar>
DensityComposition<Scalar> compose_density(const CompositionParams<Scalar>& params, const Vec3<Scalar>& x_global,
                                           Scalar sigma_local) {
  if (params.mode() != CompositionMode::DensityBased) {
    throw Error(ErrorCode::WrongMode, "compose_density requires density-based composition");
  }
  const MatX<Scalar> features = params.grid.encode_batch(Mat3X<Scalar>(x_global));
  const MatX<Scalar> out = params.density.forward(features);
  DensityComposition<Scalar> result;
  result.sigma = std::max(Scalar(0), params.alpha_density() * out(0, 0) + sigma_local);
  result.feature = out.col(0).tail(params.config.feature_dim);
  return result;
}

template <typename Scalar>
VecX<Scalar> compose_color(const CompositionParams<Scalar>& params, const VecX<Scalar>& feature,
                           const Vec3<Scalar>& direction, const VecX<Scalar>& color_local) {
  if (params.mode() != CompositionMode::DensityBased) {
    throw Error(ErrorCode::WrongMode, "compose_color requires density-based composition");
  }
  MatX<Scalar> in(feature.size() + kDirectionEncodingDim, 1);
  in.col(0) << feature, encode_direction<Scalar>(direction);
  return params.alpha_color() * params.color.forward(in).col(0) + color_local;
}

template <typename Scalar>
std::pair<Scalar, VecX<Scalar>> compose_color_only(const CompositionParams<Scalar>& params,
                                                   const Vec3<Scalar>& x_global, const Vec3<Scalar>& direction,
                                                   Scalar sigma_local, const VecX<Scalar>& color_local) {
  if (params.mode() != CompositionMode::ColorBased) {
    throw Error(ErrorCode::WrongMode, "compose_color_only requires color-based composition");
  }
  const VecX<Scalar> features = params.grid.encode(x_global);
  MatX<Scalar> in(features.size() + kDirectionEncodingDim, 1);
  in.col(0) << features, encode_direction<Scalar>(direction);
  return {sigma_local, params.alpha_color() * params.color.forward(in).col(0) + color_local};
}

#define COMPONERF_INSTANTIATE(S)                                                                              \
  template class LocalField<S>;                                                                               \
  template class CompositionParams<S>;                                                                        \
  template DensityComposition<S> compose_density(const CompositionParams<S>&, const Vec3<S>&, S);             \
  template VecX<S> compose_color(const CompositionParams<S>&, const VecX<S>&, const Vec3<S>&, const VecX<S>&); \
  template std::pair<S, VecX<S>> compose_color_only(const CompositionParams<S>&, const Vec3<S>&, const Vec3<S>&, \
                                                    S, const VecX<S>&);

COMPONERF_INSTANTIATE(float)
COMPONERF_INSTANTIATE(double)
#undef COMPONERF_INSTANTIATE

}  // namespace componerf
