// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/config_io.hpp"

#include "componerf/error.hpp"

namespace componerf {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

const char* mode_name(CompositionMode m) { return m == CompositionMode::DensityBased ? "density" : "color"; }
const char* space_name(ColorSpace s) { return s == ColorSpace::Latent ? "latent" : "rgb"; }
const char* view_name(LocalViewMode m) { return m == LocalViewMode::SharedCamera ? "shared" : "object_centric"; }

}  // namespace

void to_json(json& j, const HashGridConfig& c) {
  j = {{"levels", c.levels},
       {"features", c.features},
       {"coarsest", c.coarsest},
       {"finest", c.finest},
       {"table_size", c.table_size}};
}

void from_json(const json& j, HashGridConfig& c) {
  read(j, "levels", c.levels);
  read(j, "features", c.features);
  read(j, "coarsest", c.coarsest);
  read(j, "finest", c.finest);
  read(j, "table_size", c.table_size);
}

void to_json(json& j, const LocalFieldConfig& c) {
  j = {{"grid", c.grid},
       {"hidden_width", c.hidden_width},
       {"hidden_layers", c.hidden_layers},
       {"color_dim", c.color_dim},
       {"color_space", space_name(c.color_space)},
       {"density_bias", c.density_bias}};
}

void from_json(const json& j, LocalFieldConfig& c) {
  read(j, "grid", c.grid);
  read(j, "hidden_width", c.hidden_width);
  read(j, "hidden_layers", c.hidden_layers);
  read(j, "color_dim", c.color_dim);
  read(j, "density_bias", c.density_bias);
  if (j.contains("color_space")) {
    const std::string s = j.at("color_space").get<std::string>();
    if (s == "latent") {
      c.color_space = ColorSpace::Latent;
    } else if (s == "rgb") {
      c.color_space = ColorSpace::Rgb;
    } else {
      throw Error(ErrorCode::ConfigError, "color_space must be 'latent' or 'rgb', got '" + s + "'");
    }
  }
}

void to_json(json& j, const CompositionConfig& c) {
  j = {{"mode", mode_name(c.mode)},
       {"alpha_density", c.alpha_density},
       {"alpha_color", c.alpha_color},
       {"depth", c.depth},
       {"hidden_width", c.hidden_width},
       {"feature_dim", c.feature_dim},
       {"color_dim", c.color_dim},
       {"grid", c.grid}};
}

void from_json(const json& j, CompositionConfig& c) {
  if (j.contains("mode")) {
    const std::string s = j.at("mode").get<std::string>();
    if (s == "density") {
      c.mode = CompositionMode::DensityBased;
    } else if (s == "color") {
      c.mode = CompositionMode::ColorBased;
    } else {
      throw Error(ErrorCode::ConfigError, "mode must be 'density' or 'color', got '" + s + "'");
    }
  }
  read(j, "alpha_density", c.alpha_density);
  read(j, "alpha_color", c.alpha_color);
  read(j, "depth", c.depth);
  read(j, "hidden_width", c.hidden_width);
  read(j, "feature_dim", c.feature_dim);
  read(j, "color_dim", c.color_dim);
  read(j, "grid", c.grid);
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},
       {"resolution", c.resolution},
       {"n_per_box", c.n_per_box},
       {"alpha_global", c.weights.alpha_global},
       {"alpha_local", c.weights.alpha_local},
       {"beta", c.weights.beta},
       {"lr", c.adam.lr},
       {"beta1", c.adam.beta1},
       {"beta2", c.adam.beta2},
       {"eps", c.adam.eps},
       {"delta_cap", c.delta_cap},
       {"background", c.background},
       {"train_composition", c.train_composition},
       {"deterministic", c.deterministic},
       {"reduction_chunks", c.reduction_chunks},
       {"local_view", view_name(c.local_view)},
       {"freeze_after", c.freeze_after},
       {"radius_min", c.cameras.radius_min},
       {"radius_max", c.cameras.radius_max},
       {"fov_min", c.cameras.fov_min_deg},
       {"fov_max", c.cameras.fov_max_deg},
       {"test_fov", c.cameras.test_fov_deg}};
  j["noise_level"] = c.pinned_noise_level ? json(*c.pinned_noise_level) : json(nullptr);
}

void from_json(const json& j, TrainConfig& c) {
  read(j, "steps", c.steps);
  read(j, "resolution", c.resolution);
  read(j, "n_per_box", c.n_per_box);
  read(j, "alpha_global", c.weights.alpha_global);
  read(j, "alpha_local", c.weights.alpha_local);
  read(j, "beta", c.weights.beta);
  read(j, "lr", c.adam.lr);
  read(j, "beta1", c.adam.beta1);
  read(j, "beta2", c.adam.beta2);
  read(j, "eps", c.adam.eps);
  read(j, "delta_cap", c.delta_cap);
  read(j, "background", c.background);
  read(j, "train_composition", c.train_composition);
  read(j, "deterministic", c.deterministic);
  read(j, "reduction_chunks", c.reduction_chunks);
  read(j, "freeze_after", c.freeze_after);
  read(j, "radius_min", c.cameras.radius_min);
  read(j, "radius_max", c.cameras.radius_max);
  read(j, "fov_min", c.cameras.fov_min_deg);
  read(j, "fov_max", c.cameras.fov_max_deg);
  read(j, "test_fov", c.cameras.test_fov_deg);
  if (j.contains("local_view")) {
    const std::string s = j.at("local_view").get<std::string>();
    if (s == "shared") {
      c.local_view = LocalViewMode::SharedCamera;
    } else if (s == "object_centric") {
      c.local_view = LocalViewMode::ObjectCentric;
    } else {
      throw Error(ErrorCode::ConfigError, "local_view must be 'shared' or 'object_centric', got '" + s + "'");
    }
  }
  if (j.contains("noise_level")) {
    const json& t = j.at("noise_level");
    c.pinned_noise_level = t.is_null() ? std::nullopt : std::optional<int>(t.get<int>());
  }
  if (c.resolution <= 0 || c.n_per_box <= 0 || c.reduction_chunks <= 0) {
    throw Error(ErrorCode::ConfigError, "resolution, n_per_box and reduction_chunks must be positive");
  }
  if (c.adam.lr <= 0) throw Error(ErrorCode::ConfigError, "lr must be positive");
}

void to_json(json& j, const SceneConfig& c) {
  j = {{"field", c.field}, {"composition", c.composition}, {"train", c.train}};
}

void from_json(const json& j, SceneConfig& c) {
  read(j, "field", c.field);
  read(j, "composition", c.composition);
  read(j, "train", c.train);
}

void to_json(json& j, const NodeProvenance& p) {
  j = {{"source_scene", p.source_scene},
       {"prompt", p.prompt},
       {"training_steps", p.training_steps},
       {"from_cache", p.from_cache}};
}

void from_json(const json& j, NodeProvenance& p) {
  read(j, "source_scene", p.source_scene);
  read(j, "prompt", p.prompt);
  read(j, "training_steps", p.training_steps);
  read(j, "from_cache", p.from_cache);
}

SceneConfig parse_scene_config(const json& j) {
  try {
    SceneConfig c = j.get<SceneConfig>();
    check_local_field_config(c.field);
    check_composition_config(c.composition);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
}

}  // namespace componerf
