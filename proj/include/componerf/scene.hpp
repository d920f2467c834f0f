// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/fields.hpp"
#include "componerf/layout.hpp"
#include "componerf/optim.hpp"

namespace componerf {

enum class LocalViewMode { SharedCamera, ObjectCentric };

struct TrainConfig {
  std::uint64_t steps = 5000;
  int resolution = 64;
  int n_per_box = 64;
  LossWeights weights;
  AdamConfig adam;
  double delta_cap = 1e10;
  std::vector<double> background;  // empty means zeros
  bool train_composition = true;
  bool deterministic = true;
  int reduction_chunks = 8;
  LocalViewMode local_view = LocalViewMode::SharedCamera;
  std::map<std::string, std::uint64_t> freeze_after;  // node id -> last trained step
  CameraSampling cameras;
  std::optional<int> pinned_noise_level;

  bool operator==(const TrainConfig&) const = default;
};

struct SceneConfig {
  LocalFieldConfig field;
  CompositionConfig composition;
  TrainConfig train;
};

struct NodeProvenance {
  std::string source_scene;
  std::string prompt;
  std::uint64_t training_steps = 0;
  bool from_cache = false;
};

template <typename Scalar>
struct SceneNode {
  std::string id;
  LocalField<Scalar> field;
  NodeProvenance provenance;
};

/// Trainable state of a composed scene. nodes[i] belongs to layout.boxes[i].
template <typename Scalar>
class SceneModel {
 public:
  std::string scene_id;
  Layout layout;
  std::vector<SceneNode<Scalar>> nodes;
  CompositionParams<Scalar> composition;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t skipped_steps = 0;
  AdamState<Scalar> optimizer;

  /// Fresh fields for every box, identity composition. Field initialization
  /// depends only on (seed, box id), so box order does not matter.
  static SceneModel create(const Layout& layout, const SceneConfig& cfg);

  int color_dim() const { return composition.config.color_dim; }
  ColorSpace color_space() const;
  std::optional<std::size_t> node_index(std::string_view id) const;

  /// Registry order: per node (grid, mlp), then composition (grid, density, color).
  std::vector<ParamBlock<Scalar>> parameters();
  GradientSet<Scalar> zero_gradients() const;

  static std::size_t node_grid_block(std::size_t node) { return 2 * node; }
  static std::size_t node_mlp_block(std::size_t node) { return 2 * node + 1; }
  std::size_t composition_grid_block() const { return 2 * nodes.size(); }
  std::size_t composition_density_block() const { return 2 * nodes.size() + 1; }
  std::size_t composition_color_block() const { return 2 * nodes.size() + 2; }

  /// Throws ValidationError unless node ids match the layout's box ids in order.
  void check_consistent() const;

  template <typename Other>
  SceneModel<Other> cast() const {
    SceneModel<Other> out;
    out.scene_id = scene_id;
    out.layout = layout;
    for (const auto& n : nodes) out.nodes.push_back({n.id, n.field.template cast<Other>(), n.provenance});
    out.composition = composition.template cast<Other>();
    out.config = config;
    out.seed = seed;
    out.step = step;
    out.skipped_steps = skipped_steps;
    out.optimizer.config = optimizer.config;
    out.optimizer.step = optimizer.step;
    for (const auto& m : optimizer.first) out.optimizer.first.push_back(m.template cast<Other>());
    for (const auto& v : optimizer.second) out.optimizer.second.push_back(v.template cast<Other>());
    return out;
  }
};

std::uint64_t node_seed(std::uint64_t scene_seed, std::string_view node_id);
std::uint64_t composition_seed(std::uint64_t scene_seed);
std::string make_scene_id(const Layout& layout, std::uint64_t seed);

}  // namespace componerf
