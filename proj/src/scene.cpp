// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/scene.hpp"

#include <cstdio>

#include "componerf/random.hpp"

namespace componerf {

std::uint64_t node_seed(std::uint64_t scene_seed, std::string_view node_id) {
  return stream_seed(scene_seed, 0x6e6f6465ULL, fnv1a(node_id));
}

std::uint64_t composition_seed(std::uint64_t scene_seed) { return stream_seed(scene_seed, 0x636f6d70ULL); }

std::string make_scene_id(const Layout& layout, std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene-%016llx",
                static_cast<unsigned long long>(stream_seed(seed, fnv1a(serialize_layout(layout)))));
  return buf;
}

template <typename Scalar>
SceneModel<Scalar> SceneModel<Scalar>::create(const Layout& layout, const SceneConfig& cfg) {
  check_layout(layout);
  if (cfg.field.color_dim != cfg.composition.color_dim) {
    throw Error(ErrorCode::ConfigError, "field and composition color dimensions differ");
  }
  SceneModel model;
  model.layout = layout;
  model.seed = layout.seed;
  model.scene_id = make_scene_id(layout, layout.seed);
  model.config = cfg.train;
  model.optimizer.config = cfg.train.adam;
  for (const Box3& b : layout.boxes) {
    SceneNode<Scalar> node;
    node.id = b.id;
    node.field = LocalField<Scalar>(cfg.field, node_seed(model.seed, b.id));
    node.provenance.source_scene = model.scene_id;
    node.provenance.prompt = b.prompt;
    model.nodes.push_back(std::move(node));
  }
  model.composition = CompositionParams<Scalar>(cfg.composition, composition_seed(model.seed));
  return model;
}

template <typename Scalar>
ColorSpace SceneModel<Scalar>::color_space() const {
  return nodes.empty() ? ColorSpace::Latent : nodes.front().field.config.color_space;
}

template <typename Scalar>
std::optional<std::size_t> SceneModel<Scalar>::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

template <typename Scalar>
std::vector<ParamBlock<Scalar>> SceneModel<Scalar>::parameters() {
  std::vector<ParamBlock<Scalar>> out;
  for (auto& n : nodes) {
    out.push_back({"node/" + n.id + "/grid", &n.field.grid.table});
    out.push_back({"node/" + n.id + "/mlp", &n.field.mlp.params});
  }
  out.push_back({"composition/grid", &composition.grid.table});
  out.push_back({"composition/density", &composition.density.params});
  out.push_back({"composition/color", &composition.color.params});
  return out;
}

template <typename Scalar>
GradientSet<Scalar> SceneModel<Scalar>::zero_gradients() const {
  return GradientSet<Scalar>::zeros_like(const_cast<SceneModel*>(this)->parameters());
}

template <typename Scalar>
void SceneModel<Scalar>::check_consistent() const {
  if (nodes.size() != layout.boxes.size()) {
    throw Error(ErrorCode::ValidationError, "scene nodes do not match the layout boxes");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != layout.boxes[i].id) {
      throw Error(ErrorCode::ValidationError, "scene node '" + nodes[i].id + "' does not match box '" +
                                                  layout.boxes[i].id + "'");
    }
    if (nodes[i].field.color_dim() != composition.config.color_dim) {
      throw Error(ErrorCode::ValidationError, "node '" + nodes[i].id + "' color dimension differs from the scene");
    }
  }
}

template class SceneModel<float>;
template class SceneModel<double>;

}  // namespace componerf
