// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/geometry.hpp"
#include "componerf/scene.hpp"

namespace componerf {

template <typename Scalar>
struct RayAccumulation {
  VecX<Scalar> color;
  Scalar weight_sum = 0;
  Scalar final_transmittance = 1;
};

/// C = sum_k T_k (1 - exp(-sigma_k delta_k)) C_k + T_final * background, with
/// T_k = exp(-sum_{j<k} sigma_j delta_j). `colors` is c x n. Optionally
/// exposes per-sample weights and prefix transmittances.
template <typename Scalar>
RayAccumulation<Scalar> accumulate_ray(const VecX<Scalar>& sigma, const MatX<Scalar>& colors,
                                       const VecX<Scalar>& delta, const VecX<Scalar>& background,
                                       VecX<Scalar>* weights = nullptr, VecX<Scalar>* transmittance = nullptr);

/// Reverse of accumulate_ray. `d_color` is d(loss)/d(ray color); `d_weights`
/// (optional) is extra upstream on the per-sample weights. Adds into
/// d_sigma (n) and d_colors (c x n).
template <typename Scalar>
void accumulate_ray_backward(const VecX<Scalar>& sigma, const MatX<Scalar>& colors, const VecX<Scalar>& delta,
                             const VecX<Scalar>& background, const VecX<Scalar>& weights,
                             const VecX<Scalar>& transmittance, Scalar final_transmittance,
                             const VecX<Scalar>& d_color, const VecX<Scalar>* d_weights, VecX<Scalar>& d_sigma,
                             MatX<Scalar>& d_colors);

/// One node's samples along one ray, rendered with that node's own sample gaps.
template <typename Scalar>
RayAccumulation<Scalar> render_ray_local(std::span<const Sample<Scalar>> samples, const VecX<Scalar>& sigma,
                                         const MatX<Scalar>& colors, const VecX<Scalar>& background,
                                         Scalar delta_cap);

/// Merged samples along one ray with composited (sigma_g, C_g), using the
/// merged-sequence deltas stored in the samples.
template <typename Scalar>
RayAccumulation<Scalar> render_ray_global(std::span<const Sample<Scalar>> samples, const VecX<Scalar>& sigma,
                                          const MatX<Scalar>& colors, const VecX<Scalar>& background);

struct RenderOptions {
  SampleOptions sampling;
  std::vector<double> background;  // empty means zeros
  std::uint64_t seed = 0;          // base of the per-ray sampling streams
  bool deterministic = true;
  int chunks = 8;
  int threads = 0;  // 0 selects the hardware concurrency
};

enum class ViewKind { Global, Local };

struct ViewTag {
  ViewKind kind = ViewKind::Global;
  std::string node;

  static ViewTag global() { return {}; }
  static ViewTag local(std::string id) { return {ViewKind::Local, std::move(id)}; }
  bool operator==(const ViewTag&) const = default;
};

template <typename Scalar>
struct ImageBuffer {
  Image<Scalar> pixels;
  Image<Scalar> weight_sum;  // single channel
  ViewTag tag;
};

/// Which boxes are sampled and which views are produced from them.
struct ViewSelection {
  bool global = true;
  std::vector<std::size_t> locals;  // node indices rendered as local views
  std::vector<std::size_t> active;  // sampled boxes; empty means all

  static ViewSelection all(std::size_t n_nodes);
  static ViewSelection only_local(std::size_t node);
};

template <typename Scalar>
struct RenderedViews {
  std::optional<ImageBuffer<Scalar>> global;
  std::vector<ImageBuffer<Scalar>> locals;  // parallel to ViewSelection::locals
};

/// Saved forward state of one ray.
template <typename Scalar>
struct RayRecord {
  struct Group {
    std::size_t node = 0;
    std::vector<int> index;  // positions in the merged sequence
    Mat3X<Scalar> x_local;
    typename LocalField<Scalar>::BatchCache cache;
    VecX<Scalar> sigma;
    MatX<Scalar> color;
    int local_view = -1;  // slot in ViewSelection::locals, -1 when not rendered
    VecX<Scalar> delta;
    VecX<Scalar> weights;
    VecX<Scalar> transmittance;
    Scalar final_transmittance = 1;
  };

  std::size_t pixel = 0;
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();
  std::vector<Group> groups;
  Mat3X<Scalar> x_global;
  VecX<Scalar> delta;
  typename CompositionParams<Scalar>::BatchCache compose;
  VecX<Scalar> sigma;
  MatX<Scalar> color;
  VecX<Scalar> weights;
  VecX<Scalar> transmittance;
  Scalar final_transmittance = 1;
};

/// Everything backward needs from a forward render.
template <typename Scalar>
struct RenderTape {
  Camera camera;
  ViewSelection selection;
  RenderOptions options;
  int color_dim = 0;
  std::vector<RayRecord<Scalar>> rays;

  std::size_t local_sample_count() const;
  /// Per-sample weights of every rendered local view, in ray order.
  std::vector<Scalar> local_weights() const;
};

template <typename Scalar>
RenderedViews<Scalar> render_views(const SceneModel<Scalar>& scene, const Camera& camera,
                                   const RenderOptions& options, const ViewSelection& selection,
                                   RenderTape<Scalar>* tape = nullptr);

/// Stand-in for the learned local fields: fills (sigma, color) for the
/// box-local points of `node`.
template <typename Scalar>
using FieldOverride =
    std::function<void(std::size_t node, const Mat3X<Scalar>& x_local, VecX<Scalar>& sigma, MatX<Scalar>& color)>;

/// Forward-only render_views with the local fields replaced by `fields`.
template <typename Scalar>
RenderedViews<Scalar> render_views_with_fields(const SceneModel<Scalar>& scene, const Camera& camera,
                                               const RenderOptions& options, const ViewSelection& selection,
                                               const FieldOverride<Scalar>& fields);

template <typename Scalar>
ImageBuffer<Scalar> render_image(const SceneModel<Scalar>& scene, const Camera& camera, const RenderOptions& options,
                                 const ViewTag& view);

/// Upstream gradients for a taped render. Null images contribute nothing.
template <typename Scalar>
struct ViewGradients {
  const Image<Scalar>* global = nullptr;
  std::vector<const Image<Scalar>*> locals;  // parallel to the tape's locals
  Scalar global_scale = 1;
  Scalar local_scale = 1;
  Scalar sparsity_scale = 0;  // multiplies d(binary entropy)/d(w) of every local sample weight
};

/// Adds the parameter gradients of the weighted view objectives to `out`.
template <typename Scalar>
void backward(const SceneModel<Scalar>& scene, const RenderTape<Scalar>& tape, const ViewGradients<Scalar>& grads,
              GradientSet<Scalar>& out);

/// Gradient of <grad_image, global image> with respect to every parameter.
template <typename Scalar>
GradientSet<Scalar> backward_from_image_grad(const SceneModel<Scalar>& scene, const RenderTape<Scalar>& tape,
                                             const Image<Scalar>& grad_image);

/// Same viewing direction as `global`, moved in so the box fills a similar
/// share of the frame.
Camera object_centric_camera(const Camera& global, const Box3& box);

RenderOptions render_options_for(const TrainConfig& cfg, std::uint64_t seed, Sampling sampling);

}  // namespace componerf
