// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/render.hpp"

#include <algorithm>
#include <cmath>

#include "componerf/parallel.hpp"

namespace componerf {

template <typename Scalar>
RayAccumulation<Scalar> accumulate_ray(const VecX<Scalar>& sigma, const MatX<Scalar>& colors,
                                       const VecX<Scalar>& delta, const VecX<Scalar>& background,
                                       VecX<Scalar>* weights, VecX<Scalar>* transmittance) {
  const Eigen::Index n = sigma.size();
  RayAccumulation<Scalar> out;
  out.color = VecX<Scalar>::Zero(background.size());
  if (weights) weights->resize(n);
  if (transmittance) transmittance->resize(n);
  Scalar optical_depth = 0;
  Scalar trans = 1;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar tau = sigma[k] * delta[k];
    const Scalar alpha = -std::expm1(-tau);
    const Scalar w = trans * alpha;
    out.color += w * colors.col(k);
    out.weight_sum += w;
    if (weights) (*weights)[k] = w;
    if (transmittance) (*transmittance)[k] = trans;
    optical_depth += tau;
    trans = std::exp(-optical_depth);
  }
  out.final_transmittance = trans;
  out.color += trans * background;
  return out;
}

template <typename Scalar>
void accumulate_ray_backward(const VecX<Scalar>& sigma, const MatX<Scalar>& colors, const VecX<Scalar>& delta,
                             const VecX<Scalar>& background, const VecX<Scalar>& weights,
                             const VecX<Scalar>& transmittance, Scalar final_transmittance,
                             const VecX<Scalar>& d_color, const VecX<Scalar>* d_weights, VecX<Scalar>& d_sigma,
                             MatX<Scalar>& d_colors) {
  const Eigen::Index n = sigma.size();
  const bool has_color = d_color.size() > 0;
  // dL/dw_k, and dL/dT_final through the background term.
  const Scalar d_final = has_color ? d_color.dot(background) : Scalar(0);
  Scalar suffix = 0;  // sum_{j>k} a_j w_j
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    Scalar a = d_weights ? (*d_weights)[k] : Scalar(0);
    if (has_color) {
      a += d_color.dot(colors.col(k));
      d_colors.col(k) += weights[k] * d_color;
    }
    const Scalar trans_next = k + 1 < n ? transmittance[k + 1] : final_transmittance;
    const Scalar g = a * trans_next - suffix - d_final * final_transmittance;
    // delta * 0 stays 0 even for the capped final gap.
    if (g != Scalar(0)) d_sigma[k] += delta[k] * g;
    (void)sigma;
    suffix += a * weights[k];
  }
}

template <typename Scalar>
RayAccumulation<Scalar> render_ray_local(std::span<const Sample<Scalar>> samples, const VecX<Scalar>& sigma,
                                         const MatX<Scalar>& colors, const VecX<Scalar>& background,
                                         Scalar delta_cap) {
  VecX<Scalar> delta(Eigen::Index(samples.size()));
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) delta[Eigen::Index(k)] = samples[k + 1].t - samples[k].t;
  if (!samples.empty()) delta[Eigen::Index(samples.size() - 1)] = delta_cap;
  return accumulate_ray(sigma, colors, delta, background);
}

template <typename Scalar>
RayAccumulation<Scalar> render_ray_global(std::span<const Sample<Scalar>> samples, const VecX<Scalar>& sigma,
                                          const MatX<Scalar>& colors, const VecX<Scalar>& background) {
  VecX<Scalar> delta(Eigen::Index(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) delta[Eigen::Index(k)] = samples[k].delta;
  return accumulate_ray(sigma, colors, delta, background);
}

ViewSelection ViewSelection::all(std::size_t n_nodes) {
  ViewSelection s;
  s.global = true;
  for (std::size_t i = 0; i < n_nodes; ++i) s.locals.push_back(i);
  return s;
}

ViewSelection ViewSelection::only_local(std::size_t node) {
  ViewSelection s;
  s.global = false;
  s.locals = {node};
  s.active = {node};
  return s;
}

template <typename Scalar>
std::size_t RenderTape<Scalar>::local_sample_count() const {
  std::size_t n = 0;
  for (const auto& r : rays)
    for (const auto& g : r.groups)
      if (g.local_view >= 0) n += g.index.size();
  return n;
}

template <typename Scalar>
std::vector<Scalar> RenderTape<Scalar>::local_weights() const {
  std::vector<Scalar> out;
  for (const auto& r : rays)
    for (const auto& g : r.groups)
      if (g.local_view >= 0) out.insert(out.end(), g.weights.data(), g.weights.data() + g.weights.size());
  return out;
}

namespace {

template <typename Scalar>
VecX<Scalar> background_vector(const std::vector<double>& bg, int color_dim) {
  VecX<Scalar> out = VecX<Scalar>::Zero(color_dim);
  if (bg.empty()) return out;
  if (int(bg.size()) != color_dim) throw Error(ErrorCode::ShapeMismatch, "background has wrong channel count");
  for (int c = 0; c < color_dim; ++c) out[c] = Scalar(bg[std::size_t(c)]);
  return out;
}

struct PixelViews {
  bool global = false;
  std::vector<int> local_slot_of_node;  // node -> slot or -1
};

// Forward pass for one ray. Fills the record when taping; otherwise only the
// pixel outputs are produced.
template <typename Scalar>
void trace_ray(const SceneModel<Scalar>& scene, std::span<const BoxFrame<Scalar>> boxes, const Ray<Scalar>& ray,
               const RenderOptions& options, const PixelViews& views, const VecX<Scalar>& background,
               RayRecord<Scalar>& rec, bool keep_cache, std::vector<Sample<Scalar>>& samples,
               RayAccumulation<Scalar>* global_out, std::vector<RayAccumulation<Scalar>>& local_out,
               const FieldOverride<Scalar>* fields) {
  build_ray_samples<Scalar>(boxes, ray, options.sampling, ray_stream(options.seed, ray.row, ray.col), samples);
  const int c = scene.color_dim();
  const Eigen::Index n = Eigen::Index(samples.size());
  rec.direction = ray.direction;
  rec.groups.clear();

  std::vector<int> group_of_node(scene.nodes.size(), -1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t node = samples[std::size_t(k)].node;
    if (group_of_node[node] < 0) {
      group_of_node[node] = int(rec.groups.size());
      rec.groups.emplace_back();
      rec.groups.back().node = node;
    }
    rec.groups[std::size_t(group_of_node[node])].index.push_back(int(k));
  }

  VecX<Scalar> sigma_local(n);
  MatX<Scalar> color_local(c, n);
  for (auto& g : rec.groups) {
    const Eigen::Index m = Eigen::Index(g.index.size());
    g.x_local.resize(3, m);
    for (Eigen::Index i = 0; i < m; ++i) g.x_local.col(i) = samples[std::size_t(g.index[std::size_t(i)])].x_local;
    if (fields) {
      (*fields)(g.node, g.x_local, g.sigma, g.color);
    } else {
      scene.nodes[g.node].field.eval_batch(g.x_local, g.sigma, g.color, keep_cache ? &g.cache : nullptr);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      sigma_local[g.index[std::size_t(i)]] = g.sigma[i];
      color_local.col(g.index[std::size_t(i)]) = g.color.col(i);
    }
    g.local_view = views.local_slot_of_node.empty() ? -1 : views.local_slot_of_node[g.node];
    if (g.local_view >= 0) {
      g.delta.resize(m);
      for (Eigen::Index i = 0; i + 1 < m; ++i) {
        g.delta[i] = samples[std::size_t(g.index[std::size_t(i + 1)])].t - samples[std::size_t(g.index[std::size_t(i)])].t;
      }
      if (m > 0) g.delta[m - 1] = Scalar(options.sampling.delta_cap);
      auto acc = accumulate_ray(g.sigma, g.color, g.delta, background, &g.weights, &g.transmittance);
      g.final_transmittance = acc.final_transmittance;
      local_out[std::size_t(g.local_view)] = std::move(acc);
    }
  }

  if (views.global) {
    rec.x_global.resize(3, n);
    rec.delta.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      rec.x_global.col(k) = samples[std::size_t(k)].x_global;
      rec.delta[k] = samples[std::size_t(k)].delta;
    }
    if (n > 0) {
      scene.composition.compose_batch(rec.x_global, ray.direction, sigma_local, color_local, rec.sigma, rec.color,
                                      keep_cache ? &rec.compose : nullptr);
    } else {
      rec.sigma.resize(0);
      rec.color.resize(c, 0);
    }
    auto acc = accumulate_ray(rec.sigma, rec.color, rec.delta, background, &rec.weights, &rec.transmittance);
    rec.final_transmittance = acc.final_transmittance;
    *global_out = std::move(acc);
  }
}

template <typename Scalar>
void write_pixel(ImageBuffer<Scalar>& img, std::size_t pixel, const RayAccumulation<Scalar>& acc) {
  const int c = img.pixels.channels;
  for (int ch = 0; ch < c; ++ch) img.pixels.data[Eigen::Index(pixel * std::size_t(c) + std::size_t(ch))] = acc.color[ch];
  img.weight_sum.data[Eigen::Index(pixel)] = acc.weight_sum;
}

template <typename Scalar>
RenderedViews<Scalar> render_views_impl(const SceneModel<Scalar>& scene, const Camera& camera,
                                        const RenderOptions& options, const ViewSelection& selection,
                                        RenderTape<Scalar>* tape, const FieldOverride<Scalar>* fields) {
  scene.check_consistent();
  const std::size_t n_nodes = scene.nodes.size();
  const int c = scene.color_dim();
  const VecX<Scalar> background = background_vector<Scalar>(options.background, c);

  std::vector<BoxFrame<Scalar>> frames;
  for (const auto& f : make_box_frames<Scalar>(scene.layout)) {
    const bool active = selection.active.empty() ||
                        std::find(selection.active.begin(), selection.active.end(), f.node) != selection.active.end();
    if (active) frames.push_back(f);
  }

  PixelViews views;
  views.global = selection.global;
  views.local_slot_of_node.assign(n_nodes, -1);
  for (std::size_t s = 0; s < selection.locals.size(); ++s) {
    if (selection.locals[s] >= n_nodes) throw Error(ErrorCode::UnknownTarget, "local view of unknown node");
    views.local_slot_of_node[selection.locals[s]] = int(s);
  }

  RenderedViews<Scalar> out;
  auto blank = [&](ViewTag tag) {
    ImageBuffer<Scalar> b;
    b.pixels = Image<Scalar>(camera.height, camera.width, c);
    b.weight_sum = Image<Scalar>(camera.height, camera.width, 1);
    b.tag = std::move(tag);
    return b;
  };
  if (selection.global) out.global = blank(ViewTag::global());
  for (std::size_t node : selection.locals) out.locals.push_back(blank(ViewTag::local(scene.nodes[node].id)));

  const auto rays = camera_rays<Scalar>(camera);
  if (tape) {
    tape->camera = camera;
    tape->selection = selection;
    tape->options = options;
    tape->color_dim = c;
    tape->rays.assign(rays.size(), RayRecord<Scalar>{});
  }

  const std::size_t chunks = std::size_t(std::max(1, options.chunks));
  const int threads = options.threads > 0 ? options.threads : default_thread_count();
  parallel_tasks(chunks, threads, [&](std::size_t chunk, int) {
    const auto [begin, end] = chunk_range(rays.size(), chunks, chunk);
    std::vector<Sample<Scalar>> samples;
    RayRecord<Scalar> scratch;
    RayAccumulation<Scalar> global_acc;
    std::vector<RayAccumulation<Scalar>> local_acc(selection.locals.size());
    for (std::size_t p = begin; p < end; ++p) {
      for (auto& l : local_acc) {
        l.color = background;
        l.weight_sum = 0;
        l.final_transmittance = 1;
      }
      RayRecord<Scalar>& rec = tape ? tape->rays[p] : scratch;
      rec.pixel = p;
      trace_ray<Scalar>(scene, frames, rays[p], options, views, background, rec, tape != nullptr, samples, &global_acc,
                local_acc, fields);
      if (out.global) write_pixel(*out.global, p, global_acc);
      for (std::size_t s = 0; s < local_acc.size(); ++s) write_pixel(out.locals[s], p, local_acc[s]);
    }
  });
  return out;
}

}  // namespace

template <typename Scalar>
RenderedViews<Scalar> render_views(const SceneModel<Scalar>& scene, const Camera& camera,
                                   const RenderOptions& options, const ViewSelection& selection,
                                   RenderTape<Scalar>* tape) {
  return render_views_impl<Scalar>(scene, camera, options, selection, tape, nullptr);
}

template <typename Scalar>
RenderedViews<Scalar> render_views_with_fields(const SceneModel<Scalar>& scene, const Camera& camera,
                                               const RenderOptions& options, const ViewSelection& selection,
                                               const FieldOverride<Scalar>& fields) {
  return render_views_impl<Scalar>(scene, camera, options, selection, nullptr, &fields);
}

template <typename Scalar>
ImageBuffer<Scalar> render_image(const SceneModel<Scalar>& scene, const Camera& camera, const RenderOptions& options,
                                 const ViewTag& view) {
  if (view.kind == ViewKind::Global) {
    ViewSelection sel;
    sel.global = true;
    return std::move(*render_views(scene, camera, options, sel).global);
  }
  const auto node = scene.node_index(view.node);
  if (!node) throw Error(ErrorCode::UnknownTarget, "no node '" + view.node + "'");
  return std::move(render_views(scene, camera, options, ViewSelection::only_local(*node)).locals.front());
}

namespace {

template <typename Scalar>
void backward_ray(const SceneModel<Scalar>& scene, const RenderTape<Scalar>& tape, const RayRecord<Scalar>& rec,
                  const ViewGradients<Scalar>& grads, const VecX<Scalar>& background, GradientSet<Scalar>& out) {
  const int c = tape.color_dim;
  const Eigen::Index n = rec.sigma.size() > 0 ? rec.sigma.size() : 0;
  const std::size_t pixel = rec.pixel;
  auto pixel_grad = [&](const Image<Scalar>* img, Scalar scale) {
    VecX<Scalar> g = VecX<Scalar>::Zero(c);
    if (img) {
      for (int ch = 0; ch < c; ++ch) g[ch] = scale * img->data[Eigen::Index(pixel * std::size_t(c) + std::size_t(ch))];
    }
    return g;
  };

  // Gradients w.r.t. local (sigma, C) in merged order, filled by the global path.
  VecX<Scalar> d_sigma_local;
  MatX<Scalar> d_color_local;
  const bool global_active = tape.selection.global && grads.global != nullptr && n > 0;
  if (global_active) {
    const VecX<Scalar> d_pixel = pixel_grad(grads.global, grads.global_scale);
    VecX<Scalar> d_sigma = VecX<Scalar>::Zero(n);
    MatX<Scalar> d_color = MatX<Scalar>::Zero(c, n);
    accumulate_ray_backward(rec.sigma, rec.color, rec.delta, background, rec.weights, rec.transmittance,
                            rec.final_transmittance, d_pixel, static_cast<const VecX<Scalar>*>(nullptr), d_sigma,
                            d_color);
    scene.composition.backward_batch(rec.x_global, rec.direction, rec.compose, d_sigma, d_color, d_sigma_local,
                                     d_color_local, out.blocks[scene.composition_grid_block()].data(),
                                     out.blocks[scene.composition_density_block()].data(),
                                     out.blocks[scene.composition_color_block()].data());
  }

  for (const auto& g : rec.groups) {
    const Eigen::Index m = Eigen::Index(g.index.size());
    VecX<Scalar> d_sigma = VecX<Scalar>::Zero(m);
    MatX<Scalar> d_color = MatX<Scalar>::Zero(c, m);
    if (global_active) {
      for (Eigen::Index i = 0; i < m; ++i) {
        d_sigma[i] = d_sigma_local[g.index[std::size_t(i)]];
        d_color.col(i) = d_color_local.col(g.index[std::size_t(i)]);
      }
    }
    bool any = global_active;
    if (g.local_view >= 0) {
      const std::size_t slot = std::size_t(g.local_view);
      const Image<Scalar>* img = slot < grads.locals.size() ? grads.locals[slot] : nullptr;
      VecX<Scalar> d_pixel = img ? pixel_grad(img, grads.local_scale) : VecX<Scalar>();
      VecX<Scalar> d_weights;
      if (grads.sparsity_scale != Scalar(0)) {
        d_weights.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) d_weights[i] = grads.sparsity_scale * binary_entropy_grad(g.weights[i]);
      }
      if (img || d_weights.size() > 0) {
        accumulate_ray_backward(g.sigma, g.color, g.delta, background, g.weights, g.transmittance,
                                g.final_transmittance, d_pixel, d_weights.size() > 0 ? &d_weights : nullptr, d_sigma,
                                d_color);
        any = true;
      }
    }
    if (!any) continue;
    scene.nodes[g.node].field.backward_batch(g.x_local, g.cache, d_sigma, d_color,
                                             out.blocks[SceneModel<Scalar>::node_grid_block(g.node)].data(),
                                             out.blocks[SceneModel<Scalar>::node_mlp_block(g.node)].data());
  }
}

}  // namespace

template <typename Scalar>
void backward(const SceneModel<Scalar>& scene, const RenderTape<Scalar>& tape, const ViewGradients<Scalar>& grads,
              GradientSet<Scalar>& out) {
  const int c = tape.color_dim;
  const Camera& cam = tape.camera;
  auto check = [&](const Image<Scalar>* img) {
    if (img && (img->height != cam.height || img->width != cam.width || img->channels != c)) {
      throw Error(ErrorCode::ShapeMismatch, "image gradient shape does not match the rendered view");
    }
  };
  check(grads.global);
  for (const auto* l : grads.locals) check(l);
  const GradientSet<Scalar> reference = scene.zero_gradients();
  if (!out.same_registry(reference)) throw Error(ErrorCode::RegistryMismatch, "gradient set does not match scene");

  const VecX<Scalar> background = background_vector<Scalar>(tape.options.background, c);
  const int threads = tape.options.threads > 0 ? tape.options.threads : default_thread_count();
  const std::size_t n_rays = tape.rays.size();

  // Deterministic: fixed ray chunks, one buffer each, merged in chunk order.
  // Fast: one buffer per worker, rays claimed dynamically.
  const std::size_t chunks = std::size_t(std::max(1, tape.options.chunks));
  const std::size_t n_buffers = tape.options.deterministic ? chunks : std::size_t(std::max(1, threads));
  std::vector<GradientSet<Scalar>> buffers(n_buffers, reference);
  if (tape.options.deterministic) {
    parallel_tasks(chunks, threads, [&](std::size_t chunk, int) {
      const auto [begin, end] = chunk_range(n_rays, chunks, chunk);
      for (std::size_t p = begin; p < end; ++p) backward_ray(scene, tape, tape.rays[p], grads, background, buffers[chunk]);
    });
  } else {
    const std::size_t tasks = std::max<std::size_t>(1, n_rays / 64);
    parallel_tasks(tasks, threads, [&](std::size_t task, int worker) {
      const auto [begin, end] = chunk_range(n_rays, tasks, task);
      for (std::size_t p = begin; p < end; ++p) backward_ray(scene, tape, tape.rays[p], grads, background, buffers[std::size_t(worker)]);
    });
  }
  for (const auto& b : buffers) out.add_scaled(b, Scalar(1));
}

template <typename Scalar>
GradientSet<Scalar> backward_from_image_grad(const SceneModel<Scalar>& scene, const RenderTape<Scalar>& tape,
                                             const Image<Scalar>& grad_image) {
  if (!tape.selection.global) throw Error(ErrorCode::ShapeMismatch, "tape holds no global view");
  ViewGradients<Scalar> g;
  g.global = &grad_image;
  GradientSet<Scalar> out = scene.zero_gradients();
  backward(scene, tape, g, out);
  return out;
}

Camera object_centric_camera(const Camera& global, const Box3& box) {
  Camera cam = global;
  const Eigen::Vector3d dir = (global.position - global.target).normalized();
  const double scale = box.half_extents.maxCoeff();
  cam.target = box.center;
  cam.position = box.center + dir * (global.radius * scale);
  cam.radius = global.radius * scale;
  return cam;
}

RenderOptions render_options_for(const TrainConfig& cfg, std::uint64_t seed, Sampling sampling) {
  RenderOptions o;
  o.sampling.n_per_box = cfg.n_per_box;
  o.sampling.sampling = sampling;
  o.sampling.delta_cap = cfg.delta_cap;
  o.background = cfg.background;
  o.seed = seed;
  o.deterministic = cfg.deterministic;
  o.chunks = cfg.reduction_chunks;
  return o;
}

#define COMPONERF_INSTANTIATE(S)                                                                                   \
  template RayAccumulation<S> accumulate_ray(const VecX<S>&, const MatX<S>&, const VecX<S>&, const VecX<S>&,       \
                                             VecX<S>*, VecX<S>*);                                                  \
  template void accumulate_ray_backward(const VecX<S>&, const MatX<S>&, const VecX<S>&, const VecX<S>&,            \
                                        const VecX<S>&, const VecX<S>&, S, const VecX<S>&, const VecX<S>*,         \
                                        VecX<S>&, MatX<S>&);                                                       \
  template RayAccumulation<S> render_ray_local(std::span<const Sample<S>>, const VecX<S>&, const MatX<S>&,         \
                                               const VecX<S>&, S);                                                 \
  template RayAccumulation<S> render_ray_global(std::span<const Sample<S>>, const VecX<S>&, const MatX<S>&,        \
                                                const VecX<S>&);                                                   \
  template struct RenderTape<S>;                                                                                   \
  template RenderedViews<S> render_views(const SceneModel<S>&, const Camera&, const RenderOptions&,                \
                                         const ViewSelection&, RenderTape<S>*);                                    \
  template RenderedViews<S> render_views_with_fields(const SceneModel<S>&, const Camera&, const RenderOptions&,    \
                                                     const ViewSelection&, const FieldOverride<S>&);               \
  template ImageBuffer<S> render_image(const SceneModel<S>&, const Camera&, const RenderOptions&, const ViewTag&); \
  template void backward(const SceneModel<S>&, const RenderTape<S>&, const ViewGradients<S>&, GradientSet<S>&);    \
  template GradientSet<S> backward_from_image_grad(const SceneModel<S>&, const RenderTape<S>&, const Image<S>&);

COMPONERF_INSTANTIATE(float)
COMPONERF_INSTANTIATE(double)
#undef COMPONERF_INSTANTIATE

}  // namespace componerf
