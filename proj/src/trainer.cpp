// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/trainer.hpp"

#include <cmath>
#include <limits>

#include "componerf/checkpoint.hpp"
#include "componerf/error.hpp"
#include "componerf/random.hpp"

namespace componerf {

namespace {

constexpr std::uint64_t kCameraStream = 0x63616d65ULL;
constexpr std::uint64_t kRayStream = 0x72617973ULL;

template <typename Scalar>
struct Pass {
  Camera camera;
  ViewSelection selection;
  RenderTape<Scalar> tape;
  RenderedViews<Scalar> views;
  std::optional<Image<Scalar>> global_grad;
  std::vector<Image<Scalar>> local_grads;
};

std::string cache_file_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out + ".cnode";
}

template <typename Scalar>
Image<Scalar> ask(GuidanceProvider& guidance, GuidanceRequest request, double& loss) {
  GuidanceResponse response;
  const Image<float> shape = request.image;
  try {
    response = guidance.guide(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::GuidanceFailure, "request " + request.request_id + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GuidanceFailure, "request " + request.request_id + ": " + e.what());
  }
  if (!response.grad_image.same_shape(shape)) {
    throw Error(ErrorCode::GuidanceFailure, "request " + request.request_id + ": gradient shape differs from image");
  }
  loss += response.loss.value_or(0.0);
  return response.grad_image.template cast<Scalar>();
}

}  // namespace

Camera train_camera(std::uint64_t seed, std::uint64_t step, int resolution, const CameraSampling& cfg) {
  Rng rng(stream_seed(seed, kCameraStream, step));
  return sample_camera(rng, CameraPhase::Train, resolution, resolution, cfg);
}

template <typename Scalar>
TrainReport train(SceneModel<Scalar>& scene, GuidanceProvider& guidance, const TrainOptions& opts,
                  const StepCallback<Scalar>& on_step) {
  scene.check_consistent();
  const TrainConfig& cfg = scene.config;
  const std::size_t n_nodes = scene.nodes.size();
  scene.optimizer.config = cfg.adam;
  TrainReport report;

  for (std::uint64_t i = 0; i < opts.steps; ++i) {
    const std::uint64_t step = scene.step;
    const Camera camera = opts.cameras.empty() ? train_camera(scene.seed, step, cfg.resolution, cfg.cameras)
                                               : opts.cameras[step % opts.cameras.size()];
    const RenderOptions ro = render_options_for(cfg, stream_seed(scene.seed, kRayStream, step), Sampling::Stratified);

    std::vector<Pass<Scalar>> passes;
    if (cfg.local_view == LocalViewMode::SharedCamera) {
      passes.push_back({camera, ViewSelection::all(n_nodes), {}, {}, {}, {}});
    } else {
      ViewSelection global_only;
      passes.push_back({camera, global_only, {}, {}, {}, {}});
      for (std::size_t n = 0; n < n_nodes; ++n) {
        passes.push_back({object_centric_camera(camera, scene.layout.boxes[n]), ViewSelection::only_local(n), {}, {},
                          {}, {}});
      }
    }

    StepStats stats;
    stats.step = step + 1;
    RenderedViews<Scalar> combined;
    const std::string id_prefix = scene.scene_id + "-" + std::to_string(step) + "-";
    for (Pass<Scalar>& p : passes) {
      p.views = render_views(scene, p.camera, ro, p.selection, &p.tape);
      GuidanceRequest base;
      base.view = {p.camera.azimuth_deg, p.camera.elevation_deg};
      base.noise_level = cfg.pinned_noise_level;
      base.camera = p.camera;
      if (p.views.global) {
        GuidanceRequest req = base;
        req.image = p.views.global->pixels.template cast<float>();
        req.prompt = augment_prompt(scene.layout.global_prompt, req.view);
        req.request_id = id_prefix + "global";
        req.subject = ViewTag::global();
        p.global_grad = ask<Scalar>(guidance, std::move(req), stats.global_loss);
        combined.global = *p.views.global;
      }
      for (std::size_t k = 0; k < p.views.locals.size(); ++k) {
        const std::size_t node = p.selection.locals[k];
        GuidanceRequest req = base;
        req.image = p.views.locals[k].pixels.template cast<float>();
        req.prompt = augment_prompt(scene.layout.boxes[node].prompt, req.view);
        req.request_id = id_prefix + "local-" + scene.nodes[node].id;
        req.subject = ViewTag::local(scene.nodes[node].id);
        p.local_grads.push_back(ask<Scalar>(guidance, std::move(req), stats.local_loss));
        combined.locals.push_back(p.views.locals[k]);
      }
    }

    std::vector<Scalar> local_weights;
    for (const Pass<Scalar>& p : passes) {
      const std::vector<Scalar> w = p.tape.local_weights();
      local_weights.insert(local_weights.end(), w.begin(), w.end());
    }
    const Scalar sparsity_scale =
        local_weights.empty() ? Scalar(0) : Scalar(cfg.weights.beta) / Scalar(local_weights.size());
    if (!local_weights.empty()) stats.sparsity = double(sparsity_loss<Scalar>(local_weights));

    GradientSet<Scalar> grads = scene.zero_gradients();
    for (const Pass<Scalar>& p : passes) {
      ViewGradients<Scalar> vg;
      vg.global = p.global_grad ? &*p.global_grad : nullptr;
      for (const auto& g : p.local_grads) vg.locals.push_back(&g);
      vg.global_scale = Scalar(cfg.weights.alpha_global);
      vg.local_scale = Scalar(cfg.weights.alpha_local);
      vg.sparsity_scale = sparsity_scale;
      backward(scene, p.tape, vg, grads);
    }

    if (!grads.all_finite()) {
      stats.skipped = true;
      ++scene.skipped_steps;
      ++report.skipped;
    } else {
      std::vector<bool> mask(grads.blocks.size(), true);
      std::vector<bool> node_trained(n_nodes, true);
      for (std::size_t n = 0; n < n_nodes; ++n) {
        const auto it = cfg.freeze_after.find(scene.nodes[n].id);
        if (it != cfg.freeze_after.end() && step >= it->second) {
          node_trained[n] = false;
          mask[SceneModel<Scalar>::node_grid_block(n)] = false;
          mask[SceneModel<Scalar>::node_mlp_block(n)] = false;
        }
      }
      if (!cfg.train_composition) {
        mask[scene.composition_grid_block()] = false;
        mask[scene.composition_density_block()] = false;
        mask[scene.composition_color_block()] = false;
      }
      const auto params = scene.parameters();
      adam_step<Scalar>(params, grads, scene.optimizer, mask);
      for (std::size_t n = 0; n < n_nodes; ++n)
        if (node_trained[n]) ++scene.nodes[n].provenance.training_steps;
    }
    ++scene.step;
    report.steps.push_back(stats);
    if (on_step) on_step(scene, combined);
  }
  return report;
}

template <typename Scalar>
std::map<std::string, std::filesystem::path> decompose(const SceneModel<Scalar>& scene,
                                                       const std::filesystem::path& dir,
                                                       const std::vector<std::string>& only) {
  scene.check_consistent();
  for (const std::string& id : only) {
    if (!scene.node_index(id)) throw Error(ErrorCode::UnknownTarget, "no node '" + id + "' in the scene");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IO, "cannot create " + dir.string() + ": " + ec.message());
  std::map<std::string, std::filesystem::path> out;
  for (std::size_t n = 0; n < scene.nodes.size(); ++n) {
    const std::string& id = scene.nodes[n].id;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const std::filesystem::path path = dir / cache_file_name(id);
    save_node_cache(make_node_cache(scene, n), path);
    out[id] = path;
  }
  return out;
}

template <typename Scalar>
SceneModel<Scalar> recompose(const Layout& layout, const SceneConfig& cfg, const std::filesystem::path& base_dir) {
  SceneModel<Scalar> scene = SceneModel<Scalar>::create(layout, cfg);
  for (std::size_t n = 0; n < layout.boxes.size(); ++n) {
    const Box3& box = layout.boxes[n];
    if (!box.cache_ref) continue;
    std::filesystem::path ref = *box.cache_ref;
    if (ref.is_relative() && !base_dir.empty()) ref = base_dir / ref;
    const NodeCache cache = load_node_cache(ref);
    if (cache.config.color_dim != scene.color_dim()) {
      throw Error(ErrorCode::ConfigError, "cache '" + ref.string() + "' has color dimension " +
                                              std::to_string(cache.config.color_dim) + ", scene uses " +
                                              std::to_string(scene.color_dim()));
    }
    scene.nodes[n].field = field_from_cache<Scalar>(cache);
    scene.nodes[n].provenance = cache.provenance;
    scene.nodes[n].provenance.from_cache = true;
  }
  scene.config.steps = kDefaultFinetuneSteps;
  return scene;
}

template <typename Scalar>
void reset_composition(SceneModel<Scalar>& scene) {
  scene.composition.reset(composition_seed(scene.seed));
}

double psnr(const Image<float>& a, const Image<float>& b, double peak) {
  require_same_shape(a, b, "psnr");
  const double mse = (a.data - b.data).template cast<double>().squaredNorm() / double(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

#define COMPONERF_INSTANTIATE(S)                                                                                 \
  template TrainReport train(SceneModel<S>&, GuidanceProvider&, const TrainOptions&, const StepCallback<S>&);    \
  template std::map<std::string, std::filesystem::path> decompose(const SceneModel<S>&,                          \
                                                                  const std::filesystem::path&,                  \
                                                                  const std::vector<std::string>&);              \
  template SceneModel<S> recompose<S>(const Layout&, const SceneConfig&, const std::filesystem::path&);          \
  template void reset_composition(SceneModel<S>&);

COMPONERF_INSTANTIATE(float)
COMPONERF_INSTANTIATE(double)

}  // namespace componerf
