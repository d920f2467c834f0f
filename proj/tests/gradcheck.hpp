#pragma once

// Central-difference check of the full render -> composition -> fields ->
// encoding backward pass in double precision.

#include <algorithm>
#include <cmath>
#include <string>

#include "componerf/render.hpp"
#include "componerf/trainer.hpp"
#include "fixtures.hpp"

namespace componerf::testing {

struct GradCheckResult {
  double max_rel = 0.0;
  std::size_t parameters = 0;
  std::string worst_block;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckSetup {
  SceneModel<double> scene;
  Camera camera;
  RenderOptions options;
  Image<double> global_grad;
  Image<double> local_grad;
  double local_scale = 0.7;
  double sparsity_scale = 0.05;
};

inline GradCheckSetup gradcheck_setup(CompositionMode mode, std::uint64_t seed) {
  Layout l;
  l.global_prompt = "g";
  l.seed = seed;
  l.boxes.push_back(make_box("solo", {0.05, -0.05, 0.0}, {0.6, 0.5, 0.55}, "p"));
  GradCheckSetup s{SceneModel<double>::create(l, tiny_config(mode)), orbit_camera(35, 25, 1.3, 55, 6, 6), {}, {}, {}};
  randomize_parameters(s.scene, seed, 0.6, 1.0);
  s.options.sampling.n_per_box = 8;
  s.options.sampling.sampling = Sampling::Stratified;
  s.options.seed = seed;
  s.options.background = {0.1, 0.2, 0.3};
  s.global_grad = Image<double>(6, 6, 3);
  s.local_grad = Image<double>(6, 6, 3);
  Rng rng(seed + 1);
  for (Eigen::Index i = 0; i < s.global_grad.data.size(); ++i) {
    s.global_grad.data[i] = rng.uniform(-1, 1);
    s.local_grad.data[i] = rng.uniform(-1, 1);
  }
  return s;
}

/// Scalar objective whose gradient backward() computes for this setup.
inline double gradcheck_objective(const GradCheckSetup& s, const SceneModel<double>& scene) {
  RenderTape<double> tape;
  const auto views = render_views(scene, s.camera, s.options, ViewSelection::all(1), &tape);
  double f = views.global->pixels.data.dot(s.global_grad.data);
  f += s.local_scale * views.locals[0].pixels.data.dot(s.local_grad.data);
  for (double w : tape.local_weights()) f += s.sparsity_scale * binary_entropy(w);
  return f;
}

inline GradCheckResult full_gradient_check(CompositionMode mode, std::uint64_t seed, double h = 1e-6,
                                           double floor = 1e-6) {
  GradCheckSetup s = gradcheck_setup(mode, seed);
  RenderTape<double> tape;
  render_views(s.scene, s.camera, s.options, ViewSelection::all(1), &tape);
  GradientSet<double> grads = s.scene.zero_gradients();
  ViewGradients<double> vg;
  vg.global = &s.global_grad;
  vg.locals = {&s.local_grad};
  vg.global_scale = 1.0;
  vg.local_scale = s.local_scale;
  vg.sparsity_scale = s.sparsity_scale;
  backward(s.scene, tape, vg, grads);

  GradCheckResult out;
  auto params = s.scene.parameters();
  for (std::size_t b = 0; b < params.size(); ++b) {
    VecX<double>& values = *params[b].values;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double fp = gradcheck_objective(s, s.scene);
      values[i] = keep - h;
      const double fm = gradcheck_objective(s, s.scene);
      values[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double a = grads.blocks[b][i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst_block = params[b].name;
        out.worst_analytic = a;
        out.worst_numeric = fd;
      }
      ++out.parameters;
    }
  }
  return out;
}

}  // namespace componerf::testing
