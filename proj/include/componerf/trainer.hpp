// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/guidance.hpp"
#include "componerf/render.hpp"
#include "componerf/scene.hpp"

namespace componerf {

inline constexpr std::uint64_t kDefaultFinetuneSteps = 1000;

struct StepStats {
  std::uint64_t step = 0;  // 1-based index of the completed step
  bool skipped = false;
  double global_loss = 0.0;  // provider-reported, 0 when the provider reports none
  double local_loss = 0.0;   // summed over local views
  double sparsity = 0.0;
};

struct TrainReport {
  std::vector<StepStats> steps;
  std::uint64_t skipped = 0;
};

template <typename Scalar>
using StepCallback = std::function<void(const SceneModel<Scalar>& scene, const RenderedViews<Scalar>& views)>;

struct TrainOptions {
  std::uint64_t steps = 0;
  /// Camera schedule cycled by step; empty samples random train cameras.
  std::vector<Camera> cameras;
};

/// Runs `opts.steps` optimization steps in place. A provider failure leaves
/// the scene at its last completed step and is rethrown as GuidanceFailure.
template <typename Scalar>
TrainReport train(SceneModel<Scalar>& scene, GuidanceProvider& guidance, const TrainOptions& opts,
                  const StepCallback<Scalar>& on_step = {});

/// Camera used at a given (0-based) step when no schedule is supplied.
Camera train_camera(std::uint64_t seed, std::uint64_t step, int resolution, const CameraSampling& cfg);

/// Writes `<dir>/<id>.cnode` for each selected node (all when `only` is empty).
template <typename Scalar>
std::map<std::string, std::filesystem::path> decompose(const SceneModel<Scalar>& scene,
                                                       const std::filesystem::path& dir,
                                                       const std::vector<std::string>& only = {});

/// Builds a scene for `layout`: boxes with a cache_ref load their field
/// (relative refs resolve against `base_dir`), the rest are fresh; calibrators
/// start at zero. The returned config asks for kDefaultFinetuneSteps.
template <typename Scalar>
SceneModel<Scalar> recompose(const Layout& layout, const SceneConfig& cfg,
                             const std::filesystem::path& base_dir = {});

/// Zeroes every calibrator output layer so composition is the identity again.
template <typename Scalar>
void reset_composition(SceneModel<Scalar>& scene);

double psnr(const Image<float>& a, const Image<float>& b, double peak = 1.0);

}  // namespace componerf
