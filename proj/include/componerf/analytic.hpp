// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/guidance.hpp"
#include "componerf/render.hpp"
#include "componerf/types.hpp"

namespace componerf {

/// Constant-density sphere owned by one layout node.
struct AnalyticSphere {
  std::string node;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.25;
  double density = 1.0;
  Eigen::VectorXd color;
};

/// Closed-form volume rendering of constant-density spheres. Serves as the
/// photometric target behind the mock guidance provider.
struct AnalyticScene {
  std::vector<AnalyticSphere> spheres;
  Eigen::VectorXd background;

  int channels() const { return int(background.size()); }

  /// JSON: {"background": [..], "spheres": [{"node", "center", "radius", "density", "color"}]}
  static AnalyticScene parse(std::string_view text);
  static AnalyticScene load(const std::filesystem::path& path);

  /// Exact integral along the ray, restricted to one node's spheres when given.
  Eigen::VectorXd render_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                             const std::string* only_node = nullptr, double* weight_sum = nullptr) const;

  Image<float> render(const Camera& camera, const ViewTag& view) const;
  Image<float> render_weights(const Camera& camera, const ViewTag& view) const;
};

/// Target source for MockGuidance backed by an analytic scene. Requests must
/// carry their camera.
MockGuidance::TargetSource analytic_targets(AnalyticScene scene);

}  // namespace componerf
