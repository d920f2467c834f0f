// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared test fixtures and test-only oracles. Nothing here is used by the
// library itself.

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "componerf/analytic.hpp"
#include "componerf/camera.hpp"
#include "componerf/layout.hpp"
#include "componerf/scene.hpp"

namespace componerf::testing {

inline Box3 make_box(std::string id, Eigen::Vector3d center, Eigen::Vector3d half, std::string prompt) {
  Box3 b;
  b.id = std::move(id);
  b.center = center;
  b.half_extents = half;
  b.prompt = std::move(prompt);
  return b;
}

/// Two boxes along x overlapping in x in [-0.05, 0.05].
inline Layout two_sphere_layout(std::uint64_t seed = 7) {
  Layout l;
  l.global_prompt = "a red ball next to a blue ball";
  l.seed = seed;
  l.boxes.push_back(make_box("left", {-0.3, 0, 0}, {0.35, 0.35, 0.35}, "a red ball"));
  l.boxes.push_back(make_box("right", {0.3, 0, 0}, {0.35, 0.35, 0.35}, "a blue ball"));
  return l;
}

/// One sphere per box, strictly inside the part of its box the other box
/// does not cover.
inline AnalyticScene two_sphere_target(double density = 6.0) {
  AnalyticScene s;
  s.background = Eigen::Vector3d::Zero();
  AnalyticSphere a;
  a.node = "left";
  a.center = {-0.3, 0, 0};
  a.radius = 0.22;
  a.density = density;
  a.color = Eigen::Vector3d(0.9, 0.2, 0.1);
  AnalyticSphere b = a;
  b.node = "right";
  b.center = {0.3, 0, 0};
  b.color = Eigen::Vector3d(0.1, 0.3, 0.9);
  s.spheres = {a, b};
  return s;
}

/// Brute-force ray march: `steps` midpoint slices over the chord of the
/// sphere of radius `extent` around the origin.
inline Eigen::VectorXd ray_march(const AnalyticScene& scene, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& direction, int steps = 10000, double extent = 1.8,
                                 const std::string* only_node = nullptr, double* opacity = nullptr) {
  const Eigen::Vector3d d = direction.normalized();
  const double b = origin.dot(d);
  const double disc = b * b - (origin.squaredNorm() - extent * extent);
  Eigen::VectorXd color = Eigen::VectorXd::Zero(scene.background.size());
  double trans = 1.0;
  if (disc > 0) {
    const double t0 = std::max(0.0, -b - std::sqrt(disc));
    const double t1 = -b + std::sqrt(disc);
    const double dt = (t1 - t0) / steps;
    for (int i = 0; i < steps; ++i) {
      const Eigen::Vector3d x = origin + (t0 + (i + 0.5) * dt) * d;
      double sigma = 0.0;
      Eigen::VectorXd sc = Eigen::VectorXd::Zero(scene.background.size());
      for (const AnalyticSphere& s : scene.spheres) {
        if (only_node && s.node != *only_node) continue;
        if ((x - s.center).squaredNorm() < s.radius * s.radius) {
          sigma += s.density;
          sc += s.density * s.color;
        }
      }
      if (sigma == 0.0) continue;
      const double a = 1.0 - std::exp(-sigma * dt);
      color += trans * a * sc / sigma;
      trans *= 1.0 - a;
    }
  }
  if (opacity) *opacity = 1.0 - trans;
  return color + trans * scene.background;
}

inline Image<float> ray_march_image(const AnalyticScene& scene, const Camera& cam, int steps = 10000) {
  Image<float> out(cam.height, cam.width, scene.channels());
  const CameraBasis basis = camera_basis(cam);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const double x = (c + 0.5 - 0.5 * cam.width) / basis.focal;
      const double y = (r + 0.5 - 0.5 * cam.height) / basis.focal;
      const Eigen::Vector3d dir = basis.forward + x * basis.right - y * basis.up;
      const Eigen::VectorXd px = ray_march(scene, cam.position, dir, steps);
      for (int k = 0; k < scene.channels(); ++k) out.at(r, c, k) = float(px[k]);
    }
  }
  return out;
}

/// Small RGB scene for training on one core.
inline SceneConfig small_rgb_config() {
  SceneConfig cfg;
  cfg.field.grid = {8, 2, 16, 256, 1u << 14};
  cfg.field.hidden_width = 32;
  cfg.field.hidden_layers = 1;
  cfg.field.color_dim = 3;
  cfg.field.color_space = ColorSpace::Rgb;
  cfg.composition.color_dim = 3;
  cfg.composition.hidden_width = 16;
  cfg.composition.grid = {4, 2, 8, 64, 1u << 12};
  cfg.train.n_per_box = 32;
  cfg.train.resolution = 64;
  return cfg;
}


/// A few hundred parameters per block; for finite-difference checks.
inline SceneConfig tiny_config(CompositionMode mode = CompositionMode::DensityBased) {
  SceneConfig cfg;
  cfg.field.grid = {2, 2, 2, 4, 32};
  cfg.field.hidden_width = 8;
  cfg.field.color_dim = 3;
  cfg.field.color_space = ColorSpace::Rgb;
  cfg.composition.mode = mode;
  cfg.composition.hidden_width = 8;
  cfg.composition.feature_dim = 3;
  cfg.composition.color_dim = 3;
  cfg.composition.grid = {2, 2, 2, 4, 32};
  cfg.train.n_per_box = 8;
  cfg.train.resolution = 6;
  return cfg;
}

/// Overwrites every parameter with U(-scale, scale) draws; grid entries get
/// `grid_scale` so the encoding matters.
template <typename Scalar>
void randomize_parameters(SceneModel<Scalar>& scene, std::uint64_t seed, double scale = 0.5,
                          double grid_scale = 1.0) {
  Rng rng(seed);
  for (auto& block : scene.parameters()) {
    const bool is_grid = block.name.ends_with("grid");
    for (Eigen::Index i = 0; i < block.values->size(); ++i) {
      (*block.values)[i] = Scalar(rng.uniform(-1, 1) * (is_grid ? grid_scale : scale));
    }
  }
}

/// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("componerf-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace componerf::testing
