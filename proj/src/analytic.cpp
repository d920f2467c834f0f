// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "componerf/error.hpp"
#include "componerf/geometry.hpp"

namespace componerf {

using nlohmann::json;

namespace {

Eigen::VectorXd read_vector(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw Error(ErrorCode::ValidationError, std::string("analytic target: '") + field + "' must be an array");
  }
  const json& v = j.at(field);
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = v[i].get<double>();
  return out;
}

struct Chord {
  double t0, t1;
  const AnalyticSphere* sphere;
};

}  // namespace

AnalyticScene AnalyticScene::parse(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, std::string("analytic target: ") + e.what());
  }
  AnalyticScene scene;
  try {
    scene.background = read_vector(j, "background");
    for (const json& s : j.at("spheres")) {
      AnalyticSphere sphere;
      sphere.node = s.at("node").get<std::string>();
      Eigen::VectorXd c = read_vector(s, "center");
      if (c.size() != 3) throw Error(ErrorCode::ValidationError, "analytic target: center needs 3 numbers");
      sphere.center = c;
      sphere.radius = s.at("radius").get<double>();
      sphere.density = s.at("density").get<double>();
      sphere.color = read_vector(s, "color");
      if (sphere.color.size() != scene.background.size()) {
        throw Error(ErrorCode::ValidationError, "analytic target: sphere '" + sphere.node +
                                                    "' color has the wrong channel count");
      }
      if (sphere.radius <= 0 || sphere.density < 0) {
        throw Error(ErrorCode::ValidationError, "analytic target: sphere '" + sphere.node + "' is degenerate");
      }
      scene.spheres.push_back(std::move(sphere));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("analytic target: ") + e.what());
  }
  return scene;
}

AnalyticScene AnalyticScene::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Eigen::VectorXd AnalyticScene::render_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                          const std::string* only_node, double* weight_sum) const {
  const Eigen::Vector3d d = direction.normalized();
  std::vector<Chord> chords;
  std::vector<double> breaks;
  for (const AnalyticSphere& s : spheres) {
    if (only_node && s.node != *only_node) continue;
    const Eigen::Vector3d oc = origin - s.center;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.squaredNorm() - s.radius * s.radius);
    if (disc <= 0) continue;
    const double root = std::sqrt(disc);
    const double t0 = std::max(-b - root, 0.0);
    const double t1 = -b + root;
    if (t1 <= t0) continue;
    chords.push_back({t0, t1, &s});
    breaks.push_back(t0);
    breaks.push_back(t1);
  }
  std::sort(breaks.begin(), breaks.end());

  Eigen::VectorXd color = Eigen::VectorXd::Zero(background.size());
  double transmittance = 1.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    double sigma = 0.0;
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(background.size());
    for (const Chord& c : chords) {
      if (mid > c.t0 && mid < c.t1) {
        sigma += c.sphere->density;
        weighted += c.sphere->density * c.sphere->color;
      }
    }
    if (sigma <= 0) continue;
    const double alpha = -std::expm1(-sigma * (b - a));
    color += transmittance * alpha * (weighted / sigma);
    transmittance *= 1.0 - alpha;
  }
  if (weight_sum) *weight_sum = 1.0 - transmittance;
  return color + transmittance * background;
}

Image<float> AnalyticScene::render(const Camera& camera, const ViewTag& view) const {
  const CameraBasis basis = camera_basis(camera);
  const std::string* only = view.kind == ViewKind::Local ? &view.node : nullptr;
  Image<float> out(camera.height, camera.width, channels());
  for (int r = 0; r < camera.height; ++r) {
    for (int c = 0; c < camera.width; ++c) {
      const Ray<double> ray = camera_ray<double>(camera, basis, r, c);
      const Eigen::VectorXd px = render_ray(ray.origin, ray.direction, only);
      for (int k = 0; k < channels(); ++k) out.at(r, c, k) = float(px[k]);
    }
  }
  return out;
}

Image<float> AnalyticScene::render_weights(const Camera& camera, const ViewTag& view) const {
  const CameraBasis basis = camera_basis(camera);
  const std::string* only = view.kind == ViewKind::Local ? &view.node : nullptr;
  Image<float> out(camera.height, camera.width, 1);
  for (int r = 0; r < camera.height; ++r) {
    for (int c = 0; c < camera.width; ++c) {
      const Ray<double> ray = camera_ray<double>(camera, basis, r, c);
      double w = 0.0;
      render_ray(ray.origin, ray.direction, only, &w);
      out.at(r, c, 0) = float(w);
    }
  }
  return out;
}

MockGuidance::TargetSource analytic_targets(AnalyticScene scene) {
  return [scene = std::move(scene)](const GuidanceRequest& request) {
    if (!request.camera) throw Error(ErrorCode::MissingTarget, "mock guidance needs the request camera");
    return scene.render(*request.camera, request.subject);
  };
}

}  // namespace componerf
