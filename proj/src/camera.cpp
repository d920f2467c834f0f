// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/camera.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace componerf {

Camera orbit_camera(double azimuth_deg, double elevation_deg, double radius, double fov_deg, int height,
                    int width) {
  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  Camera cam;
  cam.target = Eigen::Vector3d::Zero();
  cam.position = radius * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  cam.fov_deg = fov_deg;
  cam.height = height;
  cam.width = width;
  cam.azimuth_deg = azimuth_deg;
  cam.elevation_deg = elevation_deg;
  cam.radius = radius;
  return cam;
}

Camera sample_camera(Rng& rng, CameraPhase phase, int height, int width, const CameraSampling& cfg) {
  const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
  // Area-uniform on the hemisphere: sin(elevation) ~ U[0, 1].
  const double elevation = std::asin(rng.uniform()) / kDegToRad;
  const double azimuth = rng.uniform(-180.0, 180.0);
  const double fov = phase == CameraPhase::Train ? rng.uniform(cfg.fov_min_deg, cfg.fov_max_deg) : cfg.test_fov_deg;
  return orbit_camera(azimuth, elevation, radius, fov, height, width);
}

std::vector<Camera> orbit_cameras(int n_frames, double elevation_deg, double radius, double fov_deg, int height,
                                  int width) {
  std::vector<Camera> cams;
  cams.reserve(std::size_t(std::max(n_frames, 0)));
  for (int i = 0; i < n_frames; ++i) {
    double az = 360.0 * i / n_frames;
    if (az > 180.0) az -= 360.0;
    cams.push_back(orbit_camera(az, elevation_deg, radius, fov_deg, height, width));
  }
  return cams;
}

CameraBasis camera_basis(const Camera& cam) {
  CameraBasis b;
  b.forward = (cam.target - cam.position).normalized();
  Eigen::Vector3d world_up = Eigen::Vector3d::UnitZ();
  if (b.forward.cross(world_up).norm() < 1e-9) world_up = Eigen::Vector3d::UnitY();
  b.right = b.forward.cross(world_up).normalized();
  b.up = b.right.cross(b.forward);
  b.focal = 0.5 * cam.height / std::tan(0.5 * cam.fov_deg * kDegToRad);
  return b;
}

Eigen::Vector2d project_point(const Camera& cam, const Eigen::Vector3d& point) {
  const CameraBasis b = camera_basis(cam);
  const Eigen::Vector3d v = point - cam.position;
  const double z = v.dot(b.forward);
  const double x = v.dot(b.right) / z;
  const double y = v.dot(b.up) / z;
  return {x * b.focal + 0.5 * cam.width, -y * b.focal + 0.5 * cam.height};
}

}  // namespace componerf
