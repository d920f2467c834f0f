// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "componerf/random.hpp"
#include "componerf/types.hpp"

namespace componerf {

/// Pinhole camera looking at `target`, +z up, vertical field of view,
/// half-pixel centers. Azimuth 0 sits on +x; elevation is measured from the
/// xy-plane.
struct Camera {
  Eigen::Vector3d position = Eigen::Vector3d(1.5, 0.0, 0.0);
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double fov_deg = 60.0;
  int height = 64;
  int width = 64;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double radius = 1.5;

  bool operator==(const Camera&) const = default;
};

enum class CameraPhase { Train, Test };

struct CameraSampling {
  double radius_min = 1.0;
  double radius_max = 1.5;
  double fov_min_deg = 40.0;
  double fov_max_deg = 70.0;
  double test_fov_deg = 60.0;

  bool operator==(const CameraSampling&) const = default;
};

inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

Camera orbit_camera(double azimuth_deg, double elevation_deg, double radius, double fov_deg, int height,
                    int width);

/// Uniform on the upper hemisphere shell, radius U[1, 1.5]; train fov U[40, 70], test fov 60.
Camera sample_camera(Rng& rng, CameraPhase phase, int height, int width, const CameraSampling& cfg = {});

/// n frames evenly spaced in azimuth starting at 0.
std::vector<Camera> orbit_cameras(int n_frames, double elevation_deg, double radius, double fov_deg, int height,
                                  int width);

struct CameraBasis {
  Eigen::Vector3d forward, right, up;
  double focal = 1.0;  // pixels
};

CameraBasis camera_basis(const Camera& cam);

/// Continuous pixel coordinates (col, row) of a world point; pixel (r, c) has center (c + 0.5, r + 0.5).
Eigen::Vector2d project_point(const Camera& cam, const Eigen::Vector3d& point);

}  // namespace componerf
