#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "componerf/camera.hpp"
#include "componerf/geometry.hpp"
#include "fixtures.hpp"

using namespace componerf;
using Vec = Eigen::Vector3d;

namespace {

Ray<double> ray(Vec o, Vec d) {
  Ray<double> r;
  r.origin = o;
  r.direction = d.normalized();
  return r;
}

Box3 box(Vec c, Vec h, std::string id = "b") { return testing::make_box(std::move(id), c, h, "p"); }

}  // namespace

TEST_CASE("ray_box_intersect slab examples") {
  const Box3 unit = box({0, 0, 0}, {0.5, 0.5, 0.5});
  auto hit = ray_box_intersect(ray({0, 0, -2}, {0, 0, 1}), unit);
  REQUIRE(hit);
  CHECK(hit->t_near == doctest::Approx(1.5));
  CHECK(hit->t_far == doctest::Approx(2.5));

  CHECK_FALSE(ray_box_intersect(ray({2, 2, -2}, {0, 0, 1}), unit));

  hit = ray_box_intersect(ray({-1, 0, 0}, {1, 0, 0}), box({0.2, 0, 0}, {0.3, 0.3, 0.3}));
  REQUIRE(hit);
  CHECK(hit->t_near == doctest::Approx(0.9));
  CHECK(hit->t_far == doctest::Approx(1.5));

  // Origin inside: t_near clips at 0. Box behind: empty.
  hit = ray_box_intersect(ray({0, 0, 0}, {0, 0, 1}), unit);
  REQUIRE(hit);
  CHECK(hit->t_near == 0.0);
  CHECK(hit->t_far == doctest::Approx(0.5));
  CHECK_FALSE(ray_box_intersect(ray({0, 0, 2}, {0, 0, 1}), unit));
}

TEST_CASE("ray_box_intersect agrees with a fine ray march") {
  Rng rng(99);
  const double step = 4.0 / 10000;
  for (int trial = 0; trial < 300; ++trial) {
    const Vec c(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const Vec h(rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4));
    const Box3 b = box(c, h);
    const Vec o(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const Vec target(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const Ray<double> r = ray(o, target - o);
    double first = -1, last = -1;
    for (int i = 0; i < 10000; ++i) {
      const double t = (i + 0.5) * step;
      const Vec x = r.origin + t * r.direction;
      if (((x - c).cwiseAbs() - h).maxCoeff() <= 0) {
        if (first < 0) first = t;
        last = t;
      }
    }
    const auto hit = ray_box_intersect(r, b);
    if (first < 0) {
      // A miss by the march can only be a graze thinner than one step.
      if (hit) CHECK(hit->t_far - hit->t_near <= step);
      continue;
    }
    REQUIRE(hit);
    CHECK(std::abs(hit->t_near - first) <= step);
    CHECK(std::abs(hit->t_far - last) <= step);
  }
}

TEST_CASE("sample_interval modes") {
  Rng rng(1);
  HitInterval<double> hit{0, 1.0, 2.0};
  const auto mid = sample_interval(hit, 4, Sampling::Midpoint, rng);
  CHECK(mid == std::vector<double>{1.125, 1.375, 1.625, 1.875});

  for (int rep = 0; rep < 100; ++rep) {
    const auto st = sample_interval(hit, 4, Sampling::Stratified, rng);
    REQUIRE(st.size() == 4);
    for (int k = 0; k < 4; ++k) {
      CHECK(st[std::size_t(k)] >= 1.0 + k / 4.0);
      CHECK(st[std::size_t(k)] <= 1.0 + (k + 1) / 4.0);
    }
  }

  HitInterval<double> thin{0, 1.0, 1.0 + 1e-9};
  const auto t = sample_interval(thin, 2, Sampling::Stratified, rng);
  REQUIRE(t.size() == 2);
  CHECK(t[0] >= 1.0);
  CHECK(t[1] <= 1.0 + 1e-9);
  CHECK(t[0] <= t[1]);
}

TEST_CASE("to_local / to_global / local_direction") {
  const Box3 b = box({0.2, 0, 0}, {0.3, 0.3, 0.3});
  CHECK((to_local<double>(b, Vec(0.5, 0, 0)) - Vec(1, 0, 0)).norm() < 1e-15);
  CHECK(to_local<double>(b, b.center) == Vec::Zero());

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Box3 r = box({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)},
                       {rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)});
    const Vec x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK((to_global<double>(r, to_local<double>(r, x)) - x).cwiseAbs().maxCoeff() < 1e-12);
  }

  const Box3 cube = box({0, 0, 0}, {0.4, 0.4, 0.4});
  const Vec d = Vec(0.3, -0.5, 0.8).normalized();
  CHECK((local_direction<double>(cube, d) - d).norm() < 1e-15);
  const Box3 flat = box({0, 0, 0}, {0.5, 0.25, 0.25});
  CHECK((local_direction<double>(flat, Vec(1, 0, 0)) - Vec(1, 0, 0)).norm() < 1e-15);
  const Vec diag = local_direction<double>(flat, Vec(1, 1, 0).normalized());
  CHECK(diag.x() == doctest::Approx(1 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(diag.y() == doctest::Approx(2 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(diag.z() == 0.0);
}

TEST_CASE("merged samples and deltas") {
  std::vector<Sample<double>> s(4);
  const double ts[] = {0.2, 0.4, 0.6, 0.8};
  for (int i = 0; i < 4; ++i) s[std::size_t(i)].t = ts[i];
  assign_deltas<double>(s, 1e10);
  CHECK(s[0].delta == doctest::Approx(0.2));
  CHECK(s[1].delta == doctest::Approx(0.2));
  CHECK(s[2].delta == doctest::Approx(0.2));
  CHECK(s[3].delta == 1e10);

  // Two boxes stacked along z; midpoint sampling with 2 samples each gives
  // interleaved depths when the boxes overlap.
  Layout l;
  l.global_prompt = "g";
  l.boxes.push_back(box({0, 0, 0.1}, {0.2, 0.2, 0.2}, "B"));
  l.boxes.push_back(box({0, 0, 0.0}, {0.2, 0.2, 0.2}, "A"));
  SampleOptions opts;
  opts.n_per_box = 2;
  std::vector<Ray<double>> rays = {ray({0, 0, -1}, {0, 0, 1}), ray({0.9, 0.9, -1}, {0, 0, 1})};
  const auto batch = build_sample_batch<double>(l, rays, opts, 3);
  REQUIRE(batch.rays[0].size() == 4);
  const std::vector<double> expect_t = {0.9, 1.0, 1.1, 1.2};
  const std::vector<std::size_t> expect_node = {1, 0, 1, 0};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(batch.rays[0][k].t == doctest::Approx(expect_t[k]));
    CHECK(batch.rays[0][k].node == expect_node[k]);
  }
  CHECK(batch.rays[1].empty());
}

TEST_CASE("sample batch invariants on random layouts") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Layout l;
    l.global_prompt = "g";
    const int n_boxes = 1 + int(rng.uniform() * 4);
    for (int b = 0; b < n_boxes; ++b) {
      l.boxes.push_back(box({rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)},
                            {rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)},
                            "n" + std::to_string(b)));
    }
    const Camera cam = sample_camera(rng, CameraPhase::Train, 8, 8);
    const auto rays = camera_rays<double>(cam);
    SampleOptions opts;
    opts.n_per_box = 16;
    opts.sampling = Sampling::Stratified;
    const auto batch = build_sample_batch<double>(l, rays, opts, trial);
    for (const auto& samples : batch.rays) {
      double sum = 0;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        CHECK(samples[k].x_local.cwiseAbs().maxCoeff() <= 1 + 1e-6);
        CHECK(samples[k].delta >= 0);
        if (k + 1 < samples.size()) {
          CHECK(samples[k].t <= samples[k + 1].t);
          sum += samples[k].delta;
        }
      }
      if (samples.size() > 1) CHECK(std::abs(sum - (samples.back().t - samples.front().t)) < 1e-9);
    }
  }
}

TEST_CASE("camera sampling ranges") {
  Rng rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const Camera c = sample_camera(rng, CameraPhase::Train, 64, 64);
    CHECK(c.radius >= 1.0);
    CHECK(c.radius <= 1.5);
    CHECK(c.fov_deg >= 40.0);
    CHECK(c.fov_deg <= 70.0);
    CHECK(c.elevation_deg >= 0.0);
    CHECK(c.position.z() >= 0.0);
    CHECK(std::abs(c.position.norm() - c.radius) < 1e-12);
  }
  CHECK(sample_camera(rng, CameraPhase::Test, 64, 64).fov_deg == 60.0);
}

TEST_CASE("pinhole conventions") {
  const Camera cam = orbit_camera(0, 0, 2, 60, 64, 64);
  const auto rays = camera_rays<double>(cam);
  for (const auto& r : rays) CHECK(std::abs(r.direction.norm() - 1) < 1e-12);
  // The look-at point projects to the image center, +z is up (smaller row).
  const Eigen::Vector2d center = project_point(cam, Vec::Zero());
  CHECK(center.x() == doctest::Approx(32.0));
  CHECK(center.y() == doctest::Approx(32.0));
  CHECK(project_point(cam, Vec(0, 0, 0.1)).y() < 32.0);
  // Half-pixel centers: the ray of pixel (r, c) projects back to (c + 0.5, r + 0.5).
  const auto& r = rays[std::size_t(5 * 64 + 9)];
  const Eigen::Vector2d p = project_point(cam, r.origin + 1.3 * r.direction);
  CHECK(p.x() == doctest::Approx(9.5));
  CHECK(p.y() == doctest::Approx(5.5));
}
