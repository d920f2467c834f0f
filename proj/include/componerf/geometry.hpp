// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/layout.hpp"
#include "componerf/random.hpp"
#include "componerf/types.hpp"

namespace componerf {

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();
  int row = 0;
  int col = 0;
};

/// `node` indexes Layout::boxes.
template <typename Scalar>
struct HitInterval {
  std::size_t node = 0;
  Scalar t_near = 0;
  Scalar t_far = 0;
};

template <typename Scalar>
struct Sample {
  Scalar t = 0;
  Vec3<Scalar> x_global = Vec3<Scalar>::Zero();
  Vec3<Scalar> x_local = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();
  std::size_t node = 0;
  Scalar delta = 0;
};

template <typename Scalar>
struct SampleBatch {
  std::vector<std::vector<Sample<Scalar>>> rays;
  const Layout* layout = nullptr;
};

enum class Sampling { Midpoint, Stratified };

struct SampleOptions {
  int n_per_box = 64;
  Sampling sampling = Sampling::Midpoint;
  double delta_cap = 1e10;
};

/// A Box3 converted to the working scalar, plus its tie-break rank.
template <typename Scalar>
struct BoxFrame {
  Vec3<Scalar> center;
  Vec3<Scalar> half_extents;
  Vec3<Scalar> lower;
  Vec3<Scalar> upper;
  std::size_t node = 0;     // index into Layout::boxes
  std::size_t rank = 0;     // position of the id in lexicographic order
  std::uint64_t key = 0;    // hash of the id; keys per-box sampling streams
};

template <typename Scalar>
std::vector<BoxFrame<Scalar>> make_box_frames(const Layout& layout) {
  std::vector<BoxFrame<Scalar>> frames(layout.boxes.size());
  std::vector<std::size_t> order(layout.boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return layout.boxes[a].id < layout.boxes[b].id; });
  for (std::size_t r = 0; r < order.size(); ++r) frames[order[r]].rank = r;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Box3& b = layout.boxes[i];
    frames[i].node = i;
    frames[i].key = fnv1a(b.id);
    frames[i].center = b.center.cast<Scalar>();
    frames[i].half_extents = b.half_extents.cast<Scalar>();
    frames[i].lower = frames[i].center - frames[i].half_extents;
    frames[i].upper = frames[i].center + frames[i].half_extents;
  }
  return frames;
}

template <typename Scalar>
Ray<Scalar> camera_ray(const Camera& cam, const CameraBasis& basis, int row, int col) {
  const double x = (col + 0.5 - 0.5 * cam.width) / basis.focal;
  const double y = (row + 0.5 - 0.5 * cam.height) / basis.focal;
  const Eigen::Vector3d d = (basis.forward + x * basis.right - y * basis.up).normalized();
  Ray<Scalar> ray;
  ray.origin = cam.position.cast<Scalar>();
  ray.direction = d.cast<Scalar>();
  ray.row = row;
  ray.col = col;
  return ray;
}

template <typename Scalar>
std::vector<Ray<Scalar>> camera_rays(const Camera& cam) {
  const CameraBasis basis = camera_basis(cam);
  std::vector<Ray<Scalar>> rays;
  rays.reserve(std::size_t(cam.height) * cam.width);
  for (int r = 0; r < cam.height; ++r)
    for (int c = 0; c < cam.width; ++c) rays.push_back(camera_ray<Scalar>(cam, basis, r, c));
  return rays;
}

/// Slab test against [lower, upper]. Axis-parallel rays use infinite slabs.
template <typename Scalar>
std::optional<HitInterval<Scalar>> ray_aabb_intersect(const Ray<Scalar>& ray, const Vec3<Scalar>& lower,
                                                      const Vec3<Scalar>& upper, std::size_t node = 0) {
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
  Scalar t_enter = -inf;
  Scalar t_exit = inf;
  for (int a = 0; a < 3; ++a) {
    const Scalar o = ray.origin[a];
    const Scalar d = ray.direction[a];
    if (d == Scalar(0)) {
      if (o < lower[a] || o > upper[a]) return std::nullopt;
      continue;
    }
    const Scalar inv = Scalar(1) / d;
    Scalar t0 = (lower[a] - o) * inv;
    Scalar t1 = (upper[a] - o) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  const Scalar t_near = std::max(t_enter, Scalar(0));
  if (!(t_exit > t_near)) return std::nullopt;
  return HitInterval<Scalar>{node, t_near, t_exit};
}

template <typename Scalar>
std::optional<HitInterval<Scalar>> ray_box_intersect(const Ray<Scalar>& ray, const Box3& box, std::size_t node = 0) {
  const Vec3<Scalar> c = box.center.cast<Scalar>();
  const Vec3<Scalar> h = box.half_extents.cast<Scalar>();
  return ray_aabb_intersect<Scalar>(ray, c - h, c + h, node);
}

/// n depths in [t_near, t_far], ascending: cell midpoints, or one uniform draw per cell.
template <typename Scalar>
void sample_interval(const HitInterval<Scalar>& hit, int n, Sampling sampling, Rng& rng, std::vector<Scalar>& out) {
  out.resize(std::size_t(std::max(n, 0)));
  const Scalar len = hit.t_far - hit.t_near;
  for (int k = 0; k < n; ++k) {
    const Scalar u = sampling == Sampling::Midpoint ? Scalar(0.5) : Scalar(rng.uniform());
    Scalar t = hit.t_near + (Scalar(k) + u) / Scalar(n) * len;
    out[k] = std::min(std::max(t, hit.t_near), hit.t_far);
  }
  for (int k = 1; k < n; ++k) out[k] = std::max(out[k], out[k - 1]);
}

template <typename Scalar>
std::vector<Scalar> sample_interval(const HitInterval<Scalar>& hit, int n, Sampling sampling, Rng& rng) {
  std::vector<Scalar> out;
  sample_interval(hit, n, sampling, rng, out);
  return out;
}

template <typename Scalar>
Vec3<Scalar> to_local(const Vec3<Scalar>& center, const Vec3<Scalar>& half_extents, const Vec3<Scalar>& x_global) {
  return (x_global - center).cwiseQuotient(half_extents);
}

template <typename Scalar>
Vec3<Scalar> to_global(const Vec3<Scalar>& center, const Vec3<Scalar>& half_extents, const Vec3<Scalar>& x_local) {
  return x_local.cwiseProduct(half_extents) + center;
}

template <typename Scalar>
Vec3<Scalar> to_local(const Box3& box, const Vec3<Scalar>& x_global) {
  return to_local<Scalar>(box.center.cast<Scalar>(), box.half_extents.cast<Scalar>(), x_global);
}

template <typename Scalar>
Vec3<Scalar> to_global(const Box3& box, const Vec3<Scalar>& x_local) {
  return to_global<Scalar>(box.center.cast<Scalar>(), box.half_extents.cast<Scalar>(), x_local);
}

template <typename Scalar>
Vec3<Scalar> local_direction(const Box3& box, const Vec3<Scalar>& d_global) {
  return d_global.cwiseQuotient(box.half_extents.cast<Scalar>()).normalized();
}

/// Fills `delta` of an ordered sample run: consecutive gaps, last one capped.
template <typename Scalar>
void assign_deltas(std::span<Sample<Scalar>> samples, Scalar cap) {
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) samples[k].delta = samples[k + 1].t - samples[k].t;
  if (!samples.empty()) samples.back().delta = cap;
}

/// Per-ray sampling: intersect every box, sample each hit, map to local frames,
/// merge by depth (equal depths ordered by box id), then assign global deltas.
/// Each box draws from its own stream keyed by (ray_seed, box id), so a box's
/// samples do not depend on which other boxes are present.
template <typename Scalar>
void build_ray_samples(std::span<const BoxFrame<Scalar>> boxes, const Ray<Scalar>& ray, const SampleOptions& opts,
                       std::uint64_t ray_seed, std::vector<Sample<Scalar>>& out) {
  out.clear();
  std::vector<const BoxFrame<Scalar>*> by_rank;
  for (const auto& b : boxes) by_rank.push_back(&b);
  std::sort(by_rank.begin(), by_rank.end(), [](const auto* a, const auto* b) { return a->rank < b->rank; });
  std::vector<Scalar> ts;
  for (const BoxFrame<Scalar>* box : by_rank) {
    auto hit = ray_aabb_intersect<Scalar>(ray, box->lower, box->upper, box->node);
    if (!hit) continue;
    Rng rng(stream_seed(ray_seed, box->key));
    sample_interval(*hit, opts.n_per_box, opts.sampling, rng, ts);
    for (Scalar t : ts) {
      Sample<Scalar> s;
      s.t = t;
      s.x_global = ray.origin + t * ray.direction;
      s.x_local = to_local<Scalar>(box->center, box->half_extents, s.x_global);
      s.direction = ray.direction;
      s.node = box->node;
      out.push_back(s);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Sample<Scalar>& a, const Sample<Scalar>& b) { return a.t < b.t; });
  assign_deltas<Scalar>(out, Scalar(opts.delta_cap));
}

inline std::uint64_t ray_stream(std::uint64_t seed, int row, int col) {
  return stream_seed(seed, std::uint64_t(row), std::uint64_t(col));
}

template <typename Scalar>
SampleBatch<Scalar> build_sample_batch(const Layout& layout, std::span<const Ray<Scalar>> rays,
                                       const SampleOptions& opts, std::uint64_t seed) {
  const auto boxes = make_box_frames<Scalar>(layout);
  SampleBatch<Scalar> batch;
  batch.layout = &layout;
  batch.rays.resize(rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    build_ray_samples<Scalar>(boxes, rays[i], opts, ray_stream(seed, rays[i].row, rays[i].col), batch.rays[i]);
  }
  return batch;
}

}  // namespace componerf
