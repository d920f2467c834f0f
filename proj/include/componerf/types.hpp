// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>

#include "componerf/error.hpp"

namespace componerf {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Mat3X = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// H x W x C image stored row-major, channel-interleaved (the wire layout).
template <typename Scalar>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  VecX<Scalar> data;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), data(VecX<Scalar>::Zero(std::size_t(h) * w * c)) {}

  std::size_t pixel_count() const { return std::size_t(height) * width; }
  std::size_t index(int row, int col, int ch = 0) const {
    return (std::size_t(row) * width + col) * channels + ch;
  }
  Scalar& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
  Scalar at(int row, int col, int ch) const { return data[index(row, col, ch)]; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.data = data.template cast<Other>();
    return out;
  }

  bool operator==(const Image& other) const { return same_shape(other) && data == other.data; }
};

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": image shapes differ");
  }
}

}  // namespace componerf
