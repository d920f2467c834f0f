// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <type_traits>

namespace componerf {

/// Converts between host order and little-endian (an involution).
template <typename T>
  requires std::is_integral_v<T>
T little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

}  // namespace componerf
