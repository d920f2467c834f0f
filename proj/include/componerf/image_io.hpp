// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "componerf/types.hpp"

namespace componerf {

/// 8-bit PNG of a 1- or 3-channel image; values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Image<float>& image);

/// Portable float map ("PF" color, "Pf" grayscale), little-endian, bottom row first.
void write_pfm(const std::filesystem::path& path, const Image<float>& image);
Image<float> read_pfm(const std::filesystem::path& path);

/// Raw float32 image with a 16-byte header: "CNRF", u16 version, u16 channels,
/// u32 height, u32 width.
void write_latent(const std::filesystem::path& path, const Image<float>& image);
Image<float> read_latent(const std::filesystem::path& path);

}  // namespace componerf
