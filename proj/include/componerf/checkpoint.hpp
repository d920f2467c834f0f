// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "componerf/scene.hpp"

namespace componerf {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr std::string_view kSceneMagic = "CNRFCKPT";
inline constexpr std::string_view kNodeMagic = "CNRFNODE";

// File layout, little-endian throughout:
//   magic[16] (NUL padded) | u32 version | u32 section count | u64 file size
//   per section: u32 name length | name | u32 kind | u64 offset | u64 byte length
//   blobs
enum class SectionKind : std::uint32_t { Floats = 0, Text = 1 };

struct SectionEntry {
  std::string name;
  SectionKind kind = SectionKind::Floats;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct Section {
  std::string name;
  SectionKind kind = SectionKind::Floats;
  std::vector<float> floats;
  std::string text;
};

/// Writes to a sibling temporary file and renames it into place.
void write_sections(const std::filesystem::path& path, std::string_view magic, std::span<const Section> sections,
                    std::uint32_t version = kCheckpointFormatVersion);

/// Validates magic, version and bounds. Throws IO on truncation or a foreign
/// file and `version_error` on a format version this build does not read.
std::vector<SectionEntry> read_section_index(const std::filesystem::path& path, std::string_view magic,
                                             ErrorCode version_error = ErrorCode::VersionMismatch);
std::vector<Section> read_sections(const std::filesystem::path& path, std::string_view magic,
                                   ErrorCode version_error = ErrorCode::VersionMismatch);

/// Parameters are stored as float32; double scenes round through float.
template <typename Scalar>
void save_checkpoint(const SceneModel<Scalar>& scene, const std::filesystem::path& path);

template <typename Scalar>
SceneModel<Scalar> load_checkpoint(const std::filesystem::path& path);

/// One local field detached from its scene.
struct NodeCache {
  std::uint32_t format_version = kCheckpointFormatVersion;
  std::string node_id;
  LocalFieldConfig config;
  NodeProvenance provenance;
  std::vector<float> grid;
  std::vector<float> mlp;
};

template <typename Scalar>
NodeCache make_node_cache(const SceneModel<Scalar>& scene, std::size_t node);

/// Throws ShapeMismatch when the blobs do not fit the recorded config.
template <typename Scalar>
LocalField<Scalar> field_from_cache(const NodeCache& cache);

void save_node_cache(const NodeCache& cache, const std::filesystem::path& path);

/// Throws MissingCache when the file does not exist and CacheVersionMismatch
/// on an unknown format version.
NodeCache load_node_cache(const std::filesystem::path& path);

}  // namespace componerf
