// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace componerf {

/// Axis-aligned object box in the normalized global frame [-1,1]^3.
struct Box3 {
  std::string id;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
  std::string prompt;
  std::optional<std::string> cache_ref;

  double volume() const { return 8.0 * half_extents.prod(); }
  Eigen::Vector3d lower() const { return center - half_extents; }
  Eigen::Vector3d upper() const { return center + half_extents; }

  bool operator==(const Box3&) const = default;
};

struct Layout {
  std::string global_prompt;
  std::vector<Box3> boxes;
  std::uint64_t seed = 0;

  const Box3* find(std::string_view id) const;
  bool operator==(const Layout&) const = default;
};

struct LayoutEdit {
  enum class Kind { Move, Scale, Remove, SetPrompt, Add };

  Kind kind = Kind::Move;
  std::string target;
  Eigen::Vector3d vector = Eigen::Vector3d::Zero();  // Move delta or Scale factors
  std::string prompt;
  std::optional<Box3> box;

  static LayoutEdit move(std::string id, const Eigen::Vector3d& delta);
  static LayoutEdit scale(std::string id, const Eigen::Vector3d& factors);
  static LayoutEdit remove(std::string id);
  static LayoutEdit set_prompt(std::string id, std::string prompt);
  static LayoutEdit add(Box3 box);
};

struct Diagnostic {
  enum class Severity { Info, Warning };

  Severity severity = Severity::Info;
  std::vector<std::string> boxes;
  std::string message;
  double value = 0.0;
};

/// Parses the JSON layout document and enforces every Layout/Box3 invariant.
/// Throws SyntaxError or ValidationError (the message names the box and field).
Layout parse_layout(std::string_view text);
Layout load_layout_file(const std::filesystem::path& path);
std::string serialize_layout(const Layout& layout);

/// Throws ValidationError on the first violated invariant.
void check_layout(const Layout& layout);

/// Non-blocking diagnostics: disjoint box pairs (Warning) and boxes below
/// 1% of the global-frame volume (Info).
std::vector<Diagnostic> validate_layout(const Layout& layout);

Layout apply_edit(const Layout& layout, const LayoutEdit& edit);

}  // namespace componerf
