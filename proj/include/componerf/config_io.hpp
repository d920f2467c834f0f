// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "componerf/scene.hpp"

namespace componerf {

// JSON mapping for every configuration type. Readers accept partial objects
// (missing keys keep their defaults) and throw ConfigError on bad values.

void to_json(nlohmann::json& j, const HashGridConfig& c);
void from_json(const nlohmann::json& j, HashGridConfig& c);
void to_json(nlohmann::json& j, const LocalFieldConfig& c);
void from_json(const nlohmann::json& j, LocalFieldConfig& c);
void to_json(nlohmann::json& j, const CompositionConfig& c);
void from_json(const nlohmann::json& j, CompositionConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);
void to_json(nlohmann::json& j, const NodeProvenance& p);
void from_json(const nlohmann::json& j, NodeProvenance& p);

/// Reads a SceneConfig, wrapping JSON failures as ConfigError.
SceneConfig parse_scene_config(const nlohmann::json& j);

}  // namespace componerf
