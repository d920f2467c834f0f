// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/layout.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "componerf/error.hpp"

namespace componerf {

using nlohmann::json;

namespace {

constexpr double kFrameTolerance = 1e-12;
constexpr double kSmallBoxRatio = 0.01;
constexpr double kGlobalFrameVolume = 8.0;

[[noreturn]] void invalid(const std::string& box, const std::string& field, const std::string& what) {
  std::string msg = box.empty() ? field + ": " + what : "box '" + box + "' " + field + ": " + what;
  throw Error(ErrorCode::ValidationError, msg);
}

Eigen::Vector3d read_vec3(const json& j, const std::string& box, const char* field) {
  if (!j.contains(field)) invalid(box, field, "missing");
  const json& v = j.at(field);
  if (!v.is_array() || v.size() != 3) invalid(box, field, "expected an array of 3 numbers");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) invalid(box, field, "expected an array of 3 numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

std::string read_string(const json& j, const std::string& box, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string()) invalid(box, field, "expected a string");
  return j.at(field).get<std::string>();
}

void check_box(const Box3& b) {
  if (b.id.empty()) invalid(b.id, "id", "must be non-empty");
  if (!b.center.allFinite()) invalid(b.id, "center", "must be finite");
  if (!b.half_extents.allFinite() || (b.half_extents.array() <= 0.0).any()) {
    invalid(b.id, "half_extents", "all components must be strictly positive");
  }
  if ((b.lower().array() < -1.0 - kFrameTolerance).any() || (b.upper().array() > 1.0 + kFrameTolerance).any()) {
    invalid(b.id, "half_extents", "box leaves the global frame [-1,1]^3");
  }
}

bool boxes_overlap(const Box3& a, const Box3& b) {
  // Open intervals: touching faces do not count as overlap.
  return ((a.center - b.center).cwiseAbs().array() < (a.half_extents + b.half_extents).array()).all();
}

}  // namespace

const Box3* Layout::find(std::string_view id) const {
  auto it = std::find_if(boxes.begin(), boxes.end(), [&](const Box3& b) { return b.id == id; });
  return it == boxes.end() ? nullptr : &*it;
}

LayoutEdit LayoutEdit::move(std::string id, const Eigen::Vector3d& delta) {
  LayoutEdit e;
  e.kind = Kind::Move;
  e.target = std::move(id);
  e.vector = delta;
  return e;
}

LayoutEdit LayoutEdit::scale(std::string id, const Eigen::Vector3d& factors) {
  LayoutEdit e;
  e.kind = Kind::Scale;
  e.target = std::move(id);
  e.vector = factors;
  return e;
}

LayoutEdit LayoutEdit::remove(std::string id) {
  LayoutEdit e;
  e.kind = Kind::Remove;
  e.target = std::move(id);
  return e;
}

LayoutEdit LayoutEdit::set_prompt(std::string id, std::string prompt) {
  LayoutEdit e;
  e.kind = Kind::SetPrompt;
  e.target = std::move(id);
  e.prompt = std::move(prompt);
  return e;
}

LayoutEdit LayoutEdit::add(Box3 box) {
  LayoutEdit e;
  e.kind = Kind::Add;
  e.target = box.id;
  e.box = std::move(box);
  return e;
}

void check_layout(const Layout& layout) {
  if (layout.global_prompt.empty()) invalid("", "global_prompt", "must be non-empty");
  if (layout.boxes.empty()) invalid("", "boxes", "layout needs at least one box");
  std::set<std::string> seen;
  for (const Box3& b : layout.boxes) {
    check_box(b);
    if (!seen.insert(b.id).second) invalid(b.id, "id", "duplicate id '" + b.id + "'");
  }
}

Layout parse_layout(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::SyntaxError, "layout document must be an object");

  Layout layout;
  layout.global_prompt = read_string(doc, "", "global_prompt");
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      invalid("", "seed", "expected a non-negative integer");
    }
    layout.seed = s.get<std::uint64_t>();
  }
  if (!doc.contains("boxes") || !doc.at("boxes").is_array()) invalid("", "boxes", "expected an array");
  for (const json& jb : doc.at("boxes")) {
    if (!jb.is_object()) invalid("", "boxes", "each box must be an object");
    Box3 b;
    b.id = read_string(jb, "", "id");
    b.center = read_vec3(jb, b.id, "center");
    b.half_extents = read_vec3(jb, b.id, "half_extents");
    b.prompt = read_string(jb, b.id, "prompt");
    if (jb.contains("cache_ref") && !jb.at("cache_ref").is_null()) {
      b.cache_ref = read_string(jb, b.id, "cache_ref");
    }
    layout.boxes.push_back(std::move(b));
  }
  check_layout(layout);
  return layout;
}

Layout load_layout_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO, "cannot read layout file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_layout(ss.str());
}

std::string serialize_layout(const Layout& layout) {
  json doc;
  doc["global_prompt"] = layout.global_prompt;
  doc["seed"] = layout.seed;
  doc["boxes"] = json::array();
  for (const Box3& b : layout.boxes) {
    json jb;
    jb["id"] = b.id;
    jb["center"] = {b.center.x(), b.center.y(), b.center.z()};
    jb["half_extents"] = {b.half_extents.x(), b.half_extents.y(), b.half_extents.z()};
    jb["prompt"] = b.prompt;
    if (b.cache_ref) jb["cache_ref"] = *b.cache_ref;
    doc["boxes"].push_back(std::move(jb));
  }
  return doc.dump(2);
}

std::vector<Diagnostic> validate_layout(const Layout& layout) {
  std::vector<Diagnostic> out;
  const auto& boxes = layout.boxes;
  if (boxes.size() >= 2) {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (boxes_overlap(boxes[i], boxes[j])) continue;
        Diagnostic d;
        d.severity = Diagnostic::Severity::Warning;
        d.boxes = {boxes[i].id, boxes[j].id};
        d.message = "boxes '" + boxes[i].id + "' and '" + boxes[j].id +
                    "' do not overlap; objects may float apart";
        out.push_back(std::move(d));
      }
    }
  }
  for (const Box3& b : boxes) {
    const double ratio = b.volume() / kGlobalFrameVolume;
    if (ratio < kSmallBoxRatio) {
      Diagnostic d;
      d.severity = Diagnostic::Severity::Info;
      d.boxes = {b.id};
      d.value = ratio;
      std::ostringstream msg;
      msg << "box '" << b.id << "' covers " << ratio << " of the global frame volume; few rays will reach it";
      d.message = msg.str();
      out.push_back(std::move(d));
    }
  }
  return out;
}

Layout apply_edit(const Layout& layout, const LayoutEdit& edit) {
  Layout out = layout;
  auto it = std::find_if(out.boxes.begin(), out.boxes.end(), [&](const Box3& b) { return b.id == edit.target; });
  const bool exists = it != out.boxes.end();
  if (edit.kind == LayoutEdit::Kind::Add) {
    if (exists) throw Error(ErrorCode::InvariantViolation, "box '" + edit.target + "' already exists");
    if (!edit.box) throw Error(ErrorCode::InvariantViolation, "Add edit carries no box");
    out.boxes.push_back(*edit.box);
  } else {
    if (!exists) throw Error(ErrorCode::UnknownTarget, "no box with id '" + edit.target + "'");
    switch (edit.kind) {
      case LayoutEdit::Kind::Move: it->center += edit.vector; break;
      case LayoutEdit::Kind::Scale: it->half_extents = it->half_extents.cwiseProduct(edit.vector); break;
      case LayoutEdit::Kind::Remove: out.boxes.erase(it); break;
      case LayoutEdit::Kind::SetPrompt: it->prompt = edit.prompt; break;
      case LayoutEdit::Kind::Add: break;
    }
  }
  try {
    check_layout(out);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvariantViolation, e.detail());
  }
  return out;
}

}  // namespace componerf
