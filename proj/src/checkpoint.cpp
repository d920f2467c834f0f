// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "componerf/config_io.hpp"
#include "componerf/endian.hpp"
#include "componerf/error.hpp"

namespace componerf {

using nlohmann::json;

namespace {

constexpr std::size_t kMagicBytes = 16;
constexpr std::size_t kHeaderBytes = kMagicBytes + 4 + 4 + 8;

template <typename T>
void put(std::string& out, T v) {
  v = little_endian(v);
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return little_endian(v);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::IO, path_.string() + ": truncated file");
  }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<SectionEntry> parse_index(const std::string& bytes, const std::filesystem::path& path,
                                      std::string_view magic, ErrorCode version_error) {
  Reader r(bytes, path);
  const std::string m = r.take(kMagicBytes);
  std::string expected(magic);
  expected.resize(kMagicBytes, '\0');
  if (m != expected) throw Error(ErrorCode::IO, path.string() + ": not a " + std::string(magic) + " file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw Error(version_error, path.string() + ": format version " + std::to_string(version) + ", expected " +
                                   std::to_string(kCheckpointFormatVersion));
  }
  const auto count = r.get<std::uint32_t>();
  const auto total = r.get<std::uint64_t>();
  if (total != bytes.size()) throw Error(ErrorCode::IO, path.string() + ": truncated file");
  std::vector<SectionEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    SectionEntry e;
    const auto name_len = r.get<std::uint32_t>();
    e.name = r.take(name_len);
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1) throw Error(ErrorCode::IO, path.string() + ": unknown section kind");
    e.kind = SectionKind(kind);
    e.offset = r.get<std::uint64_t>();
    e.length = r.get<std::uint64_t>();
    if (e.offset > bytes.size() || e.length > bytes.size() - e.offset) {
      throw Error(ErrorCode::IO, path.string() + ": section '" + e.name + "' out of bounds");
    }
    if (e.kind == SectionKind::Floats && e.length % 4 != 0) {
      throw Error(ErrorCode::IO, path.string() + ": section '" + e.name + "' is not a float32 array");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

const Section& find_section(const std::vector<Section>& sections, const std::string& name,
                            const std::filesystem::path& path) {
  for (const Section& s : sections)
    if (s.name == name) return s;
  throw Error(ErrorCode::IO, path.string() + ": missing section '" + name + "'");
}

template <typename Scalar>
void append_floats(std::vector<float>& out, const VecX<Scalar>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(float(v[i]));
}

/// Copies the next `dst.size()` values, advancing `pos`.
template <typename Scalar>
void take_floats(const std::vector<float>& src, std::size_t& pos, VecX<Scalar>& dst, const std::string& what) {
  if (src.size() - pos < std::size_t(dst.size())) throw Error(ErrorCode::ShapeMismatch, what + ": blob too short");
  for (Eigen::Index i = 0; i < dst.size(); ++i) dst[i] = Scalar(src[pos + std::size_t(i)]);
  pos += std::size_t(dst.size());
}

Section floats_section(std::string name, std::vector<float> values) {
  Section s;
  s.name = std::move(name);
  s.kind = SectionKind::Floats;
  s.floats = std::move(values);
  return s;
}

Section text_section(std::string name, std::string text) {
  Section s;
  s.name = std::move(name);
  s.kind = SectionKind::Text;
  s.text = std::move(text);
  return s;
}

}  // namespace

void write_sections(const std::filesystem::path& path, std::string_view magic, std::span<const Section> sections,
                    std::uint32_t version) {
  std::string index;
  std::uint64_t offset = kHeaderBytes;
  for (const Section& s : sections) offset += 4 + s.name.size() + 4 + 8 + 8;
  for (const Section& s : sections) {
    const std::uint64_t length = s.kind == SectionKind::Floats ? 4 * s.floats.size() : s.text.size();
    put<std::uint32_t>(index, std::uint32_t(s.name.size()));
    index += s.name;
    put<std::uint32_t>(index, std::uint32_t(s.kind));
    put<std::uint64_t>(index, offset);
    put<std::uint64_t>(index, length);
    offset += length;
  }
  std::string out;
  out.reserve(offset);
  std::string m(magic);
  m.resize(kMagicBytes, '\0');
  out += m;
  put<std::uint32_t>(out, version);
  put<std::uint32_t>(out, std::uint32_t(sections.size()));
  put<std::uint64_t>(out, offset);
  out += index;
  for (const Section& s : sections) {
    if (s.kind == SectionKind::Text) {
      out += s.text;
    } else {
      for (float f : s.floats) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IO, "cannot write " + tmp.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw Error(ErrorCode::IO, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IO, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::vector<SectionEntry> read_section_index(const std::filesystem::path& path, std::string_view magic,
                                             ErrorCode version_error) {
  return parse_index(read_file(path), path, magic, version_error);
}

std::vector<Section> read_sections(const std::filesystem::path& path, std::string_view magic,
                                   ErrorCode version_error) {
  const std::string bytes = read_file(path);
  std::vector<Section> out;
  for (const SectionEntry& e : parse_index(bytes, path, magic, version_error)) {
    Section s;
    s.name = e.name;
    s.kind = e.kind;
    if (e.kind == SectionKind::Text) {
      s.text = bytes.substr(e.offset, e.length);
    } else {
      s.floats.resize(e.length / 4);
      for (std::size_t i = 0; i < s.floats.size(); ++i) {
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + e.offset + 4 * i, 4);
        s.floats[i] = std::bit_cast<float>(little_endian(v));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Scalar>
void save_checkpoint(const SceneModel<Scalar>& scene, const std::filesystem::path& path) {
  scene.check_consistent();
  json doc;
  doc["scene_id"] = scene.scene_id;
  doc["layout"] = json::parse(serialize_layout(scene.layout));
  doc["seed"] = scene.seed;
  doc["step"] = scene.step;
  doc["skipped_steps"] = scene.skipped_steps;
  doc["train"] = scene.config;
  doc["composition"] = scene.composition.config;
  doc["optimizer_step"] = scene.optimizer.step;
  doc["nodes"] = json::array();
  for (const auto& n : scene.nodes) {
    doc["nodes"].push_back({{"id", n.id}, {"field", n.field.config}, {"provenance", n.provenance}});
  }

  std::vector<Section> sections;
  sections.push_back(text_section("scene", doc.dump(2)));
  for (const auto& n : scene.nodes) {
    std::vector<float> blob;
    append_floats(blob, n.field.grid.table);
    append_floats(blob, n.field.mlp.params);
    sections.push_back(floats_section("node/" + n.id, std::move(blob)));
  }
  std::vector<float> grid, density, color, first, second;
  append_floats(grid, scene.composition.grid.table);
  append_floats(density, scene.composition.density.params);
  append_floats(color, scene.composition.color.params);
  for (const auto& m : scene.optimizer.first) append_floats(first, m);
  for (const auto& v : scene.optimizer.second) append_floats(second, v);
  sections.push_back(floats_section("composition/grid", std::move(grid)));
  sections.push_back(floats_section("composition/density", std::move(density)));
  sections.push_back(floats_section("composition/color", std::move(color)));
  sections.push_back(floats_section("optim/first", std::move(first)));
  sections.push_back(floats_section("optim/second", std::move(second)));
  write_sections(path, kSceneMagic, sections);
}

template <typename Scalar>
SceneModel<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const std::vector<Section> sections = read_sections(path, kSceneMagic);
  SceneModel<Scalar> scene;
  try {
    const json doc = json::parse(find_section(sections, "scene", path).text);
    scene.scene_id = doc.at("scene_id").get<std::string>();
    scene.layout = parse_layout(doc.at("layout").dump());
    scene.seed = doc.at("seed").get<std::uint64_t>();
    scene.step = doc.at("step").get<std::uint64_t>();
    scene.skipped_steps = doc.at("skipped_steps").get<std::uint64_t>();
    scene.config = doc.at("train").get<TrainConfig>();
    scene.optimizer.config = scene.config.adam;
    scene.optimizer.step = doc.at("optimizer_step").get<std::uint64_t>();
    const auto comp_cfg = doc.at("composition").get<CompositionConfig>();
    check_composition_config(comp_cfg);
    scene.composition = CompositionParams<Scalar>(comp_cfg, composition_seed(scene.seed));
    for (const json& jn : doc.at("nodes")) {
      SceneNode<Scalar> node;
      node.id = jn.at("id").get<std::string>();
      const auto field_cfg = jn.at("field").get<LocalFieldConfig>();
      check_local_field_config(field_cfg);
      node.field = LocalField<Scalar>(field_cfg, 0);
      node.provenance = jn.at("provenance").get<NodeProvenance>();
      const Section& blob = find_section(sections, "node/" + node.id, path);
      std::size_t pos = 0;
      take_floats(blob.floats, pos, node.field.grid.table, "node/" + node.id);
      take_floats(blob.floats, pos, node.field.mlp.params, "node/" + node.id);
      if (pos != blob.floats.size()) throw Error(ErrorCode::IO, path.string() + ": node/" + node.id + " size mismatch");
      scene.nodes.push_back(std::move(node));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IO, path.string() + ": bad scene header: " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IO) throw;
    throw Error(ErrorCode::IO, path.string() + ": " + e.what());
  }

  auto load_block = [&](const std::string& name, VecX<Scalar>& dst) {
    const Section& s = find_section(sections, name, path);
    std::size_t pos = 0;
    take_floats(s.floats, pos, dst, name);
    if (pos != s.floats.size()) throw Error(ErrorCode::IO, path.string() + ": " + name + " size mismatch");
  };
  load_block("composition/grid", scene.composition.grid.table);
  load_block("composition/density", scene.composition.density.params);
  load_block("composition/color", scene.composition.color.params);

  const Section& first = find_section(sections, "optim/first", path);
  const Section& second = find_section(sections, "optim/second", path);
  if (!first.floats.empty()) {
    std::size_t p1 = 0, p2 = 0;
    for (const auto& block : scene.parameters()) {
      scene.optimizer.first.push_back(VecX<Scalar>::Zero(block.values->size()));
      scene.optimizer.second.push_back(VecX<Scalar>::Zero(block.values->size()));
      take_floats(first.floats, p1, scene.optimizer.first.back(), "optim/first");
      take_floats(second.floats, p2, scene.optimizer.second.back(), "optim/second");
    }
    if (p1 != first.floats.size() || p2 != second.floats.size()) {
      throw Error(ErrorCode::IO, path.string() + ": optimizer state size mismatch");
    }
  }
  try {
    scene.check_consistent();
  } catch (const Error& e) {
    throw Error(ErrorCode::IO, path.string() + ": " + e.what());
  }
  return scene;
}

template <typename Scalar>
NodeCache make_node_cache(const SceneModel<Scalar>& scene, std::size_t node) {
  const SceneNode<Scalar>& n = scene.nodes.at(node);
  NodeCache c;
  c.node_id = n.id;
  c.config = n.field.config;
  c.provenance = n.provenance;
  c.provenance.source_scene = scene.scene_id;
  c.provenance.prompt = scene.layout.boxes.at(node).prompt;
  append_floats(c.grid, n.field.grid.table);
  append_floats(c.mlp, n.field.mlp.params);
  return c;
}

template <typename Scalar>
LocalField<Scalar> field_from_cache(const NodeCache& cache) {
  check_local_field_config(cache.config);
  LocalField<Scalar> field(cache.config, 0);
  if (cache.grid.size() != std::size_t(field.grid.table.size()) ||
      cache.mlp.size() != std::size_t(field.mlp.params.size())) {
    throw Error(ErrorCode::ShapeMismatch, "node cache '" + cache.node_id + "' does not match its field config");
  }
  std::size_t pos = 0;
  take_floats(cache.grid, pos, field.grid.table, cache.node_id);
  pos = 0;
  take_floats(cache.mlp, pos, field.mlp.params, cache.node_id);
  return field;
}

void save_node_cache(const NodeCache& cache, const std::filesystem::path& path) {
  json doc;
  doc["node_id"] = cache.node_id;
  doc["field"] = cache.config;
  doc["provenance"] = cache.provenance;
  doc["format_version"] = cache.format_version;
  std::vector<Section> sections;
  sections.push_back(text_section("provenance", doc.dump(2)));
  sections.push_back(floats_section("grid", cache.grid));
  sections.push_back(floats_section("mlp", cache.mlp));
  write_sections(path, kNodeMagic, sections, cache.format_version);
}

NodeCache load_node_cache(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingCache, "node cache not found: " + path.string());
  const std::vector<Section> sections = read_sections(path, kNodeMagic, ErrorCode::CacheVersionMismatch);
  NodeCache c;
  try {
    const json doc = json::parse(find_section(sections, "provenance", path).text);
    c.format_version = doc.at("format_version").get<std::uint32_t>();
    c.node_id = doc.at("node_id").get<std::string>();
    c.config = doc.at("field").get<LocalFieldConfig>();
    c.provenance = doc.at("provenance").get<NodeProvenance>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IO, path.string() + ": bad cache header: " + e.what());
  }
  c.grid = find_section(sections, "grid", path).floats;
  c.mlp = find_section(sections, "mlp", path).floats;
  return c;
}

template void save_checkpoint(const SceneModel<float>&, const std::filesystem::path&);
template void save_checkpoint(const SceneModel<double>&, const std::filesystem::path&);
template SceneModel<float> load_checkpoint<float>(const std::filesystem::path&);
template SceneModel<double> load_checkpoint<double>(const std::filesystem::path&);
template NodeCache make_node_cache(const SceneModel<float>&, std::size_t);
template NodeCache make_node_cache(const SceneModel<double>&, std::size_t);
template LocalField<float> field_from_cache<float>(const NodeCache&);
template LocalField<double> field_from_cache<double>(const NodeCache&);

}  // namespace componerf
