// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
//
// componerf compose|render|decompose|recompose|eval

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "componerf/analytic.hpp"
#include "componerf/checkpoint.hpp"
#include "componerf/config_io.hpp"
#include "componerf/guidance.hpp"
#include "componerf/image_io.hpp"
#include "componerf/layout.hpp"
#include "componerf/render.hpp"
#include "componerf/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace componerf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitGuidance = 3;
constexpr int kExitCheckpoint = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError:
    case ErrorCode::ValidationError:
    case ErrorCode::UnknownTarget:
    case ErrorCode::WrongMode:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::MissingTarget:
    case ErrorCode::ConfigError:
      return kExitConfig;
    case ErrorCode::Transport:
    case ErrorCode::ProtocolVersionMismatch:
    case ErrorCode::ProviderError:
    case ErrorCode::GuidanceFailure:
    case ErrorCode::DecodeUnavailable:
      return kExitGuidance;
    case ErrorCode::IO:
    case ErrorCode::VersionMismatch:
    case ErrorCode::CacheVersionMismatch:
    case ErrorCode::MissingCache:
    case ErrorCode::RegistryMismatch:
      return kExitCheckpoint;
    case ErrorCode::InvariantViolation:
    case ErrorCode::NonFiniteGradient:
      break;
  }
  return kExitInternal;
}

void print_error(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

struct Options {
  std::string layout;
  std::string ckpt;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> steps;
  std::string guidance;
  std::string mode;
  std::string color;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
  std::optional<int> resolution;
  std::optional<double> alpha_global, alpha_local, beta;
  std::uint64_t snapshot_every = 500;

  int frames = 0;
  double azimuth = 0.0;
  double elevation = 30.0;
  double radius = 1.5;
  std::string view = "global";
  bool rgb = false;
  std::string service;
  std::vector<std::string> nodes;
  std::string oracle;
  std::string prompt;
};

/// Input files named on the command line are configuration: a missing one is a config error.
template <typename F>
auto read_input(const std::string& what, const std::string& path, F&& load) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, "--" + what + " is required");
  if (!fs::exists(path)) throw Error(ErrorCode::ConfigError, what + " file not found: " + path);
  try {
    return load(path);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::IO) throw;
    throw Error(ErrorCode::ConfigError, e.detail());
  }
}

SceneConfig scene_config(const Options& o) {
  SceneConfig cfg;
  if (!o.config.empty()) {
    cfg = read_input("config", o.config, [](const std::string& p) {
      std::ifstream in(p);
      try {
        return parse_scene_config(json::parse(in));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, p + ": " + e.what());
      }
    });
  }
  if (o.mode == "density") cfg.composition.mode = CompositionMode::DensityBased;
  if (o.mode == "color") cfg.composition.mode = CompositionMode::ColorBased;
  if (o.color == "rgb" || o.color == "latent") {
    const bool rgb = o.color == "rgb";
    cfg.field.color_space = rgb ? ColorSpace::Rgb : ColorSpace::Latent;
    cfg.field.color_dim = rgb ? 3 : 4;
    cfg.composition.color_dim = cfg.field.color_dim;
  }
  if (o.steps) cfg.train.steps = *o.steps;
  if (o.deterministic) cfg.train.deterministic = *o.deterministic;
  if (o.resolution) cfg.train.resolution = *o.resolution;
  if (o.alpha_global) cfg.train.weights.alpha_global = *o.alpha_global;
  if (o.alpha_local) cfg.train.weights.alpha_local = *o.alpha_local;
  if (o.beta) cfg.train.weights.beta = *o.beta;
  return cfg;
}

Layout read_layout(const Options& o) {
  Layout layout = read_input("layout", o.layout, [](const std::string& p) { return load_layout_file(p); });
  if (o.seed) layout.seed = *o.seed;
  return layout;
}

std::string default_service(const Options& o) {
  if (!o.service.empty()) return o.service;
  const char* env = std::getenv("COMPONERF_GUIDANCE_URL");
  return env ? env : "";
}

std::unique_ptr<GuidanceProvider> make_guidance(const Options& o) {
  std::string spec = o.guidance;
  if (spec.empty()) {
    const std::string url = default_service(o);
    if (url.empty()) {
      throw Error(ErrorCode::ConfigError, "no guidance: pass --guidance mock:PATH|remote:URL or set COMPONERF_GUIDANCE_URL");
    }
    spec = "remote:" + url;
  }
  if (spec.starts_with("mock:")) {
    AnalyticScene target = read_input("guidance target", spec.substr(5), [](const std::string& p) {
      return AnalyticScene::load(p);
    });
    return std::make_unique<MockGuidance>(analytic_targets(std::move(target)));
  }
  if (spec.starts_with("remote:")) {
    RemoteConfig rc;
    rc.url = spec.substr(7);
    return std::make_unique<RemoteGuidance>(rc);
  }
  throw Error(ErrorCode::ConfigError, "guidance must be mock:PATH or remote:URL, got '" + spec + "'");
}

std::string file_token(std::string id) {
  for (char& ch : id) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return id;
}

/// PNG for displayable images, the latent container otherwise.
void write_view(const fs::path& stem, const Image<float>& img) {
  if (img.channels == 1 || img.channels == 3) {
    write_png(fs::path(stem.string() + ".png"), img);
  } else {
    write_latent(fs::path(stem.string() + ".lat"), img);
  }
}

void write_snapshots(const fs::path& dir, const SceneModel<float>& scene, const RenderedViews<float>& views) {
  fs::create_directories(dir);
  const std::string prefix = "step_" + std::to_string(scene.step) + "_";
  auto write = [&](const ImageBuffer<float>& b, const std::string& kind, const std::string& id) {
    const std::string stem = prefix + kind + "_" + file_token(id);
    write_view(dir / (stem + "_image"), b.pixels);
    write_png(dir / (stem + "_weights_sum.png"), b.weight_sum);
  };
  if (views.global) write(*views.global, "global", "scene");
  for (const auto& l : views.locals) write(l, "local", l.tag.node);
}

void print_result(const json& j) { std::cout << j.dump() << "\n"; }

int run_training(SceneModel<float>& scene, const Options& o, const fs::path& out, std::uint64_t steps) {
  auto guidance = make_guidance(o);
  fs::create_directories(out);
  const fs::path ckpt = out / "scene.ckpt";
  TrainOptions topts;
  topts.steps = steps;
  const std::uint64_t every = o.snapshot_every;
  try {
    train<float>(scene, *guidance, topts, [&](const SceneModel<float>& s, const RenderedViews<float>& v) {
      if (every > 0 && s.step % every == 0) write_snapshots(out / "snapshots", s, v);
    });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::GuidanceFailure) throw;
    save_checkpoint(scene, ckpt);
    print_error(error_code_name(e.code()), e.detail() + "; partial checkpoint at step " + std::to_string(scene.step) +
                                               " written to " + ckpt.string());
    return kExitGuidance;
  }
  save_checkpoint(scene, ckpt);
  print_result({{"checkpoint", ckpt.string()}, {"step", scene.step}, {"skipped_steps", scene.skipped_steps}});
  return kExitOk;
}

int cmd_compose(const Options& o) {
  const SceneConfig cfg = scene_config(o);
  const Layout layout = read_layout(o);
  if (o.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  auto scene = SceneModel<float>::create(layout, cfg);
  return run_training(scene, o, o.out, cfg.train.steps);
}

int cmd_recompose(const Options& o) {
  SceneConfig cfg = scene_config(o);
  const Layout layout = read_layout(o);
  if (o.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  auto scene = recompose<float>(layout, cfg, fs::path(o.layout).parent_path());
  if (o.steps) scene.config.steps = *o.steps;
  if (scene.config.steps == 0) {
    fs::create_directories(o.out);
    save_checkpoint(scene, fs::path(o.out) / "scene.ckpt");
    print_result({{"checkpoint", (fs::path(o.out) / "scene.ckpt").string()}, {"step", 0}});
    return kExitOk;
  }
  return run_training(scene, o, o.out, scene.config.steps);
}

SceneModel<float> read_checkpoint(const Options& o) {
  if (o.ckpt.empty()) throw Error(ErrorCode::ConfigError, "--ckpt is required");
  return load_checkpoint<float>(o.ckpt);
}

ViewTag parse_view(const std::string& v, const SceneModel<float>& scene) {
  if (v == "global") return ViewTag::global();
  if (v.starts_with("local:")) {
    const std::string id = v.substr(6);
    if (!scene.node_index(id)) throw Error(ErrorCode::UnknownTarget, "no node '" + id + "'");
    return ViewTag::local(id);
  }
  throw Error(ErrorCode::ConfigError, "--view must be global or local:ID");
}

std::vector<Camera> eval_cameras(const Options& o, const SceneModel<float>& scene) {
  const int res = o.resolution.value_or(scene.config.resolution);
  const double fov = scene.config.cameras.test_fov_deg;
  if (o.frames > 0) return orbit_cameras(o.frames, o.elevation, o.radius, fov, res, res);
  return {orbit_camera(o.azimuth, o.elevation, o.radius, fov, res, res)};
}

RenderOptions eval_render_options(const SceneModel<float>& scene) {
  return render_options_for(scene.config, scene.seed, Sampling::Midpoint);
}

RemoteConfig service_config(const Options& o) {
  RemoteConfig rc;
  rc.url = default_service(o);
  return rc;
}

int cmd_render(const Options& o) {
  const auto scene = read_checkpoint(o);
  if (o.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  const ViewTag view = parse_view(o.view, scene);
  const bool latent = scene.color_space() == ColorSpace::Latent;
  if (latent && o.rgb && default_service(o).empty()) {
    throw Error(ErrorCode::DecodeUnavailable, "--rgb on a latent checkpoint needs a decode service");
  }
  fs::create_directories(o.out);
  const RenderOptions ro = eval_render_options(scene);
  json files = json::array();
  const auto cams = eval_cameras(o, scene);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu", i);
    const fs::path stem = fs::path(o.out) / name;
    const ImageBuffer<float> buf = render_image(scene, cams[i], ro, view);
    Image<float> img = buf.pixels;
    if (latent && o.rgb) img = remote_decode(service_config(o), img);
    if (img.channels == 3) {
      write_png(stem.string() + ".png", img);
      write_pfm(stem.string() + ".pfm", img);
      files.push_back(stem.string() + ".png");
    } else {
      write_latent(stem.string() + ".lat", img);
      files.push_back(stem.string() + ".lat");
    }
    write_png(stem.string() + "_weights_sum.png", buf.weight_sum);
  }
  print_result({{"frames", files}});
  return kExitOk;
}

int cmd_decompose(const Options& o) {
  const auto scene = read_checkpoint(o);
  if (o.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  fs::create_directories(o.out);
  json out = json::object();
  for (const auto& [id, path] : decompose(scene, o.out, o.nodes)) out[id] = path.string();
  print_result({{"caches", out}});
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const auto scene = read_checkpoint(o);
  if (o.out.empty()) throw Error(ErrorCode::ConfigError, "--out is required");
  Options orbit = o;
  if (orbit.frames <= 0) orbit.frames = 8;
  const auto cams = eval_cameras(orbit, scene);
  const RenderOptions ro = eval_render_options(scene);

  std::vector<Image<float>> frames;
  for (const Camera& c : cams) frames.push_back(render_image(scene, c, ro, ViewTag::global()).pixels);

  json report;
  report["checkpoint"] = o.ckpt;
  report["frames"] = cams.size();
  json views = json::array();
  if (!o.oracle.empty()) {
    const AnalyticScene target = read_input("oracle", o.oracle, [](const std::string& p) {
      return AnalyticScene::load(p);
    });
    double sum = 0;
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const double p = psnr(frames[i], target.render(cams[i], ViewTag::global()));
      views.push_back({{"azimuth", cams[i].azimuth_deg}, {"psnr", p}});
      sum += p;
    }
    report["mode"] = "oracle";
    report["mean_psnr"] = sum / double(cams.size());
  } else if (!default_service(o).empty()) {
    const RemoteConfig rc = service_config(o);
    if (scene.color_space() == ColorSpace::Latent) {
      for (auto& f : frames) f = remote_decode(rc, f);
    }
    const std::string prompt = o.prompt.empty() ? scene.layout.global_prompt : o.prompt;
    const ClipScores scores = remote_clip_score(rc, prompt, frames);
    for (std::size_t i = 0; i < cams.size(); ++i) {
      views.push_back({{"azimuth", cams[i].azimuth_deg}, {"clip", scores.scores[i]}});
    }
    report["mode"] = "clip";
    report["prompt"] = prompt;
    report["mean_clip"] = scores.mean;
  } else {
    throw Error(ErrorCode::MissingTarget, "eval needs --oracle PATH or a clip service (--service / COMPONERF_GUIDANCE_URL)");
  }
  report["views"] = views;
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::IO, "cannot write " + out.string());
  f << report.dump(2) << "\n";
  print_result(report);
  return kExitOk;
}

void add_training_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--layout", o.layout, "Scene layout file")->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--config", o.config, "Scene config JSON");
  cmd->add_option("--steps", o.steps, "Training steps");
  cmd->add_option("--guidance", o.guidance, "mock:TARGET_JSON or remote:URL");
  cmd->add_option("--mode", o.mode, "Composition mode")->check(CLI::IsMember({"density", "color"}));
  cmd->add_option("--color", o.color, "Field color space")->check(CLI::IsMember({"latent", "rgb"}));
  cmd->add_option("--seed", o.seed, "Scene seed (overrides the layout)");
  cmd->add_flag("--deterministic,!--fast", o.deterministic, "Deterministic gradient reduction");
  cmd->add_option("--resolution", o.resolution, "Training image size");
  cmd->add_option("--alpha-global", o.alpha_global);
  cmd->add_option("--alpha-local", o.alpha_local);
  cmd->add_option("--beta", o.beta, "Sparsity weight");
  cmd->add_option("--snapshot-every", o.snapshot_every, "Snapshot cadence in steps (0 disables)");
}

void add_view_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--frames", o.frames, "Orbit frame count");
  cmd->add_option("--azimuth", o.azimuth);
  cmd->add_option("--elevation", o.elevation);
  cmd->add_option("--radius", o.radius);
  cmd->add_option("--resolution", o.resolution, "Image size");
  cmd->add_option("--service", o.service, "Guidance service URL (default: COMPONERF_GUIDANCE_URL)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional NeRF engine"};
  app.require_subcommand(1);
  Options o;

  auto* compose = app.add_subcommand("compose", "Train a scene from a layout");
  add_training_flags(compose, o);

  auto* recomp = app.add_subcommand("recompose", "Build a scene from cached nodes and finetune it");
  add_training_flags(recomp, o);

  auto* render = app.add_subcommand("render", "Render views of a checkpoint");
  render->add_option("--ckpt", o.ckpt)->required();
  render->add_option("--out", o.out)->required();
  render->add_option("--view", o.view, "global or local:ID");
  render->add_flag("--rgb", o.rgb, "Decode latent renders to RGB");
  add_view_flags(render, o);

  auto* decomp = app.add_subcommand("decompose", "Write one cache per node");
  decomp->add_option("--ckpt", o.ckpt)->required();
  decomp->add_option("--out", o.out)->required();
  decomp->add_option("--node", o.nodes, "Only these node ids");

  auto* eval = app.add_subcommand("eval", "Score orbit renders");
  eval->add_option("--ckpt", o.ckpt)->required();
  eval->add_option("--out", o.out, "Report path")->required();
  eval->add_option("--oracle", o.oracle, "Analytic target JSON");
  eval->add_option("--prompt", o.prompt, "CLIP prompt (default: the global prompt)");
  add_view_flags(eval, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("ConfigError", e.what());
    return kExitConfig;
  }

  try {
    if (compose->parsed()) return cmd_compose(o);
    if (recomp->parsed()) return cmd_recompose(o);
    if (render->parsed()) return cmd_render(o);
    if (decomp->parsed()) return cmd_decompose(o);
    if (eval->parsed()) return cmd_eval(o);
  } catch (const Error& e) {
    print_error(error_code_name(e.code()), e.detail());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    print_error("IO", e.what());
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
