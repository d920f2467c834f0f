#include <doctest.h>

#include <fstream>
#include <iterator>

#include "componerf/analytic.hpp"
#include "componerf/checkpoint.hpp"
#include "componerf/trainer.hpp"
#include "fixtures.hpp"

using namespace componerf;

namespace {

template <typename Scalar>
std::vector<VecX<Scalar>> snapshot(SceneModel<Scalar>& scene) {
  std::vector<VecX<Scalar>> out;
  for (const auto& b : scene.parameters()) out.push_back(*b.values);
  return out;
}

SceneConfig quick_config() {
  SceneConfig cfg = testing::tiny_config();
  cfg.train.resolution = 8;
  cfg.train.weights.beta = 0.01;
  return cfg;
}

std::vector<Camera> quick_cameras() {
  return {orbit_camera(30, 20, 1.4, 60, 8, 8), orbit_camera(150, 35, 1.4, 60, 8, 8),
          orbit_camera(260, 10, 1.4, 60, 8, 8)};
}

TrainOptions quick_options(std::uint64_t steps) {
  TrainOptions o;
  o.steps = steps;
  o.cameras = quick_cameras();
  return o;
}

class NanGuidance final : public GuidanceProvider {
 public:
  GuidanceResponse guide(const GuidanceRequest& r) override {
    GuidanceResponse out;
    out.grad_image = r.image;
    out.grad_image.data.setConstant(std::nanf(""));
    return out;
  }
  std::string tag() const override { return "nan"; }
};

/// Delegates to the mock until `fail_at` calls have been answered.
class FlakyGuidance final : public GuidanceProvider {
 public:
  FlakyGuidance(MockGuidance inner, int fail_at) : inner_(std::move(inner)), fail_at_(fail_at) {}
  GuidanceResponse guide(const GuidanceRequest& r) override {
    if (calls_++ == fail_at_) throw Error(ErrorCode::Transport, "connection reset");
    return inner_.guide(r);
  }
  std::string tag() const override { return "flaky"; }

 private:
  MockGuidance inner_;
  int fail_at_;
  int calls_ = 0;
};

RenderOptions render_opts() {
  RenderOptions o;
  o.sampling.n_per_box = 8;
  o.seed = 3;
  return o;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvariantViolation;
}

}  // namespace

TEST_CASE("zero steps leaves the scene unchanged") {
  auto scene = SceneModel<float>::create(testing::two_sphere_layout(), quick_config());
  const auto before = snapshot(scene);
  MockGuidance mock(analytic_targets(testing::two_sphere_target()));
  const TrainReport r = train(scene, mock, quick_options(0));
  CHECK(r.steps.empty());
  CHECK(scene.step == 0);
  CHECK(snapshot(scene) == before);
}

TEST_CASE("training moves parameters, advances the step and keeps the layout") {
  const Layout layout = testing::two_sphere_layout();
  auto scene = SceneModel<float>::create(layout, quick_config());
  const auto before = snapshot(scene);
  MockGuidance mock(analytic_targets(testing::two_sphere_target()));
  int callbacks = 0;
  const TrainReport r = train<float>(scene, mock, quick_options(4), [&](const SceneModel<float>& s, const RenderedViews<float>& v) {
    ++callbacks;
    CHECK(s.step == std::uint64_t(callbacks));
    CHECK(v.global.has_value());
    CHECK(v.locals.size() == 2);
  });
  CHECK(callbacks == 4);
  CHECK(scene.step == 4);
  CHECK(r.steps.size() == 4);
  CHECK(r.steps.back().step == 4);
  CHECK(r.steps.front().global_loss > 0);
  CHECK(r.steps.front().local_loss > 0);
  CHECK(scene.layout == layout);
  CHECK(scene.nodes[0].provenance.training_steps == 4);
  const auto after = snapshot(scene);
  for (std::size_t b = 0; b < after.size(); ++b) CHECK(after[b] != before[b]);
}

TEST_CASE("non-finite gradients skip the update but count the step") {
  auto scene = SceneModel<float>::create(testing::two_sphere_layout(), quick_config());
  const auto before = snapshot(scene);
  NanGuidance nan;
  const TrainReport r = train(scene, nan, quick_options(3));
  CHECK(r.skipped == 3);
  CHECK(scene.skipped_steps == 3);
  CHECK(scene.step == 3);
  CHECK(r.steps[1].skipped);
  CHECK(snapshot(scene) == before);
  CHECK(scene.optimizer.step == 0);
}

TEST_CASE("guidance failure stops at the last completed step") {
  const Layout layout = testing::two_sphere_layout();
  auto targets = analytic_targets(testing::two_sphere_target());
  auto reference = SceneModel<float>::create(layout, quick_config());
  MockGuidance mock(targets);
  train(reference, mock, quick_options(2));

  auto scene = SceneModel<float>::create(layout, quick_config());
  // Three requests per step; fail in the middle of the third step.
  FlakyGuidance flaky(MockGuidance(targets), 7);
  CHECK(code_of([&] { train(scene, flaky, quick_options(5)); }) == ErrorCode::GuidanceFailure);
  CHECK(scene.step == 2);
  CHECK(snapshot(scene) == snapshot(reference));

  // Shape errors from a provider are guidance failures too.
  class WrongShape final : public GuidanceProvider {
   public:
    GuidanceResponse guide(const GuidanceRequest&) override { return {Image<float>(2, 2, 3), {}, "bad", {}}; }
    std::string tag() const override { return "bad"; }
  } wrong;
  CHECK(code_of([&] { train(scene, wrong, quick_options(1)); }) == ErrorCode::GuidanceFailure);
  CHECK(scene.step == 2);
}

TEST_CASE("frozen nodes and frozen calibrators stop updating") {
  const Layout layout = testing::two_sphere_layout();
  MockGuidance mock(analytic_targets(testing::two_sphere_target()));
  SceneConfig cfg = quick_config();
  cfg.train.freeze_after["left"] = 2;
  cfg.train.train_composition = false;
  auto scene = SceneModel<float>::create(layout, cfg);
  const auto initial = snapshot(scene);
  train(scene, mock, quick_options(2));
  const auto at_two = snapshot(scene);
  train(scene, mock, quick_options(3));
  const auto at_five = snapshot(scene);

  CHECK(at_five[0] == at_two[0]);
  CHECK(at_five[1] == at_two[1]);
  CHECK(at_two[0] != initial[0]);
  CHECK(at_five[2] != at_two[2]);
  for (std::size_t b = 4; b < 7; ++b) CHECK(at_five[b] == initial[b]);
  CHECK(scene.nodes[0].provenance.training_steps == 2);
  CHECK(scene.nodes[1].provenance.training_steps == 5);
}

TEST_CASE("identical seeds give identical checkpoints") {
  testing::TempDir dir;
  const Layout layout = testing::two_sphere_layout(11);
  MockGuidance mock(analytic_targets(testing::two_sphere_target()));
  for (const char* name : {"a.ckpt", "b.ckpt"}) {
    auto scene = SceneModel<float>::create(layout, quick_config());
    TrainOptions o;
    o.steps = 3;  // random train cameras
    train(scene, mock, o);
    save_checkpoint(scene, dir / name);
  }
  std::ifstream a(dir / "a.ckpt", std::ios::binary), b(dir / "b.ckpt", std::ios::binary);
  const std::string ba{std::istreambuf_iterator<char>(a), {}}, bb{std::istreambuf_iterator<char>(b), {}};
  CHECK(ba.size() > 100);
  CHECK(ba == bb);
}

TEST_CASE("global photometric training matches independent local training") {
  // Boxes on either side of x = 0 seen from cameras in the x = 0 plane, so no
  // ray meets both boxes.
  Layout layout;
  layout.global_prompt = "two balls";
  layout.seed = 9;
  layout.boxes.push_back(testing::make_box("left", {-0.4, 0, 0}, {0.3, 0.3, 0.3}, "red"));
  layout.boxes.push_back(testing::make_box("right", {0.4, 0, 0}, {0.3, 0.3, 0.3}, "blue"));
  AnalyticScene target = testing::two_sphere_target();
  target.spheres[0].center = {-0.4, 0, 0};
  target.spheres[1].center = {0.4, 0, 0};
  MockGuidance mock(analytic_targets(target));

  auto run = [&](double alpha_global, double alpha_local) {
    SceneConfig cfg = quick_config();
    cfg.train.weights = {alpha_global, alpha_local, 0.0};
    cfg.train.train_composition = false;
    auto scene = SceneModel<double>::create(layout, cfg);
    TrainOptions o;
    o.steps = 15;
    o.cameras = {orbit_camera(90, 20, 1.6, 70, 8, 8), orbit_camera(-90, 40, 1.5, 70, 8, 8)};
    return train(scene, mock, o);
  };
  const TrainReport global = run(1.0, 0.0);
  const TrainReport local = run(0.0, 1.0);
  for (std::size_t i = 0; i < global.steps.size(); ++i) {
    const double g = global.steps[i].global_loss;
    const double l = local.steps[i].local_loss;
    CHECK(g > 0);
    CHECK(std::abs(g - l) <= 1e-6 * std::max(g, l));
  }
  CHECK(global.steps.back().global_loss < global.steps.front().global_loss);
}

TEST_CASE("decompose writes one cache per node") {
  testing::TempDir dir;
  Layout layout = testing::two_sphere_layout();
  layout.boxes.push_back(testing::make_box("lamp/shade", {0, 0, 0.6}, {0.2, 0.2, 0.2}, "a lamp"));
  auto scene = SceneModel<float>::create(layout, quick_config());
  const auto files = decompose(scene, dir.path);
  REQUIRE(files.size() == 3);
  for (const auto& [id, path] : files) {
    CHECK(std::filesystem::exists(path));
    CHECK(load_node_cache(path).node_id == id);
  }
  CHECK(files.at("lamp/shade").parent_path() == dir.path);

  testing::TempDir other;
  CHECK(decompose(scene, other.path, {"right"}).size() == 1);
  CHECK(code_of([&] { decompose(scene, other.path, {"chair"}); }) == ErrorCode::UnknownTarget);
}

TEST_CASE("recompose loads cached nodes and starts fresh ones") {
  testing::TempDir dir;
  auto scene = SceneModel<float>::create(testing::two_sphere_layout(), quick_config());
  testing::randomize_parameters(scene, 21);
  const auto files = decompose(scene, dir.path);

  Layout edited = scene.layout;
  edited.boxes[0].cache_ref = files.at("left").filename().string();
  const auto fresh = SceneModel<float>::create(edited, quick_config());
  const auto re = recompose<float>(edited, quick_config(), dir.path);
  CHECK(re.nodes[0].provenance.from_cache);
  CHECK_FALSE(re.nodes[1].provenance.from_cache);
  CHECK(re.nodes[0].provenance.prompt == "a red ball");
  CHECK(re.nodes[0].field.mlp.params == scene.nodes[0].field.mlp.params);
  CHECK(re.nodes[1].field.mlp.params == fresh.nodes[1].field.mlp.params);
  CHECK(re.config.steps == kDefaultFinetuneSteps);
  CHECK(re.composition.density.params == fresh.composition.density.params);

  Layout missing = edited;
  missing.boxes[1].cache_ref = "nope.cnode";
  CHECK(code_of([&] { recompose<float>(missing, quick_config(), dir.path); }) == ErrorCode::MissingCache);

  SceneConfig latent = quick_config();
  latent.field.color_dim = 4;
  latent.field.color_space = ColorSpace::Latent;
  latent.composition.color_dim = 4;
  CHECK(code_of([&] { recompose<float>(edited, latent, dir.path); }) == ErrorCode::ConfigError);
}

TEST_CASE("recomposed identity scenes render like the original") {
  testing::TempDir dir;
  auto scene = SceneModel<float>::create(testing::two_sphere_layout(), quick_config());
  testing::randomize_parameters(scene, 8);
  const Camera cam = orbit_camera(40, 25, 1.5, 60, 9, 9);

  SUBCASE("single node into the same box equals its local render") {
    const auto local = render_views(scene, cam, render_opts(), ViewSelection::all(2)).locals[1];
    const auto files = decompose(scene, dir.path, {"right"});
    Layout single;
    single.global_prompt = "a blue ball";
    single.seed = scene.layout.seed;
    single.boxes.push_back(scene.layout.boxes[1]);
    single.boxes[0].cache_ref = files.at("right").string();
    const auto re = recompose<float>(single, quick_config());
    const auto global = render_image(re, cam, render_opts(), ViewTag::global());
    CHECK(global.pixels == local.pixels);
    CHECK(global.weight_sum == local.weight_sum);
  }
  SUBCASE("whole scene with reset calibrators") {
    reset_composition(scene);
    const auto before = render_image(scene, cam, render_opts(), ViewTag::global());
    const auto files = decompose(scene, dir.path);
    Layout same = scene.layout;
    for (auto& b : same.boxes) b.cache_ref = files.at(b.id).string();
    const auto re = recompose<float>(same, quick_config());
    CHECK(render_image(re, cam, render_opts(), ViewTag::global()).pixels == before.pixels);
  }
  SUBCASE("removing a node leaves background on its rays") {
    const auto files = decompose(scene, dir.path);
    Layout kept = scene.layout;
    kept.boxes.erase(kept.boxes.begin());
    kept.boxes[0].cache_ref = files.at("right").string();
    RenderOptions o = render_opts();
    o.background = {0.2, 0.4, 0.6};
    // Narrow view along +y through the left box only.
    Camera c = orbit_camera(-90, 0, 2.0, 8, 5, 5);
    c.target = {-0.5, 0, 0};
    c.position = {-0.5, -2.0, 0};
    const auto re = recompose<float>(kept, quick_config());
    const auto img = render_image(re, c, o, ViewTag::global());
    for (int r = 0; r < 5; ++r)
      for (int col = 0; col < 5; ++col)
        for (int k = 0; k < 3; ++k) CHECK(img.pixels.at(r, col, k) == float(o.background[std::size_t(k)]));
    // The same rays do hit the original scene.
    CHECK(render_image(scene, c, o, ViewTag::global()).weight_sum.data.minCoeff() > 0);
    CHECK(img.weight_sum.data.isZero(0));
  }
}
