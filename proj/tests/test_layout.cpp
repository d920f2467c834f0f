#include <doctest.h>

#include "componerf/error.hpp"
#include "componerf/layout.hpp"
#include "fixtures.hpp"

using namespace componerf;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IO;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

const char* kApple = R"({
  "global_prompt": "a red apple and a yellow banana",
  "boxes": [{"id": "apple", "center": [0, 0, 0], "half_extents": [0.3, 0.3, 0.3], "prompt": "a red apple"}]
})";

}  // namespace

TEST_CASE("parse_layout maps fields and defaults the seed") {
  const Layout l = parse_layout(kApple);
  REQUIRE(l.boxes.size() == 1);
  CHECK(l.seed == 0);
  CHECK(l.global_prompt == "a red apple and a yellow banana");
  CHECK(l.boxes[0].id == "apple");
  CHECK(l.boxes[0].half_extents == Eigen::Vector3d(0.3, 0.3, 0.3));
  CHECK(l.boxes[0].prompt == "a red apple");
  CHECK_FALSE(l.boxes[0].cache_ref.has_value());
}

TEST_CASE("parse_layout rejects bad documents") {
  CHECK(code_of([] { parse_layout("{not json"); }) == ErrorCode::SyntaxError);

  const char* dup = R"({"global_prompt": "g", "boxes": [
    {"id": "apple", "center": [0,0,0], "half_extents": [0.1,0.1,0.1], "prompt": "a"},
    {"id": "apple", "center": [0.5,0,0], "half_extents": [0.1,0.1,0.1], "prompt": "b"}]})";
  CHECK(code_of([&] { parse_layout(dup); }) == ErrorCode::ValidationError);
  CHECK(message_of([&] { parse_layout(dup); }).find("apple") != std::string::npos);

  const char* negative = R"({"global_prompt": "g", "boxes": [
    {"id": "apple", "center": [0,0,0], "half_extents": [0.3,-0.1,0.3], "prompt": "a"}]})";
  CHECK(code_of([&] { parse_layout(negative); }) == ErrorCode::ValidationError);
  CHECK(message_of([&] { parse_layout(negative); }).find("half_extents") != std::string::npos);

  const char* outside = R"({"global_prompt": "g", "boxes": [
    {"id": "a", "center": [0.9,0,0], "half_extents": [0.3,0.1,0.1], "prompt": "a"}]})";
  CHECK(code_of([&] { parse_layout(outside); }) == ErrorCode::ValidationError);

  CHECK(code_of([] { parse_layout(R"({"global_prompt": "g", "boxes": []})"); }) == ErrorCode::ValidationError);
  CHECK(code_of([] {
          parse_layout(R"({"global_prompt": "", "boxes": [
            {"id": "a", "center": [0,0,0], "half_extents": [0.1,0.1,0.1], "prompt": "a"}]})");
        }) == ErrorCode::ValidationError);
}

TEST_CASE("serialize then parse is the identity") {
  Layout l = testing::two_sphere_layout(1234567890123ULL);
  l.boxes[1].cache_ref = "caches/right.cnode";
  l.boxes[0].center = {-0.3000000000000001, 1e-17, 0.1234567890123456};
  CHECK(parse_layout(serialize_layout(l)) == l);
}

TEST_CASE("validate_layout diagnostics") {
  Layout apart;
  apart.global_prompt = "g";
  apart.boxes.push_back(testing::make_box("a", {-0.5, 0, 0}, {0.2, 0.2, 0.2}, "a"));
  apart.boxes.push_back(testing::make_box("b", {0.5, 0, 0}, {0.2, 0.2, 0.2}, "b"));
  auto warnings = [](const std::vector<Diagnostic>& all) {
    std::vector<Diagnostic> out;
    for (const auto& d : all)
      if (d.severity == Diagnostic::Severity::Warning) out.push_back(d);
    return out;
  };
  auto d = warnings(validate_layout(apart));
  REQUIRE(d.size() == 1);
  CHECK(d[0].boxes == std::vector<std::string>{"a", "b"});

  Layout close = apart;
  close.boxes[0].center.x() = -0.15;
  close.boxes[1].center.x() = 0.15;
  CHECK(warnings(validate_layout(close)).empty());

  Layout tiny;
  tiny.global_prompt = "g";
  tiny.boxes.push_back(testing::make_box("t", {0, 0, 0}, {0.05, 0.05, 0.05}, "t"));
  d = validate_layout(tiny);
  REQUIRE(d.size() == 1);
  CHECK(d[0].severity == Diagnostic::Severity::Info);
  CHECK(d[0].value == doctest::Approx(1.25e-4).epsilon(1e-9));
}

TEST_CASE("apply_edit is pure and re-validates") {
  Layout l;
  l.global_prompt = "a red apple and a yellow banana";
  l.boxes.push_back(testing::make_box("apple", {0, 0, 0}, {0.3, 0.3, 0.3}, "a red apple"));
  l.boxes.push_back(testing::make_box("banana", {0.5, 0, 0}, {0.2, 0.2, 0.2}, "a yellow banana"));
  l.boxes.push_back(testing::make_box("wine", {-0.5, 0, 0}, {0.2, 0.2, 0.2}, "a glass of wine"));
  const Layout before = l;

  const Layout moved = apply_edit(l, LayoutEdit::move("apple", {0.1, 0, 0}));
  CHECK(moved.boxes[0].center == Eigen::Vector3d(0.1, 0, 0));
  CHECK(l == before);

  const Layout removed = apply_edit(l, LayoutEdit::remove("banana"));
  CHECK(removed.boxes.size() == 2);
  CHECK(removed.find("banana") == nullptr);

  const Layout juiced = apply_edit(l, LayoutEdit::set_prompt("wine", "a glass of orange juice"));
  CHECK(juiced.find("wine")->prompt == "a glass of orange juice");
  CHECK(juiced.find("wine")->center == before.find("wine")->center);
  CHECK(juiced.find("wine")->half_extents == before.find("wine")->half_extents);

  const Layout scaled = apply_edit(l, LayoutEdit::scale("apple", {2, 2, 2}));
  CHECK(scaled.boxes[0].half_extents == Eigen::Vector3d(0.6, 0.6, 0.6));

  CHECK(code_of([&] { apply_edit(l, LayoutEdit::move("pear", {0, 0, 0})); }) == ErrorCode::UnknownTarget);
  CHECK(code_of([&] { apply_edit(l, LayoutEdit::scale("apple", {4, 1, 1})); }) == ErrorCode::InvariantViolation);
  CHECK(code_of([&] { apply_edit(l, LayoutEdit::add(l.boxes[0])); }) == ErrorCode::InvariantViolation);
  Box3 pear = testing::make_box("pear", {0, 0.5, 0}, {0.1, 0.1, 0.1}, "a pear");
  CHECK(apply_edit(l, LayoutEdit::add(pear)).boxes.size() == 4);
  CHECK(l == before);
}
