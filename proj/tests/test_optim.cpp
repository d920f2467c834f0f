#include <doctest.h>

#include <cmath>

#include "componerf/optim.hpp"

using namespace componerf;

namespace {

struct Model {
  VecX<double> a = VecX<double>::Zero(3);
  VecX<double> b = VecX<double>::Zero(2);
  std::vector<ParamBlock<double>> params() { return {{"a", &a}, {"b", &b}}; }
};

}  // namespace

TEST_CASE("adam examples") {
  Model m;
  m.a << 1, 2, 3;
  m.b << -1, 4;
  const VecX<double> a0 = m.a, b0 = m.b;
  AdamState<double> state;
  auto g = GradientSet<double>::zeros_like(m.params());
  adam_step<double>(m.params(), g, state);
  CHECK(m.a == a0);
  CHECK(m.b == b0);

  Model n;
  AdamState<double> s2;
  auto g2 = GradientSet<double>::zeros_like(n.params());
  g2.blocks[0] << 0.5, -2.0, 1e-3;
  g2.blocks[1] << 7.0, -0.01;
  adam_step<double>(n.params(), g2, s2);
  const double lr = s2.config.lr;
  for (int i = 0; i < 3; ++i) {
    const double gi = g2.blocks[0][i];
    CHECK(n.a[i] == doctest::Approx(-lr * gi / (std::abs(gi) + 1e-8)).epsilon(1e-9));
  }

  Model p, q;
  AdamState<double> sp, sq;
  adam_step<double>(p.params(), g2, sp);
  adam_step<double>(q.params(), g2, sq);
  adam_step<double>(p.params(), g2, sp);
  adam_step<double>(q.params(), g2, sq);
  CHECK(p.a == q.a);
  CHECK(p.b == q.b);

  Model masked;
  AdamState<double> sm;
  adam_step<double>(masked.params(), g2, sm, {true, false});
  CHECK(masked.a != VecX<double>::Zero(3));
  CHECK(masked.b == VecX<double>::Zero(2));
  CHECK(sm.first[1] == VecX<double>::Zero(2));
}

TEST_CASE("adam shape mismatch") {
  Model m;
  AdamState<double> s;
  GradientSet<double> g;
  g.names = {"a", "b"};
  g.blocks = {VecX<double>::Zero(3), VecX<double>::Zero(5)};
  try {
    adam_step<double>(m.params(), g, s);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("sparsity loss values") {
  const std::vector<double> half(10, 0.5);
  CHECK(std::abs(sparsity_loss<double>(half) - std::log(2.0)) < 1e-9);
  const std::vector<double> zeros(10, 0.0);
  CHECK(sparsity_loss<double>(zeros) < 2e-4);
  CHECK(sparsity_loss<double>(zeros) > 0.0);
  const std::vector<double> mixed = {0, 1, 1, 0, 0, 1};
  CHECK(sparsity_loss<double>(mixed) < 2e-4);
  CHECK(sparsity_loss<double>(std::vector<double>{}) == 0.0);
}

TEST_CASE("sparsity gradient pushes toward 0 or 1") {
  for (double w = 0.01; w < 0.999; w += 0.0137) {
    const double g = binary_entropy_grad(w);
    if (w < 0.5) CHECK(g > 0);
    if (w > 0.5) CHECK(g < 0);
    const double h = 1e-6;
    const double fd = (binary_entropy(w + h) - binary_entropy(w - h)) / (2 * h);
    CHECK(g == doctest::Approx(fd).epsilon(1e-6));
  }
  const std::vector<double> w = {0.2, 0.7, 0.5};
  const auto g = sparsity_loss_grad<double>(w);
  CHECK(g[0] == doctest::Approx(binary_entropy_grad(0.2) / 3));
  CHECK(g[2] == doctest::Approx(0.0));
}

TEST_CASE("assemble_total_gradient") {
  Model m;
  auto global = GradientSet<double>::zeros_like(m.params());
  global.blocks[0] << 1, 2, 3;
  global.blocks[1] << 4, 5;
  auto local = global;
  local.blocks[0] << 10, 20, 30;
  auto sparse = global;
  sparse.blocks[1] << -1, -1;

  LossWeights w{100, 0, 0};
  auto t = assemble_total_gradient<double>(global, {{"n", local}}, sparse, w);
  CHECK(t.blocks[0] == 100 * global.blocks[0]);
  CHECK(t.blocks[1] == 100 * global.blocks[1]);

  w = {2, 3, 5};
  t = assemble_total_gradient<double>(global, {{"n", local}}, sparse, w);
  CHECK(t.blocks[0] == 2 * global.blocks[0] + 3 * local.blocks[0] + 5 * sparse.blocks[0]);

  auto zero = GradientSet<double>::zeros_like(m.params());
  CHECK(assemble_total_gradient<double>(zero, {{"n", zero}}, zero, LossWeights{}).max_abs() == 0.0);

  GradientSet<double> other;
  other.names = {"a"};
  other.blocks = {VecX<double>::Zero(3)};
  try {
    assemble_total_gradient<double>(global, {{"x", other}}, sparse, w);
    FAIL("expected RegistryMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistryMismatch);
  }
}
