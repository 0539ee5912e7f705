#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rearrange/autodiff.hpp"
#include "support/finite_difference.hpp"
#include "support/random_graphs.hpp"

namespace rearrange::ad {
namespace {

NumArray random_array(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  NumArray a(std::move(shape));
  for (auto& v : a.data()) v = dist(rng);
  return a;
}

TEST(Evaluate, AffineIdentityIsIdentity) {
  Graph g;
  Var x = g.leaf(NumArray(Shape{1, 2}, {1.0, 2.0}));
  Var w = g.constant(NumArray(Shape{2, 2}, {1.0, 0.0, 0.0, 1.0}));
  Var b = g.constant(NumArray(Shape{2}, 0.0));
  const NumArray& y = g.affine(x, w, b).value();
  EXPECT_EQ(y, NumArray(Shape{1, 2}, {1.0, 2.0}));
}

TEST(Evaluate, SquareThenSum) {
  Graph g;
  Var x = g.leaf(NumArray::vector({3.0}));
  EXPECT_DOUBLE_EQ(g.sum_all(g.square(x)).value().item(), 9.0);
}

TEST(Evaluate, SoftmaxOfEqualLogits) {
  Graph g;
  const NumArray& y = g.softmax(g.leaf(NumArray::vector({0.0, 0.0}))).value();
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(Evaluate, SoftmaxIsStableForLargeLogits) {
  Graph g;
  const NumArray& y = g.softmax(g.leaf(NumArray::vector({1000.0, 1000.0}))).value();
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(Evaluate, ShapeMismatchNamesTheNode) {
  Graph g;
  Var a = g.leaf(NumArray(Shape{2, 3}));
  Var w = g.leaf(NumArray(Shape{2, 2}));
  try {
    g.matmul(a, w);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("node #2 (matmul)"), std::string::npos) << e.what();
  }
  // The failed node is not left behind.
  EXPECT_EQ(g.node_count(), 2u);
}

TEST(Evaluate, RebindingIsDeterministic) {
  std::mt19937_64 rng(4);
  Graph g;
  Var x = g.leaf(random_array({4, 3}, rng));
  Var w = g.leaf(random_array({3, 5}, rng));
  Var b = g.leaf(random_array({5}, rng));
  Var root = g.sum_all(g.softplus(g.affine(x, w, b)));
  const NumArray fresh = random_array({4, 3}, rng);
  const NumArray first = g.evaluate(root, {{x.id, fresh}});
  const NumArray second = g.evaluate(root, {{x.id, fresh}});
  EXPECT_EQ(first, second);

  Graph rebuilt;
  Var r = rebuilt.sum_all(rebuilt.softplus(rebuilt.affine(rebuilt.leaf(fresh), rebuilt.leaf(w.value()),
                                                          rebuilt.leaf(b.value()))));
  EXPECT_EQ(first, r.value());
}

TEST(Backprop, SquareGradient) {
  Graph g;
  Var x = g.leaf(NumArray::scalar(3.0));
  auto grads = g.backprop(g.square(x), {x});
  EXPECT_DOUBLE_EQ(grads[0].item(), 6.0);
}

TEST(Backprop, StopGradientBlocksOneFactor) {
  Graph g;
  Var x = g.leaf(NumArray::scalar(2.0));
  auto grads = g.backprop(g.stop_gradient(x) * x, {x});
  EXPECT_DOUBLE_EQ(grads[0].item(), 2.0);
}

TEST(Backprop, GradientThroughStopGradientIsExactlyZero) {
  Graph g;
  Var x = g.leaf(NumArray::vector({1.5, -0.5}));
  Var root = g.sum_all(g.square(g.stop_gradient(g.softplus(x))));
  auto grads = g.backprop(root, {x});
  EXPECT_EQ(grads[0], NumArray(Shape{2}, 0.0));
}

TEST(Backprop, NonScalarRootIsAContractViolation) {
  Graph g;
  Var x = g.leaf(NumArray::vector({1.0, 2.0}));
  EXPECT_THROW(g.backprop(g.square(x), {x}), ContractViolation);
}

TEST(Backprop, UnreachedLeafGetsZeros) {
  Graph g;
  Var x = g.leaf(NumArray::scalar(1.0));
  Var y = g.leaf(NumArray(Shape{3}, 1.0));
  auto grads = g.backprop(g.square(x), {x, y});
  EXPECT_EQ(grads[1], NumArray(Shape{3}, 0.0));
}

TEST(Backprop, TwoLayerNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  testing::Builder net = [](Graph& g, const std::vector<Var>& in) {
    Var h = g.relu(g.affine(in[0], in[1], in[2]));
    return g.sum_all(g.affine(h, in[3], in[4]));
  };
  std::vector<NumArray> inputs = {random_array({5, 4}, rng), random_array({4, 8}, rng), random_array({8}, rng),
                                  random_array({8, 1}, rng), random_array({1}, rng)};
  const auto check = testing::check_gradients(net, inputs);
  EXPECT_LT(check.max_relative_error, 1e-4);
}


TEST(BackpropProperty, RandomGraphsMatchFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick(0, testing::kBlockKinds - 1);
  std::uniform_int_distribution<int> depth(1, 4);
  std::vector<int> seen(testing::kBlockKinds, 0);
  for (int trial = 0; trial < 120; ++trial) {
    std::vector<int> blocks(static_cast<std::size_t>(depth(rng)));
    for (int& b : blocks) seen[b = pick(rng)]++;
    const std::size_t n = 3;
    const NumArray weights = random_array({2, n, n}, rng);
    std::vector<NumArray> inputs = {random_array({2, n, n}, rng, 0.7), random_array({n, n}, rng, 0.7),
                                    random_array({n}, rng, 0.5), random_array({n, n}, rng, 0.7)};
    testing::Builder build = [&](Graph& g, const std::vector<Var>& in) {
      Var x = in[0];
      for (int b : blocks) x = testing::random_block(g, x, in, b);
      return g.sum_all(x * g.constant(weights));
    };
    EXPECT_LT(testing::check_gradients(build, inputs).max_relative_error, 1e-4) << "trial " << trial;
  }
  for (int k = 0; k < testing::kBlockKinds; ++k) EXPECT_GT(seen[k], 0) << "block kind " << k << " never sampled";
}

TEST(Backprop, GradientOfGradientMatchesFiniteDifferences) {
  // h(W) = v . d/dx sum(softplus(x W)) ; its gradient in W is a mixed second
  // derivative that only exists if backward nodes are themselves differentiable.
  std::mt19937_64 rng(11);
  const NumArray x0 = random_array({3, 2}, rng);
  const NumArray v = random_array({3, 2}, rng);
  testing::Builder mixed = [&](Graph& g, const std::vector<Var>& in) {
    Var x = g.leaf(x0);
    Var energy = g.sum_all(g.softplus(g.matmul(g.relu(g.matmul(x, in[0])), in[1])));
    Var dx = g.grad(energy, {x})[0];
    return g.sum_all(dx * g.constant(v));
  };
  const auto check = testing::check_gradients(mixed, {random_array({2, 4}, rng), random_array({4, 3}, rng)});
  EXPECT_LT(check.max_relative_error, 1e-4);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  std::vector<NumArray> params = {NumArray::scalar(1.0)};
  std::vector<NumArray> grads = {NumArray::scalar(2.0)};
  AdamState state;
  adam_step(params, grads, state, 1e-4);
  EXPECT_NEAR(params[0].item() - 1.0, -1e-4, 1e-11);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<NumArray> params = {NumArray::vector({0.5, -0.25})};
  std::vector<NumArray> grads = {NumArray(Shape{2}, 0.0)};
  AdamState state;
  adam_step(params, grads, state, 1e-3);
  adam_step(params, grads, state, 1e-3);
  EXPECT_EQ(params[0], NumArray::vector({0.5, -0.25}));
  EXPECT_EQ(state.step, 2);
}

TEST(Adam, NonFiniteGradientIsRejected) {
  std::vector<NumArray> params = {NumArray::scalar(1.0)};
  std::vector<NumArray> grads = {NumArray::scalar(std::nan(""))};
  AdamState state;
  EXPECT_THROW(adam_step(params, grads, state, 1e-3), NonFiniteError);
  EXPECT_EQ(params[0].item(), 1.0);
  EXPECT_EQ(state.step, 0);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  // Independent scalar Adam loop on f(x) = (x - 5)^2.
  double ref = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    const double grad = 2.0 * (ref - 5.0);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    ref -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
  }
  ASSERT_LT(std::abs(ref - 5.0), 0.1);

  std::vector<NumArray> params = {NumArray::scalar(0.0)};
  AdamState state;
  for (int i = 0; i < 200; ++i) {
    Graph g;
    Var x = g.leaf(params[0]);
    auto grads = g.backprop(g.square(g.add_scalar(x, -5.0)), {x});
    adam_step(params, grads, state, 0.1);
  }
  EXPECT_LT(std::abs(params[0].item() - 5.0), 0.1);
  EXPECT_NEAR(params[0].item(), ref, 1e-12);
}

}  // namespace
}  // namespace rearrange::ad
