#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rearrange/ebm.hpp"
#include "rearrange/errors.hpp"
#include "support/finite_difference.hpp"

namespace rearrange {
namespace {

using ad::Graph;
using ad::NumArray;
using ad::Shape;
using ad::Var;

std::uniform_real_distribution<double> unit(0.0, 1.0);

Box random_box(std::mt19937_64& rng) {
  return Box::from_center_size({unit(rng), unit(rng)}, {0.02 + 0.1 * unit(rng), 0.02 + 0.1 * unit(rng)});
}

Box shifted(const Box& b, Vec2 t) { return {b.tl + t, b.br + t}; }

TEST(BinaryFeatures, EqualBoxesCancelMatchingCorners) {
  const Box b = Box::from_center_size({0.3, 0.7}, {0.1, 0.2});
  const auto f = binary_features(b, b);
  const std::array<double, 8> expected{0.0, 0.0, -0.1, -0.2, 0.1, 0.2, 0.0, 0.0};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(f[i], expected[i], 1e-12) << i;
}

TEST(BinaryFeatures, CornerArithmetic) {
  const Box a = Box::from_center_size({0.3, 0.3}, {0.2, 0.2});
  const Box b = Box::from_center_size({0.6, 0.3}, {0.2, 0.2});
  const std::array<double, 8> expected{-0.3, 0.0, -0.5, -0.2, -0.1, 0.2, -0.3, 0.0};
  const auto f = binary_features(a, b);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(f[i], expected[i], 1e-12) << i;
}

TEST(BinaryFeatures, TranslationCancels) {
  std::mt19937_64 rng(1);
  const Box a = random_box(rng), b = random_box(rng);
  const Vec2 t{0.25, -0.125};
  const auto f = binary_features(a, b), g = binary_features(shifted(a, t), shifted(b, t));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(f[i], g[i], 1e-12);
}

TEST(InitParams, DeterministicAndSeeded) {
  for (ConceptKind k : kAllConcepts) {
    const EBMParams a = init_params(k, 7), b = init_params(k, 7), c = init_params(k, 8);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    const auto shapes = parameter_shapes(k);
    ASSERT_EQ(shapes.size(), a.tensors.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      EXPECT_EQ(a.tensors[i].shape(), shapes[i]);
      count += a.tensors[i].size();
    }
    EXPECT_EQ(a.parameter_count(), count);
  }
}

TEST(InitParams, GlorotBoundsAndZeroBiases) {
  const EBMParams p = init_params(ConceptKind::Circle, 3);
  for (const auto& t : p.tensors) {
    if (t.rank() == 1) {
      for (double v : t.data()) EXPECT_EQ(v, 0.0);
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
      for (double v : t.data()) EXPECT_LE(std::abs(v), bound);
    }
  }
}

TEST(InitParams, HiddenWidthAndScalarHead) {
  for (ConceptKind k : kAllConcepts) {
    const auto shapes = parameter_shapes(k);
    EXPECT_EQ(shapes.front(), (Shape{input_width(architecture_of(k)), kHiddenWidth}));
    EXPECT_EQ(shapes[shapes.size() - 2], (Shape{kHiddenWidth, 1}));
    const std::size_t blocks = is_shape(k) ? kAttentionBlocks : 0;
    EXPECT_EQ(shapes.size(), 8 + 8 * blocks);
  }
}

TEST(BinaryEnergy, TranslationInvariant) {
  std::mt19937_64 rng(2);
  for (ConceptKind k : {ConceptKind::LeftOf, ConceptKind::Inside}) {
    const EBMParams p = init_params(k, 11);
    for (int i = 0; i < 50; ++i) {
      const Box a = random_box(rng), b = random_box(rng);
      const Vec2 t{unit(rng) - 0.5, unit(rng) - 0.5};
      const double e = binary_energy(p, a, b);
      EXPECT_TRUE(std::isfinite(e));
      EXPECT_NEAR(e, binary_energy(p, shifted(a, t), shifted(b, t)), 1e-9);
    }
  }
}

TEST(BinaryEnergy, WrongKindIsConfigError) {
  const EBMParams p = init_params(ConceptKind::Circle, 1);
  EXPECT_THROW(binary_energy(p, Box{{0, 0}, {1, 1}}, Box{{0, 0}, {1, 1}}), ConfigError);
}

Box3 random_box3(std::mt19937_64& rng) {
  Box3 b;
  for (int d = 0; d < 3; ++d) {
    b.min[d] = unit(rng);
    b.max[d] = b.min[d] + 0.02 + 0.1 * unit(rng);
  }
  return b;
}

TEST(Binary3DEnergy, TranslationInvariant) {
  std::mt19937_64 rng(4);
  const EBMParams p = init_params(ConceptKind::On3D, 5);
  EXPECT_EQ(input_width(Architecture::Binary3D), 12u);
  for (int i = 0; i < 50; ++i) {
    const Box3 a = random_box3(rng), b = random_box3(rng);
    Box3 a2 = a, b2 = b;
    for (int d = 0; d < 3; ++d) {
      const double t = unit(rng) - 0.5;
      a2.min[d] += t, a2.max[d] += t, b2.min[d] += t, b2.max[d] += t;
    }
    EXPECT_NEAR(binary3d_energy(p, a, b), binary3d_energy(p, a2, b2), 1e-9);
  }
}

std::vector<Vec2> random_points(std::mt19937_64& rng, std::size_t n) {
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({unit(rng), unit(rng)});
  return pts;
}

TEST(MultiaryEnergy, PermutationAndTranslationInvariant) {
  std::mt19937_64 rng(6);
  for (ConceptKind k : {ConceptKind::Circle, ConceptKind::Line}) {
    const EBMParams p = init_params(k, 13);
    for (int i = 0; i < 20; ++i) {
      auto pts = random_points(rng, 3 + rng() % 5);
      const double e = multiary_energy(p, pts);
      EXPECT_TRUE(std::isfinite(e));
      const Vec2 t{unit(rng) - 0.5, unit(rng) - 0.5};
      auto moved = pts;
      for (auto& q : moved) q = q + t;
      EXPECT_NEAR(e, multiary_energy(p, moved), 1e-9);
      std::shuffle(pts.begin(), pts.end(), rng);
      EXPECT_NEAR(e, multiary_energy(p, pts), 1e-9);
    }
  }
}

TEST(MultiaryEnergy, ArityError) {
  const EBMParams p = init_params(ConceptKind::Circle, 1);
  const std::vector<Vec2> two{{0.1, 0.1}, {0.2, 0.2}};
  EXPECT_THROW(multiary_energy(p, two), ArityError);
  const std::vector<Pose> poses{{0, 0, 0}, {1, 1, 0}};
  EXPECT_THROW(pose_energy(init_params(ConceptKind::PoseCircle, 1), poses), ArityError);
}

TEST(PoseEnergy, Invariances) {
  std::mt19937_64 rng(8);
  const EBMParams p = init_params(ConceptKind::PoseCircle, 17);
  for (int i = 0; i < 20; ++i) {
    std::vector<Pose> poses;
    for (int j = 0; j < 5; ++j) poses.push_back({unit(rng), unit(rng), std::numbers::pi * (2.0 * unit(rng) - 1.0)});
    const double e = pose_energy(p, poses);
    auto moved = poses;
    for (auto& q : moved) q.x += 0.3, q.y -= 0.2;
    EXPECT_NEAR(e, pose_energy(p, moved), 1e-9);
    auto wrapped = poses;
    for (auto& q : wrapped) q.theta += 2.0 * std::numbers::pi;
    EXPECT_NEAR(e, pose_energy(p, wrapped), 1e-9);
    std::shuffle(poses.begin(), poses.end(), rng);
    EXPECT_NEAR(e, pose_energy(p, poses), 1e-9);
  }
}

NumArray random_array(Shape s, std::mt19937_64& rng, double lo, double hi) {
  NumArray a(std::move(s));
  for (auto& v : a.data()) v = lo + (hi - lo) * unit(rng);
  return a;
}

TEST(EnergyGradients, BinaryMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const EBMParams p = init_params(ConceptKind::LeftOf, 21);
  const NumArray sa = random_array({3, 2}, rng, 0.05, 0.1), sb = random_array({3, 2}, rng, 0.05, 0.1);
  const auto build = [&](Graph& g, const std::vector<Var>& in) {
    return g.sum_all(binary_energy(g, p.kind, bind_params(g, p, false), in[0], in[1], g.constant(sa), g.constant(sb)));
  };
  const auto r = testing::check_gradients(build, {random_array({3, 2}, rng, 0, 1), random_array({3, 2}, rng, 0, 1)});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EnergyGradients, Binary3DMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  const EBMParams p = init_params(ConceptKind::On3D, 22);
  const NumArray sa = random_array({2, 3}, rng, 0.05, 0.1), sb = random_array({2, 3}, rng, 0.05, 0.1);
  const auto build = [&](Graph& g, const std::vector<Var>& in) {
    return g.sum_all(
        binary3d_energy(g, p.kind, bind_params(g, p, false), in[0], in[1], g.constant(sa), g.constant(sb)));
  };
  const auto r = testing::check_gradients(build, {random_array({2, 3}, rng, 0, 1), random_array({2, 3}, rng, 0, 1)});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EnergyGradients, MultiaryMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const EBMParams p = init_params(ConceptKind::Circle, 23);
  const auto build = [&](Graph& g, const std::vector<Var>& in) {
    return g.sum_all(multiary_energy(g, p.kind, bind_params(g, p, false), in[0]));
  };
  const auto r = testing::check_gradients(build, {random_array({2, 5, 2}, rng, 0, 1)});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EnergyGradients, PoseMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const EBMParams p = init_params(ConceptKind::PoseCircle, 24);
  const auto build = [&](Graph& g, const std::vector<Var>& in) {
    return g.sum_all(pose_energy(g, p.kind, bind_params(g, p, false), in[0]));
  };
  const auto r = testing::check_gradients(build, {random_array({2, 4, 3}, rng, -1, 1)});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EnergyGradients, ParametersMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  const EBMParams p = init_params(ConceptKind::Line, 25);
  const NumArray pts = random_array({3, 4, 2}, rng, 0, 1);
  std::vector<NumArray> inputs = p.tensors;
  // Random biases so relu kinks are exercised away from zero.
  for (auto& t : inputs) {
    if (t.rank() == 1) t = random_array(t.shape(), rng, -0.1, 0.1);
  }
  const auto build = [&](Graph& g, const std::vector<Var>& in) {
    return g.sum_all(multiary_energy(g, p.kind, ParamVars(in.begin(), in.end()), g.constant(pts)));
  };
  const auto r = testing::check_gradients(build, inputs, 1e-5, 97);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EnergyGradients, SizesAreNotDifferentiated) {
  std::mt19937_64 rng(14);
  const EBMParams p = init_params(ConceptKind::LeftOf, 26);
  Graph g;
  const Var ca = g.leaf(random_array({1, 2}, rng, 0, 1)), cb = g.leaf(random_array({1, 2}, rng, 0, 1));
  const Var sa = g.constant(random_array({1, 2}, rng, 0.05, 0.1)), sb = g.constant(random_array({1, 2}, rng, 0.05, 0.1));
  const Var e = g.sum_all(binary_energy(g, p.kind, bind_params(g, p, false), ca, cb, sa, sb));
  EXPECT_EQ(g.op_of(sa), ad::Op::Constant);
  const auto grads = g.backprop(e, {ca, cb});
  // Translation invariance forces opposite center gradients.
  EXPECT_NEAR(grads[0][0], -grads[1][0], 1e-12);
  EXPECT_NEAR(grads[0][1], -grads[1][1], 1e-12);
}

}  // namespace
}  // namespace rearrange
