#include <gtest/gtest.h>

#include <cmath>

#include "rearrange/concept_data.hpp"
#include "rearrange/errors.hpp"

namespace rearrange {
namespace {

const RelationGeometry kGeom;

TEST(GenPositive, LeftOfByConstruction) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Configuration c = gen_positive(ConceptKind::LeftOf, 2, kGeom, rng);
    EXPECT_LT(c.entities[0].center.x, c.entities[1].center.x - kGeom.offset_min);
  }
}

TEST(GenPositive, CircleHasFullReward) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Configuration c = gen_positive(ConceptKind::Circle, 6, kGeom, rng);
    std::vector<Vec2> pts;
    for (const auto& e : c.entities) pts.push_back(e.center);
    EXPECT_LT(circle_spread(pts), 0.03);
    EXPECT_EQ(circle_reward(pts), 1.0);
  }
}

TEST(GenPositive, InsideIsContained) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Configuration c = gen_positive(ConceptKind::Inside, 2, kGeom, rng);
    const Box a = corners(c.entities[0]), b = corners(c.entities[1]);
    EXPECT_TRUE(contains(b, a));
    EXPECT_NEAR(iou(a, b), a.area() / b.area(), 1e-12);
  }
}

TEST(GenPositive, ArityChecked) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(gen_positive(ConceptKind::LeftOf, 3, kGeom, rng), ArityError);
  EXPECT_THROW(gen_positive(ConceptKind::Line, 2, kGeom, rng), ArityError);
}

TEST(GenPositive, ImpossibleGeometryExhaustsBudget) {
  RelationGeometry g;
  g.line_length_min = g.line_length_max = 1.5;
  std::mt19937_64 rng(5);
  EXPECT_THROW(gen_positive(ConceptKind::Line, 4, g, rng), GenerationError);
}

// Keystone: every generated positive satisfies the ground-truth predicate,
// stays in the workspace, and keeps it under augmentation.
TEST(GenPositive, SoundForEveryConcept) {
  std::mt19937_64 rng(6);
  for (ConceptKind k : kAllConcepts) {
    for (int i = 0; i < 300; ++i) {
      const std::size_t n = is_binary(k) ? 2 : 3 + i % 4;
      const Configuration c = gen_positive(k, n, kGeom, rng);
      ASSERT_TRUE(satisfies(c, kGeom)) << concept_name(k);
      for (const auto& e : c.entities) EXPECT_TRUE(Workspace{}.contains(corners(e))) << concept_name(k);
      const Configuration a = augment(c, rng);
      ASSERT_TRUE(satisfies(a, kGeom)) << concept_name(k) << " after augmentation";
      for (const auto& e : a.entities) EXPECT_TRUE(Workspace{}.contains(corners(e)));
    }
  }
}

TEST(Augment, IdentityWithoutTranslationOrJitter) {
  std::mt19937_64 rng(7);
  const Configuration c = gen_positive(ConceptKind::Behind, 2, kGeom, rng);
  EXPECT_EQ(augment(c, rng, AugmentConfig{false, 0.0}), c);
}

TEST(Augment, CircleKeepsRewardOverManyAugmentations) {
  std::mt19937_64 rng(8);
  const Configuration c = gen_positive(ConceptKind::Circle, 5, kGeom, rng);
  for (int i = 0; i < 1000; ++i) {
    const Configuration a = augment(c, rng);
    std::vector<Vec2> pts;
    for (const auto& e : a.entities) pts.push_back(e.center);
    ASSERT_EQ(circle_reward(pts), 1.0);
  }
}

TEST(Augment, JitterBounded) {
  std::mt19937_64 rng(9);
  const Configuration c = gen_positive(ConceptKind::Line, 5, kGeom, rng);
  const Configuration a = augment(c, rng, AugmentConfig{false, 0.005});
  for (std::size_t i = 0; i < c.entities.size(); ++i) {
    EXPECT_LE(std::abs(a.entities[i].center.x - c.entities[i].center.x), 0.005);
    EXPECT_LE(std::abs(a.entities[i].center.y - c.entities[i].center.y), 0.005);
    EXPECT_EQ(a.entities[i].size, c.entities[i].size);
  }
}

TEST(BuildDataset, ReproducibleAndSound) {
  const ConceptDataset a = build_dataset(ConceptKind::RightOf, 5000, kGeom, 99);
  const ConceptDataset b = build_dataset(ConceptKind::RightOf, 5000, kGeom, 99);
  ASSERT_EQ(a.positives.size(), 5000u);
  EXPECT_EQ(a.positives, b.positives);
  for (const auto& c : a.positives) ASSERT_TRUE(satisfies(c, kGeom));
  EXPECT_NE(build_dataset(ConceptKind::RightOf, 10, kGeom, 100).positives,
            build_dataset(ConceptKind::RightOf, 10, kGeom, 99).positives);
}

TEST(BuildDataset, LeftOfMeanOffsetInRange) {
  const ConceptDataset d = build_dataset(ConceptKind::LeftOf, 2000, kGeom, 5);
  double mean = 0.0;
  for (const auto& c : d.positives) mean += c.entities[1].center.x - c.entities[0].center.x;
  mean /= static_cast<double>(d.positives.size());
  EXPECT_GE(mean, kGeom.offset_min);
  EXPECT_LE(mean, kGeom.offset_max);
}

TEST(BuildDataset, ShapeMemberCounts) {
  const ConceptDataset d = build_dataset(ConceptKind::Line, 200, kGeom, 6);
  for (const auto& c : d.positives) {
    EXPECT_GE(c.entities.size(), 4u);
    EXPECT_LE(c.entities.size(), 6u);
  }
  EXPECT_THROW(build_dataset(ConceptKind::Line, 0, kGeom, 6), ConfigError);
}

TEST(Scatter, MovesOnlyMovableEntities) {
  std::mt19937_64 rng(10);
  const Configuration c = gen_positive(ConceptKind::LeftOf, 2, kGeom, rng);
  const Configuration s = scatter(c, rng);
  EXPECT_EQ(s.entities[1], c.entities[1]);
  EXPECT_NE(s.entities[0].center, c.entities[0].center);
  EXPECT_TRUE(Workspace{}.contains(corners(s.entities[0])));
}

TEST(DatasetJson, ExportsConfigurations) {
  const ConceptDataset d = build_dataset(ConceptKind::Circle, 3, kGeom, 1);
  const auto j = dataset_to_json(d);
  EXPECT_EQ(j["concept"], "circle");
  ASSERT_EQ(j["configurations"].size(), 3u);
  EXPECT_EQ(scene_from_json(j["configurations"][0]).entities, d.positives[0].entities);
}

}  // namespace
}  // namespace rearrange
