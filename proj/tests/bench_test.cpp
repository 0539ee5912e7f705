#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "rearrange/bench.hpp"
#include "rearrange/errors.hpp"
#include "rearrange/parser.hpp"

namespace rearrange {
namespace {

std::vector<EnergyTerm> sorted(std::vector<EnergyTerm> t) {
  std::sort(t.begin(), t.end());
  return t;
}

bool pairwise_clear(const Scene& s, double clearance) {
  for (std::size_t i = 0; i < s.entities.size(); ++i) {
    for (std::size_t j = i + 1; j < s.entities.size(); ++j) {
      const Box a = corners(s.entities[i]), b = corners(s.entities[j]);
      const bool clear = a.br.x + clearance <= b.tl.x + 1e-12 || b.br.x + clearance <= a.tl.x + 1e-12 ||
                         a.br.y + clearance <= b.tl.y + 1e-12 || b.br.y + clearance <= a.tl.y + 1e-12;
      if (!clear) return false;
    }
  }
  return true;
}

class FamilySplit : public ::testing::TestWithParam<std::tuple<TaskFamily, Split>> {};

TEST_P(FamilySplit, GeneratorContract) {
  const auto [family, split] = GetParam();
  const BenchConfig cfg;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Episode ep = gen_episode(family, split, seed, cfg);
    SCOPED_TRACE(ep.instruction);
    EXPECT_EQ(parse(ep.instruction), ep.program);
    const Groundings g = ground_program(ep.program, ep.scene, SymbolicGrounder());
    EXPECT_EQ(g, ep.annotation);
    EXPECT_EQ(sorted(compile(ep.program, g).terms), sorted(ep.goal));
    EXPECT_TRUE(pairwise_clear(ep.scene, cfg.clearance));
    EXPECT_NO_THROW(validate(ep.scene));

    const Metrics m0 = score_episode(ep, ep.scene);
    EXPECT_FALSE(m0.tc);
    if (family != TaskFamily::Shapes) EXPECT_EQ(m0.tp, 0.0);

    std::set<std::string> referred;
    for (const auto& t : ep.goal) referred.insert(t.ids.begin(), t.ids.end());
    const auto distractors = ep.scene.entities.size() - referred.size();
    EXPECT_GE(distractors, 2u);
    EXPECT_LE(distractors, 5u);

    const auto& colors = cfg.splits.colors(split);
    const auto& objects = cfg.splits.objects(split);
    for (const Entity& e : ep.scene.entities) {
      EXPECT_NE(std::find(colors.begin(), colors.end(), e.color), colors.end());
      EXPECT_NE(std::find(objects.begin(), objects.end(), e.name), objects.end());
    }

    switch (family) {
      case TaskFamily::SpatialRelations:
        EXPECT_EQ(ep.goal.size(), 1u);
        break;
      case TaskFamily::CompOneStep: {
        EXPECT_GE(ep.goal.size(), 2u);
        EXPECT_LE(ep.goal.size(), 3u);
        std::vector<std::pair<ConceptKind, Box>> cons;
        for (const auto& t : ep.goal) {
          EXPECT_EQ(t.ids[0], ep.goal[0].ids[0]);
          cons.emplace_back(t.kind, corners(ep.scene.at(t.ids[1])));
        }
        std::mt19937_64 rng(seed);
        EXPECT_GT(intersection_hits(cons, ep.scene.at(ep.goal[0].ids[0]).size, ep.scene.workspace, cfg.geom, 10000, rng),
                  0);
        break;
      }
      case TaskFamily::CompGroup: {
        std::set<std::string> subjects;
        for (const auto& t : ep.goal) subjects.insert(t.ids[0]);
        EXPECT_EQ(subjects.size(), ep.goal.size());
        EXPECT_NO_THROW(select_anchors(compile(ep.program, g)));
        break;
      }
      case TaskFamily::Shapes: {
        ASSERT_EQ(ep.goal.size(), 1u);
        EXPECT_GE(ep.goal[0].ids.size(), 4u);
        EXPECT_LE(ep.goal[0].ids.size(), 6u);
        break;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, FamilySplit,
                         ::testing::Combine(::testing::ValuesIn(kAllFamilies), ::testing::ValuesIn(kAllSplits)));

// Satisfiable by construction: moving the subject to a sampled point of the
// intersection completes the episode.
TEST(Bench, OneStepIntersectionCompletesEpisode) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Episode ep = gen_episode(TaskFamily::CompOneStep, Split::Seen, seed);
    const Entity& subject = ep.scene.at(ep.goal[0].ids[0]);
    std::mt19937_64 rng(seed);
    bool done = false;
    for (int i = 0; i < 10000 && !done; ++i) {
      Scene s = ep.scene;
      Entity& e = *s.find(subject.id);
      e.center = {std::uniform_real_distribution<double>(0.5 * e.size.x, 1 - 0.5 * e.size.x)(rng),
                  std::uniform_real_distribution<double>(0.5 * e.size.y, 1 - 0.5 * e.size.y)(rng)};
      done = score_episode(ep, s).tc;
    }
    EXPECT_TRUE(done) << ep.instruction;
  }
}

TEST(Bench, ReproducibleAndSplitShareGeometry) {
  for (TaskFamily f : kAllFamilies) {
    const Episode a = gen_episode(f, Split::Seen, 42);
    EXPECT_EQ(a.to_json(), gen_episode(f, Split::Seen, 42).to_json());
    for (Split s : {Split::UnseenColors, Split::UnseenObjects}) {
      const Episode b = gen_episode(f, s, 42);
      ASSERT_EQ(a.scene.entities.size(), b.scene.entities.size());
      for (std::size_t i = 0; i < a.scene.entities.size(); ++i) {
        EXPECT_EQ(a.scene.entities[i].center, b.scene.entities[i].center);
        EXPECT_EQ(a.scene.entities[i].size, b.scene.entities[i].size);
      }
      EXPECT_EQ(sorted(a.goal), sorted(b.goal));
    }
    EXPECT_NE(a.to_json(), gen_episode(f, Split::Seen, 43).to_json());
  }
}

TEST(Bench, EpisodeJsonRoundTrip) {
  for (TaskFamily f : kAllFamilies) {
    const Episode a = gen_episode(f, Split::UnseenObjects, 7);
    const Episode b = Episode::from_json(nlohmann::json::parse(a.to_json().dump()));
    EXPECT_EQ(b.to_json(), a.to_json());
    EXPECT_EQ(b.program, a.program);
    EXPECT_EQ(b.annotation, a.annotation);
  }
}

TEST(Bench, SplitsDisjoint) {
  BenchConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.splits.unseen_colors.push_back("red");
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(family_from_name("comp-group"), TaskFamily::CompGroup);
  EXPECT_EQ(split_from_name("unseen-colors"), Split::UnseenColors);
  EXPECT_THROW(split_from_name("novel"), ConfigError);
}

Entity dot(std::string id, Vec2 c) {
  Entity e;
  e.id = std::move(id);
  e.name = "cube";
  e.color = "red";
  e.center = c;
  e.size = {0.04, 0.04};
  return e;
}

TEST(Score, FourOfFiveIsPointEight) {
  Episode ep;
  ep.scene.entities = {dot("r", {0.5, 0.5})};
  const std::vector<Vec2> offsets = {{-0.1, 0}, {-0.1, 0.02}, {-0.1, -0.02}, {-0.15, 0}, {0.1, 0}};
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const std::string id = "s" + std::to_string(i);
    ep.scene.entities.push_back(dot(id, Vec2{0.5, 0.5} + offsets[i]));
    ep.goal.push_back({ConceptKind::LeftOf, {id, "r"}});
  }
  const Metrics m = score_episode(ep, ep.scene);
  EXPECT_NEAR(m.tp, 0.8, 1e-12);
  EXPECT_FALSE(m.tc);
  Scene fixed = ep.scene;
  fixed.find("s4")->center = {0.4, 0.5};
  const Metrics all = score_episode(ep, fixed);
  EXPECT_EQ(all.tp, 1.0);
  EXPECT_TRUE(all.tc);
}

TEST(Score, ShapeRewardThresholdAndTcIffTp) {
  Episode ep;
  EnergyTerm t{ConceptKind::Circle, {}};
  for (int i = 0; i < 6; ++i) {
    const double a = i * 2 * 3.14159265358979 / 6;
    ep.scene.entities.push_back(dot("m" + std::to_string(i), {0.5 + 0.1 * std::cos(a), 0.5 + 0.1 * std::sin(a)}));
    t.ids.push_back("m" + std::to_string(i));
  }
  ep.goal = {t};
  EXPECT_TRUE(score_episode(ep, ep.scene).tc);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Scene s = ep.scene;
    for (Entity& e : s.entities) {
      e.center = e.center + Vec2{std::normal_distribution<double>(0, 0.03)(rng), std::normal_distribution<double>(0, 0.03)(rng)};
    }
    const Metrics m = score_episode(ep, s);
    EXPECT_EQ(m.tc, m.tp == 1.0);
    EXPECT_GE(m.tp, 0.0);
    EXPECT_LE(m.tp, 1.0);
  }
}

TEST(Detector, ConfusionArithmetic) {
  const DetectorScore d = detector_from_counts(33, 8, 7, 52);
  EXPECT_NEAR(d.precision, 0.805, 5e-4);
  EXPECT_NEAR(d.recall, 0.825, 1e-12);
  EXPECT_NEAR(d.accuracy, 0.85, 1e-12);

  bool pred[100], oracle[100];
  for (int i = 0; i < 100; ++i) {
    pred[i] = i >= 41;                   // 41 predicted failures
    oracle[i] = !(i < 33 || (i >= 41 && i < 48));  // 33 caught, 7 missed
  }
  const DetectorScore e = score_failure_detector(pred, oracle);
  EXPECT_EQ(e.true_pos, 33);
  EXPECT_EQ(e.false_pos, 8);
  EXPECT_EQ(e.false_neg, 7);
  EXPECT_EQ(e.true_neg, 52);
}

TEST(Detector, PerfectAndAlwaysSuccess) {
  const bool oracle[] = {true, false, true, false, false};
  const bool always[] = {true, true, true, true, true};
  const DetectorScore perfect = score_failure_detector(oracle, oracle);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(score_failure_detector(always, oracle).recall, 0.0);
  const bool shorter[] = {true};
  EXPECT_THROW(score_failure_detector(shorter, oracle), ContractViolation);
}

TEST(Results, CsvColumns) {
  const ResultRow rows[] = {{"comp-group", "seen", 3, "closed", 0.5, false, 2, true, false, ""},
                            {"shapes", "unseen-objects", 4, "open", 1.0, true, 5, std::nullopt, true, "bad, thing"}};
  const std::string csv = results_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task,split,seed,mode,TP,TC,actions,predicted_success,oracle_success,error");
  EXPECT_NE(csv.find("comp-group,seen,3,closed,0.500000,0,2,1,0,\n"), std::string::npos);
  EXPECT_NE(csv.find("shapes,unseen-objects,4,open,1.000000,1,5,,1,bad; thing"), std::string::npos);
  EXPECT_NE(csv.find("bad; thing"), std::string::npos);
}

}  // namespace
}  // namespace rearrange
