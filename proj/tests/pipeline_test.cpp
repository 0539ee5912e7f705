#include <gtest/gtest.h>

#include <filesystem>

#include "rearrange/checkpoint.hpp"
#include "rearrange/errors.hpp"
#include "rearrange/parser.hpp"
#include "rearrange/pipeline.hpp"

namespace rearrange {
namespace {

namespace fs = std::filesystem;

ConceptLibrary random_library() {
  ConceptLibrary lib;
  std::uint64_t seed = 1;
  for (ConceptKind k : kAllConcepts) lib.emplace(k, init_params(k, seed++));
  return lib;
}

Entity ent(std::string id, std::string name, std::string color, Vec2 c) {
  Entity e;
  e.id = std::move(id);
  e.name = std::move(name);
  e.color = std::move(color);
  e.center = c;
  e.size = {0.06, 0.06};
  return e;
}

Scene two_objects() {
  Scene s;
  s.entities = {ent("a", "cube", "red", {0.8, 0.5}), ent("b", "bowl", "blue", {0.5, 0.5})};
  return s;
}

LibrarySource from(const ConceptLibrary& lib) {
  return [&lib](const std::set<ConceptKind>& kinds) {
    ConceptLibrary out;
    for (ConceptKind k : kinds) out.emplace(k, lib.at(k));
    return out;
  };
}

TEST(Pipeline, ConceptsOfExpression) {
  const EnergyExpression e{{{ConceptKind::LeftOf, {"a", "b"}}, {ConceptKind::Behind, {"a", "c"}},
                            {ConceptKind::LeftOf, {"c", "b"}}}};
  EXPECT_EQ(concepts_of(e), (std::set<ConceptKind>{ConceptKind::LeftOf, ConceptKind::Behind}));
}

TEST(Pipeline, LoadLibraryFromDirectory) {
  const fs::path dir = fs::temp_directory_path() / "rearrange_pipeline_lib";
  fs::remove_all(dir);
  const EBMParams p = init_params(ConceptKind::Behind, 3);
  write_checkpoint(checkpoint_path(dir, ConceptKind::Behind), p);
  const ConceptLibrary lib = load_library(dir, {ConceptKind::Behind});
  EXPECT_EQ(lib.at(ConceptKind::Behind).tensors, round_to_float(p).tensors);
  EXPECT_THROW(load_library(dir, {ConceptKind::Behind, ConceptKind::LeftOf}), MissingAssetError);
  fs::remove_all(dir);
}

TEST(Pipeline, PlanProgramKeepsReferentAndIsDeterministic) {
  const ConceptLibrary lib = random_library();
  const Scene s = two_objects();
  const Program p = parse("put the red cube to the left of the bowl");
  const RunConfig cfg;
  const PlanOutcome a = plan_program(s, p, SymbolicGrounder(), from(lib), cfg, 9);
  const PlanOutcome b = plan_program(s, p, SymbolicGrounder(), from(lib), cfg, 9);
  EXPECT_EQ(a.layout.to_json(), b.layout.to_json());
  EXPECT_EQ(a.expr.terms.size(), 1u);
  EXPECT_EQ(a.layout.find("b")->target, s.at("b"));
  EXPECT_FALSE(a.layout.trajectory.has_value());
  EXPECT_TRUE(plan_program(s, p, SymbolicGrounder(), from(lib), cfg, 9, true).layout.trajectory.has_value());
}

TEST(Pipeline, PlanIgnoresConjunctOrder) {
  const ConceptLibrary lib = random_library();
  Scene s = two_objects();
  s.entities.push_back(ent("c", "plate", "green", {0.3, 0.2}));
  const RunConfig cfg;
  const PlanOutcome a = plan_program(s, parse("put the cube to the left of the bowl, and put the plate behind the cube"),
                                     SymbolicGrounder(), from(lib), cfg, 3);
  const PlanOutcome b = plan_program(s, parse("put the plate behind the cube, and put the cube to the left of the bowl"),
                                     SymbolicGrounder(), from(lib), cfg, 3);
  EXPECT_EQ(a.layout.to_json(), b.layout.to_json());
}

TEST(Pipeline, PlanProgramErrorsByStage) {
  const ConceptLibrary lib = random_library();
  const Scene s = two_objects();
  const RunConfig cfg;
  EXPECT_THROW(plan_program(s, parse("put the green cube behind the bowl"), SymbolicGrounder(), from(lib), cfg, 0),
               GroundingError);
  EXPECT_THROW(plan_program(s, parse("put the cube behind the cube"), SymbolicGrounder(), from(lib), cfg, 0),
               CompileError);
  const LibrarySource none = [](const std::set<ConceptKind>&) -> ConceptLibrary {
    throw MissingAssetError("no checkpoints");
  };
  EXPECT_THROW(plan_program(s, parse("put the cube behind the bowl"), SymbolicGrounder(), none, cfg, 0),
               MissingAssetError);
}

TEST(Pipeline, OracleExecutionReachesTargets) {
  const ConceptLibrary lib = random_library();
  const RunConfig cfg;
  const Episode ep = gen_episode(TaskFamily::CompGroup, Split::Seen, 4, cfg.bench_config());
  const PlanOutcome plan = plan_episode(ep, lib, cfg);
  const EpisodeOutcome out = execute_episode(ep, plan, ExecMode::Oracle, cfg);
  for (const LayoutEntry& e : plan.layout.entries) {
    if (e.moved) EXPECT_EQ(out.final_scene.at(e.target.id).center, e.target.center);
  }
  EXPECT_EQ(out.row.mode, "oracle");
  EXPECT_EQ(out.row.actions, action_count(plan.layout));
  EXPECT_FALSE(out.row.predicted_success.has_value());
  EXPECT_EQ(out.row.tc, out.row.oracle_success);
}

TEST(Pipeline, RunEpisodeRowsPerMode) {
  const ConceptLibrary lib = random_library();
  RunConfig cfg;
  cfg.exec.p_fail = 0.3;
  const Episode ep = gen_episode(TaskFamily::CompOneStep, Split::UnseenColors, 8, cfg.bench_config());
  const ExecMode modes[] = {ExecMode::OpenLoop, ExecMode::ClosedLoop};
  const auto a = run_episode(ep, lib, cfg, modes);
  const auto b = run_episode(ep, lib, cfg, modes);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].row.mode, "open");
  EXPECT_EQ(a[1].row.mode, "closed");
  EXPECT_TRUE(a[1].row.predicted_success.has_value());
  EXPECT_EQ(results_csv(std::vector<ResultRow>{a[0].row, a[1].row}),
            results_csv(std::vector<ResultRow>{b[0].row, b[1].row}));
  EXPECT_EQ(a[0].row.split, "unseen-colors");
}

TEST(Pipeline, MissingConceptIsRecordedNotThrown) {
  ConceptLibrary lib = random_library();
  lib.erase(ConceptKind::LeftOf);
  lib.erase(ConceptKind::RightOf);
  lib.erase(ConceptKind::InFrontOf);
  lib.erase(ConceptKind::Behind);
  const RunConfig cfg;
  const Episode ep = gen_episode(TaskFamily::SpatialRelations, Split::Seen, 2, cfg.bench_config());
  EXPECT_THROW(plan_episode(ep, lib, cfg), MissingAssetError);
  const ExecMode modes[] = {ExecMode::OpenLoop, ExecMode::ClosedLoop};
  const auto rows = run_episode(ep, lib, cfg, modes);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& o : rows) {
    EXPECT_NE(o.row.error.find("no trained parameters"), std::string::npos);
    EXPECT_FALSE(o.row.tc);
    EXPECT_EQ(o.final_scene, ep.scene);
  }
}

TEST(Pipeline, GenerationTrialsAreSeeded) {
  const RunConfig cfg;
  const EBMParams p = init_params(ConceptKind::LeftOf, 5);
  const GenerationStats a = generation_trials(ConceptKind::LeftOf, p, 6, cfg, 1);
  const GenerationStats b = generation_trials(ConceptKind::LeftOf, p, 6, cfg, 1);
  EXPECT_EQ(a.trials, 6);
  EXPECT_EQ(a.satisfied, b.satisfied);
  EXPECT_GE(a.rate(), 0.0);
  EXPECT_LE(a.rate(), 1.0);
  const GenerationStats c = generation_trials(ConceptKind::Line, init_params(ConceptKind::Line, 5), 3, cfg, 1);
  EXPECT_EQ(c.trials, 3);
  EXPECT_GT(c.mean_min_pair, 0.0);
  EXPECT_GT(c.mean_radius, 0.0);
}

TEST(Pipeline, ModeNames) {
  EXPECT_EQ(mode_name(ExecMode::Oracle), "oracle");
  EXPECT_EQ(mode_name(ExecMode::OpenLoop), "open");
  EXPECT_EQ(mode_name(ExecMode::ClosedLoop), "closed");
}

}  // namespace
}  // namespace rearrange
