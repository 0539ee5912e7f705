#pragma once

// End-to-end glue: training from a run config, checkpoint libraries,
// instruction planning, episode execution and generation trials.

#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rearrange/bench.hpp"
#include "rearrange/executor.hpp"
#include "rearrange/grounder.hpp"
#include "rearrange/planner.hpp"
#include "rearrange/run_config.hpp"
#include "rearrange/trainer.hpp"

namespace rearrange {

// Positives for one concept, seeded from the run seed and the concept tag.
ConceptDataset dataset_for(ConceptKind kind, const RunConfig& cfg);
TrainResult train_from_config(ConceptKind kind, const RunConfig& cfg, const StepCallback& on_step = {});

std::set<ConceptKind> concepts_of(const EnergyExpression& expr);

// MissingAssetError naming the first absent checkpoint.
ConceptLibrary load_library(const std::filesystem::path& dir, const std::set<ConceptKind>& kinds);

struct PlanOutcome {
  Program program;
  Groundings groundings;
  EnergyExpression expr;
  OptimizableMask mask;
  GoalLayout layout;
};

// library may be a loader so only needed checkpoints are read.
using LibrarySource = std::function<ConceptLibrary(const std::set<ConceptKind>&)>;

PlanOutcome plan_program(const Scene& scene, const Program& program, const Grounder& grounder,
                         const LibrarySource& library, const RunConfig& cfg, std::uint64_t seed,
                         bool record_trajectory = false);

enum class ExecMode { Oracle, OpenLoop, ClosedLoop };
std::string_view mode_name(ExecMode m);

PlanOutcome plan_episode(const Episode& ep, const ConceptLibrary& library, const RunConfig& cfg);

struct EpisodeOutcome {
  ResultRow row;
  Scene final_scene;
};

// Executes an episode's plan under one mode. Oracle mode places every moved
// entity exactly; the executor seed is mixed with the episode seed.
EpisodeOutcome execute_episode(const Episode& ep, const PlanOutcome& plan, ExecMode mode, const RunConfig& cfg);

// Plans once and executes under each mode. A library error is recorded in
// every row, which is then scored on the unchanged scene.
std::vector<EpisodeOutcome> run_episode(const Episode& ep, const ConceptLibrary& library, const RunConfig& cfg,
                                        std::span<const ExecMode> modes);

struct GenerationStats {
  int trials = 0;
  int satisfied = 0;
  double mean_reward = 0.0;
  // Shapes only: guards against a collapsed point set scoring as a circle.
  double mean_radius = 0.0;
  double mean_min_pair = 0.0;

  double rate() const { return trials ? static_cast<double>(satisfied) / trials : 0.0; }
};

// Each trial takes a fresh positive, plans from a random init of its movable
// entities (binary referents stay fixed) and checks the predicate or shape
// reward on the result.
GenerationStats generation_trials(ConceptKind kind, const EBMParams& params, int trials, const RunConfig& cfg,
                                  std::uint64_t seed);

}  // namespace rearrange
