#pragma once

// Benchmark episodes for four task families and three attribute splits,
// plus scoring.
//
// Geometry and attributes come from separate random streams, so the same
// seed gives the same layout and goal under every split; only names and
// colors change.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearrange/concept_data.hpp"
#include "rearrange/grounder.hpp"
#include "rearrange/planner.hpp"
#include "rearrange/predicates.hpp"
#include "rearrange/program.hpp"

namespace rearrange {

enum class TaskFamily { SpatialRelations, CompOneStep, CompGroup, Shapes };
enum class Split { Seen, UnseenColors, UnseenObjects };

inline constexpr std::array<TaskFamily, 4> kAllFamilies = {TaskFamily::SpatialRelations, TaskFamily::CompOneStep,
                                                           TaskFamily::CompGroup, TaskFamily::Shapes};
inline constexpr std::array<Split, 3> kAllSplits = {Split::Seen, Split::UnseenColors, Split::UnseenObjects};

std::string_view family_name(TaskFamily f);  // "spatial-relations", ...
std::string_view split_name(Split s);        // "seen", "unseen-colors", "unseen-objects"
TaskFamily family_from_name(std::string_view name);  // ConfigError
Split split_from_name(std::string_view name);        // ConfigError

struct SplitConfig {
  std::vector<std::string> seen_colors = {"blue", "red", "green", "yellow", "brown", "gray", "cyan"};
  std::vector<std::string> unseen_colors = {"orange", "purple", "pink", "white"};
  std::vector<std::string> seen_objects = {"ring", "cube", "cylinder", "bowl"};
  std::vector<std::string> unseen_objects = {"triangle", "square",    "plus",  "diamond", "pentagon", "rectangle",
                                             "flower",   "star",      "circle", "hexagon", "heart"};
  std::string background = "white";

  const std::vector<std::string>& colors(Split s) const;
  const std::vector<std::string>& objects(Split s) const;
  void validate() const;  // ConfigError when seen and unseen overlap
};

struct BenchConfig {
  RelationGeometry geom;
  SizeRanges sizes;
  SplitConfig splits;
  int min_distractors = 2;
  int max_distractors = 5;
  double clearance = 0.01;
  int intersection_samples = 10000;
  std::size_t min_members = 4;
  std::size_t max_members = 6;
  int episode_attempts = 200;

  void validate() const;
};

struct Episode {
  TaskFamily family = TaskFamily::SpatialRelations;
  Split split = Split::Seen;
  std::uint64_t seed = 0;
  Scene scene;
  std::string instruction;
  Program program;
  // Ground truth: what each phrase denotes, and the constraints to satisfy
  // expressed over entity ids.
  Groundings annotation;
  std::vector<EnergyTerm> goal;

  nlohmann::json to_json() const;
  static Episode from_json(const nlohmann::json& j);
};

// GenerationError when the attempt budget runs out.
Episode gen_episode(TaskFamily family, Split split, std::uint64_t seed, const BenchConfig& cfg = {});

// Uniform samples of a subject center (with the given size, inside the
// workspace) that satisfy every binary constraint against fixed referent
// boxes. Returns the hit count.
int intersection_hits(std::span<const std::pair<ConceptKind, Box>> constraints, Vec2 subject_size,
                      const Workspace& ws, const RelationGeometry& geom, int samples, std::mt19937_64& rng);

struct Metrics {
  double tp = 0.0;
  bool tc = false;
  std::vector<double> constraint_scores;  // 1/0 for relations, reward for shapes
};

// Relations score 1 when satisfied; a shape scores its reward, rounded up to
// 1 at or above 0.99. TP is the mean score, TC whether every score is 1.
Metrics score_episode(const Episode& ep, const Scene& final_scene, const RelationGeometry& geom = {});

inline constexpr double kShapeDoneReward = 0.99;

// Failure is the positive class. An empty denominator gives 1.
struct DetectorScore {
  int true_pos = 0, false_pos = 0, false_neg = 0, true_neg = 0;
  double precision = 0.0, recall = 0.0, accuracy = 0.0;
};
DetectorScore score_failure_detector(std::span<const bool> predicted_success, std::span<const bool> oracle_success);
DetectorScore detector_from_counts(int true_pos, int false_pos, int false_neg, int true_neg);

struct ResultRow {
  std::string task;
  std::string split;
  std::uint64_t seed = 0;
  std::string mode;  // oracle, open or closed
  double tp = 0.0;
  bool tc = false;
  std::size_t actions = 0;
  std::optional<bool> predicted_success;  // closed loop only
  bool oracle_success = false;
  std::string error;  // empty unless the episode failed before scoring
};

std::string results_csv(std::span<const ResultRow> rows);

}  // namespace rearrange
