#pragma once

// Procedural positive examples for each concept, standing in for annotated
// demonstration scenes.

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "rearrange/ebm.hpp"
#include "rearrange/predicates.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

// Binary concepts: entities = {subject, referent}. Shapes: the members.
struct Configuration {
  ConceptKind kind = ConceptKind::LeftOf;
  std::vector<Entity> entities;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct ConceptDataset {
  ConceptKind kind = ConceptKind::LeftOf;
  std::vector<Configuration> positives;
  std::uint64_t seed = 0;
};

// Object sizes used by the generators (normalized units).
struct SizeRanges {
  double object_min = 0.05, object_max = 0.10;
  double container_min = 0.18, container_max = 0.30;
  double small_min = 0.04, small_max = 0.08;
  double shape_member_min = 0.04, shape_member_max = 0.07;
  double height_min = 0.03, height_max = 0.08;
};

struct AugmentConfig {
  bool translate = true;
  double jitter = 0.005;  // per-entity, per-axis, uniform in [-jitter, jitter]
};

inline constexpr int kRejectionBudget = 1000;

// Slack kept between a positive and its region boundary so augmentation
// jitter can never break the predicate.
inline constexpr double kRegionSlack = 0.01;

bool satisfies(const Configuration& c, const RelationGeometry& geom);

std::size_t arity_of(ConceptKind kind);  // 2 for binary, 0 for variable-size shapes

// n must be 2 for binary concepts and >= 3 for shapes. Throws
// GenerationError after kRejectionBudget failed placements.
Configuration gen_positive(ConceptKind kind, std::size_t n, const RelationGeometry& geom, std::mt19937_64& rng,
                           const SizeRanges& sizes = {});

Configuration augment(const Configuration& c, std::mt19937_64& rng, const AugmentConfig& cfg = {},
                      const Workspace& ws = {});

// Shapes draw their member count uniformly from [min_members, max_members].
struct DatasetOptions {
  std::size_t min_members = 4;
  std::size_t max_members = 6;
  SizeRanges sizes;
};

ConceptDataset build_dataset(ConceptKind kind, std::size_t count, const RelationGeometry& geom, std::uint64_t seed,
                             const DatasetOptions& opts = {});

// Same entities with the movable ones (binary subject, or every shape member)
// scattered uniformly over the workspace: the unarranged scene a
// demonstration starts from.
Configuration scatter(const Configuration& c, std::mt19937_64& rng, const Workspace& ws = {});

nlohmann::json dataset_to_json(const ConceptDataset& d);

}  // namespace rearrange
