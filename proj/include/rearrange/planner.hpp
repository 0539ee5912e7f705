#pragma once

// Composition of concept energies over a scene and joint minimization to a
// goal layout.
//
// Planner coordinates are one row per referenced entity: (x, y, z_center,
// theta). Each term gathers its rows and packs them in the layout its
// network expects.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rearrange/ebm.hpp"
#include "rearrange/grounder.hpp"
#include "rearrange/langevin.hpp"
#include "rearrange/program.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

struct EnergyTerm {
  ConceptKind kind = ConceptKind::LeftOf;
  std::vector<std::string> ids;  // subject, referent for binary; members for shapes

  friend auto operator<=>(const EnergyTerm&, const EnergyTerm&) = default;
};

struct EnergyExpression {
  std::vector<EnergyTerm> terms;

  // Distinct ids in first-appearance order; this is the row order of
  // planner coordinates.
  std::vector<std::string> entities() const;
};

// One term per binary goal; a shape gives one shape term plus, when
// constrained, one binary term per member against the referent.
// CompileError on empty or missing groundings, a binary argument not
// grounded to exactly one entity, or a shape with fewer than 3 members.
EnergyExpression compile(const Program& p, const Groundings& g);

using ConceptLibrary = std::map<ConceptKind, EBMParams>;

inline constexpr std::size_t kPlanColumns = 4;
inline constexpr double kMoveThreshold = 0.02;

// Entities that only ever appear as binary referents stay fixed. x and y of
// every other entity are movable; z only for entities in a 3D term and
// theta only for entities in a pose term. PlanningError when nothing moves.
OptimizableMask select_anchors(const EnergyExpression& expr);

// Rows in expr.entities() order.
ad::NumArray scene_coordinates(const Scene& scene, const std::vector<std::string>& ids);

// Summed energy of all terms. MissingAssetError for a concept absent from
// the library; PlanningError when a 3D term references an entity without a
// z extent.
class CompiledEnergy {
 public:
  CompiledEnergy(const Scene& scene, EnergyExpression expr, const ConceptLibrary& library);

  const std::vector<std::string>& ids() const { return ids_; }
  EnergyEval operator()(const ad::NumArray& coords) const;
  double value(const ad::NumArray& coords) const;
  // Per-term energies, parallel to expr.terms.
  std::vector<double> term_values(const ad::NumArray& coords) const;

 private:
  ad::Var build(ad::Graph& g, ad::Var coords, std::vector<ad::Var>* per_term) const;

  EnergyExpression expr_;
  std::vector<const EBMParams*> params_;
  std::vector<std::string> ids_;
  std::vector<std::vector<std::size_t>> rows_;
  std::vector<ad::NumArray> sizes_;
};

enum class PlanInit { Scene, Random };

struct PlanOptions {
  PlanInit init = PlanInit::Scene;
  double move_threshold = kMoveThreshold;
  bool record_trajectory = false;
};

struct LayoutEntry {
  Entity target;  // scene entity with the optimized pose
  bool moved = false;
  double displacement = 0.0;

  friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

struct GoalLayout {
  Workspace workspace;
  std::vector<LayoutEntry> entries;
  double initial_energy = 0.0;
  double energy = 0.0;
  std::optional<Trajectory> trajectory;

  const LayoutEntry* find(std::string_view id) const;
  nlohmann::json to_json() const;
};

// Generic loop: Langevin over the coordinates of ids on any energy. The
// sampler clamps centers to the scene workspace when cfg.clamp is set, and
// the final targets are pulled inside it.
GoalLayout plan_layout(const Scene& scene, const std::vector<std::string>& ids, const OptimizableMask& mask,
                       const EnergyFunction& energy, SamplerConfig cfg, const PlanOptions& opts = {});

GoalLayout plan_goal(const Scene& scene, const EnergyExpression& expr, const ConceptLibrary& library,
                     const OptimizableMask& mask, SamplerConfig cfg = SamplerConfig::infer_preset(),
                     const PlanOptions& opts = {});

std::size_t action_count(const GoalLayout& layout);

// The scene with every layout target applied.
Scene apply_layout(const Scene& scene, const GoalLayout& layout);

}  // namespace rearrange
