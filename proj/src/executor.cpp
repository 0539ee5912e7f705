#include "rearrange/executor.hpp"

#include <sstream>

#include "rearrange/errors.hpp"

namespace rearrange {

void ExecConfig::validate() const {
  if (!(sigma >= 0.0)) throw ConfigError("exec sigma must be >= 0");
  if (!(p_fail >= 0.0 && p_fail <= 1.0)) throw ConfigError("exec p_fail must be in [0, 1]");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("exec iou_threshold must be in (0, 1]");
  if (retries < 0) throw ConfigError("exec retries must be >= 0");
}

namespace {

nlohmann::json box_json(const Box& b) { return {b.tl.x, b.tl.y, b.br.x, b.br.y}; }

struct Placement {
  Scene scene;
  bool picked = false;
};

// Pick failure is drawn first, then the two noise samples, so the stream
// advances the same way whatever the outcome.
Placement place(const Scene& scene, std::string_view id, const Box& target, const Entity* pose, const ExecConfig& cfg,
                std::mt19937_64& rng) {
  if (!scene.find(id)) throw ExecutionError("unknown entity '" + std::string(id) + "'");
  std::bernoulli_distribution fail(cfg.p_fail);
  std::normal_distribution<double> noise(0.0, 1.0);
  const bool failed = fail(rng);
  const double nx = noise(rng), ny = noise(rng);
  Placement out{scene, !failed};
  if (failed) return out;
  Entity& e = *out.scene.find(id);
  const Vec2 c = target.center();
  e.center = {c.x + cfg.sigma * nx, c.y + cfg.sigma * ny};
  if (pose) {
    e.z = pose->z;
    e.theta = pose->theta;
  }
  return out;
}

}  // namespace

Scene execute_pick_place(const Scene& scene, std::string_view id, const Box& target, const ExecConfig& cfg,
                         std::mt19937_64& rng) {
  cfg.validate();
  return place(scene, id, target, nullptr, cfg, rng).scene;
}

ClosedLoopResult closed_loop_run(const Scene& scene, const GoalLayout& layout, const ExecConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  ClosedLoopResult out{scene, true, {}};
  for (const LayoutEntry& entry : layout.entries) {
    if (!entry.moved) continue;
    const Box target = corners(entry.target);
    bool reached = false;
    for (int attempt = 0; attempt <= cfg.retries && !reached; ++attempt) {
      Placement p = place(out.final_scene, entry.target.id, target, &entry.target, cfg, rng);
      out.final_scene = std::move(p.scene);
      const Box achieved = corners(out.final_scene.at(entry.target.id));
      reached = iou(achieved, target) >= cfg.iou_threshold;
      out.log.actions.push_back({entry.target.id, attempt, p.picked, target, achieved, reached});
      if (attempt > 0) ++out.log.retries_used;
    }
    out.predicted_success = out.predicted_success && reached;
  }
  out.log.final_scene = out.final_scene;
  return out;
}

OpenLoopResult open_loop_run(const Scene& scene, const GoalLayout& layout, const ExecConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  OpenLoopResult out{scene, {}};
  for (const LayoutEntry& entry : layout.entries) {
    if (!entry.moved) continue;
    const Box target = corners(entry.target);
    Placement p = place(out.final_scene, entry.target.id, target, &entry.target, cfg, rng);
    out.final_scene = std::move(p.scene);
    out.log.actions.push_back(
        {entry.target.id, 0, p.picked, target, corners(out.final_scene.at(entry.target.id)), std::nullopt});
  }
  out.log.final_scene = out.final_scene;
  return out;
}

std::string ExecutionLog::to_jsonl() const {
  std::ostringstream os;
  for (const ActionRecord& a : actions) {
    nlohmann::json j = {{"entity", a.entity},
                        {"attempt", a.attempt},
                        {"picked", a.picked},
                        {"intended", box_json(a.intended)},
                        {"achieved", box_json(a.achieved)}};
    j["success"] = a.success ? nlohmann::json(*a.success) : nlohmann::json(nullptr);
    os << j.dump() << '\n';
  }
  os << nlohmann::json{{"retries_used", retries_used}, {"final_scene", scene_to_json(final_scene)}}.dump() << '\n';
  return os.str();
}

}  // namespace rearrange
