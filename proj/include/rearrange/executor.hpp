#pragma once

// Noisy kinematic pick-and-place and the closed-loop controller that
// re-checks each placement against its target box.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rearrange/planner.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

struct ExecConfig {
  double sigma = 0.0;          // per-axis place noise
  double p_fail = 0.0;         // chance a pick fails and nothing moves
  double iou_threshold = 0.5;  // placement counts as reached at or above this
  int retries = 2;             // extra attempts per entity in closed loop
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

struct ActionRecord {
  std::string entity;
  int attempt = 0;
  bool picked = false;
  Box intended;
  Box achieved;
  std::optional<bool> success;  // unset in open loop
};

struct ExecutionLog {
  std::vector<ActionRecord> actions;
  int retries_used = 0;
  Scene final_scene;

  // One JSON object per action, then a summary line with the final scene.
  std::string to_jsonl() const;
};

// Moves entity id to target's center plus N(0, sigma^2) noise per axis,
// keeping its size. With probability p_fail nothing changes.
// ExecutionError for an unknown id.
Scene execute_pick_place(const Scene& scene, std::string_view id, const Box& target, const ExecConfig& cfg,
                         std::mt19937_64& rng);

struct ClosedLoopResult {
  Scene final_scene;
  bool predicted_success = false;
  ExecutionLog log;
};

// Each moved entity is placed, re-read and retried up to cfg.retries times
// until its IoU with the target reaches the threshold.
ClosedLoopResult closed_loop_run(const Scene& scene, const GoalLayout& layout, const ExecConfig& cfg);

struct OpenLoopResult {
  Scene final_scene;
  ExecutionLog log;
};

// One attempt per moved entity, no re-check.
OpenLoopResult open_loop_run(const Scene& scene, const GoalLayout& layout, const ExecConfig& cfg);

}  // namespace rearrange
