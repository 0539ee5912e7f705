#pragma once

// Ground-truth satisfaction predicates and shape rewards. These define what
// "satisfied" means everywhere: data generation, episode scoring, tests.

#include <span>

#include "rearrange/ebm.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

// Valid-region parameters in normalized workspace units.
struct RelationGeometry {
  double offset_min = 0.06;  // along the relation axis
  double offset_max = 0.25;
  double band = 0.08;        // perpendicular half-width
  double inside_margin = 0.01;
  double circle_radius_min = 0.08;
  double circle_radius_max = 0.16;
  double line_length_min = 0.2;
  double line_length_max = 0.5;
  double shape_jitter = 0.004;
  double contact_tolerance = 0.005;  // On3D z gap
  double pose_tolerance = 0.3;       // radians, PoseCircle headings

  void validate() const;
};

// Binary relations between subject a and referent b. On3D needs z extents
// on both entities.
bool relation_satisfied(ConceptKind rel, const Entity& a, const Entity& b, const RelationGeometry& geom);
bool relation_satisfied(ConceptKind rel, const Box& a, const Box& b, const RelationGeometry& geom);

inline constexpr double kRewardFullBelow = 0.03;
inline constexpr double kRewardZeroAbove = 0.06;

// 1 at or below 0.03, linear down to 0 at 0.06.
double spread_reward(double spread);

// Population standard deviation of distances to the centroid.
double circle_spread(std::span<const Vec2> points);
double circle_reward(std::span<const Vec2> points);

// Population standard deviation of perpendicular distances to the total
// least squares line through the centroid.
double line_spread(std::span<const Vec2> points);
double line_reward(std::span<const Vec2> points);

// Circle of poses whose headings point radially outward.
bool pose_circle_satisfied(std::span<const Pose> poses, const RelationGeometry& geom);

double shape_reward(ConceptKind shape, std::span<const Vec2> points);

}  // namespace rearrange
