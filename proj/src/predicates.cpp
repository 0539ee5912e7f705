#include "rearrange/predicates.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "rearrange/errors.hpp"

namespace rearrange {

void RelationGeometry::validate() const {
  if (!(offset_min > 0.0 && offset_min < offset_max)) throw ConfigError("geometry: need 0 < offset_min < offset_max");
  if (!(band > 0.0)) throw ConfigError("geometry: band must be > 0");
  if (!(inside_margin >= 0.0)) throw ConfigError("geometry: inside_margin must be >= 0");
  if (!(circle_radius_min > 0.0 && circle_radius_min <= circle_radius_max)) {
    throw ConfigError("geometry: invalid circle radius range");
  }
  if (!(line_length_min > 0.0 && line_length_min <= line_length_max)) {
    throw ConfigError("geometry: invalid line length range");
  }
  if (!(shape_jitter >= 0.0)) throw ConfigError("geometry: shape_jitter must be >= 0");
}

namespace {

bool directional(ConceptKind rel, Vec2 a, Vec2 b, const RelationGeometry& g) {
  double along = 0.0, across = 0.0;
  switch (rel) {
    case ConceptKind::LeftOf: along = b.x - a.x; across = a.y - b.y; break;
    case ConceptKind::RightOf: along = a.x - b.x; across = a.y - b.y; break;
    case ConceptKind::Behind: along = a.y - b.y; across = a.x - b.x; break;
    case ConceptKind::InFrontOf: along = b.y - a.y; across = a.x - b.x; break;
    default: throw ConfigError("not a directional relation");
  }
  return along >= g.offset_min && along <= g.offset_max && std::abs(across) <= g.band;
}

}  // namespace

bool relation_satisfied(ConceptKind rel, const Box& a, const Box& b, const RelationGeometry& geom) {
  switch (rel) {
    case ConceptKind::LeftOf:
    case ConceptKind::RightOf:
    case ConceptKind::Behind:
    case ConceptKind::InFrontOf:
      return directional(rel, a.center(), b.center(), geom);
    case ConceptKind::Inside:
      return contains(b, a);
    default:
      throw ConfigError("relation_satisfied: '" + std::string(concept_name(rel)) + "' needs entities, not boxes");
  }
}

bool relation_satisfied(ConceptKind rel, const Entity& a, const Entity& b, const RelationGeometry& geom) {
  if (rel == ConceptKind::On3D) {
    if (!a.z || !b.z) throw ValidationError("On relation needs z extents on both entities");
    return contains(corners(b), corners(a)) && std::abs(a.z->min - b.z->max) <= geom.contact_tolerance;
  }
  if (!is_binary(rel)) throw ConfigError("relation_satisfied: '" + std::string(concept_name(rel)) + "' is not binary");
  return relation_satisfied(rel, corners(a), corners(b), geom);
}

double spread_reward(double spread) {
  if (spread <= kRewardFullBelow) return 1.0;
  if (spread >= kRewardZeroAbove) return 0.0;
  return (kRewardZeroAbove - spread) / (kRewardZeroAbove - kRewardFullBelow);
}

namespace {

void expect_arity(std::span<const Vec2> points, const char* what) {
  if (points.size() < 3) throw ArityError(std::string(what) + ": needs at least 3 points");
}

Vec2 centroid(std::span<const Vec2> points) {
  Vec2 c;
  for (Vec2 p : points) c = c + p;
  return (1.0 / static_cast<double>(points.size())) * c;
}

double population_std(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace

double circle_spread(std::span<const Vec2> points) {
  expect_arity(points, "circle_reward");
  const Vec2 c = centroid(points);
  std::vector<double> radii;
  for (Vec2 p : points) radii.push_back(norm(p - c));
  return population_std(radii);
}

double circle_reward(std::span<const Vec2> points) { return spread_reward(circle_spread(points)); }

double line_spread(std::span<const Vec2> points) {
  expect_arity(points, "line_reward");
  const Vec2 c = centroid(points);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (Vec2 p : points) {
    const Vec2 d = p - c;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  // Principal direction of the scatter matrix; all-coincident points give
  // zero spread whatever direction is picked.
  const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const Vec2 normal{-std::sin(angle), std::cos(angle)};
  std::vector<double> dist;
  for (Vec2 p : points) {
    const Vec2 d = p - c;
    dist.push_back(d.x * normal.x + d.y * normal.y);
  }
  return population_std(dist);
}

double line_reward(std::span<const Vec2> points) { return spread_reward(line_spread(points)); }

bool pose_circle_satisfied(std::span<const Pose> poses, const RelationGeometry& geom) {
  if (poses.size() < 3) throw ArityError("pose_circle: needs at least 3 poses");
  std::vector<Vec2> points;
  for (const Pose& p : poses) points.push_back({p.x, p.y});
  if (circle_reward(points) < 1.0) return false;
  const Vec2 c = centroid(points);
  for (const Pose& p : poses) {
    const double radial = std::atan2(p.y - c.y, p.x - c.x);
    const double diff = std::remainder(p.theta - radial, 2.0 * std::numbers::pi);
    if (std::abs(diff) > geom.pose_tolerance) return false;
  }
  return true;
}

double shape_reward(ConceptKind shape, std::span<const Vec2> points) {
  switch (shape) {
    case ConceptKind::Circle:
    case ConceptKind::PoseCircle:
      return circle_reward(points);
    case ConceptKind::Line:
      return line_reward(points);
    default:
      throw ConfigError("shape_reward: '" + std::string(concept_name(shape)) + "' is not a shape");
  }
}

}  // namespace rearrange
