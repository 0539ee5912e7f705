#include "rearrange/concept_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rearrange/errors.hpp"

namespace rearrange {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Entity make_entity(std::size_t index, Vec2 size) {
  Entity e;
  e.id = "o" + std::to_string(index);
  e.name = "block";
  e.size = size;
  return e;
}

Vec2 random_size(std::mt19937_64& rng, double lo, double hi) { return {uniform(rng, lo, hi), uniform(rng, lo, hi)}; }

Vec2 random_center_for(Vec2 size, std::mt19937_64& rng, const Workspace& ws = {}) {
  return {uniform(rng, 0.5 * size.x, ws.w - 0.5 * size.x), uniform(rng, 0.5 * size.y, ws.h - 0.5 * size.y)};
}

bool inside_workspace(const std::vector<Entity>& es, const Workspace& ws = {}) {
  return std::all_of(es.begin(), es.end(), [&](const Entity& e) { return ws.contains(corners(e)); });
}

Vec2 axis_offset(ConceptKind rel, double along, double across) {
  switch (rel) {
    case ConceptKind::LeftOf: return {-along, across};
    case ConceptKind::RightOf: return {along, across};
    case ConceptKind::Behind: return {across, along};
    case ConceptKind::InFrontOf: return {across, -along};
    default: throw ConfigError("not a directional relation");
  }
}

double clipped_normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  const double v = std::normal_distribution<double>(0.0, sigma)(rng);
  return std::clamp(v, -3.0 * sigma, 3.0 * sigma);
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

std::vector<Vec2> centers_of(const Configuration& c) {
  std::vector<Vec2> out;
  for (const auto& e : c.entities) out.push_back(e.center);
  return out;
}

}  // namespace

std::size_t arity_of(ConceptKind kind) { return is_binary(kind) ? 2 : 0; }

bool satisfies(const Configuration& c, const RelationGeometry& geom) {
  if (is_binary(c.kind)) {
    if (c.entities.size() != 2) return false;
    return relation_satisfied(c.kind, c.entities[0], c.entities[1], geom);
  }
  if (c.kind == ConceptKind::PoseCircle) {
    std::vector<Pose> poses;
    for (const auto& e : c.entities) poses.push_back({e.center.x, e.center.y, e.theta.value_or(0.0)});
    return pose_circle_satisfied(poses, geom);
  }
  return shape_reward(c.kind, centers_of(c)) >= 1.0;
}

Configuration gen_positive(ConceptKind kind, std::size_t n, const RelationGeometry& geom, std::mt19937_64& rng,
                           const SizeRanges& sizes) {
  geom.validate();
  if (is_binary(kind) && n != 2) {
    throw ArityError("gen_positive: binary concept '" + std::string(concept_name(kind)) + "' needs 2 entities");
  }
  if (is_shape(kind) && n < 3) {
    throw ArityError("gen_positive: shape '" + std::string(concept_name(kind)) + "' needs at least 3 entities");
  }
  const double slack = kRegionSlack;

  for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
    Configuration c;
    c.kind = kind;
    switch (kind) {
      case ConceptKind::LeftOf:
      case ConceptKind::RightOf:
      case ConceptKind::Behind:
      case ConceptKind::InFrontOf: {
        Entity subject = make_entity(0, random_size(rng, sizes.object_min, sizes.object_max));
        Entity referent = make_entity(1, random_size(rng, sizes.object_min, sizes.object_max));
        referent.center = random_center_for(referent.size, rng);
        const double along = uniform(rng, geom.offset_min + slack, geom.offset_max - slack);
        const double across = uniform(rng, -(geom.band - slack), geom.band - slack);
        subject.center = referent.center + axis_offset(kind, along, across);
        c.entities = {subject, referent};
        break;
      }
      case ConceptKind::Inside:
      case ConceptKind::On3D: {
        Entity referent = make_entity(1, random_size(rng, sizes.container_min, sizes.container_max));
        Entity subject = make_entity(0, random_size(rng, sizes.small_min, sizes.small_max));
        referent.center = random_center_for(referent.size, rng);
        const double pad = geom.inside_margin + slack;
        const Vec2 room = 0.5 * (referent.size - subject.size) - Vec2{pad, pad};
        if (room.x <= 0.0 || room.y <= 0.0) continue;
        subject.center = referent.center + Vec2{uniform(rng, -room.x, room.x), uniform(rng, -room.y, room.y)};
        if (kind == ConceptKind::On3D) {
          const double hb = uniform(rng, sizes.height_min, sizes.height_max);
          const double ha = uniform(rng, sizes.height_min, sizes.height_max);
          referent.z = ZExtent{0.0, hb};
          subject.z = ZExtent{hb, hb + ha};
        }
        c.entities = {subject, referent};
        break;
      }
      case ConceptKind::Circle:
      case ConceptKind::PoseCircle: {
        const double radius = uniform(rng, geom.circle_radius_min, geom.circle_radius_max);
        const double reach = radius + 0.5 * sizes.shape_member_max + slack;
        if (reach * 2.0 >= 1.0) throw GenerationError("gen_positive: circle radius does not fit the workspace");
        const Vec2 center{uniform(rng, reach, 1.0 - reach), uniform(rng, reach, 1.0 - reach)};
        const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < n; ++i) {
          Entity e = make_entity(i, random_size(rng, sizes.shape_member_min, sizes.shape_member_max));
          const double angle = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
          const double r = radius + clipped_normal(rng, geom.shape_jitter);
          e.center = center + Vec2{r * std::cos(angle), r * std::sin(angle)};
          if (kind == ConceptKind::PoseCircle) e.theta = wrap_angle(angle + clipped_normal(rng, 0.05));
          c.entities.push_back(e);
        }
        break;
      }
      case ConceptKind::Line: {
        const double length = uniform(rng, geom.line_length_min, geom.line_length_max);
        const double angle = uniform(rng, 0.0, std::numbers::pi);
        const Vec2 dir{std::cos(angle), std::sin(angle)};
        const Vec2 normal{-dir.y, dir.x};
        const double half = 0.5 * length;
        const double reach_x = half * std::abs(dir.x) + 0.5 * sizes.shape_member_max + slack;
        const double reach_y = half * std::abs(dir.y) + 0.5 * sizes.shape_member_max + slack;
        if (reach_x * 2.0 >= 1.0 || reach_y * 2.0 >= 1.0) continue;
        const Vec2 center{uniform(rng, reach_x, 1.0 - reach_x), uniform(rng, reach_y, 1.0 - reach_y)};
        for (std::size_t i = 0; i < n; ++i) {
          Entity e = make_entity(i, random_size(rng, sizes.shape_member_min, sizes.shape_member_max));
          const double t = -half + length * static_cast<double>(i) / static_cast<double>(n - 1);
          e.center = center + t * dir + clipped_normal(rng, geom.shape_jitter) * normal;
          c.entities.push_back(e);
        }
        break;
      }
    }
    if (inside_workspace(c.entities) && satisfies(c, geom)) return c;
  }
  throw GenerationError("gen_positive: rejection budget exhausted for '" + std::string(concept_name(kind)) + "'");
}

Configuration augment(const Configuration& c, std::mt19937_64& rng, const AugmentConfig& cfg, const Workspace& ws) {
  if (!cfg.translate && cfg.jitter <= 0.0) return c;
  double lo_x = ws.w, lo_y = ws.h, hi_x = 0.0, hi_y = 0.0;
  for (const auto& e : c.entities) {
    const Box b = corners(e);
    lo_x = std::min(lo_x, b.tl.x);
    lo_y = std::min(lo_y, b.tl.y);
    hi_x = std::max(hi_x, b.br.x);
    hi_y = std::max(hi_y, b.br.y);
  }
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vec2 t{0.0, 0.0};
    if (cfg.translate) {
      const double tx_lo = -lo_x, tx_hi = ws.w - hi_x, ty_lo = -lo_y, ty_hi = ws.h - hi_y;
      t = {tx_lo < tx_hi ? uniform(rng, tx_lo, tx_hi) : 0.0, ty_lo < ty_hi ? uniform(rng, ty_lo, ty_hi) : 0.0};
    }
    Configuration out = c;
    for (auto& e : out.entities) {
      Vec2 j{0.0, 0.0};
      if (cfg.jitter > 0.0) j = {uniform(rng, -cfg.jitter, cfg.jitter), uniform(rng, -cfg.jitter, cfg.jitter)};
      e.center = e.center + t + j;
    }
    if (inside_workspace(out.entities, ws)) return out;
  }
  return c;
}

ConceptDataset build_dataset(ConceptKind kind, std::size_t count, const RelationGeometry& geom, std::uint64_t seed,
                             const DatasetOptions& opts) {
  if (count < 1) throw ConfigError("build_dataset: count must be >= 1");
  if (is_shape(kind) && (opts.min_members < 3 || opts.min_members > opts.max_members)) {
    throw ConfigError("build_dataset: invalid member range");
  }
  ConceptDataset d;
  d.kind = kind;
  d.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> members(opts.min_members, opts.max_members);
  d.positives.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = is_binary(kind) ? 2 : members(rng);
    d.positives.push_back(gen_positive(kind, n, geom, rng, opts.sizes));
  }
  return d;
}

Configuration scatter(const Configuration& c, std::mt19937_64& rng, const Workspace& ws) {
  Configuration out = c;
  const std::size_t movable = is_binary(c.kind) ? 1 : out.entities.size();
  for (std::size_t i = 0; i < movable; ++i) {
    Entity& e = out.entities[i];
    e.center = random_center_for(e.size, rng, ws);
    if (e.theta) e.theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
  }
  return out;
}

nlohmann::json dataset_to_json(const ConceptDataset& d) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& c : d.positives) {
    Scene s;
    s.entities = c.entities;
    configs.push_back(scene_to_json(s));
  }
  return {{"concept", std::string(concept_name(d.kind))}, {"seed", d.seed}, {"configurations", configs}};
}

}  // namespace rearrange
