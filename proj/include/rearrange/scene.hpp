#pragma once

// Object-centric scene state. Coordinates live in a normalized workspace
// (unit square by default). Overhead frame: +x right, +y behind (away from
// the viewer), -y in front.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rearrange {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

double norm(Vec2 v);

// (top-left, bottom-right) corners; top-left is the minimum corner.
struct Box {
  Vec2 tl;
  Vec2 br;

  double width() const { return br.x - tl.x; }
  double height() const { return br.y - tl.y; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (tl.x + br.x), 0.5 * (tl.y + br.y)}; }
  Vec2 size() const { return {width(), height()}; }

  static Box from_center_size(Vec2 center, Vec2 size);
  friend bool operator==(const Box&, const Box&) = default;
};

struct ZExtent {
  double min = 0.0;
  double max = 0.0;
  double height() const { return max - min; }
  double center() const { return 0.5 * (min + max); }
  friend bool operator==(const ZExtent&, const ZExtent&) = default;
};

struct Entity {
  std::string id;
  std::string name;
  std::string color;
  Vec2 center;
  Vec2 size;
  std::optional<ZExtent> z;
  std::optional<double> theta;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct Workspace {
  double w = 1.0;
  double h = 1.0;
  bool contains(Vec2 p) const { return p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h; }
  bool contains(const Box& b) const { return contains(b.tl) && contains(b.br); }
  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct Scene {
  std::vector<Entity> entities;
  Workspace workspace;
  std::uint64_t rng_seed = 0;

  const Entity* find(std::string_view id) const;
  Entity* find(std::string_view id);
  const Entity& at(std::string_view id) const;
  std::vector<std::string> ids() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

Box corners(const Entity& e);
double iou(const Box& a, const Box& b);
// True when inner lies entirely within outer (boundaries inclusive).
bool contains(const Box& outer, const Box& inner);

// Throws ValidationError on a broken invariant.
void validate(const Entity& e);
void validate(const Scene& s);

nlohmann::json entity_to_json(const Entity& e);
Entity entity_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);

std::string save_scene(const Scene& s);
// ParseError on malformed JSON; ValidationError on missing fields or broken
// invariants.
Scene load_scene(std::string_view bytes);

}  // namespace rearrange
