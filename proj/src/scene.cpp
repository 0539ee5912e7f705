#include "rearrange/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "rearrange/errors.hpp"

namespace rearrange {

using nlohmann::json;

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

Box Box::from_center_size(Vec2 center, Vec2 size) {
  const Vec2 half = 0.5 * size;
  return Box{center - half, center + half};
}

const Entity* Scene::find(std::string_view id) const {
  auto it = std::find_if(entities.begin(), entities.end(), [&](const Entity& e) { return e.id == id; });
  return it == entities.end() ? nullptr : &*it;
}

Entity* Scene::find(std::string_view id) {
  auto it = std::find_if(entities.begin(), entities.end(), [&](const Entity& e) { return e.id == id; });
  return it == entities.end() ? nullptr : &*it;
}

const Entity& Scene::at(std::string_view id) const {
  const Entity* e = find(id);
  if (!e) throw ValidationError("scene has no entity '" + std::string(id) + "'");
  return *e;
}

std::vector<std::string> Scene::ids() const {
  std::vector<std::string> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(e.id);
  return out;
}

Box corners(const Entity& e) { return Box::from_center_size(e.center, e.size); }

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.br.x, b.br.x) - std::max(a.tl.x, b.tl.x));
  const double iy = std::max(0.0, std::min(a.br.y, b.br.y) - std::max(a.tl.y, b.tl.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const Box& outer, const Box& inner) {
  return inner.tl.x >= outer.tl.x && inner.tl.y >= outer.tl.y && inner.br.x <= outer.br.x &&
         inner.br.y <= outer.br.y;
}

void validate(const Entity& e) {
  const std::string who = "entity '" + e.id + "'";
  if (e.id.empty()) throw ValidationError("entity with empty id");
  if (!(e.size.x > 0.0) || !(e.size.y > 0.0)) {
    throw ValidationError(who + ": size must be positive, got (" + std::to_string(e.size.x) + ", " +
                          std::to_string(e.size.y) + ")");
  }
  if (!std::isfinite(e.center.x) || !std::isfinite(e.center.y)) throw ValidationError(who + ": non-finite center");
  if (e.z && !(e.z->min < e.z->max)) throw ValidationError(who + ": z extent needs z_min < z_max");
  if (e.theta && !(*e.theta > -std::numbers::pi && *e.theta <= std::numbers::pi)) {
    throw ValidationError(who + ": theta must lie in (-pi, pi]");
  }
}

void validate(const Scene& s) {
  if (!(s.workspace.w > 0.0) || !(s.workspace.h > 0.0)) throw ValidationError("workspace must have positive extent");
  std::set<std::string> seen;
  for (const auto& e : s.entities) {
    validate(e);
    if (!seen.insert(e.id).second) throw ValidationError("duplicate entity id '" + e.id + "'");
  }
}

json entity_to_json(const Entity& e) {
  json j = {{"id", e.id},
            {"name", e.name},
            {"color", e.color},
            {"center", {e.center.x, e.center.y}},
            {"size", {e.size.x, e.size.y}}};
  if (e.z) j["z"] = {e.z->min, e.z->max};
  if (e.theta) j["theta"] = *e.theta;
  return j;
}

namespace {

const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(path + ": missing field '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  return j.get<double>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path + ": expected a string");
  return j.get<std::string>();
}

Vec2 pair(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(path + ": expected [x, y]");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

}  // namespace

Entity entity_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  Entity e;
  e.id = text(require(j, "id", path), path + ".id");
  const std::string where = path + " (id '" + e.id + "')";
  e.name = text(require(j, "name", where), where + ".name");
  e.color = j.contains("color") ? text(j["color"], where + ".color") : std::string{};
  e.center = pair(require(j, "center", where), where + ".center");
  e.size = pair(require(j, "size", where), where + ".size");
  if (j.contains("z")) {
    const Vec2 z = pair(j["z"], where + ".z");
    e.z = ZExtent{z.x, z.y};
  }
  if (j.contains("theta")) e.theta = number(j["theta"], where + ".theta");
  return e;
}

json scene_to_json(const Scene& s) {
  json entities = json::array();
  for (const auto& e : s.entities) entities.push_back(entity_to_json(e));
  return {{"workspace", {{"w", s.workspace.w}, {"h", s.workspace.h}}},
          {"entities", std::move(entities)},
          {"seed", s.rng_seed}};
}

Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scene: expected an object");
  Scene s;
  if (j.contains("workspace")) {
    const json& w = j["workspace"];
    s.workspace.w = number(require(w, "w", "workspace"), "workspace.w");
    s.workspace.h = number(require(w, "h", "workspace"), "workspace.h");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
    s.rng_seed = j["seed"].get<std::uint64_t>();
  }
  const json& list = require(j, "entities", "scene");
  if (!list.is_array()) throw ValidationError("entities: expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    s.entities.push_back(entity_from_json(list[i], "entities[" + std::to_string(i) + "]"));
  }
  validate(s);
  return s;
}

std::string save_scene(const Scene& s) { return scene_to_json(s).dump(2); }

Scene load_scene(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene JSON: ") + e.what());
  }
  return scene_from_json(j);
}

}  // namespace rearrange
