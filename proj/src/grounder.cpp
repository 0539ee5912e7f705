#include "rearrange/grounder.hpp"

#include <algorithm>
#include <cctype>

#include "rearrange/errors.hpp"
#include "rearrange/parser.hpp"

namespace rearrange {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

GroundingResult SymbolicGrounder::ground(const FilterNode& node, const Scene& scene) const {
  const std::string noun = singular(lower(node.noun));
  const std::string color = node.color ? lower(*node.color) : "";
  std::vector<const Entity*> hits;
  for (const Entity& e : scene.entities) {
    if (singular(lower(e.name)) != noun) continue;
    if (node.color && lower(e.color) != color) continue;
    hits.push_back(&e);
  }
  std::sort(hits.begin(), hits.end(), [](const Entity* a, const Entity* b) { return a->id < b->id; });
  if (hits.empty()) throw GroundingError("no entity matches '" + describe(node) + "'");
  if (node.quantifier == Quantifier::One && hits.size() > 1) {
    std::string list;
    for (const Entity* e : hits) list += (list.empty() ? "" : ", ") + e->id;
    throw AmbiguityError("'" + describe(node) + "' is ambiguous: candidates " + list);
  }
  GroundingResult r;
  for (const Entity* e : hits) {
    r.ids.push_back(e->id);
    r.boxes.push_back(corners(*e));
  }
  return r;
}

Groundings ground_program(const Program& p, const Scene& scene, const Grounder& grounder) {
  Groundings out;
  for (const FilterNode& f : filters_of(p)) out[f] = grounder.ground(f, scene).ids;
  return out;
}

}  // namespace rearrange
