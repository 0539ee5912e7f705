#include "rearrange/bench.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "rearrange/errors.hpp"
#include "rearrange/parser.hpp"

namespace rearrange {

std::string_view family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::SpatialRelations: return "spatial-relations";
    case TaskFamily::CompOneStep: return "comp-one-step";
    case TaskFamily::CompGroup: return "comp-group";
    case TaskFamily::Shapes: return "shapes";
  }
  return "?";
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Seen: return "seen";
    case Split::UnseenColors: return "unseen-colors";
    case Split::UnseenObjects: return "unseen-objects";
  }
  return "?";
}

TaskFamily family_from_name(std::string_view name) {
  for (TaskFamily f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw ConfigError("unknown task family '" + std::string(name) + "'");
}

Split split_from_name(std::string_view name) {
  for (Split s : kAllSplits) {
    if (split_name(s) == name) return s;
  }
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

const std::vector<std::string>& SplitConfig::colors(Split s) const {
  return s == Split::UnseenColors ? unseen_colors : seen_colors;
}

const std::vector<std::string>& SplitConfig::objects(Split s) const {
  return s == Split::UnseenObjects ? unseen_objects : seen_objects;
}

void SplitConfig::validate() const {
  auto disjoint = [](const std::vector<std::string>& a, const std::vector<std::string>& b, const char* what) {
    for (const auto& x : a) {
      if (std::find(b.begin(), b.end(), x) != b.end()) {
        throw ConfigError(std::string(what) + " '" + x + "' is both seen and unseen");
      }
    }
  };
  disjoint(seen_colors, unseen_colors, "color");
  disjoint(seen_objects, unseen_objects, "object");
  if (seen_colors.empty() || unseen_colors.empty() || seen_objects.empty() || unseen_objects.empty()) {
    throw ConfigError("split vocabularies must be non-empty");
  }
}

void BenchConfig::validate() const {
  geom.validate();
  splits.validate();
  if (min_distractors < 0 || max_distractors < min_distractors) throw ConfigError("bad distractor range");
  if (clearance < 0.0) throw ConfigError("clearance must be >= 0");
  if (intersection_samples < 1) throw ConfigError("intersection_samples must be >= 1");
  if (min_members < 3 || max_members < min_members) throw ConfigError("shape members must be >= 3");
  if (episode_attempts < 1) throw ConfigError("episode_attempts must be >= 1");
}

namespace {

constexpr std::array<ConceptKind, 4> kDirections = {ConceptKind::LeftOf, ConceptKind::RightOf,
                                                     ConceptKind::InFrontOf, ConceptKind::Behind};

// Thrown inside an attempt; the attempt loop retries.
struct Reject {};

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool clear_of(const Box& a, const Box& b, double clearance) {
  return a.br.x + clearance <= b.tl.x || b.br.x + clearance <= a.tl.x || a.br.y + clearance <= b.tl.y ||
         b.br.y + clearance <= a.tl.y;
}

Vec2 random_center(Vec2 size, const Workspace& ws, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.5 * size.x, ws.w - 0.5 * size.x);
  std::uniform_real_distribution<double> uy(0.5 * size.y, ws.h - 0.5 * size.y);
  const double x = ux(rng);
  return {x, uy(rng)};
}

// Uniform non-overlapping placement; accept() may veto a candidate.
template <class Accept>
Vec2 place_clear(Vec2 size, const std::vector<Box>& taken, const BenchConfig& cfg, const Workspace& ws,
                 std::mt19937_64& rng, Accept accept) {
  for (int t = 0; t < kRejectionBudget; ++t) {
    const Vec2 c = random_center(size, ws, rng);
    const Box b = Box::from_center_size(c, size);
    if (!std::all_of(taken.begin(), taken.end(), [&](const Box& o) { return clear_of(b, o, cfg.clearance); })) continue;
    if (accept(b)) return c;
  }
  throw Reject{};
}

Vec2 place_clear(Vec2 size, const std::vector<Box>& taken, const BenchConfig& cfg, const Workspace& ws,
                 std::mt19937_64& rng) {
  return place_clear(size, taken, cfg, ws, rng, [](const Box&) { return true; });
}

// A center for `size` satisfying rel against ref under geometry g.
Vec2 place_related(ConceptKind rel, const Box& ref, Vec2 size, const RelationGeometry& g, const Workspace& ws,
                   std::mt19937_64& rng) {
  for (int t = 0; t < 20 * kRejectionBudget; ++t) {
    const Vec2 c = random_center(size, ws, rng);
    if (relation_satisfied(rel, Box::from_center_size(c, size), ref, g)) return c;
  }
  throw Reject{};
}

// A referent center such that an existing subject box satisfies rel to it.
Vec2 place_referent_for(ConceptKind rel, const Box& subject, Vec2 size, const RelationGeometry& g, const Workspace& ws,
                        std::mt19937_64& rng) {
  for (int t = 0; t < 20 * kRejectionBudget; ++t) {
    const Vec2 c = random_center(size, ws, rng);
    if (relation_satisfied(rel, subject, Box::from_center_size(c, size), g)) return c;
  }
  throw Reject{};
}

// Regions shrunk by the data slack so constructed goals hold with margin.
RelationGeometry inner(const RelationGeometry& g) {
  RelationGeometry out = g;
  out.offset_min += kRegionSlack;
  out.offset_max -= kRegionSlack;
  out.band -= kRegionSlack;
  return out;
}

struct Layout {
  std::vector<Vec2> sizes;
  std::vector<double> heights;
  std::vector<Vec2> centers;
  std::vector<EnergyTerm> goal;        // ids are "e<index>"
  std::vector<std::size_t> subjects;   // movable target entities
  std::vector<std::size_t> members;    // shapes only
  std::size_t targets = 0;             // entities [0, targets) are referred to
};

std::string eid(std::size_t i) { return "e" + std::to_string(i); }

std::size_t index_of(const std::string& id) { return static_cast<std::size_t>(std::stoul(id.substr(1))); }

Vec2 draw_size(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const double s = u(rng);
  return {s, s};
}

std::vector<Box> boxes_of(const Layout& l, std::size_t count) {
  std::vector<Box> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(Box::from_center_size(l.centers[i], l.sizes[i]));
  return out;
}

void add_entity(Layout& l, Vec2 size, std::mt19937_64& rng, const SizeRanges& sr) {
  l.sizes.push_back(size);
  l.heights.push_back(std::uniform_real_distribution<double>(sr.height_min, sr.height_max)(rng));
  l.centers.push_back({});
}

bool any_satisfied(const Layout& l, const std::vector<Box>& boxes, const RelationGeometry& g) {
  for (const EnergyTerm& t : l.goal) {
    if (relation_satisfied(t.kind, boxes[index_of(t.ids[0])], boxes[index_of(t.ids[1])], g)) return true;
  }
  return false;
}

void add_distractors(Layout& l, const BenchConfig& cfg, const Workspace& ws, std::mt19937_64& rng) {
  const int n = std::uniform_int_distribution<int>(cfg.min_distractors, cfg.max_distractors)(rng);
  for (int i = 0; i < n; ++i) {
    add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);
    const std::size_t k = l.centers.size() - 1;
    l.centers[k] = place_clear(l.sizes[k], boxes_of(l, k), cfg, ws, rng);
  }
}

Layout spatial_layout(const BenchConfig& cfg, const Workspace& ws, std::mt19937_64& rng) {
  Layout l;
  const ConceptKind rel = kDirections[uniform_index(rng, kDirections.size())];
  add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);  // subject
  add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);  // referent
  l.targets = 2;
  l.subjects = {0};
  l.goal = {{rel, {eid(0), eid(1)}}};
  l.centers[1] = random_center(l.sizes[1], ws, rng);
  // The goal region must hold room for the subject.
  std::vector<std::pair<ConceptKind, Box>> cons = {{rel, Box::from_center_size(l.centers[1], l.sizes[1])}};
  if (intersection_hits(cons, l.sizes[0], ws, inner(cfg.geom), cfg.intersection_samples, rng) == 0) throw Reject{};
  l.centers[0] = place_clear(l.sizes[0], {cons[0].second}, cfg, ws, rng,
                             [&](const Box& b) { return !relation_satisfied(rel, b, cons[0].second, cfg.geom); });
  add_distractors(l, cfg, ws, rng);
  return l;
}

Layout one_step_layout(const BenchConfig& cfg, const Workspace& ws, std::mt19937_64& rng) {
  Layout l;
  const std::size_t k = 2 + uniform_index(rng, 2);
  std::vector<ConceptKind> rels(kDirections.begin(), kDirections.end());
  std::shuffle(rels.begin(), rels.end(), rng);
  rels.resize(k);
  for (std::size_t i = 0; i <= k; ++i) {
    add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);
  }
  l.targets = k + 1;
  l.subjects = {0};
  // Goal pose of the subject first, referents around it.
  const Vec2 goal = random_center(l.sizes[0], ws, rng);
  const Box goal_box = Box::from_center_size(goal, l.sizes[0]);
  const RelationGeometry g = inner(cfg.geom);
  std::vector<std::pair<ConceptKind, Box>> cons;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = i + 1;
    l.centers[r] = place_referent_for(rels[i], goal_box, l.sizes[r], g, ws, rng);
    const Box rb = Box::from_center_size(l.centers[r], l.sizes[r]);
    for (std::size_t j = 1; j < r; ++j) {
      if (!clear_of(rb, Box::from_center_size(l.centers[j], l.sizes[j]), cfg.clearance)) throw Reject{};
    }
    l.goal.push_back({rels[i], {eid(0), eid(r)}});
    cons.emplace_back(rels[i], rb);
  }
  if (intersection_hits(cons, l.sizes[0], ws, cfg.geom, cfg.intersection_samples, rng) == 0) throw Reject{};
  std::vector<Box> refs = boxes_of(l, k + 1);
  refs.erase(refs.begin());
  l.centers[0] = place_clear(l.sizes[0], refs, cfg, ws, rng, [&](const Box& b) {
    for (std::size_t i = 0; i < k; ++i) {
      if (relation_satisfied(rels[i], b, refs[i], cfg.geom)) return false;
    }
    return true;
  });
  add_distractors(l, cfg, ws, rng);
  return l;
}

// Goals form a forest: each subject relates to a fixed entity or to an
// earlier subject, so the goal poses can be built root first.
Layout group_layout(const BenchConfig& cfg, const Workspace& ws, std::mt19937_64& rng) {
  Layout l;
  const std::size_t k = 2 + uniform_index(rng, 2);
  std::vector<std::size_t> subjects, fixed;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (subject, referent)
  std::vector<ConceptKind> rels;
  for (std::size_t i = 0; i < k; ++i) {
    add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);
    const std::size_t s = l.sizes.size() - 1;
    std::size_t r;
    if (subjects.empty() || std::bernoulli_distribution(0.5)(rng)) {
      add_entity(l, draw_size(rng, cfg.sizes.object_min, cfg.sizes.object_max), rng, cfg.sizes);
      r = l.sizes.size() - 1;
      fixed.push_back(r);
    } else {
      r = subjects[uniform_index(rng, subjects.size())];
    }
    subjects.push_back(s);
    edges.emplace_back(s, r);
    rels.push_back(kDirections[uniform_index(rng, kDirections.size())]);
  }
  l.targets = l.sizes.size();
  l.subjects = subjects;

  // Fixed entities where they will stay, then goal poses in creation order.
  std::vector<Vec2> goal(l.targets);
  std::vector<Box> fixed_boxes;
  for (std::size_t f : fixed) {
    goal[f] = place_clear(l.sizes[f], fixed_boxes, cfg, ws, rng);
    fixed_boxes.push_back(Box::from_center_size(goal[f], l.sizes[f]));
    l.centers[f] = goal[f];
  }
  const RelationGeometry g = inner(cfg.geom);
  for (std::size_t i = 0; i < k; ++i) {
    const auto [s, r] = edges[i];
    goal[s] = place_related(rels[i], Box::from_center_size(goal[r], l.sizes[r]), l.sizes[s], g, ws, rng);
    l.goal.push_back({rels[i], {eid(s), eid(r)}});
  }
  // Initial poses of the subjects: clear of everything, no goal already met.
  std::vector<Box> taken = fixed_boxes;
  for (std::size_t s : subjects) {
    l.centers[s] = place_clear(l.sizes[s], taken, cfg, ws, rng);
    taken.push_back(Box::from_center_size(l.centers[s], l.sizes[s]));
  }
  if (any_satisfied(l, boxes_of(l, l.targets), cfg.geom)) throw Reject{};
  add_distractors(l, cfg, ws, rng);
  return l;
}

Layout shape_layout(ConceptKind shape, const BenchConfig& cfg, const Workspace& ws, std::mt19937_64& rng) {
  Layout l;
  const std::size_t n = cfg.min_members + uniform_index(rng, cfg.max_members - cfg.min_members + 1);
  for (std::size_t i = 0; i < n; ++i) {
    add_entity(l, draw_size(rng, cfg.sizes.shape_member_min, cfg.sizes.shape_member_max), rng, cfg.sizes);
    l.centers[i] = place_clear(l.sizes[i], boxes_of(l, i), cfg, ws, rng);
    l.members.push_back(i);
  }
  l.targets = n;
  l.subjects = l.members;
  EnergyTerm t{shape, {}};
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < n; ++i) {
    t.ids.push_back(eid(i));
    pts.push_back(l.centers[i]);
  }
  if (shape_reward(shape, pts) >= kShapeDoneReward) throw Reject{};
  l.goal = {t};
  add_distractors(l, cfg, ws, rng);
  return l;
}

// Phrase variants; the attribute stream picks among them.
std::string relation_text(ConceptKind rel, std::mt19937_64& rng) {
  static const std::map<ConceptKind, std::vector<std::string>> variants = {
      {ConceptKind::LeftOf, {"to the left of", "left of"}},
      {ConceptKind::RightOf, {"to the right of", "right of"}},
      {ConceptKind::InFrontOf, {"in front of", "below"}},
      {ConceptKind::Behind, {"behind", "above"}},
  };
  const auto& v = variants.at(rel);
  return v[uniform_index(rng, v.size())];
}

struct Attr {
  std::string name;
  std::string color;
};

}  // namespace

int intersection_hits(std::span<const std::pair<ConceptKind, Box>> constraints, Vec2 subject_size,
                      const Workspace& ws, const RelationGeometry& geom, int samples, std::mt19937_64& rng) {
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    const Box b = Box::from_center_size(random_center(subject_size, ws, rng), subject_size);
    bool ok = true;
    for (const auto& [rel, ref] : constraints) {
      if (!relation_satisfied(rel, b, ref, geom)) {
        ok = false;
        break;
      }
    }
    hits += ok ? 1 : 0;
  }
  return hits;
}

Episode gen_episode(TaskFamily family, Split split, std::uint64_t seed, const BenchConfig& cfg) {
  cfg.validate();
  const Workspace ws;
  std::mt19937_64 geo(seed);
  std::mt19937_64 attr(seed ^ 0xa77b1b07e5ULL);

  Layout l;
  bool built = false;
  for (int a = 0; a < cfg.episode_attempts && !built; ++a) {
    try {
      switch (family) {
        case TaskFamily::SpatialRelations: l = spatial_layout(cfg, ws, geo); break;
        case TaskFamily::CompOneStep: l = one_step_layout(cfg, ws, geo); break;
        case TaskFamily::CompGroup: l = group_layout(cfg, ws, geo); break;
        case TaskFamily::Shapes:
          l = shape_layout(std::bernoulli_distribution(0.5)(geo) ? ConceptKind::Circle : ConceptKind::Line, cfg, ws,
                           geo);
          break;
      }
      built = true;
    } catch (const Reject&) {
    }
  }
  if (!built) {
    throw GenerationError(std::string(family_name(family)) + " episode " + std::to_string(seed) + ": no valid layout in " +
                          std::to_string(cfg.episode_attempts) + " attempts");
  }

  // Attributes: every distinct phrase gets its own (color, noun) pair; shape
  // members share one.
  const auto& colors = cfg.splits.colors(split);
  const auto& objects = cfg.splits.objects(split);
  std::vector<Attr> combos;
  for (const auto& o : objects) {
    for (const auto& c : colors) combos.push_back({o, c});
  }
  std::shuffle(combos.begin(), combos.end(), attr);
  const std::size_t n = l.sizes.size();
  std::vector<Attr> attrs(n);
  std::size_t next = 0;
  auto take = [&]() {
    if (next >= combos.size()) throw GenerationError("split vocabulary too small for " + std::to_string(n) + " entities");
    return combos[next++];
  };
  if (!l.members.empty()) {
    const Attr shared = take();
    for (std::size_t m : l.members) attrs[m] = shared;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::find(l.members.begin(), l.members.end(), i) == l.members.end()) attrs[i] = take();
  }

  Episode ep;
  ep.family = family;
  ep.split = split;
  ep.seed = seed;
  ep.goal = l.goal;
  ep.scene.workspace = ws;
  ep.scene.rng_seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    Entity e;
    e.id = eid(i);
    e.name = attrs[i].name;
    e.color = attrs[i].color;
    e.center = l.centers[i];
    e.size = l.sizes[i];
    e.z = ZExtent{0.0, l.heights[i]};
    ep.scene.entities.push_back(e);
  }

  auto filter = [&](std::size_t i) { return FilterNode{attrs[i].name, attrs[i].color, Quantifier::One}; };
  auto phrase = [&](std::size_t i, bool referent) {
    const bool bare = referent && std::bernoulli_distribution(0.1)(attr);
    return std::string(bare ? "" : "the ") + attrs[i].color + " " + attrs[i].name;
  };

  std::string text;
  if (family == TaskFamily::Shapes) {
    const EnergyTerm& t = l.goal[0];
    FilterNode members{attrs[l.members[0]].name, attrs[l.members[0]].color, Quantifier::All};
    ep.program.goals.push_back(MultiAryNode{t.kind, members, std::nullopt});
    ep.annotation[members] = t.ids;
    static const std::vector<std::string> verbs = {"rearrange", "arrange", "put"};
    text = verbs[uniform_index(attr, verbs.size())] + " all " + members.color.value() + " " + plural(members.noun) +
           " in a " + std::string(concept_name(t.kind));
  } else {
    std::vector<std::size_t> order(l.goal.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (family == TaskFamily::CompGroup) std::shuffle(order.begin(), order.end(), attr);
    std::vector<std::string> clauses;
    for (std::size_t gi : order) {
      const EnergyTerm& t = l.goal[gi];
      const std::size_t s = index_of(t.ids[0]), r = index_of(t.ids[1]);
      ep.program.goals.push_back(BinaryNode{t.kind, filter(s), filter(r)});
      ep.annotation[filter(s)] = {t.ids[0]};
      ep.annotation[filter(r)] = {t.ids[1]};
      const std::string rel = relation_text(t.kind, attr) + " " + phrase(r, true);
      if (family == TaskFamily::CompOneStep && !clauses.empty()) {
        clauses.push_back(rel);
      } else {
        clauses.push_back("put " + phrase(s, false) + " " + rel);
      }
    }
    ep.goal.clear();
    for (std::size_t gi : order) ep.goal.push_back(l.goal[gi]);
    for (std::size_t i = 0; i < clauses.size(); ++i) {
      if (i > 0) {
        const bool last = i + 1 == clauses.size();
        if (!last) {
          text += ", ";
        } else {
          static const std::vector<std::string> joins = {", and ", " and ", ", "};
          text += joins[uniform_index(attr, clauses.size() == 2 ? 2 : 3)];
        }
      }
      text += clauses[i];
    }
  }
  if (std::bernoulli_distribution(0.5)(attr)) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  ep.instruction = text;
  if (parse(ep.instruction) != ep.program) {
    throw GenerationError("generated instruction does not parse to its program: " + ep.instruction);
  }
  return ep;
}

namespace {

nlohmann::json filter_json(const FilterNode& f) {
  nlohmann::json j = {{"noun", f.noun}, {"all", f.quantifier == Quantifier::All}};
  j["color"] = f.color ? nlohmann::json(*f.color) : nlohmann::json(nullptr);
  return j;
}

FilterNode filter_from(const nlohmann::json& j) {
  FilterNode f;
  f.noun = j.at("noun").get<std::string>();
  if (!j.at("color").is_null()) f.color = j.at("color").get<std::string>();
  f.quantifier = j.at("all").get<bool>() ? Quantifier::All : Quantifier::One;
  return f;
}

}  // namespace

nlohmann::json Episode::to_json() const {
  nlohmann::json j = scene_to_json(scene);
  j["family"] = family_name(family);
  j["split"] = split_name(split);
  j["seed"] = seed;
  j["instruction"] = instruction;
  j["program"] = to_sexpr(program);
  nlohmann::json constraints = nlohmann::json::array();
  for (const EnergyTerm& t : goal) constraints.push_back({{"concept", concept_name(t.kind)}, {"ids", t.ids}});
  nlohmann::json ann = nlohmann::json::array();
  for (const auto& [f, ids] : annotation) ann.push_back({{"filter", filter_json(f)}, {"ids", ids}});
  j["goal"] = {{"constraints", constraints}, {"annotation", ann}};
  return j;
}

Episode Episode::from_json(const nlohmann::json& j) {
  try {
    Episode ep;
    ep.scene = scene_from_json(j);
    ep.family = family_from_name(j.at("family").get<std::string>());
    ep.split = split_from_name(j.at("split").get<std::string>());
    ep.seed = j.at("seed").get<std::uint64_t>();
    ep.instruction = j.at("instruction").get<std::string>();
    ep.program = program_from_sexpr(j.at("program").get<std::string>());
    for (const auto& c : j.at("goal").at("constraints")) {
      const auto kind = concept_from_name(c.at("concept").get<std::string>());
      if (!kind) throw ValidationError("episode: unknown concept " + c.at("concept").dump());
      ep.goal.push_back({*kind, c.at("ids").get<std::vector<std::string>>()});
    }
    for (const auto& a : j.at("goal").at("annotation")) {
      ep.annotation[filter_from(a.at("filter"))] = a.at("ids").get<std::vector<std::string>>();
    }
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("episode: ") + e.what());
  }
}

Metrics score_episode(const Episode& ep, const Scene& final_scene, const RelationGeometry& geom) {
  Metrics m;
  for (const EnergyTerm& t : ep.goal) {
    double s;
    if (is_binary(t.kind)) {
      s = relation_satisfied(t.kind, final_scene.at(t.ids[0]), final_scene.at(t.ids[1]), geom) ? 1.0 : 0.0;
    } else {
      std::vector<Vec2> pts;
      for (const auto& id : t.ids) pts.push_back(final_scene.at(id).center);
      s = shape_reward(t.kind, pts);
      if (s >= kShapeDoneReward) s = 1.0;
    }
    m.constraint_scores.push_back(s);
  }
  double sum = 0.0;
  for (double s : m.constraint_scores) sum += s;
  m.tp = m.constraint_scores.empty() ? 1.0 : sum / static_cast<double>(m.constraint_scores.size());
  m.tc = std::all_of(m.constraint_scores.begin(), m.constraint_scores.end(), [](double s) { return s == 1.0; });
  return m;
}

DetectorScore detector_from_counts(int true_pos, int false_pos, int false_neg, int true_neg) {
  DetectorScore d{true_pos, false_pos, false_neg, true_neg};
  auto ratio = [](int num, int den) { return den == 0 ? 1.0 : static_cast<double>(num) / den; };
  d.precision = ratio(true_pos, true_pos + false_pos);
  d.recall = ratio(true_pos, true_pos + false_neg);
  d.accuracy = ratio(true_pos + true_neg, true_pos + false_pos + false_neg + true_neg);
  return d;
}

DetectorScore score_failure_detector(std::span<const bool> predicted_success, std::span<const bool> oracle_success) {
  if (predicted_success.size() != oracle_success.size()) {
    throw ContractViolation("failure detector: " + std::to_string(predicted_success.size()) + " predictions vs " +
                            std::to_string(oracle_success.size()) + " outcomes");
  }
  int tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predicted_success.size(); ++i) {
    const bool pred_fail = !predicted_success[i], fail = !oracle_success[i];
    if (pred_fail && fail) ++tp;
    else if (pred_fail) ++fp;
    else if (fail) ++fn;
    else ++tn;
  }
  return detector_from_counts(tp, fp, fn, tn);
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::ostringstream os;
  os << "task,split,seed,mode,TP,TC,actions,predicted_success,oracle_success,error\n";
  for (const ResultRow& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    char tp[32];
    std::snprintf(tp, sizeof tp, "%.6f", r.tp);
    os << r.task << ',' << r.split << ',' << r.seed << ',' << r.mode << ',' << tp << ',' << (r.tc ? 1 : 0) << ','
       << r.actions << ',' << (r.predicted_success ? (*r.predicted_success ? "1" : "0") : "") << ','
       << (r.oracle_success ? 1 : 0) << ',' << err << '\n';
  }
  return os.str();
}

}  // namespace rearrange
