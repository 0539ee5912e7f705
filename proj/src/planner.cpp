#include "rearrange/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rearrange/errors.hpp"

namespace rearrange {

using ad::Graph;
using ad::NumArray;
using ad::Var;

std::vector<std::string> EnergyExpression::entities() const {
  std::vector<std::string> out;
  for (const EnergyTerm& t : terms) {
    for (const std::string& id : t.ids) {
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
  }
  return out;
}

EnergyExpression compile(const Program& p, const Groundings& g) {
  validate(p);
  auto grounded = [&](const FilterNode& f) -> const std::vector<std::string>& {
    const auto it = g.find(f);
    if (it == g.end() || it->second.empty()) throw CompileError("no grounding for '" + describe(f) + "'");
    return it->second;
  };
  auto single = [&](const FilterNode& f, const char* role) {
    const auto& ids = grounded(f);
    if (ids.size() != 1) {
      throw CompileError(std::string(role) + " '" + describe(f) + "' must denote one entity, got " +
                         std::to_string(ids.size()));
    }
    return ids[0];
  };

  EnergyExpression expr;
  for (const Goal& goal : p.goals) {
    if (const auto* b = std::get_if<BinaryNode>(&goal)) {
      const std::string s = single(b->subject, "subject");
      const std::string r = single(b->referent, "referent");
      if (s == r) throw CompileError("'" + describe(b->subject) + "' is related to itself");
      expr.terms.push_back({b->relation, {s, r}});
      continue;
    }
    const auto& m = std::get<MultiAryNode>(goal);
    const auto& members = grounded(m.members);
    if (members.size() < 3) {
      throw CompileError("a " + std::string(concept_name(m.shape)) + " needs at least 3 members, '" +
                         describe(m.members) + "' has " + std::to_string(members.size()));
    }
    expr.terms.push_back({m.shape, members});
    if (m.constraint) {
      const std::string r = single(m.constraint->referent, "referent");
      for (const std::string& id : members) {
        if (id == r) throw CompileError("shape member '" + id + "' is also the constraint referent");
        expr.terms.push_back({m.constraint->relation, {id, r}});
      }
    }
  }
  return expr;
}

OptimizableMask select_anchors(const EnergyExpression& expr) {
  const auto ids = expr.entities();
  auto row = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::vector<char> movable(ids.size(), 0), needs_z(ids.size(), 0), needs_theta(ids.size(), 0);
  for (const EnergyTerm& t : expr.terms) {
    const Architecture a = architecture_of(t.kind);
    for (std::size_t k = 0; k < t.ids.size(); ++k) {
      const std::size_t r = row(t.ids[k]);
      if (!is_binary(t.kind) || k == 0) movable[r] = 1;
      if (a == Architecture::Binary3D) needs_z[r] = 1;
      if (a == Architecture::Pose) needs_theta[r] = 1;
    }
  }
  OptimizableMask m{NumArray({ids.size(), kPlanColumns}, 0.0)};
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!movable[r]) continue;
    m.movable[r * kPlanColumns + 0] = 1.0;
    m.movable[r * kPlanColumns + 1] = 1.0;
    m.movable[r * kPlanColumns + 2] = needs_z[r] ? 1.0 : 0.0;
    m.movable[r * kPlanColumns + 3] = needs_theta[r] ? 1.0 : 0.0;
  }
  if (!m.any()) throw PlanningError("every entity is fixed; nothing to optimize");
  return m;
}

NumArray scene_coordinates(const Scene& scene, const std::vector<std::string>& ids) {
  NumArray x({ids.size(), kPlanColumns}, 0.0);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const Entity* e = scene.find(ids[r]);
    if (!e) throw PlanningError("entity '" + ids[r] + "' is not in the scene");
    x[r * kPlanColumns + 0] = e->center.x;
    x[r * kPlanColumns + 1] = e->center.y;
    x[r * kPlanColumns + 2] = e->z ? e->z->center() : 0.0;
    x[r * kPlanColumns + 3] = e->theta.value_or(0.0);
  }
  return x;
}

CompiledEnergy::CompiledEnergy(const Scene& scene, EnergyExpression expr, const ConceptLibrary& library)
    : expr_(std::move(expr)), ids_(expr_.entities()) {
  for (const EnergyTerm& t : expr_.terms) {
    const auto it = library.find(t.kind);
    if (it == library.end()) throw MissingAssetError("no trained parameters for '" + std::string(concept_name(t.kind)) + "'");
    params_.push_back(&it->second);

    std::vector<std::size_t> rows;
    for (const std::string& id : t.ids) {
      rows.push_back(static_cast<std::size_t>(std::find(ids_.begin(), ids_.end(), id) - ids_.begin()));
    }
    const std::size_t n = rows.size();
    NumArray sizes;
    switch (architecture_of(t.kind)) {
      case Architecture::Binary2D: {
        sizes = NumArray({1, 4});
        for (std::size_t k = 0; k < 2; ++k) {
          const Entity& e = scene.at(t.ids[k]);
          sizes[2 * k] = e.size.x;
          sizes[2 * k + 1] = e.size.y;
        }
        break;
      }
      case Architecture::Binary3D: {
        sizes = NumArray({1, 6});
        for (std::size_t k = 0; k < 2; ++k) {
          const Entity& e = scene.at(t.ids[k]);
          if (!e.z) throw PlanningError("entity '" + e.id + "' has no z extent for '" + std::string(concept_name(t.kind)) + "'");
          sizes[3 * k] = e.size.x;
          sizes[3 * k + 1] = e.size.y;
          sizes[3 * k + 2] = e.z->height();
        }
        break;
      }
      case Architecture::MultiAry:
      case Architecture::Pose:
        sizes = NumArray({1, n, 2});
        break;
    }
    rows_.push_back(std::move(rows));
    sizes_.push_back(std::move(sizes));
  }
}

Var CompiledEnergy::build(Graph& g, Var coords, std::vector<Var>* per_term) const {
  Var total;
  for (std::size_t t = 0; t < expr_.terms.size(); ++t) {
    const ConceptKind kind = expr_.terms[t].kind;
    const std::size_t n = rows_[t].size();
    const Var rows = g.gather_rows(coords, rows_[t]);
    Var packed;
    switch (architecture_of(kind)) {
      case Architecture::Binary2D: packed = g.reshape(g.slice(rows, 0, 2), {1, 4}); break;
      case Architecture::Binary3D: packed = g.reshape(g.slice(rows, 0, 3), {1, 6}); break;
      case Architecture::MultiAry: packed = g.reshape(g.slice(rows, 0, 2), {1, n, 2}); break;
      case Architecture::Pose:
        packed = g.reshape(g.concat({g.slice(rows, 0, 2), g.slice(rows, 3, 1)}), {1, n, 3});
        break;
    }
    const ParamVars pv = bind_params(g, *params_[t], false);
    const Var e = g.sum_all(concept_energy(g, kind, pv, packed, g.constant(sizes_[t])));
    if (per_term) per_term->push_back(e);
    total = total.valid() ? g.add(total, e) : e;
  }
  return total;
}

EnergyEval CompiledEnergy::operator()(const NumArray& coords) const {
  Graph g;
  const Var x = g.leaf(coords, true);
  const Var e = build(g, x, nullptr);
  auto grads = g.backprop(e, {x});
  return {e.value().item(), std::move(grads[0])};
}

double CompiledEnergy::value(const NumArray& coords) const {
  Graph g;
  return build(g, g.constant(coords), nullptr).value().item();
}

std::vector<double> CompiledEnergy::term_values(const NumArray& coords) const {
  Graph g;
  std::vector<Var> parts;
  build(g, g.constant(coords), &parts);
  std::vector<double> out;
  for (Var v : parts) out.push_back(v.value().item());
  return out;
}

const LayoutEntry* GoalLayout::find(std::string_view id) const {
  for (const LayoutEntry& e : entries) {
    if (e.target.id == id) return &e;
  }
  return nullptr;
}

nlohmann::json GoalLayout::to_json() const {
  Scene s;
  s.workspace = workspace;
  for (const LayoutEntry& e : entries) s.entities.push_back(e.target);
  nlohmann::json j = scene_to_json(s);
  j.erase("rng_seed");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    j["entities"][i]["moved"] = entries[i].moved;
    j["entities"][i]["displacement"] = entries[i].displacement;
  }
  j["energy"] = energy;
  j["initial_energy"] = initial_energy;
  return j;
}

namespace {

double wrap_angle(double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  t = std::fmod(t + std::numbers::pi, two_pi);
  if (t < 0.0) t += two_pi;
  return t - std::numbers::pi;
}

// Center range that keeps a box of this extent inside [0, limit].
double keep_inside(double c, double extent, double limit) {
  const double lo = 0.5 * extent, hi = limit - 0.5 * extent;
  if (lo > hi) return 0.5 * limit;
  return std::clamp(c, lo, hi);
}

}  // namespace

GoalLayout plan_layout(const Scene& scene, const std::vector<std::string>& ids, const OptimizableMask& mask,
                       const EnergyFunction& energy, SamplerConfig cfg, const PlanOptions& opts) {
  const NumArray start = scene_coordinates(scene, ids);
  if (mask.movable.shape() != start.shape()) {
    throw ShapeError("plan mask " + ad::shape_string(mask.movable.shape()) + " does not match coordinates " +
                     ad::shape_string(start.shape()));
  }
  if (cfg.clamp) cfg.clamp = scene.workspace;
  const Workspace& ws = scene.workspace;
  auto movable = [&](std::size_t r, std::size_t c) { return mask.movable[r * kPlanColumns + c] != 0.0; };

  NumArray x0 = start;
  if (opts.init == PlanInit::Random) {
    std::mt19937_64 rng(cfg.seed ^ 0x5deece66dULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const Entity& e = scene.at(ids[r]);
      if (movable(r, 0)) x0[r * kPlanColumns + 0] = keep_inside(u(rng) * ws.w, e.size.x, ws.w);
      if (movable(r, 1)) x0[r * kPlanColumns + 1] = keep_inside(u(rng) * ws.h, e.size.y, ws.h);
      if (movable(r, 3)) x0[r * kPlanColumns + 3] = (2.0 * u(rng) - 1.0) * std::numbers::pi;
    }
  }

  Trajectory traj = sample(energy, x0, mask, cfg, opts.record_trajectory);
  NumArray x = traj.final_coords();

  GoalLayout out;
  out.workspace = ws;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const Entity& e = scene.at(ids[r]);
    LayoutEntry entry{e, false, 0.0};
    double* row = &x[r * kPlanColumns];
    if (movable(r, 0)) row[0] = keep_inside(row[0], e.size.x, ws.w);
    if (movable(r, 1)) row[1] = keep_inside(row[1], e.size.y, ws.h);
    if (movable(r, 0) || movable(r, 1)) entry.target.center = {row[0], row[1]};
    if (movable(r, 2) && e.z) {
      const double half = 0.5 * e.z->height();
      entry.target.z = ZExtent{row[2] - half, row[2] + half};
    }
    if (movable(r, 3)) {
      row[3] = wrap_angle(row[3]);
      entry.target.theta = row[3];
    }
    entry.displacement = norm(entry.target.center - e.center);
    entry.moved = entry.displacement > opts.move_threshold;
    out.entries.push_back(std::move(entry));
  }
  out.initial_energy = energy(start).energy;
  out.energy = energy(x).energy;
  if (opts.record_trajectory) out.trajectory = std::move(traj);
  return out;
}

GoalLayout plan_goal(const Scene& scene, const EnergyExpression& expr, const ConceptLibrary& library,
                     const OptimizableMask& mask, SamplerConfig cfg, const PlanOptions& opts) {
  const CompiledEnergy energy(scene, expr, library);
  return plan_layout(
      scene, energy.ids(), mask, [&](const NumArray& c) { return energy(c); }, cfg, opts);
}

std::size_t action_count(const GoalLayout& layout) {
  return static_cast<std::size_t>(
      std::count_if(layout.entries.begin(), layout.entries.end(), [](const LayoutEntry& e) { return e.moved; }));
}

Scene apply_layout(const Scene& scene, const GoalLayout& layout) {
  Scene out = scene;
  for (const LayoutEntry& e : layout.entries) {
    Entity* target = out.find(e.target.id);
    if (!target) throw PlanningError("layout entity '" + e.target.id + "' is not in the scene");
    *target = e.target;
  }
  return out;
}

}  // namespace rearrange
