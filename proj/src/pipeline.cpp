#include "rearrange/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "rearrange/checkpoint.hpp"
#include "rearrange/errors.hpp"

namespace rearrange {

namespace {

// splitmix64 finalizer over a combined pair.
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t tag(ConceptKind k) { return static_cast<std::uint64_t>(k); }

}  // namespace

ConceptDataset dataset_for(ConceptKind kind, const RunConfig& cfg) {
  DatasetOptions opts;
  opts.min_members = cfg.bench.min_members;
  opts.max_members = cfg.bench.max_members;
  return build_dataset(kind, cfg.dataset_size, cfg.geom, mix(cfg.seed, 100 + tag(kind)), opts);
}

TrainResult train_from_config(ConceptKind kind, const RunConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  TrainConfig t = cfg.train;
  t.seed = mix(cfg.seed, 200 + tag(kind));
  return train_concept(kind, dataset_for(kind, cfg), t, on_step);
}

std::set<ConceptKind> concepts_of(const EnergyExpression& expr) {
  std::set<ConceptKind> out;
  for (const EnergyTerm& t : expr.terms) out.insert(t.kind);
  return out;
}

ConceptLibrary load_library(const std::filesystem::path& dir, const std::set<ConceptKind>& kinds) {
  ConceptLibrary lib;
  for (ConceptKind k : kinds) {
    EBMParams p = read_checkpoint(checkpoint_path(dir, k));
    if (p.kind != k) throw CheckpointError(checkpoint_path(dir, k).string() + " holds '" + std::string(concept_name(p.kind)) + "'");
    lib.emplace(k, std::move(p));
  }
  return lib;
}

PlanOutcome plan_program(const Scene& scene, const Program& program, const Grounder& grounder,
                         const LibrarySource& library, const RunConfig& cfg, std::uint64_t seed,
                         bool record_trajectory) {
  PlanOutcome out;
  out.program = program;
  out.groundings = ground_program(program, scene, grounder);
  out.expr = compile(program, out.groundings);
  // Canonical term order, so the plan depends on the goal set and not on
  // the order the instruction lists it in.
  std::sort(out.expr.terms.begin(), out.expr.terms.end());
  const ConceptLibrary lib = library(concepts_of(out.expr));
  out.mask = select_anchors(out.expr);
  SamplerConfig sc = cfg.infer;
  sc.seed = seed;
  PlanOptions opts = cfg.plan;
  opts.record_trajectory = record_trajectory;
  out.layout = plan_goal(scene, out.expr, lib, out.mask, sc, opts);
  return out;
}

std::string_view mode_name(ExecMode m) {
  switch (m) {
    case ExecMode::Oracle: return "oracle";
    case ExecMode::OpenLoop: return "open";
    case ExecMode::ClosedLoop: return "closed";
  }
  return "?";
}

PlanOutcome plan_episode(const Episode& ep, const ConceptLibrary& library, const RunConfig& cfg) {
  const LibrarySource source = [&](const std::set<ConceptKind>& kinds) {
    ConceptLibrary lib;
    for (ConceptKind k : kinds) {
      const auto it = library.find(k);
      if (it == library.end()) throw MissingAssetError("no trained parameters for '" + std::string(concept_name(k)) + "'");
      lib.emplace(k, it->second);
    }
    return lib;
  };
  return plan_program(ep.scene, ep.program, SymbolicGrounder(), source, cfg, mix(cfg.seed, 300 + ep.seed));
}

namespace {

ResultRow row_for(const Episode& ep, ExecMode mode) {
  ResultRow r;
  r.task = std::string(family_name(ep.family));
  r.split = std::string(split_name(ep.split));
  r.seed = ep.seed;
  r.mode = std::string(mode_name(mode));
  return r;
}

}  // namespace

EpisodeOutcome execute_episode(const Episode& ep, const PlanOutcome& plan, ExecMode mode, const RunConfig& cfg) {
  EpisodeOutcome out{row_for(ep, mode), ep.scene};
  ExecConfig ec = cfg.exec;
  ec.seed = mix(cfg.exec.seed, 400 + ep.seed);
  switch (mode) {
    case ExecMode::Oracle: {
      const auto r = open_loop_run(ep.scene, plan.layout, ExecConfig{});
      out.final_scene = r.final_scene;
      out.row.actions = r.log.actions.size();
      break;
    }
    case ExecMode::OpenLoop: {
      const auto r = open_loop_run(ep.scene, plan.layout, ec);
      out.final_scene = r.final_scene;
      out.row.actions = r.log.actions.size();
      break;
    }
    case ExecMode::ClosedLoop: {
      const auto r = closed_loop_run(ep.scene, plan.layout, ec);
      out.final_scene = r.final_scene;
      out.row.actions = r.log.actions.size();
      out.row.predicted_success = r.predicted_success;
      break;
    }
  }
  const Metrics m = score_episode(ep, out.final_scene, cfg.geom);
  out.row.tp = m.tp;
  out.row.tc = m.tc;
  out.row.oracle_success = m.tc;
  return out;
}

std::vector<EpisodeOutcome> run_episode(const Episode& ep, const ConceptLibrary& library, const RunConfig& cfg,
                                        std::span<const ExecMode> modes) {
  std::vector<EpisodeOutcome> out;
  try {
    const PlanOutcome plan = plan_episode(ep, library, cfg);
    for (ExecMode m : modes) out.push_back(execute_episode(ep, plan, m, cfg));
  } catch (const Error& e) {
    out.clear();
    const Metrics m = score_episode(ep, ep.scene, cfg.geom);
    for (ExecMode mode : modes) {
      EpisodeOutcome o{row_for(ep, mode), ep.scene};
      o.row.tp = m.tp;
      o.row.tc = m.tc;
      o.row.oracle_success = m.tc;
      o.row.error = e.what();
      out.push_back(std::move(o));
    }
  }
  return out;
}

GenerationStats generation_trials(ConceptKind kind, const EBMParams& params, int trials, const RunConfig& cfg,
                                  std::uint64_t seed) {
  GenerationStats st;
  ConceptLibrary lib;
  lib.emplace(kind, params);
  const std::size_t lo = cfg.bench.min_members, span = cfg.bench.max_members - cfg.bench.min_members + 1;
  double reward = 0.0, radius = 0.0, min_pair = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(t)));
    const std::size_t n = is_binary(kind) ? 2 : lo + static_cast<std::size_t>(t) % span;
    Configuration c = gen_positive(kind, n, cfg.geom, rng);
    Scene scene;
    EnergyTerm term{kind, {}};
    for (const Entity& e : c.entities) {
      scene.entities.push_back(e);
      term.ids.push_back(e.id);
    }
    const EnergyExpression expr{{term}};
    SamplerConfig sc = cfg.infer;
    sc.seed = mix(seed, 1000 + static_cast<std::uint64_t>(t));
    PlanOptions opts = cfg.plan;
    opts.init = PlanInit::Random;
    const GoalLayout layout = plan_goal(scene, expr, lib, select_anchors(expr), sc, opts);
    const Scene after = apply_layout(scene, layout);
    for (Entity& e : c.entities) e = after.at(e.id);

    if (is_binary(kind) || kind == ConceptKind::PoseCircle) {
      const bool ok = satisfies(c, cfg.geom);
      st.satisfied += ok ? 1 : 0;
      reward += ok ? 1.0 : 0.0;
    } else {
      std::vector<Vec2> pts;
      for (const Entity& e : c.entities) pts.push_back(e.center);
      const double r = shape_reward(kind, pts);
      reward += r;
      st.satisfied += r >= kShapeDoneReward ? 1 : 0;
      Vec2 centroid;
      for (Vec2 p : pts) centroid = centroid + (1.0 / static_cast<double>(pts.size())) * p;
      double mr = 0.0, mp = 1e9;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        mr += norm(pts[i] - centroid) / static_cast<double>(pts.size());
        for (std::size_t j = i + 1; j < pts.size(); ++j) mp = std::min(mp, norm(pts[i] - pts[j]));
      }
      radius += mr;
      min_pair += mp;
    }
    ++st.trials;
  }
  if (st.trials > 0) {
    st.mean_reward = reward / st.trials;
    st.mean_radius = radius / st.trials;
    st.mean_min_pair = min_pair / st.trials;
  }
  return st;
}

}  // namespace rearrange
