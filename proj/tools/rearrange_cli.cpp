// rearrange: train concepts, plan from instructions, run the benchmark and
// render energy landscapes.
//
// Exit codes: 0 ok, 1 usage or I/O, 2 parse, 3 grounding, 4 compile,
// 5 missing asset, 6 training abort.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rearrange/autodiff.hpp"
#include "rearrange/checkpoint.hpp"
#include "rearrange/errors.hpp"
#include "rearrange/landscape.hpp"
#include "rearrange/parser.hpp"
#include "rearrange/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rearrange;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;

  RunConfig load() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value run config")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "overrides the config seed");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spill(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
  if (!out) throw ConfigError("cannot write " + p.string());
}

// Comment block echoing the config, one "# key = value" line each.
std::string commented(const RunConfig& cfg) {
  std::istringstream in(to_text(cfg));
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty()) out += "# " + line + "\n";
  }
  return out;
}

Scene read_scene(const fs::path& p) {
  try {
    return load_scene(slurp(p));
  } catch (const Error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

ConceptLibrary load_all(const fs::path& dir, const std::set<ConceptKind>& kinds) { return load_library(dir, kinds); }

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const GroundingError*>(&e)) return 3;
  if (dynamic_cast<const CompileError*>(&e)) return 4;
  if (dynamic_cast<const MissingAssetError*>(&e) || dynamic_cast<const CheckpointError*>(&e)) return 5;
  if (dynamic_cast<const TrainingAbort*>(&e)) return 6;
  return 1;
}

// ---- train

struct TrainArgs {
  Common common;
  std::string concept_name;
  std::string out = "checkpoints";
  std::optional<std::size_t> steps;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = a.common.load();
  if (a.steps) cfg.train.steps = *a.steps;
  const auto kind = concept_from_name(a.concept_name);
  if (!kind) throw ConfigError("unknown concept '" + a.concept_name + "'");

  const fs::path ckpt = checkpoint_path(a.out, *kind);
  const fs::path report_path = fs::path(ckpt).replace_extension(".report.jsonl");
  fs::create_directories(a.out);
  std::ofstream report(report_path);
  report << nlohmann::json{{"config", to_json(cfg)}, {"concept", concept_name(*kind)}}.dump() << "\n";

  const auto progress = [&](const StepStats& s) {
    if (!a.quiet && (s.step % 100 == 0 || s.step + 1 == cfg.train.steps)) {
      std::fprintf(stderr, "step %zu  e+ %.4f  e- %.4f  loss %.4f  %.1fs\n", s.step, s.e_pos, s.e_neg, s.cd + s.kl + s.l2,
                   s.seconds);
    }
  };
  try {
    const TrainResult r = train_from_config(*kind, cfg, progress);
    r.report.write_jsonl(report);
    write_checkpoint(ckpt, r.params);
    std::printf("%s: %zu steps in %.1fs -> %s\n", std::string(concept_name(*kind)).c_str(), r.report.steps.size(),
                r.report.wall_seconds, ckpt.string().c_str());
  } catch (const TrainingAbort& e) {
    report << nlohmann::json{{"abort", e.what()}}.dump() << "\n";
    throw;
  }
  return 0;
}

// ---- plan

struct PlanArgs {
  Common common;
  std::string scene, instruction, checkpoints = "checkpoints", out = "layout.json";
  std::string dump_program, render;
};

int cmd_plan(const PlanArgs& a) {
  const RunConfig cfg = a.common.load();
  const Scene scene = read_scene(a.scene);
  const Program program = parse(a.instruction);
  if (!a.dump_program.empty()) spill(a.dump_program, to_sexpr(program) + "\n");

  const LibrarySource source = [&](const std::set<ConceptKind>& kinds) { return load_all(a.checkpoints, kinds); };
  const PlanOutcome plan =
      plan_program(scene, program, SymbolicGrounder(), source, cfg, cfg.seed, !a.render.empty());

  nlohmann::json j = plan.layout.to_json();
  j["instruction"] = a.instruction;
  j["program"] = to_sexpr(program);
  j["config"] = to_json(cfg);
  spill(a.out, j.dump(2) + "\n");
  if (!a.render.empty()) {
    const auto ids = plan.expr.entities();
    std::string svg = render_svg(scene, &plan.layout, ids, plan.layout.trajectory ? &*plan.layout.trajectory : nullptr);
    const auto at = svg.find('\n');
    svg.insert(at + 1, "<!--\n" + to_text(cfg) + "-->\n");
    spill(a.render, svg);
  }
  std::printf("%s\nactions %zu  energy %.4f -> %.4f\n", to_sexpr(program).c_str(), action_count(plan.layout),
              plan.layout.initial_energy, plan.layout.energy);
  return 0;
}

// ---- bench

struct BenchArgs {
  Common common;
  std::vector<std::string> tasks = {"all"};
  std::string split = "seen", checkpoints = "checkpoints", out = "results.csv";
  int episodes = 50;
  bool closed_loop = false;
  unsigned threads = 1;
};

std::string summary(std::span<const ResultRow> rows) {
  struct Acc {
    int n = 0, errors = 0;
    double tp = 0.0, tc = 0.0;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Acc> acc;
  for (const ResultRow& r : rows) {
    Acc& a = acc[{r.task, r.split, r.mode}];
    ++a.n;
    a.tp += r.tp;
    a.tc += r.tc ? 1.0 : 0.0;
    a.errors += r.error.empty() ? 0 : 1;
  }
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %-15s %-7s %5s %7s %7s %6s\n", "task", "split", "mode", "n", "TP", "TC",
                "errors");
  out += line;
  for (const auto& [key, a] : acc) {
    std::snprintf(line, sizeof line, "%-18s %-15s %-7s %5d %7.1f %7.1f %6d\n", std::get<0>(key).c_str(),
                  std::get<1>(key).c_str(), std::get<2>(key).c_str(), a.n, 100.0 * a.tp / a.n, 100.0 * a.tc / a.n,
                  a.errors);
    out += line;
  }
  return out;
}

int cmd_bench(const BenchArgs& a) {
  const RunConfig cfg = a.common.load();
  const Split split = split_from_name(a.split);
  std::vector<TaskFamily> families;
  for (const std::string& t : a.tasks) {
    if (t == "all") {
      families.assign(kAllFamilies.begin(), kAllFamilies.end());
    } else {
      families.push_back(family_from_name(t));
    }
  }

  const ConceptLibrary library = [&] {
    std::set<ConceptKind> needed;
    for (TaskFamily f : families) {
      if (f == TaskFamily::Shapes) {
        needed.insert({ConceptKind::Circle, ConceptKind::Line});
      } else {
        needed.insert({ConceptKind::LeftOf, ConceptKind::RightOf, ConceptKind::InFrontOf, ConceptKind::Behind});
      }
    }
    return load_all(a.checkpoints, needed);
  }();

  std::vector<ExecMode> modes = {ExecMode::OpenLoop};
  if (a.closed_loop) modes.push_back(ExecMode::ClosedLoop);

  struct Job {
    TaskFamily family;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (TaskFamily f : families) {
    for (int i = 0; i < a.episodes; ++i) jobs.push_back({f, cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i)});
  }

  std::vector<std::vector<ResultRow>> per_job(jobs.size());
  const BenchConfig bc = cfg.bench_config();
  const auto work = [&](std::size_t start, std::size_t stride) {
    for (std::size_t j = start; j < jobs.size(); j += stride) {
      try {
        const Episode ep = gen_episode(jobs[j].family, split, jobs[j].seed, bc);
        for (EpisodeOutcome& o : run_episode(ep, library, cfg, modes)) per_job[j].push_back(std::move(o.row));
      } catch (const GenerationError& e) {
        for (ExecMode m : modes) {
          ResultRow r;
          r.task = std::string(family_name(jobs[j].family));
          r.split = std::string(split_name(split));
          r.seed = jobs[j].seed;
          r.mode = std::string(mode_name(m));
          r.error = e.what();
          per_job[j].push_back(r);
        }
      }
    }
  };
  const unsigned n_threads = std::max(1u, a.threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
  work(0, n_threads);
  for (std::thread& t : pool) t.join();

  std::vector<ResultRow> rows;
  for (auto& v : per_job) rows.insert(rows.end(), v.begin(), v.end());
  spill(a.out, commented(cfg) + results_csv(rows));
  std::fputs(summary(rows).c_str(), stdout);
  return 0;
}

// ---- landscape

struct LandscapeArgs {
  Common common;
  std::string scene, instruction, probe, checkpoints = "checkpoints", out = "landscape.ppm";
  std::size_t resolution = kDefaultResolution;
};

int cmd_landscape(const LandscapeArgs& a) {
  const RunConfig cfg = a.common.load();
  const Scene scene = read_scene(a.scene);
  const Program program = parse(a.instruction);
  const EnergyExpression expr = compile(program, ground_program(program, scene, SymbolicGrounder()));
  const ConceptLibrary library = load_all(a.checkpoints, concepts_of(expr));
  const CompiledEnergy energy(scene, expr, library);
  const LandscapeGrid grid = sweep(energy, expr, scene, a.probe, a.resolution);

  std::string ppm = render_ppm(grid);
  ppm.insert(3, commented(cfg));  // after "P6\n"
  spill(a.out, ppm);
  const auto [ix, iy] = grid.argmin();
  const Vec2 best = grid.cell_center(ix, iy);
  std::printf("probe %s: min energy %.4f at (%.3f, %.3f)\n", a.probe.c_str(), grid.at(ix, iy), best.x, best.y);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ad::tune_allocator();
  CLI::App app{"Language-conditioned tabletop rearrangement with composable energy models"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one concept and write its checkpoint");
  add_common(t, train.common);
  t->add_option("concept", train.concept_name, "left, right, front, behind, inside, on, circle, line, ...")->required();
  t->add_option("--out", train.out, "checkpoint directory");
  t->add_option("--steps", train.steps, "overrides train.steps");
  t->add_flag("--quiet", train.quiet);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "plan a goal layout for an instruction");
  add_common(p, plan.common);
  p->add_option("--scene", plan.scene)->required()->check(CLI::ExistingFile);
  p->add_option("--instruction", plan.instruction)->required();
  p->add_option("--checkpoints", plan.checkpoints);
  p->add_option("--out", plan.out, "layout JSON");
  p->add_option("--dump-program", plan.dump_program, "write the program s-expression here");
  p->add_option("--render", plan.render, "write an SVG of scene, targets and trajectory");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "generate, plan, execute and score benchmark episodes");
  add_common(b, bench.common);
  b->add_option("--task", bench.tasks, "task family or all")->delimiter(',');
  b->add_option("--split", bench.split)->check(CLI::IsMember({"seen", "unseen-colors", "unseen-objects"}));
  b->add_option("--episodes", bench.episodes)->check(CLI::PositiveNumber);
  b->add_flag("--closed-loop", bench.closed_loop, "also run closed-loop execution");
  b->add_option("--checkpoints", bench.checkpoints);
  b->add_option("--out", bench.out, "results CSV");
  b->add_option("--threads", bench.threads);

  LandscapeArgs land;
  auto* l = app.add_subcommand("landscape", "render the energy seen by one probe entity");
  add_common(l, land.common);
  l->add_option("--scene", land.scene)->required()->check(CLI::ExistingFile);
  l->add_option("--instruction", land.instruction)->required();
  l->add_option("--probe", land.probe, "entity id to sweep")->required();
  l->add_option("--checkpoints", land.checkpoints);
  l->add_option("--out", land.out, "PPM image");
  l->add_option("--resolution", land.resolution);

  CLI11_PARSE(app, argc, argv);
  try {
    if (t->parsed()) return cmd_train(train);
    if (p->parsed()) return cmd_plan(plan);
    if (b->parsed()) return cmd_bench(bench);
    return cmd_landscape(land);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  }
}
