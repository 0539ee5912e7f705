#include "rearrange/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "rearrange/errors.hpp"

namespace rearrange {

BenchConfig RunConfig::bench_config() const {
  BenchConfig b = bench;
  b.geom = geom;
  return b;
}

void RunConfig::validate() const {
  geom.validate();
  train.validate();
  infer.validate();
  exec.validate();
  bench_config().validate();
  if (dataset_size == 0) throw ConfigError("dataset_size must be positive");
  if (!(plan.move_threshold >= 0.0)) throw ConfigError("plan.move_threshold must be >= 0");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

template <class T>
T to_int(const std::string& v) {
  T out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define REAL(k, field, doc) \
  Entry{{k, doc}, [](RunConfig& c, const std::string& v) { c.field = to_double(v); }, [](const RunConfig& c) { return fmt(c.field); }}
#define INT(k, field, type, doc)                                                               \
  Entry{{k, doc}, [](RunConfig& c, const std::string& v) { c.field = to_int<type>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define BOOL(k, field, doc)                                                                 \
  Entry{{k, doc}, [](RunConfig& c, const std::string& v) { c.field = to_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

#define LIST(k, field, doc)                                                                    \
  Entry{{k, doc}, [](RunConfig& c, const std::string& v) { c.field = split_list(v); }, \
        [](const RunConfig& c) { return join(c.field); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      INT("seed", seed, std::uint64_t, "base seed for every random stream"),
      REAL("geom.offset_min", geom.offset_min, "directional relations: minimum center offset along the axis"),
      REAL("geom.offset_max", geom.offset_max, "directional relations: maximum center offset along the axis"),
      REAL("geom.band", geom.band, "directional relations: perpendicular half-width"),
      REAL("geom.inside_margin", geom.inside_margin, "inside: margin kept by generated positives"),
      REAL("geom.circle_radius_min", geom.circle_radius_min, "circle positives: minimum radius"),
      REAL("geom.circle_radius_max", geom.circle_radius_max, "circle positives: maximum radius"),
      REAL("geom.line_length_min", geom.line_length_min, "line positives: minimum length"),
      REAL("geom.line_length_max", geom.line_length_max, "line positives: maximum length"),
      REAL("geom.shape_jitter", geom.shape_jitter, "shape positives: per-point jitter"),
      REAL("geom.contact_tolerance", geom.contact_tolerance, "on: allowed z gap"),
      REAL("geom.pose_tolerance", geom.pose_tolerance, "pose circle: heading tolerance in radians"),
      INT("train.dataset_size", dataset_size, std::size_t, "procedural positives per concept"),
      REAL("train.lr", train.lr, "Adam learning rate"),
      INT("train.batch", train.batch, std::size_t, "positives and negatives per step"),
      INT("train.steps", train.steps, std::size_t, "optimizer steps"),
      REAL("train.buffer_init_prob", train.buffer_init_prob, "fraction of negative chains started from the replay buffer"),
      INT("train.buffer_capacity", train.buffer_capacity, std::size_t, "replay buffer size"),
      REAL("train.kl_weight", train.kl_weight, "weight of the KL term"),
      REAL("train.l2_weight", train.l2_weight, "weight of the energy L2 term"),
      REAL("train.divergence_limit", train.divergence_limit, "abort when an energy magnitude exceeds this"),
      BOOL("train.scatter_data_init", train.scatter_data_init, "data-initialized chains start from scattered positives"),
      BOOL("train.augment.translate", train.augment.translate, "random rigid translation of positives"),
      REAL("train.augment.jitter", train.augment.jitter, "per-entity position jitter of positives"),
      INT("train.sampler.steps", train.sampler.steps, int, "Langevin steps per negative"),
      REAL("train.sampler.step_size", train.sampler.step_size, "Langevin step size"),
      REAL("train.sampler.noise", train.sampler.noise, "Langevin noise scale"),
      INT("train.sampler.decay_start", train.sampler.decay_start, int, "step where noise starts decaying"),
      INT("infer.steps", infer.steps, int, "Langevin steps when planning"),
      REAL("infer.step_size", infer.step_size, "planning step size"),
      REAL("infer.noise", infer.noise, "planning noise scale"),
      INT("infer.decay_start", infer.decay_start, int, "planning noise decay start"),
      Entry{{"plan.init", "scene or random"},
            [](RunConfig& c, const std::string& v) {
              if (v == "scene") c.plan.init = PlanInit::Scene;
              else if (v == "random") c.plan.init = PlanInit::Random;
              else throw ConfigError("plan.init must be scene or random, got '" + v + "'");
            },
            [](const RunConfig& c) { return std::string(c.plan.init == PlanInit::Scene ? "scene" : "random"); }},
      REAL("plan.move_threshold", plan.move_threshold, "displacement above which an entity counts as moved"),
      REAL("exec.sigma", exec.sigma, "place noise per axis"),
      REAL("exec.p_fail", exec.p_fail, "pick failure probability"),
      REAL("exec.iou_threshold", exec.iou_threshold, "closed-loop IoU success threshold"),
      INT("exec.retries", exec.retries, int, "closed-loop retries per entity"),
      INT("exec.seed", exec.seed, std::uint64_t, "executor noise seed"),
      INT("bench.min_distractors", bench.min_distractors, int, "fewest distractors per episode"),
      INT("bench.max_distractors", bench.max_distractors, int, "most distractors per episode"),
      REAL("bench.clearance", bench.clearance, "minimum gap between initial boxes"),
      INT("bench.intersection_samples", bench.intersection_samples, int, "samples for the goal-region check"),
      INT("bench.min_members", bench.min_members, std::size_t, "fewest shape members"),
      INT("bench.max_members", bench.max_members, std::size_t, "most shape members"),
      INT("bench.episode_attempts", bench.episode_attempts, int, "layout attempts before giving up"),
      LIST("bench.seen_colors", bench.splits.seen_colors, "comma-separated"),
      LIST("bench.unseen_colors", bench.splits.unseen_colors, "comma-separated"),
      LIST("bench.seen_objects", bench.splits.seen_objects, "comma-separated"),
      LIST("bench.unseen_objects", bench.splits.unseen_objects, "comma-separated"),
      Entry{{"bench.background", "background color (metadata only)"},
            [](RunConfig& c, const std::string& v) { c.bench.splits.background = v; },
            [](const RunConfig& c) { return c.bench.splits.background; }},
  };
  return table;
}

#undef REAL
#undef INT
#undef BOOL
#undef LIST

}  // namespace

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const Entry& e : entries()) out.push_back(e.key);
  return out;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key.key == key; });
    if (it == table.end()) throw ConfigError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(n) + " (" + key + "): " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) out += e.key.key + " = " + e.get(cfg) + "\n";
  return out;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const Entry& e : entries()) j[e.key.key] = e.get(cfg);
  return j;
}

}  // namespace rearrange
