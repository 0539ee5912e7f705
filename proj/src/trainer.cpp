#include "rearrange/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "rearrange/errors.hpp"

namespace rearrange {

using ad::Graph;
using ad::NumArray;
using ad::Shape;
using ad::Var;

namespace {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

}  // namespace

PackedBatch pack(ConceptKind kind, std::span<const Configuration> configs) {
  if (configs.empty()) throw ContractViolation("pack: empty batch");
  const std::size_t b = configs.size();
  const std::size_t w = coordinate_width(kind);
  PackedBatch out;
  if (is_binary(kind)) {
    out.coords = NumArray(Shape{b, 2 * w});
    out.sizes = NumArray(Shape{b, 2 * w});
    out.movable = NumArray(Shape{b, 2 * w});
    for (std::size_t i = 0; i < b; ++i) {
      const Configuration& c = configs[i];
      if (c.kind != kind || c.entities.size() != 2) throw ContractViolation("pack: configuration does not match concept");
      for (std::size_t e = 0; e < 2; ++e) {
        const Entity& ent = c.entities[e];
        double* xc = &out.coords[i * 2 * w + e * w];
        double* xs = &out.sizes[i * 2 * w + e * w];
        xc[0] = ent.center.x, xc[1] = ent.center.y;
        xs[0] = ent.size.x, xs[1] = ent.size.y;
        if (w == 3) {
          if (!ent.z) throw ValidationError("pack: entity '" + ent.id + "' needs a z extent");
          xc[2] = ent.z->center();
          xs[2] = ent.z->height();
        }
        if (e == 0) {
          for (std::size_t d = 0; d < w; ++d) out.movable[i * 2 * w + d] = 1.0;
        }
      }
    }
    return out;
  }
  const std::size_t n = configs[0].entities.size();
  out.coords = NumArray(Shape{b, n, w});
  out.sizes = NumArray(Shape{b, n, 2});
  out.movable = NumArray(Shape{b, n, w}, 1.0);
  for (std::size_t i = 0; i < b; ++i) {
    const Configuration& c = configs[i];
    if (c.kind != kind || c.entities.size() != n) {
      throw ContractViolation("pack: shape batch needs one concept and one member count");
    }
    for (std::size_t e = 0; e < n; ++e) {
      const Entity& ent = c.entities[e];
      const std::size_t base = (i * n + e) * w;
      out.coords[base] = ent.center.x;
      out.coords[base + 1] = ent.center.y;
      if (w == 3) out.coords[base + 2] = ent.theta.value_or(0.0);
      out.sizes[(i * n + e) * 2] = ent.size.x;
      out.sizes[(i * n + e) * 2 + 1] = ent.size.y;
    }
  }
  return out;
}

std::vector<Configuration> unpack(ConceptKind kind, const NumArray& coords, std::span<const Configuration> configs) {
  std::vector<Configuration> out(configs.begin(), configs.end());
  const std::size_t w = coordinate_width(kind);
  std::size_t at = 0;
  for (auto& c : out) {
    for (std::size_t e = 0; e < c.entities.size(); ++e, at += w) {
      if (at + w > coords.size()) throw ShapeError("unpack: coordinates do not cover the configurations");
      Entity& ent = c.entities[e];
      ent.center = {coords[at], coords[at + 1]};
      if (w == 3 && is_binary(kind)) {
        const double h = ent.z->height();
        ent.z = ZExtent{coords[at + 2] - 0.5 * h, coords[at + 2] + 0.5 * h};
      } else if (w == 3) {
        ent.theta = wrap_angle(coords[at + 2]);
      }
    }
  }
  if (at != coords.size()) throw ShapeError("unpack: coordinate count does not match the configurations");
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Configuration c) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(c));
    return;
  }
  std::uniform_int_distribution<std::size_t> slot(0, capacity_ - 1);
  items_[slot(rng_)] = std::move(c);
}

const Configuration& ReplayBuffer::draw(std::mt19937_64& rng) const {
  if (items_.empty()) throw ContractViolation("draw from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  return items_[pick(rng)];
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!(buffer_init_prob >= 0.0 && buffer_init_prob <= 1.0)) throw ConfigError("train: buffer_init_prob must lie in [0, 1]");
  if (!(kl_weight >= 0.0) || !(l2_weight >= 0.0)) throw ConfigError("train: loss weights must be >= 0");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("train: buffer capacity must be >= 1");
  sampler.validate();
}

NegativeDraw draw_negatives(const ReplayBuffer& buffer, std::span<const Configuration> positives, std::size_t batch,
                            const TrainConfig& cfg, std::mt19937_64& rng) {
  if (positives.empty()) throw ContractViolation("draw_negatives: no positives to initialize from");
  NegativeDraw out;
  out.init.reserve(batch);
  std::bernoulli_distribution use_buffer(cfg.buffer_init_prob);
  std::uniform_int_distribution<std::size_t> pick(0, positives.size() - 1);
  for (std::size_t i = 0; i < batch; ++i) {
    if (!buffer.empty() && use_buffer(rng)) {
      out.init.push_back(buffer.draw(rng));
      ++out.from_buffer;
      continue;
    }
    const Configuration& p = positives[pick(rng)];
    out.init.push_back(cfg.scatter_data_init ? scatter(p, rng) : p);
  }
  return out;
}

LossTerms contrastive_terms(Graph& g, Var e_pos, Var e_neg) {
  LossTerms t;
  t.cd = g.mean_all(e_pos) - g.mean_all(e_neg);
  t.l2 = g.mean_all(g.square(e_pos)) + g.mean_all(g.square(e_neg));
  t.e_pos_mean = g.mean_all(e_pos).value().item();
  t.e_neg_mean = g.mean_all(e_neg).value().item();
  return t;
}

Var kl_term(Graph& g, ConceptKind kind, const ParamVars& params, const PackedBatch& prev, const NumArray& noise,
            double step_size, NumArray* final_coords) {
  Var x = g.leaf(prev.coords, true);
  Var sizes = g.constant(prev.sizes);
  Var energy = g.sum_all(concept_energy(g, kind, params, x, sizes));
  Var gx = g.grad(energy, {x})[0];
  Var moved = g.stop_gradient(x) - step_size * g.mul(g.constant(prev.movable), gx) +
              g.constant(prev.movable) * g.constant(noise);
  if (final_coords) *final_coords = moved.value();
  return g.mean_all(concept_energy(g, kind, stop_gradient(g, params), moved, sizes));
}

namespace {

EnergyFunction batch_energy(ConceptKind kind, const EBMParams& params, const NumArray& sizes) {
  return [kind, &params, &sizes](const NumArray& coords) {
    Graph g;
    const ParamVars pv = bind_params(g, params, false);
    Var x = g.leaf(coords, true);
    Var e = g.sum_all(concept_energy(g, kind, pv, x, g.constant(sizes)));
    return EnergyEval{e.value().item(), g.backprop(e, {x})[0]};
  };
}

std::string abort_message(const std::string& reason, const TrainReport& report, const Configuration* sample) {
  nlohmann::json j = {{"reason", reason}, {"completed_steps", report.steps.size()}};
  if (sample) {
    Scene s;
    s.entities = sample->entities;
    j["sample"] = scene_to_json(s);
  }
  return "training aborted: " + j.dump();
}

}  // namespace

void TrainReport::write_jsonl(std::ostream& out) const {
  for (const auto& s : steps) {
    out << nlohmann::json{{"concept", std::string(concept_name(kind))},
                          {"step", s.step},
                          {"e_pos", s.e_pos},
                          {"e_neg", s.e_neg},
                          {"cd", s.cd},
                          {"kl", s.kl},
                          {"l2", s.l2},
                          {"seconds", s.seconds}}
               .dump()
        << '\n';
  }
}

TrainResult train_concept(ConceptKind kind, const ConceptDataset& dataset, const TrainConfig& cfg,
                          const StepCallback& on_step) {
  cfg.validate();
  if (dataset.kind != kind) throw ConfigError("train_concept: dataset concept does not match");
  if (dataset.positives.empty()) throw ConfigError("train_concept: empty dataset");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  // Shape batches need one member count, so positives and buffers are
  // bucketed by it.
  std::map<std::size_t, std::vector<Configuration>> buckets;
  for (const auto& c : dataset.positives) buckets[c.entities.size()].push_back(c);
  std::map<std::size_t, ReplayBuffer> buffers;
  std::uint64_t buffer_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  for (const auto& [n, _] : buckets) buffers.emplace(n, ReplayBuffer(cfg.buffer_capacity, buffer_seed++));

  TrainResult result;
  result.params = init_params(kind, cfg.seed);
  result.report.kind = kind;
  std::mt19937_64 rng(cfg.seed);
  ad::AdamState adam;
  std::uniform_int_distribution<std::size_t> pick_positive(0, dataset.positives.size() - 1);
  const SamplerConfig& sc = cfg.sampler;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::size_t n = dataset.positives[pick_positive(rng)].entities.size();
    const std::vector<Configuration>& pool = buckets[n];
    ReplayBuffer& buffer = buffers.at(n);

    std::vector<Configuration> positives;
    positives.reserve(cfg.batch);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < cfg.batch; ++i) positives.push_back(augment(pool[pick(rng)], rng, cfg.augment));

    const NegativeDraw draw = draw_negatives(buffer, pool, cfg.batch, cfg, rng);
    PackedBatch neg = pack(kind, draw.init);
    const OptimizableMask mask{neg.movable};
    const EnergyFunction energy = batch_energy(kind, result.params, neg.sizes);
    for (int k = 0; k + 1 < sc.steps; ++k) neg.coords = langevin_step(energy, neg.coords, k, sc, rng, mask);
    const NumArray noise = [&] {
      NumArray z = standard_normal(neg.coords.shape(), rng);
      const double eps = noise_scale(sc, sc.steps - 1);
      for (auto& v : z.data()) v *= eps;
      return z;
    }();

    Graph g;
    const ParamVars pv = bind_params(g, result.params, true);
    NumArray final_coords;
    Var kl = kl_term(g, kind, pv, neg, noise, sc.step_size, &final_coords);
    const PackedBatch pos = pack(kind, positives);
    Var e_pos = concept_energy(g, kind, pv, g.constant(pos.coords), g.constant(pos.sizes));
    Var e_neg = concept_energy(g, kind, pv, g.constant(final_coords), g.constant(neg.sizes));
    const LossTerms terms = contrastive_terms(g, e_pos, e_neg);
    Var total = terms.cd + cfg.kl_weight * kl + cfg.l2_weight * terms.l2;

    StepStats stats{step, terms.e_pos_mean, terms.e_neg_mean, terms.cd.value().item(), kl.value().item(),
                    terms.l2.value().item(), 0.0};
    const std::vector<Configuration> negatives = unpack(kind, final_coords, draw.init);
    const NumArray& ep = e_pos.value();
    const NumArray& en = e_neg.value();
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      const Configuration* bad = nullptr;
      if (!std::isfinite(ep[i]) || std::abs(ep[i]) > cfg.divergence_limit) bad = &positives[i];
      if (!std::isfinite(en[i]) || std::abs(en[i]) > cfg.divergence_limit) bad = &negatives[i];
      if (bad) {
        result.report.abort_reason = std::isfinite(total.value().item()) ? "energy diverged" : "non-finite energy";
        result.report.wall_seconds = elapsed();
        throw TrainingAbort(abort_message(result.report.abort_reason, result.report, bad));
      }
    }

    const std::vector<NumArray> grads = g.backprop(total, pv);
    try {
      ad::adam_step(result.params.tensors, grads, adam, cfg.lr);
    } catch (const NonFiniteError&) {
      result.report.abort_reason = "non-finite gradient";
      throw TrainingAbort(abort_message(result.report.abort_reason, result.report, nullptr));
    }
    for (const auto& c : negatives) buffer.push(c);

    stats.seconds = elapsed();
    result.report.steps.push_back(stats);
    if (on_step) on_step(stats);
  }
  result.report.wall_seconds = elapsed();
  return result;
}

}  // namespace rearrange
