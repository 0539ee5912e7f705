#include "rearrange/langevin.hpp"

#include <algorithm>
#include <cmath>

#include "rearrange/errors.hpp"

namespace rearrange {

using ad::NumArray;

void SamplerConfig::validate() const {
  if (steps < 1) throw ConfigError("sampler: K must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("sampler: lambda must be > 0");
  if (!(noise >= 0.0)) throw ConfigError("sampler: eps0 must be >= 0");
  if (decay_start < 0 || decay_start > steps) throw ConfigError("sampler: decay_start must lie in [0, K]");
}

SamplerConfig SamplerConfig::train_preset() {
  SamplerConfig c;
  c.steps = 30;
  c.step_size = 1.0;
  c.noise = 5e-3;
  c.decay_start = 30;
  return c;
}

SamplerConfig SamplerConfig::infer_preset() {
  SamplerConfig c;
  c.steps = 50;
  c.step_size = 1.0;
  c.noise = 5e-3;
  c.decay_start = 30;
  c.clamp = Workspace{};
  return c;
}

OptimizableMask OptimizableMask::all(const ad::Shape& shape) { return {NumArray(shape, 1.0)}; }

bool OptimizableMask::any() const {
  return std::any_of(movable.data().begin(), movable.data().end(), [](double v) { return v != 0.0; });
}

double noise_scale(const SamplerConfig& cfg, int k) {
  if (k < cfg.decay_start) return cfg.noise;
  return cfg.noise * static_cast<double>(cfg.steps - k) / static_cast<double>(cfg.steps - cfg.decay_start);
}

NumArray standard_normal(const ad::Shape& shape, std::mt19937_64& rng) {
  NumArray z(shape);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : z.data()) v = dist(rng);
  return z;
}

void clamp_to_workspace(NumArray& coords, const Workspace& ws) {
  if (coords.rank() == 0) return;
  const std::size_t width = coords.shape().back();
  if (width < 2) return;
  for (std::size_t i = 0; i < coords.size(); i += width) {
    coords[i] = std::clamp(coords[i], 0.0, ws.w);
    coords[i + 1] = std::clamp(coords[i + 1], 0.0, ws.h);
  }
}

NumArray langevin_step(const EnergyFunction& energy, const NumArray& coords, int k, const SamplerConfig& cfg,
                       std::mt19937_64& rng, const OptimizableMask& mask) {
  if (mask.movable.shape() != coords.shape()) throw ShapeError("langevin_step: mask shape does not match coordinates");
  const EnergyEval eval = energy(coords);
  if (eval.grad.shape() != coords.shape()) throw ShapeError("langevin_step: gradient shape does not match coordinates");
  if (!eval.grad.all_finite() || !std::isfinite(eval.energy)) {
    throw NonFiniteError("sampler aborted: non-finite energy gradient at step " + std::to_string(k));
  }
  const double eps = noise_scale(cfg, k);
  const NumArray z = standard_normal(coords.shape(), rng);
  NumArray next = coords;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (mask.movable[i] == 0.0) continue;
    next[i] = coords[i] - cfg.step_size * eval.grad[i] + eps * z[i];
  }
  if (cfg.clamp) {
    // Clamping must not touch frozen coordinates.
    NumArray clamped = next;
    clamp_to_workspace(clamped, *cfg.clamp);
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (mask.movable[i] != 0.0) next[i] = clamped[i];
    }
  }
  return next;
}

Trajectory sample(const EnergyFunction& energy, const NumArray& x0, const OptimizableMask& mask,
                  const SamplerConfig& cfg, bool record) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Trajectory t;
  t.snapshots.push_back(x0);
  NumArray x = x0;
  for (int k = 0; k < cfg.steps; ++k) {
    x = langevin_step(energy, x, k, cfg, rng, mask);
    if (record) t.snapshots.push_back(x);
  }
  if (!record) t.snapshots.push_back(x);
  t.final_energy = energy(x).energy;
  return t;
}

}  // namespace rearrange
