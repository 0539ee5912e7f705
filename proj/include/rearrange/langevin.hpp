#pragma once

// Noisy gradient descent on an energy over coordinates:
//
//   x_{k+1} = x_k - lambda * grad E(x_k) + eps_k * z_k,   z_k ~ N(0, I)
//
// eps_k stays at eps0 until decay_start and then falls linearly towards 0
// at k = K. Coordinate arrays have (x, y) in the first two columns of the
// last axis; clamping applies to those columns only.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "rearrange/autodiff.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

struct SamplerConfig {
  int steps = 50;           // K
  double step_size = 1.0;   // lambda
  double noise = 5e-3;      // eps0
  int decay_start = 30;
  std::optional<Workspace> clamp;
  std::uint64_t seed = 0;

  void validate() const;

  static SamplerConfig train_preset();
  static SamplerConfig infer_preset();
};

struct EnergyEval {
  double energy = 0.0;
  ad::NumArray grad;
};

using EnergyFunction = std::function<EnergyEval(const ad::NumArray& coords)>;

// 1 for coordinates the sampler may change, 0 for frozen ones. Same shape as
// the coordinates.
struct OptimizableMask {
  ad::NumArray movable;

  static OptimizableMask all(const ad::Shape& shape);
  bool any() const;
};

struct Trajectory {
  std::vector<ad::NumArray> snapshots;  // x^0 ... x^K
  double final_energy = 0.0;

  const ad::NumArray& final_coords() const { return snapshots.back(); }
};

double noise_scale(const SamplerConfig& cfg, int k);
ad::NumArray standard_normal(const ad::Shape& shape, std::mt19937_64& rng);
void clamp_to_workspace(ad::NumArray& coords, const Workspace& ws);

// One update at step index k. Throws NonFiniteError naming k if the
// gradient is not finite.
ad::NumArray langevin_step(const EnergyFunction& energy, const ad::NumArray& coords, int k,
                           const SamplerConfig& cfg, std::mt19937_64& rng, const OptimizableMask& mask);

// K steps from x0 with an RNG seeded from cfg.seed. With record = false only
// the endpoints are kept.
Trajectory sample(const EnergyFunction& energy, const ad::NumArray& x0, const OptimizableMask& mask,
                  const SamplerConfig& cfg, bool record = true);

}  // namespace rearrange
