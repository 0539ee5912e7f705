#pragma once

// Contrastive-divergence training of one concept EBM with a replay buffer of
// negatives, a KL term through the final sampler step and L2 energy
// regularization.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rearrange/autodiff.hpp"
#include "rearrange/concept_data.hpp"
#include "rearrange/ebm.hpp"
#include "rearrange/langevin.hpp"

namespace rearrange {

// Configurations of one concept packed into the layout of concept_energy.
struct PackedBatch {
  ad::NumArray coords;
  ad::NumArray sizes;
  ad::NumArray movable;  // binary: subject only; shapes: every member
};

// All configurations must share the concept and, for shapes, the member count.
PackedBatch pack(ConceptKind kind, std::span<const Configuration> configs);

// Writes coordinates back into copies of configs. Theta is wrapped into
// (-pi, pi]; z extents keep their height.
std::vector<Configuration> unpack(ConceptKind kind, const ad::NumArray& coords,
                                  std::span<const Configuration> configs);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000, std::uint64_t seed = 0);

  // Appends until full, then overwrites a uniformly random slot.
  void push(Configuration c);
  const Configuration& draw(std::mt19937_64& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

 private:
  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::vector<Configuration> items_;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 128;
  double buffer_init_prob = 0.7;
  double kl_weight = 1.0;
  double l2_weight = 1.0;
  SamplerConfig sampler = SamplerConfig::train_preset();
  std::size_t steps = 3000;
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 100000;
  AugmentConfig augment;
  // Data-loader initializations scatter the movable entities of a positive
  // over the workspace; when false the clean positive is used.
  bool scatter_data_init = true;
  double divergence_limit = 1e6;

  void validate() const;
};

struct NegativeDraw {
  std::vector<Configuration> init;
  std::size_t from_buffer = 0;
};

NegativeDraw draw_negatives(const ReplayBuffer& buffer, std::span<const Configuration> positives, std::size_t batch,
                            const TrainConfig& cfg, std::mt19937_64& rng);

struct LossTerms {
  ad::Var cd;
  ad::Var l2;
  double e_pos_mean = 0.0;
  double e_neg_mean = 0.0;
};

// e_pos, e_neg: [B, 1] energies.
LossTerms contrastive_terms(ad::Graph& g, ad::Var e_pos, ad::Var e_neg);

// Mean energy, under gradient-stopped params, of the final sampler step
//   x = x_prev - step_size * mask * grad_x E(x_prev) + noise
// built so that the gradient reaches params only through grad_x E.
// final_coords receives the value of x.
ad::Var kl_term(ad::Graph& g, ConceptKind kind, const ParamVars& params, const PackedBatch& prev,
                const ad::NumArray& noise, double step_size, ad::NumArray* final_coords = nullptr);

struct StepStats {
  std::size_t step = 0;
  double e_pos = 0.0;
  double e_neg = 0.0;
  double cd = 0.0;
  double kl = 0.0;
  double l2 = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  ConceptKind kind = ConceptKind::LeftOf;
  std::vector<StepStats> steps;
  double wall_seconds = 0.0;
  std::string abort_reason;  // empty on success

  void write_jsonl(std::ostream& out) const;
};

struct TrainResult {
  EBMParams params;
  TrainReport report;
};

using StepCallback = std::function<void(const StepStats&)>;

// Throws TrainingAbort (carrying the partial report in its message) on a
// non-finite loss or when an energy magnitude exceeds cfg.divergence_limit.
TrainResult train_concept(ConceptKind kind, const ConceptDataset& dataset, const TrainConfig& cfg,
                          const StepCallback& on_step = {});

}  // namespace rearrange
