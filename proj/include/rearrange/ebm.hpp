#pragma once

// Concept energy networks. Each maps an object configuration to a scalar
// energy; low energy means the configuration satisfies the concept.
//
//   binary 2D   corner differences of two boxes -> MLP -> scalar
//   binary 3D   same over (xyz_min, xyz_max) boxes
//   multi-ary   centroid-relative points -> MLP -> 4 attention blocks -> mean -> MLP
//   pose        multi-ary with (dx, dy, sin theta, cos theta) inputs
//
// Only centers (and theta for pose) are differentiable inputs. Sizes and
// heights enter as constants.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rearrange/autodiff.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

enum class ConceptKind : std::uint16_t {
  LeftOf = 0,
  RightOf = 1,
  InFrontOf = 2,
  Behind = 3,
  Inside = 4,
  On3D = 5,
  Circle = 6,
  Line = 7,
  PoseCircle = 8,
};

enum class Architecture { Binary2D, Binary3D, MultiAry, Pose };

inline constexpr std::array<ConceptKind, 9> kAllConcepts = {
    ConceptKind::LeftOf, ConceptKind::RightOf, ConceptKind::InFrontOf, ConceptKind::Behind,    ConceptKind::Inside,
    ConceptKind::On3D,   ConceptKind::Circle,  ConceptKind::Line,      ConceptKind::PoseCircle};

Architecture architecture_of(ConceptKind kind);
bool is_binary(ConceptKind kind);  // 2D or 3D
bool is_shape(ConceptKind kind);   // multi-ary or pose
std::string_view concept_name(ConceptKind kind);
std::optional<ConceptKind> concept_from_name(std::string_view name);

inline constexpr std::size_t kHiddenWidth = 128;
inline constexpr std::size_t kAttentionBlocks = 4;

std::size_t input_width(Architecture arch);

// Flat, ordered tensor list:
//   featurizer W1 b1 W2 b2 | per attention block Wq bq Wk bk Wv bv Wo bo | head W1 b1 W2 b2
// Weights are [in, out].
struct EBMParams {
  ConceptKind kind = ConceptKind::LeftOf;
  std::vector<ad::NumArray> tensors;

  std::size_t parameter_count() const;
  friend bool operator==(const EBMParams&, const EBMParams&) = default;
};

std::vector<ad::Shape> parameter_shapes(ConceptKind kind);

// Glorot-uniform weights, zero biases; deterministic in seed.
EBMParams init_params(ConceptKind kind, std::uint64_t seed);

// Parameters placed into a graph, in EBMParams::tensors order.
using ParamVars = std::vector<ad::Var>;

ParamVars bind_params(ad::Graph& g, const EBMParams& p, bool trainable);
ParamVars stop_gradient(ad::Graph& g, const ParamVars& p);

// Batched energy builders; each returns [B, 1].
// centers_*: [B, 2] differentiable; sizes_*: [B, 2] constants.
ad::Var binary_energy(ad::Graph& g, ConceptKind kind, const ParamVars& p, ad::Var centers_a, ad::Var centers_b,
                      ad::Var sizes_a, ad::Var sizes_b);
// centers: [B, 3] (x, y, z_center); sizes: [B, 3] (w, h, height).
ad::Var binary3d_energy(ad::Graph& g, ConceptKind kind, const ParamVars& p, ad::Var centers_a, ad::Var centers_b,
                        ad::Var sizes_a, ad::Var sizes_b);
// points: [B, n, 2], n >= 3.
ad::Var multiary_energy(ad::Graph& g, ConceptKind kind, const ParamVars& p, ad::Var points);
// poses: [B, n, 3] as (x, y, theta), n >= 3.
ad::Var pose_energy(ad::Graph& g, ConceptKind kind, const ParamVars& p, ad::Var poses);

// Packed layout shared by the trainer and planner.
//   binary 2D  coords [B, 4] (subject xy, referent xy), sizes [B, 4] (w, h each)
//   binary 3D  coords [B, 6] (x, y, z_center each), sizes [B, 6] (w, h, height each)
//   multi-ary  coords [B, n, 2], sizes ignored
//   pose       coords [B, n, 3] as (x, y, theta), sizes ignored
ad::Var concept_energy(ad::Graph& g, ConceptKind kind, const ParamVars& p, ad::Var coords, ad::Var sizes);

// Per-entity coordinate count in the packed layout: 2, 3, 2 or 3.
std::size_t coordinate_width(ConceptKind kind);

// Feature map of the binary architecture: a.tl-b.tl, a.tl-b.br, a.br-b.tl, a.br-b.br.
std::array<double, 8> binary_features(const Box& a, const Box& b);

struct Box3 {
  std::array<double, 3> min{};
  std::array<double, 3> max{};
  static Box3 of(const Entity& e);  // requires e.z
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

// Single-configuration conveniences.
double binary_energy(const EBMParams& p, const Box& a, const Box& b);
double binary3d_energy(const EBMParams& p, const Box3& a, const Box3& b);
double multiary_energy(const EBMParams& p, std::span<const Vec2> points);
double pose_energy(const EBMParams& p, std::span<const Pose> poses);

}  // namespace rearrange
