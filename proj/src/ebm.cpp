#include "rearrange/ebm.hpp"

#include <cmath>
#include <random>

#include "rearrange/errors.hpp"

namespace rearrange {

using ad::Graph;
using ad::NumArray;
using ad::Shape;
using ad::Var;

Architecture architecture_of(ConceptKind kind) {
  switch (kind) {
    case ConceptKind::LeftOf:
    case ConceptKind::RightOf:
    case ConceptKind::InFrontOf:
    case ConceptKind::Behind:
    case ConceptKind::Inside:
      return Architecture::Binary2D;
    case ConceptKind::On3D:
      return Architecture::Binary3D;
    case ConceptKind::Circle:
    case ConceptKind::Line:
      return Architecture::MultiAry;
    case ConceptKind::PoseCircle:
      return Architecture::Pose;
  }
  throw ConfigError("unknown concept kind");
}

bool is_binary(ConceptKind kind) {
  const Architecture a = architecture_of(kind);
  return a == Architecture::Binary2D || a == Architecture::Binary3D;
}

bool is_shape(ConceptKind kind) { return !is_binary(kind); }

std::string_view concept_name(ConceptKind kind) {
  switch (kind) {
    case ConceptKind::LeftOf: return "left_of";
    case ConceptKind::RightOf: return "right_of";
    case ConceptKind::InFrontOf: return "in_front_of";
    case ConceptKind::Behind: return "behind";
    case ConceptKind::Inside: return "inside";
    case ConceptKind::On3D: return "on";
    case ConceptKind::Circle: return "circle";
    case ConceptKind::Line: return "line";
    case ConceptKind::PoseCircle: return "pose_circle";
  }
  return "?";
}

std::optional<ConceptKind> concept_from_name(std::string_view name) {
  for (ConceptKind k : kAllConcepts) {
    if (concept_name(k) == name) return k;
  }
  return std::nullopt;
}

std::size_t input_width(Architecture arch) {
  switch (arch) {
    case Architecture::Binary2D: return 8;
    case Architecture::Binary3D: return 12;
    case Architecture::MultiAry: return 2;
    case Architecture::Pose: return 4;
  }
  return 0;
}

std::vector<Shape> parameter_shapes(ConceptKind kind) {
  const Architecture arch = architecture_of(kind);
  const std::size_t h = kHiddenWidth;
  std::vector<Shape> shapes = {{input_width(arch), h}, {h}, {h, h}, {h}};
  if (arch == Architecture::MultiAry || arch == Architecture::Pose) {
    for (std::size_t b = 0; b < kAttentionBlocks; ++b) {
      for (int proj = 0; proj < 4; ++proj) {
        shapes.push_back({h, h});
        shapes.push_back({h});
      }
    }
  }
  shapes.push_back({h, h});
  shapes.push_back({h});
  shapes.push_back({h, 1});
  shapes.push_back({1});
  return shapes;
}

std::size_t EBMParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

EBMParams init_params(ConceptKind kind, std::uint64_t seed) {
  EBMParams p;
  p.kind = kind;
  std::mt19937_64 rng(seed);
  for (const Shape& s : parameter_shapes(kind)) {
    NumArray t(s);
    if (s.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s[0] + s[1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : t.data()) v = dist(rng);
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

ParamVars bind_params(Graph& g, const EBMParams& p, bool trainable) {
  ParamVars out;
  out.reserve(p.tensors.size());
  for (const auto& t : p.tensors) out.push_back(trainable ? g.leaf(t, true) : g.constant(t));
  return out;
}

ParamVars stop_gradient(Graph& g, const ParamVars& p) {
  ParamVars out;
  out.reserve(p.size());
  for (Var v : p) out.push_back(g.stop_gradient(v));
  return out;
}

namespace {

void expect_architecture(ConceptKind kind, const ParamVars& p, Architecture want, const char* what) {
  if (architecture_of(kind) != want) {
    throw ConfigError(std::string(what) + " called with concept '" + std::string(concept_name(kind)) + "'");
  }
  if (p.size() != parameter_shapes(kind).size()) {
    throw ConfigError(std::string(what) + ": parameter list does not match concept '" +
                      std::string(concept_name(kind)) + "'");
  }
}

Var mlp2(Graph& g, Var x, const ParamVars& p, std::size_t first) {
  Var h = g.relu(g.affine(x, p[first], p[first + 1]));
  return g.affine(h, p[first + 2], p[first + 3]);
}

Var featurize(Graph& g, Var x, const ParamVars& p) { return g.relu(mlp2(g, x, p, 0)); }

Var head(Graph& g, Var pooled, const ParamVars& p) { return mlp2(g, pooled, p, p.size() - 4); }

Var corner_features(Graph& g, Var ca, Var cb, Var sa, Var sb) {
  Var lo_a = ca - 0.5 * sa, hi_a = ca + 0.5 * sa;
  Var lo_b = cb - 0.5 * sb, hi_b = cb + 0.5 * sb;
  return g.concat({lo_a - lo_b, lo_a - hi_b, hi_a - lo_b, hi_a - hi_b});
}

// Four residual single-head attention blocks over [B, n, h], then a mean
// over the set.
Var set_encoder(Graph& g, Var features, const ParamVars& p) {
  Var h = featurize(g, features, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kHiddenWidth));
  for (std::size_t b = 0; b < kAttentionBlocks; ++b) {
    const std::size_t base = 4 + 8 * b;
    Var q = g.affine(h, p[base], p[base + 1]);
    Var k = g.affine(h, p[base + 2], p[base + 3]);
    Var v = g.affine(h, p[base + 4], p[base + 5]);
    Var weights = g.softmax(g.scale(g.batched_matmul(q, k, false, true), scale));
    Var mixed = g.batched_matmul(weights, v);
    h = h + g.affine(mixed, p[base + 6], p[base + 7]);
  }
  return head(g, g.mean(h, 1), p);
}

Var centered(Graph& g, Var points) {
  const std::size_t n = points.shape()[1];
  return points - g.broadcast(g.mean(points, 1), 1, n);
}

void expect_set(Var points, std::size_t width, const char* what) {
  const auto& s = points.shape();
  if (s.size() != 3 || s[2] != width) {
    throw ShapeError(std::string(what) + ": expected [B, n, " + std::to_string(width) + "], got " +
                     ad::shape_string(s));
  }
  if (s[1] < 3) {
    throw ArityError(std::string(what) + ": needs at least 3 entities, got " + std::to_string(s[1]));
  }
}

}  // namespace

Var binary_energy(Graph& g, ConceptKind kind, const ParamVars& p, Var centers_a, Var centers_b, Var sizes_a,
                  Var sizes_b) {
  expect_architecture(kind, p, Architecture::Binary2D, "binary_energy");
  return head(g, featurize(g, corner_features(g, centers_a, centers_b, sizes_a, sizes_b), p), p);
}

Var binary3d_energy(Graph& g, ConceptKind kind, const ParamVars& p, Var centers_a, Var centers_b, Var sizes_a,
                    Var sizes_b) {
  expect_architecture(kind, p, Architecture::Binary3D, "binary3d_energy");
  return head(g, featurize(g, corner_features(g, centers_a, centers_b, sizes_a, sizes_b), p), p);
}

Var multiary_energy(Graph& g, ConceptKind kind, const ParamVars& p, Var points) {
  expect_architecture(kind, p, Architecture::MultiAry, "multiary_energy");
  expect_set(points, 2, "multiary_energy");
  return set_encoder(g, centered(g, points), p);
}

Var pose_energy(Graph& g, ConceptKind kind, const ParamVars& p, Var poses) {
  expect_architecture(kind, p, Architecture::Pose, "pose_energy");
  expect_set(poses, 3, "pose_energy");
  Var xy = centered(g, g.slice(poses, 0, 2));
  Var theta = g.slice(poses, 2, 1);
  return set_encoder(g, g.concat({xy, g.sin(theta), g.cos(theta)}), p);
}

std::size_t coordinate_width(ConceptKind kind) {
  switch (architecture_of(kind)) {
    case Architecture::Binary2D: return 2;
    case Architecture::Binary3D: return 3;
    case Architecture::MultiAry: return 2;
    case Architecture::Pose: return 3;
  }
  throw ConfigError("unknown architecture");
}

Var concept_energy(Graph& g, ConceptKind kind, const ParamVars& p, Var coords, Var sizes) {
  switch (architecture_of(kind)) {
    case Architecture::Binary2D:
    case Architecture::Binary3D: {
      const std::size_t w = coordinate_width(kind);
      if (coords.shape().size() != 2 || coords.shape()[1] != 2 * w || sizes.shape() != coords.shape()) {
        throw ShapeError("concept_energy: binary coords and sizes must be [B, " + std::to_string(2 * w) + "], got " +
                         ad::shape_string(coords.shape()) + " and " + ad::shape_string(sizes.shape()));
      }
      Var ca = g.slice(coords, 0, w), cb = g.slice(coords, w, w);
      Var sa = g.slice(sizes, 0, w), sb = g.slice(sizes, w, w);
      return w == 2 ? binary_energy(g, kind, p, ca, cb, sa, sb) : binary3d_energy(g, kind, p, ca, cb, sa, sb);
    }
    case Architecture::MultiAry: return multiary_energy(g, kind, p, coords);
    case Architecture::Pose: return pose_energy(g, kind, p, coords);
  }
  throw ConfigError("unknown architecture");
}

std::array<double, 8> binary_features(const Box& a, const Box& b) {
  return {a.tl.x - b.tl.x, a.tl.y - b.tl.y, a.tl.x - b.br.x, a.tl.y - b.br.y,
          a.br.x - b.tl.x, a.br.y - b.tl.y, a.br.x - b.br.x, a.br.y - b.br.y};
}

Box3 Box3::of(const Entity& e) {
  if (!e.z) throw ValidationError("entity '" + e.id + "' has no z extent");
  const Box b = corners(e);
  return Box3{{b.tl.x, b.tl.y, e.z->min}, {b.br.x, b.br.y, e.z->max}};
}

namespace {

NumArray row(std::initializer_list<double> v) { return NumArray(Shape{1, v.size()}, std::vector<double>(v)); }

}  // namespace

double binary_energy(const EBMParams& p, const Box& a, const Box& b) {
  Graph g;
  const ParamVars pv = bind_params(g, p, false);
  const Vec2 ca = a.center(), cb = b.center(), sa = a.size(), sb = b.size();
  return binary_energy(g, p.kind, pv, g.constant(row({ca.x, ca.y})), g.constant(row({cb.x, cb.y})),
                       g.constant(row({sa.x, sa.y})), g.constant(row({sb.x, sb.y})))
      .value()
      .item();
}

double binary3d_energy(const EBMParams& p, const Box3& a, const Box3& b) {
  Graph g;
  const ParamVars pv = bind_params(g, p, false);
  auto center = [](const Box3& x) {
    return row({0.5 * (x.min[0] + x.max[0]), 0.5 * (x.min[1] + x.max[1]), 0.5 * (x.min[2] + x.max[2])});
  };
  auto size = [](const Box3& x) { return row({x.max[0] - x.min[0], x.max[1] - x.min[1], x.max[2] - x.min[2]}); };
  return binary3d_energy(g, p.kind, pv, g.constant(center(a)), g.constant(center(b)), g.constant(size(a)),
                         g.constant(size(b)))
      .value()
      .item();
}

double multiary_energy(const EBMParams& p, std::span<const Vec2> points) {
  Graph g;
  const ParamVars pv = bind_params(g, p, false);
  NumArray arr(Shape{1, points.size(), 2});
  for (std::size_t i = 0; i < points.size(); ++i) {
    arr[2 * i] = points[i].x;
    arr[2 * i + 1] = points[i].y;
  }
  if (points.size() < 3) throw ArityError("multiary_energy: needs at least 3 points");
  return multiary_energy(g, p.kind, pv, g.constant(std::move(arr))).value().item();
}

double pose_energy(const EBMParams& p, std::span<const Pose> poses) {
  if (poses.size() < 3) throw ArityError("pose_energy: needs at least 3 poses");
  Graph g;
  const ParamVars pv = bind_params(g, p, false);
  NumArray arr(Shape{1, poses.size(), 3});
  for (std::size_t i = 0; i < poses.size(); ++i) {
    arr[3 * i] = poses[i].x;
    arr[3 * i + 1] = poses[i].y;
    arr[3 * i + 2] = poses[i].theta;
  }
  return pose_energy(g, p.kind, pv, g.constant(std::move(arr))).value().item();
}

}  // namespace rearrange
