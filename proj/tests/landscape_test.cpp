#include <gtest/gtest.h>

#include <sstream>

#include "rearrange/errors.hpp"
#include "rearrange/landscape.hpp"
#include "rearrange/parser.hpp"

namespace rearrange {
namespace {

Scene pair_scene() {
  Scene s;
  for (auto [id, x] : {std::pair{"a", 0.2}, std::pair{"b", 0.6}}) {
    Entity e;
    e.id = id;
    e.name = id == std::string("a") ? "cube" : "bowl";
    e.color = "red";
    e.center = {x, 0.5};
    e.size = {0.05, 0.05};
    s.entities.push_back(e);
  }
  return s;
}

const std::vector<std::string> kIds = {"a", "b"};

TEST(Sweep, ConstantEnergyIsUniform) {
  const auto g = sweep([](const ad::NumArray&) { return 3.0; }, pair_scene(), kIds, "a", 8);
  EXPECT_EQ(g.energy, std::vector<double>(64, 3.0));
  const std::string ppm = render_ppm(g);
  const std::string body = ppm.substr(ppm.size() - 3 * 64);
  EXPECT_EQ(body, std::string(3 * 64, '\0'));
}

TEST(Sweep, QuadraticMinimumInContainingCell) {
  const Vec2 c{0.33, 0.71};
  auto e = [&](const ad::NumArray& x) { return (x[0] - c.x) * (x[0] - c.x) + (x[1] - c.y) * (x[1] - c.y); };
  const auto g = sweep(e, pair_scene(), kIds, "a", 16);
  const auto [ix, iy] = g.argmin();
  EXPECT_EQ(ix, static_cast<std::size_t>(c.x * 16));
  EXPECT_EQ(iy, static_cast<std::size_t>(c.y * 16));
  std::size_t minima = 0;
  for (double v : g.energy) minima += v == g.at(ix, iy) ? 1 : 0;
  EXPECT_EQ(minima, 1u);
}

TEST(Sweep, OnlyProbeMoves) {
  auto e = [](const ad::NumArray& x) {
    EXPECT_EQ(x[4], 0.6);
    EXPECT_EQ(x[5], 0.5);
    return x[0];
  };
  sweep(e, pair_scene(), kIds, "a", 4);
  EXPECT_THROW(sweep(e, pair_scene(), kIds, "zz", 4), ContractViolation);
  EXPECT_THROW(sweep(e, pair_scene(), kIds, "a", 0), ContractViolation);
}

TEST(Sweep, FixedProbeRejected) {
  const Scene s = pair_scene();
  const Program p = parse("put the red cube left of the red bowl");
  const auto expr = compile(p, ground_program(p, s, SymbolicGrounder()));
  ConceptLibrary lib;
  lib.emplace(ConceptKind::LeftOf, init_params(ConceptKind::LeftOf, 3));
  const CompiledEnergy energy(s, expr, lib);
  EXPECT_THROW(sweep(energy, expr, s, "b", 4), ContractViolation);
  const auto g = sweep(energy, expr, s, "a", 4);
  EXPECT_EQ(g.energy.size(), 16u);
}

TEST(Render, TwoByTwoLuminanceOrder) {
  LandscapeGrid g;
  g.resolution = 2;
  g.energy = {0, 1, 2, 3};  // (0,0) (1,0) (0,1) (1,1)
  const std::string ppm = render_ppm(g);
  std::istringstream in(ppm);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  in.get();
  EXPECT_EQ(magic, "P6");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(h, 2);
  EXPECT_EQ(maxval, 255);
  std::string px(12, '\0');
  in.read(px.data(), 12);
  auto lum = [&](int i) { return static_cast<unsigned char>(px[3 * i]); };
  // Image rows run top (high y) to bottom.
  EXPECT_EQ(lum(2), 0);
  EXPECT_LT(lum(2), lum(3));
  EXPECT_LT(lum(3), lum(0));
  EXPECT_LT(lum(0), lum(1));
  EXPECT_EQ(lum(1), 255);
  EXPECT_EQ(render_ppm(g), ppm);
}

TEST(Render, HeaderMatchesResolution) {
  const auto g = sweep([](const ad::NumArray& x) { return x[0] * x[1]; }, pair_scene(), kIds, "a", 64);
  const std::string ppm = render_ppm(g);
  EXPECT_EQ(ppm.rfind("P6\n64 64\n255\n", 0), 0u);
  EXPECT_EQ(ppm.size(), std::string("P6\n64 64\n255\n").size() + 3 * 64 * 64);
}

TEST(Render, SvgHasBoxesAndPolyline) {
  const Scene s = pair_scene();
  Trajectory t;
  t.snapshots = {ad::NumArray({2, 4}, {0.2, 0.5, 0, 0, 0.6, 0.5, 0, 0}), ad::NumArray({2, 4}, {0.3, 0.5, 0, 0, 0.6, 0.5, 0, 0})};
  const std::string svg = render_svg(s, nullptr, kIds, &t);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
  std::size_t rects = 0, lines = 0;
  for (std::size_t p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  EXPECT_EQ(rects, 3u);
  EXPECT_EQ(lines, 1u);
}

}  // namespace
}  // namespace rearrange
