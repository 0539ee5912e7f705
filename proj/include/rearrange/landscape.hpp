#pragma once

// Energy landscapes: sweep one entity over the workspace with everything
// else fixed, and render grids (binary PPM) and trajectories (SVG).

#include <functional>
#include <string>
#include <vector>

#include "rearrange/planner.hpp"

namespace rearrange {

inline constexpr std::size_t kDefaultResolution = 64;

struct LandscapeGrid {
  std::size_t resolution = 0;
  Workspace workspace;
  std::string probe;
  Vec2 probe_size;
  std::vector<double> energy;  // energy[iy * resolution + ix]; iy grows with y

  double at(std::size_t ix, std::size_t iy) const { return energy[iy * resolution + ix]; }
  Vec2 cell_center(std::size_t ix, std::size_t iy) const;
  // (ix, iy) of the lowest cell; ties go to the first in row-major order.
  std::pair<std::size_t, std::size_t> argmin() const;
};

using ScalarEnergy = std::function<double(const ad::NumArray& coords)>;

// coords rows follow ids; the probe row's x and y visit every cell center.
// ContractViolation for an unknown probe or a zero resolution;
// NonFiniteError for a non-finite cell.
LandscapeGrid sweep(const ScalarEnergy& energy, const Scene& scene, const std::vector<std::string>& ids,
                    std::string_view probe, std::size_t resolution = kDefaultResolution);
// The probe must be movable under select_anchors.
LandscapeGrid sweep(const CompiledEnergy& energy, const EnergyExpression& expr, const Scene& scene,
                    std::string_view probe, std::size_t resolution = kDefaultResolution);

// Grayscale P6, maxval 255: lowest energy black, highest white, image top
// at the far (+y) edge of the workspace. A flat grid is all black.
std::string render_ppm(const LandscapeGrid& grid);

// SVG 1.1: scene boxes as outlines, layout targets filled, and one polyline
// per trajectory row that moves.
std::string render_svg(const Scene& scene, const GoalLayout* layout, const std::vector<std::string>& ids,
                       const Trajectory* trajectory, double pixels = 512.0);

}  // namespace rearrange
