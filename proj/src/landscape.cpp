#include "rearrange/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rearrange/errors.hpp"

namespace rearrange {

Vec2 LandscapeGrid::cell_center(std::size_t ix, std::size_t iy) const {
  const double n = static_cast<double>(resolution);
  return {(static_cast<double>(ix) + 0.5) / n * workspace.w, (static_cast<double>(iy) + 0.5) / n * workspace.h};
}

std::pair<std::size_t, std::size_t> LandscapeGrid::argmin() const {
  const auto it = std::min_element(energy.begin(), energy.end());
  const auto k = static_cast<std::size_t>(it - energy.begin());
  return {k % resolution, k / resolution};
}

LandscapeGrid sweep(const ScalarEnergy& energy, const Scene& scene, const std::vector<std::string>& ids,
                    std::string_view probe, std::size_t resolution) {
  if (resolution == 0) throw ContractViolation("sweep: resolution must be positive");
  const auto it = std::find(ids.begin(), ids.end(), probe);
  if (it == ids.end()) throw ContractViolation("sweep: probe '" + std::string(probe) + "' is not in the expression");
  const std::size_t row = static_cast<std::size_t>(it - ids.begin());

  LandscapeGrid g;
  g.resolution = resolution;
  g.workspace = scene.workspace;
  g.probe = std::string(probe);
  g.probe_size = scene.at(probe).size;
  g.energy.resize(resolution * resolution);
  ad::NumArray x = scene_coordinates(scene, ids);
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      const Vec2 c = g.cell_center(ix, iy);
      x[row * kPlanColumns + 0] = c.x;
      x[row * kPlanColumns + 1] = c.y;
      const double e = energy(x);
      if (!std::isfinite(e)) {
        throw NonFiniteError("sweep: non-finite energy at cell (" + std::to_string(ix) + ", " + std::to_string(iy) + ")");
      }
      g.energy[iy * resolution + ix] = e;
    }
  }
  return g;
}

LandscapeGrid sweep(const CompiledEnergy& energy, const EnergyExpression& expr, const Scene& scene,
                    std::string_view probe, std::size_t resolution) {
  const auto& ids = energy.ids();
  const OptimizableMask mask = select_anchors(expr);
  const auto it = std::find(ids.begin(), ids.end(), probe);
  if (it != ids.end() && mask.movable[static_cast<std::size_t>(it - ids.begin()) * kPlanColumns] == 0.0) {
    throw ContractViolation("sweep: probe '" + std::string(probe) + "' is fixed in this expression");
  }
  return sweep([&](const ad::NumArray& x) { return energy.value(x); }, scene, ids, probe, resolution);
}

std::string render_ppm(const LandscapeGrid& grid) {
  const std::size_t n = grid.resolution;
  const auto [lo_it, hi_it] = std::minmax_element(grid.energy.begin(), grid.energy.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  std::string out = "P6\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  out.reserve(out.size() + 3 * n * n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t iy = n - 1 - r;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double t = span > 0.0 ? (grid.at(ix, iy) - lo) / span : 0.0;
      const auto v = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t)));
      out.append(3, v);
    }
  }
  return out;
}

namespace {

struct SvgFrame {
  double pixels;
  Workspace ws;
  double x(double wx) const { return wx / ws.w * pixels; }
  double y(double wy) const { return (1.0 - wy / ws.h) * pixels; }
};

void rect(std::ostringstream& os, const SvgFrame& f, const Box& b, const std::string& style) {
  os << "  <rect x=\"" << f.x(b.tl.x) << "\" y=\"" << f.y(b.br.y) << "\" width=\"" << f.x(b.br.x) - f.x(b.tl.x)
     << "\" height=\"" << f.y(b.tl.y) - f.y(b.br.y) << "\" " << style << "/>\n";
}

}  // namespace

std::string render_svg(const Scene& scene, const GoalLayout* layout, const std::vector<std::string>& ids,
                       const Trajectory* trajectory, double pixels) {
  const SvgFrame f{pixels, scene.workspace};
  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << pixels << "\" height=\"" << pixels
     << "\" viewBox=\"0 0 " << pixels << " " << pixels << "\">\n"
     << "  <rect x=\"0\" y=\"0\" width=\"" << pixels << "\" height=\"" << pixels << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const Entity& e : scene.entities) {
    rect(os, f, corners(e), "fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 2\"");
  }
  if (layout) {
    for (const LayoutEntry& le : layout->entries) {
      rect(os, f, corners(le.target),
           le.moved ? "fill=\"steelblue\" fill-opacity=\"0.5\" stroke=\"navy\"" : "fill=\"none\" stroke=\"black\"");
    }
  }
  if (trajectory && !trajectory->snapshots.empty()) {
    const std::size_t rows = std::min(ids.size(), trajectory->snapshots.front().dim(0));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& first = trajectory->snapshots.front();
      const auto& last = trajectory->snapshots.back();
      if (first[r * kPlanColumns] == last[r * kPlanColumns] && first[r * kPlanColumns + 1] == last[r * kPlanColumns + 1]) {
        continue;
      }
      os << "  <polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\" points=\"";
      for (const auto& s : trajectory->snapshots) {
        os << f.x(s[r * kPlanColumns]) << "," << f.y(s[r * kPlanColumns + 1]) << " ";
      }
      os << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rearrange
