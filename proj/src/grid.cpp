#include "jointcal/grid.hpp"

#include <algorithm>
#include <cmath>

namespace jointcal {

int TimeGrid::index_of(double t, double tol) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), t - tol);
  if (it == nodes.end() || std::abs(*it - t) > tol)
    throw InvalidInput("time " + std::to_string(t) + " is not a grid node");
  return static_cast<int>(it - nodes.begin());
}

TimeGrid build_time_grid(double horizon, double step_target,
                         const std::vector<double>& event_times) {
  if (horizon <= 0.0) throw InvalidInput("build_time_grid: horizon must be positive");
  if (step_target <= 0.0) throw InvalidInput("build_time_grid: step_target must be positive");
  for (double e : event_times) {
    if (e <= 0.0 || e > horizon + 1e-12)
      throw InvalidInput("build_time_grid: event time " + std::to_string(e) +
                         " outside (0, horizon]");
  }

  std::vector<double> anchors = event_times;
  anchors.push_back(0.0);
  anchors.push_back(horizon);
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                anchors.end());

  TimeGrid grid;
  grid.step_target = step_target;
  grid.nodes.push_back(0.0);
  for (size_t a = 0; a + 1 < anchors.size(); ++a) {
    const double lo = anchors[a], hi = anchors[a + 1];
    const int nsub = std::max(1, static_cast<int>(std::ceil((hi - lo) / step_target - 1e-9)));
    for (int s = 1; s <= nsub; ++s)
      grid.nodes.push_back(lo + (hi - lo) * s / nsub);
    grid.nodes.back() = hi;  // land on the anchor exactly
  }

  grid.is_event.assign(grid.nodes.size(), 0);
  for (double e : event_times) {
    const int k = grid.index_of(e);
    grid.is_event[k] = 1;
    grid.nodes[k] = e;  // snap to the exact event time
  }
  return grid;
}

namespace {

GridAxis snapped_axis_x1(double x1_0, double half_width, int n) {
  GridAxis ax;
  ax.n = n;
  ax.step = 2.0 * half_width / (n - 1);
  const int i0 = static_cast<int>(std::lround((n - 1) / 2.0));
  ax.origin = x1_0 - i0 * ax.step;  // shift so node i0 is exactly X1_0
  return ax;
}

}  // namespace

SpatialGrid build_spatial_grid(const GridConfig& cfg, double x1_0, double x2_0,
                               int n_time_nodes) {
  if (cfg.scale_k <= 1.0) throw InvalidInput("grid: scale_k must exceed 1");
  if (cfg.n_x1 < 5 || cfg.n_x2 < 5) throw InvalidInput("grid: need at least 5 nodes per axis");
  if (x2_0 <= 0.0) throw InvalidInput("grid: X2_0 must be positive");

  SpatialGrid g;
  g.scale_k = cfg.scale_k;

  // x1 half-width: x1_width_sigmas reference stdevs, sigma_ref^2 * T = 2*X2_0
  const double half_width = cfg.x1_width_sigmas * std::sqrt(2.0 * x2_0);
  g.coarse.x1 = snapped_axis_x1(x1_0, half_width, cfg.n_x1);
  g.i0 = static_cast<int>(std::lround((cfg.n_x1 - 1) / 2.0));

  // y2 axis from 0 to ~x2_mult * K * X2_0, with K*X2_0 exactly on a node
  const double y0 = cfg.scale_k * x2_0;
  int j0 = static_cast<int>(std::lround((cfg.n_x2 - 1) / cfg.x2_mult));
  j0 = std::max(1, std::min(j0, cfg.n_x2 - 2));
  g.coarse.y2.origin = 0.0;
  g.coarse.y2.step = y0 / j0;
  g.coarse.y2.n = cfg.n_x2;
  g.j0_coarse = j0;

  if (cfg.refine_factor > 1 && cfg.refine_steps > 0) {
    g.fine.x1 = g.coarse.x1;
    g.fine.y2.origin = 0.0;
    g.fine.y2.step = g.coarse.y2.step / cfg.refine_factor;
    g.fine.y2.n = (cfg.n_x2 - 1) * cfg.refine_factor + 1;
    g.j0_fine = j0 * cfg.refine_factor;
    g.switch_node = std::max(0, n_time_nodes - 1 - cfg.refine_steps);
  } else {
    g.fine = GridPhase{};  // disabled
    g.switch_node = n_time_nodes;  // never reached
    g.j0_fine = 0;
  }
  return g;
}

namespace {

// locate x in axis; returns cell index and barycentric weight
inline void locate(const GridAxis& ax, double x, int& cell, double& w) {
  double u = (x - ax.origin) / ax.step;
  cell = static_cast<int>(std::floor(u));
  cell = std::max(0, std::min(cell, ax.n - 2));
  w = u - cell;
}

}  // namespace

double interpolate_bilinear(const GridField& f, const GridPhase& g, double x1,
                            double y2) {
  const double tol1 = 1e-9 * std::max(1.0, std::abs(g.x1.step));
  const double tol2 = 1e-9 * std::max(1.0, std::abs(g.y2.step));
  if (x1 < g.x1.front() - tol1 || x1 > g.x1.back() + tol1 ||
      y2 < g.y2.front() - tol2 || y2 > g.y2.back() + tol2)
    throw InvalidInput("interpolate_bilinear: point outside the grid");
  return interpolate_bilinear_clamped(f, g, x1, y2);
}

double interpolate_bilinear_clamped(const GridField& f, const GridPhase& g,
                                    double x1, double y2) {
  int i, j;
  double wi, wj;
  locate(g.x1, std::clamp(x1, g.x1.front(), g.x1.back()), i, wi);
  locate(g.y2, std::clamp(y2, g.y2.front(), g.y2.back()), j, wj);
  const double f00 = f.at(i, j), f01 = f.at(i, j + 1);
  const double f10 = f.at(i + 1, j), f11 = f.at(i + 1, j + 1);
  return (1 - wi) * ((1 - wj) * f00 + wj * f01) + wi * ((1 - wj) * f10 + wj * f11);
}

GridField regrid(const GridField& f, const GridPhase& from, const GridPhase& to) {
  if (!f.same_shape(from)) throw InvalidInput("regrid: field does not match source phase");
  if (from.x1.n != to.x1.n || std::abs(from.x1.origin - to.x1.origin) > 1e-12 ||
      std::abs(from.x1.step - to.x1.step) > 1e-14)
    throw InvalidInput("regrid: x1 axes differ");

  GridField out(to);
  const double snap = 1e-9 * from.y2.step;
  for (int j = 0; j < to.y2.n; ++j) {
    const double y = to.y2[j];
    double u = (y - from.y2.origin) / from.y2.step;
    int cell = static_cast<int>(std::floor(u));
    cell = std::max(0, std::min(cell, from.y2.n - 2));
    double w = u - cell;
    // exact copy on shared nodes
    if (std::abs(y - from.y2[cell]) < snap) w = 0.0;
    if (std::abs(y - from.y2[cell + 1]) < snap) w = 1.0;
    for (int i = 0; i < to.x1.n; ++i)
      out.at(i, j) = (1 - w) * f.at(i, cell) + w * f.at(i, cell + 1);
  }
  return out;
}

}  // namespace jointcal
