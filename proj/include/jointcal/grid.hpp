#pragma once

#include <vector>

#include "jointcal/common.hpp"

namespace jointcal {

// Discretisation of [0, horizon]. Event nodes carry the payoff jumps of the
// dual equation, so every event time must sit exactly on a node.
struct TimeGrid {
  std::vector<double> nodes;    // strictly increasing, nodes[0] == 0
  std::vector<char> is_event;   // one flag per node
  double step_target = 0.0;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_steps() const { return n_nodes() - 1; }
  double horizon() const { return nodes.back(); }
  double dt(int interval) const { return nodes[interval + 1] - nodes[interval]; }

  // exact node index of t; throws if t is not a node
  int index_of(double t, double tol = 1e-9) const;
};

TimeGrid build_time_grid(double horizon, double step_target,
                         const std::vector<double>& event_times);

struct GridAxis {
  double origin = 0.0;
  double step = 0.0;
  int n = 0;

  double operator[](int i) const { return origin + step * i; }
  double front() const { return origin; }
  double back() const { return origin + step * (n - 1); }
};

struct GridPhase {
  GridAxis x1;  // log-price, physical units
  GridAxis y2;  // scaled variance budget y2 = K * x2, starts at 0
  int n_nodes() const { return x1.n * y2.n; }
};

struct GridConfig {
  int n_x1 = 100;
  int n_x2 = 100;
  double scale_k = 40.0;        // X2 magnification, must exceed 1
  double x1_width_sigmas = 5.0; // half-width of the x1 domain in reference stdevs
  double x2_mult = 4.0;         // y2 domain spans roughly [0, x2_mult * K * X2_0]
  int refine_factor = 4;        // x2 refinement near the horizon
  int refine_steps = 10;        // number of final time steps on the fine phase
};

// Two-phase spatial lattice: a coarse grid for most of the horizon and an
// x2-refined grid for the last refine_steps time steps. Both phases place
// (X1_0, K*X2_0) on a node.
struct SpatialGrid {
  GridPhase coarse;
  GridPhase fine;
  double scale_k = 40.0;
  int switch_node = 0;  // first time-node index on the fine phase
  int i0 = 0;           // x1 index of X1_0 (shared by both phases)
  int j0_coarse = 0;    // y2 index of K*X2_0 on the coarse phase
  int j0_fine = 0;

  bool fine_enabled() const { return fine.y2.n > 0; }
  bool node_is_fine(int time_node) const {
    return fine_enabled() && time_node >= switch_node;
  }
  const GridPhase& phase_for_node(int time_node) const {
    return node_is_fine(time_node) ? fine : coarse;
  }
  // time step `interval` (from node k to k+1) is solved on node k's phase
  const GridPhase& phase_for_interval(int interval) const {
    return phase_for_node(interval);
  }
  int j0_for_node(int time_node) const {
    return node_is_fine(time_node) ? j0_fine : j0_coarse;
  }
};

SpatialGrid build_spatial_grid(const GridConfig& cfg, double x1_0, double x2_0,
                               int n_time_nodes);

inline double scale_x2(double x2, double scale_k) { return scale_k * x2; }
inline double unscale_x2(double y2, double scale_k) { return y2 / scale_k; }

// One scalar per (x1, y2) node of a single time slice, row-major in x1.
struct GridField {
  int n1 = 0;
  int n2 = 0;
  std::vector<double> v;

  GridField() = default;
  GridField(const GridPhase& g, double fill = 0.0)
      : n1(g.x1.n), n2(g.y2.n), v(static_cast<size_t>(n1) * n2, fill) {}

  double& at(int i, int j) { return v[static_cast<size_t>(i) * n2 + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * n2 + j]; }
  size_t size() const { return v.size(); }
  bool same_shape(const GridPhase& g) const { return n1 == g.x1.n && n2 == g.y2.n; }
};

// Bilinear interpolation; throws outside the bounding box.
double interpolate_bilinear(const GridField& f, const GridPhase& g, double x1,
                            double y2);

// Same, but clamps the query point to the box edges (used by path simulation).
double interpolate_bilinear_clamped(const GridField& f, const GridPhase& g,
                                    double x1, double y2);

// Moves a field between the two x2 phases (shared x1 axis) by linear
// interpolation in x2. Values at shared nodes are preserved exactly.
GridField regrid(const GridField& f, const GridPhase& from, const GridPhase& to);

}  // namespace jointcal
