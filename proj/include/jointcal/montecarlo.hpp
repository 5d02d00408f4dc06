#pragma once

#include <vector>

#include "jointcal/fields.hpp"
#include "jointcal/grid.hpp"
#include "jointcal/heston.hpp"
#include "jointcal/payoffs.hpp"

namespace jointcal {

// Euler-scheme batch. Full trajectories are kept only for the first
// `trajectory_paths` paths; every path contributes to the snapshots at event
// nodes (t0, T, option maturities).
struct PathBatch {
  std::vector<double> times;
  int n_paths = 0;
  uint64_t seed = 0;
  std::vector<int> snapshot_nodes;              // event node indices
  std::vector<std::vector<double>> snap_x1;     // [snapshot][path]
  std::vector<std::vector<double>> snap_x2;
  int trajectory_paths = 0;
  std::vector<std::vector<double>> traj_x1;     // [path][node]
  std::vector<std::vector<double>> traj_x2;
};

// Characteristics source: either a calibrated surface on the lattice or
// exact Heston dynamics.
struct SimSource {
  const DiffusionSurface* surface = nullptr;  // with grid interpolation
  const SpatialGrid* grid = nullptr;
  bool use_heston = false;
  HestonParams heston;
  double big_t = 0.0;

  static SimSource from_surface(const DiffusionSurface& s, const SpatialGrid& g) {
    SimSource src;
    src.surface = &s;
    src.grid = &g;
    return src;
  }
  static SimSource from_heston(const HestonParams& p, double big_t) {
    SimSource src;
    src.use_heston = true;
    src.heston = p;
    src.big_t = big_t;
    return src;
  }
};

PathBatch euler_simulate(const SimSource& source, double x1_0, double x2_0,
                         const TimeGrid& tgrid, int n_paths, uint64_t seed,
                         int trajectory_paths = 200);

struct TerminalDiagnostics {
  double mean_xi = 0.0;            // sample mean of the singular payoff at T
  double mean_x2_T = 0.0;
  double q95_x2_T = 0.0;
  double mean_exp_x1_T = 0.0;
  double se_exp_x1_T = 0.0;        // standard error of the mean
  double mean_vix_t0 = 0.0;        // sample mean of J(X_{t0})
};

TerminalDiagnostics terminal_diagnostics(const PathBatch& batch, const VixSpec& spec);

}  // namespace jointcal
