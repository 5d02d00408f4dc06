#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jointcal/fields.hpp"
#include "jointcal/heston.hpp"
#include "jointcal/hjb.hpp"
#include "jointcal/optim.hpp"
#include "jointcal/payoffs.hpp"
#include "jointcal/pricing.hpp"

namespace jointcal {

// Dual variables in the fixed flattening order:
// SPX options (input order), VIX future, VIX options (input order), singular.
struct Multipliers {
  std::vector<double> lambda_spx;
  double lambda_vix_f = 0.0;
  std::vector<double> lambda_vix;
  double lambda_xi = 0.0;

  static Multipliers zeros(const InstrumentSet& set);
  static Multipliers unflatten(const std::vector<double>& flat, const InstrumentSet& set);
  std::vector<double> flatten(const InstrumentSet& set) const;
  double max_abs() const;
};

struct CalibrationConfig {
  double eps1 = 1e-4;          // gradient tolerance, vega-scaled price units
  double eps2 = 1e-8;          // policy-iteration tolerance
  int max_outer_iters = 200;   // L-BFGS iterations in a full inner run
  int lbfgs_memory = 10;
  int bw_t = 3, bw_x1 = 5, bw_x2 = 5;  // smoothing bandwidths, node counts
  double despike_epsilon = -1.0;       // physical x2 cutoff; <0 means 2 coarse cells
  int inner_early_stop = 15;   // L-BFGS iterations per non-final round
  int max_rounds = 1;          // reference-measure rounds
  double ref_change_tol = 1e-3;
  PdeBackend backend = PdeBackend::Implicit;

  void validate() const;
};

// Everything a dual evaluation needs, with instruments already vega-scaled.
struct Problem {
  TimeGrid tgrid;
  SpatialGrid grid;
  VixSpec vix;
  InstrumentSet instruments;
  DiffusionSurface beta_bar;
  HjbConfig hjb;
  PdeBackend backend = PdeBackend::Implicit;
};

enum class CalibrationStatus { Converged, NotConverged, Error };

struct PriceRow {
  std::string id;
  std::string kind;
  double maturity_days = 0.0;
  double strike = 0.0;
  bool has_strike = false;
  double market_price = 0.0;
  double model_price = 0.0;
  std::optional<double> market_iv;
  std::optional<double> model_iv;
};

struct CalibrationReport {
  Multipliers multipliers;
  std::vector<double> objective_trace;
  std::vector<double> gmax_trace;
  std::vector<PriceRow> prices;
  DiffusionSurface beta_star;
  DiffusionSurface beta_bar_final;
  int rounds = 0;
  int inner_iterations = 0;
  double final_gmax = 0.0;
  CalibrationStatus status = CalibrationStatus::Error;
  bool possibly_infeasible = false;
  double wall_seconds = 0.0;
};

// Dual objective L(lambda) = lambda . u_scaled - phi(0, X0); the HJB solution
// is returned for the gradient evaluation.
std::pair<double, HjbSolution> dual_objective(const Problem& p,
                                              const std::vector<double>& multipliers);

// Gradient components: scaled market price minus scaled model price under the
// optimal characteristics; the singular component is minus its model price.
std::vector<double> gradients(const Problem& p, const HjbSolution& hjb);

// Moving average over (t, x1, x2) with edge-truncated renormalised windows,
// applied per phase block in time; nodewise PSD re-projection afterwards.
DiffusionSurface smooth_beta(const DiffusionSurface& surf, const SpatialGrid& grid,
                             int bw_t, int bw_x1, int bw_x2);

// Replaces values at x2 < epsilon (physical units) by the linear-in-x2
// extrapolation fitted on the first two nodes at or above epsilon.
DiffusionSurface despike_near_zero(const DiffusionSurface& surf,
                                   const SpatialGrid& grid, double epsilon);

// One full L-BFGS ascent of the dual objective.
struct InnerResult {
  LbfgsResult opt;
  HjbSolution hjb;   // at the final multipliers
};
InnerResult maximize_dual(const Problem& p, const Multipliers& start,
                          const CalibrationConfig& cfg, int iter_cap);

// The outer loop: alternate early-stopped inner runs with despiked/smoothed
// reference updates, then a final full inner run.
CalibrationReport reference_measure_iteration(Problem& p, const CalibrationConfig& cfg);

// Per-instrument price table under a given diffusion surface.
std::vector<PriceRow> build_price_table(const Problem& p,
                                        const DiffusionSurface& beta_star);

// One coarse x2 cell in physical units; the default despiking cutoff is two
// of these.
double grid_despike_default(const SpatialGrid& grid);

}  // namespace jointcal
