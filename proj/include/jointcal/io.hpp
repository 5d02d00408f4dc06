#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jointcal/calibrate.hpp"
#include "jointcal/heston.hpp"
#include "jointcal/montecarlo.hpp"
#include "jointcal/payoffs.hpp"

namespace jointcal {

struct QuoteRow {
  std::string kind;
  double strike = 0.0;       // blank for futures
  double maturity_days = 0.0;
  double price = 0.0;
  double implied_vol = 0.0;  // 0 when not quoted
};

struct QuoteTable {
  std::vector<QuoteRow> rows;
};

QuoteTable load_quotes_csv(const std::string& path);
void save_quotes_csv(const QuoteTable& table, const std::string& path);

// Template of instruments priced in simulated mode.
struct SimulatedInstruments {
  std::vector<double> spx_maturities_days = {44.0, 79.0};
  std::vector<double> spx_strikes = {85, 90, 95, 100, 105, 110, 115};
  std::vector<double> vix_strikes = {15, 20, 25, 30, 35};
};

struct MonteCarloConfig {
  int n_paths = 100000;
  uint64_t seed = 12345;
  int trajectory_paths = 200;
};

struct ProblemConfig {
  std::string mode = "simulated";  // or "market"
  double spot = 100.0;
  std::optional<double> x2_0;      // absent in market mode -> inferred
  double t0_days = 49.0;
  double t_days = 79.0;
  HestonParams generating;         // simulated mode
  ReferenceKind reference_kind = ReferenceKind::Heston;
  HestonParams reference_heston;
  Sym2 reference_constants;
  std::string reference_surface_csv;  // external reference surface
  GridConfig grid;
  double step_days = 0.5;
  CalibrationConfig calibration;
  SimulatedInstruments sim_instruments;
  MonteCarloConfig montecarlo;
  std::string instruments_csv;     // market mode input
  std::string output_dir = "out";

  double x1_0() const { return std::log(spot); }
  VixSpec vix_spec() const {
    return {years_from_days(t0_days), years_from_days(t_days)};
  }

  static ProblemConfig from_json_string(const std::string& text);
  static ProblemConfig from_json_file(const std::string& path);
  std::string to_json_string() const;
};

// Forward-variance estimate from an SPX strip at T: trapezoidal
// discretisation of the out-of-the-money log-contract integrals with flat
// wings truncated at [k_min/2, 2 k_max]. Returns the estimate; wing_fraction
// reports the mass contributed by the extrapolated wings.
double infer_x2_0(const QuoteTable& spx_strip_at_T, double forward,
                  double* wing_fraction = nullptr);

// Prices the simulated-mode instrument template under the generating Heston
// model and attaches implied vols. singular_price, when given, receives the
// model price of the singular contract for the record.
QuoteTable generate_simulated_quotes(const ProblemConfig& cfg,
                                     double* singular_price = nullptr);

// Assembles the calibration problem from a config and a quote table:
// grids, vega-scaled instruments, materialised reference.
Problem build_problem(const ProblemConfig& cfg, const QuoteTable& quotes);

// Output artifacts.
void write_report_json(const CalibrationReport& report, const ProblemConfig& cfg,
                       const Problem& p, const std::string& path);
void write_price_table_csv(const std::vector<PriceRow>& rows, const std::string& path);
void write_surface_csv(const DiffusionSurface& surf, const TimeGrid& tgrid,
                       const SpatialGrid& grid, const std::string& path);
DiffusionSurface load_surface_csv(const std::string& path, const TimeGrid& tgrid,
                                  const SpatialGrid& grid);
void write_phi_csv(const std::vector<GridField>& phi, const TimeGrid& tgrid,
                   const SpatialGrid& grid, const std::string& path);
void write_mc_summary_csv(const TerminalDiagnostics& diag, const std::string& path);
void write_histograms_csv(const PathBatch& batch, const std::string& path, int bins = 60);
void write_trajectories_csv(const PathBatch& batch, const std::string& path);

struct PipelineOptions {
  bool dump_surfaces = false;
  std::optional<int> max_rounds;
  std::optional<double> eps1;
  std::optional<double> eps2;
  std::optional<int> inner_iters;
};

// Full pipeline: (simulated) generate -> calibrate -> price -> simulate ->
// emit; (market) ingest -> calibrate -> emit. Returns the process exit code:
// 0 converged, 2 not converged, 1 error.
int run_pipeline(const ProblemConfig& cfg, const PipelineOptions& opts = {});

}  // namespace jointcal
