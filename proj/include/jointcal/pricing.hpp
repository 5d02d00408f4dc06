#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "jointcal/black_scholes.hpp"
#include "jointcal/fields.hpp"
#include "jointcal/grid.hpp"
#include "jointcal/heston.hpp"
#include "jointcal/payoffs.hpp"

namespace jointcal {

// Linear pricing backends. The implicit backend reuses the HJB step
// discretisation (one factorisation per time step shared by all payoffs);
// the ADI backend is a Douglas scheme with theta = 1/2 per direction and the
// cross term treated explicitly.
enum class PdeBackend { Implicit, Adi };

using PayoffFn = std::function<double(double x1, double x2)>;

// Backward march of one payoff from its maturity node to t = 0; returns the
// t = 0 slice on the coarse phase.
GridField solve_pricing_pde(const DiffusionSurface& beta, const TimeGrid& tgrid,
                            const SpatialGrid& grid, const PayoffFn& payoff,
                            int maturity_node, PdeBackend backend);

// Value at the snapped initial state (no interpolation).
double price_at_origin(const GridField& t0_slice, const SpatialGrid& grid);

struct PriceQuote {
  int instrument = -1;            // index into InstrumentSet::all
  double model_price = 0.0;       // raw price units
  double model_price_scaled = 0;  // divided by the vega weight
  std::optional<double> model_iv; // absent for futures / singular contract
};

// Prices every instrument in one backward march, sharing factorisations
// across payoffs alive on the same time step. VIX option implied vols are
// quoted under the Black model on the model's own futures price.
std::vector<PriceQuote> model_prices(const DiffusionSurface& beta_star,
                                     const TimeGrid& tgrid, const SpatialGrid& grid,
                                     const InstrumentSet& instruments,
                                     const VixSpec& spec, PdeBackend backend);

// Semi-analytic Heston call via characteristic-function integration
// (Lewis single-integral form, adaptive Simpson). Validation oracle for the
// PDE pricers; does not require the Feller condition.
double heston_cf_call(const HestonParams& p, double forward, double strike,
                      double maturity, double v0);

}  // namespace jointcal
