#pragma once

#include <string>

#include "jointcal/common.hpp"
#include "jointcal/conjugate.hpp"
#include "jointcal/fields.hpp"
#include "jointcal/grid.hpp"

namespace jointcal {

struct HestonParams {
  double kappa = 0.0;  // mean reversion speed, 1/years
  double theta = 0.0;  // long-run variance
  double omega = 0.0;  // vol-of-vol
  double eta = 0.0;    // spot/variance correlation

  void validate() const {
    if (kappa <= 0.0 || theta <= 0.0 || omega <= 0.0)
      throw InvalidInput("HestonParams: kappa, theta, omega must be positive");
    if (std::abs(eta) > 1.0)
      throw InvalidInput("HestonParams: |eta| must not exceed 1");
  }
};

// A(t, kappa) = (1 - exp(-kappa (T - t))) / kappa, continuous at kappa -> 0.
double mean_reversion_factor(double t, double kappa, double big_t);

// Instantaneous variance from the forward-variance state, clipped at 0 where
// the affine map goes negative. Throws at t == T where the map is singular.
double variance_from_x2(double t, double x2, double kappa, double theta, double big_t);

// Inverse map, X2_{t,T} from the instantaneous variance.
double x2_from_variance(double t, double nu, double kappa, double theta, double big_t);

// Characteristics of the Heston dynamics in (x1, x2) coordinates with the
// variance supplied directly; well defined for all t <= T.
Characteristics heston_characteristics_from_variance(double t, double nu,
                                                     const HestonParams& p,
                                                     double big_t);

// Same, with the variance recovered from x2 (floored at 0). Requires t < T.
Characteristics heston_characteristics(double t, double x2, const HestonParams& p,
                                       double big_t);

enum class ReferenceKind { Heston, Constant, External };

struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::Constant;
  HestonParams heston;          // Heston kind
  Sym2 constants;               // Constant kind
  DiffusionSurface surface;     // External kind, already on the target grids

  static ReferenceSpec make_heston(const HestonParams& p) {
    ReferenceSpec s;
    s.kind = ReferenceKind::Heston;
    s.heston = p;
    return s;
  }
  static ReferenceSpec make_constant(const Sym2& c) {
    ReferenceSpec s;
    s.kind = ReferenceKind::Constant;
    s.constants = c;
    return s;
  }
};

// Materialises the reference diffusion on every (interval, node). Heston
// slices are evaluated at the left endpoint of each interval.
DiffusionSurface reference_beta(const ReferenceSpec& spec, const TimeGrid& tgrid,
                                const SpatialGrid& grid, double big_t);

}  // namespace jointcal
