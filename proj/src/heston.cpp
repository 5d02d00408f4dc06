#include "jointcal/heston.hpp"

#include <cmath>

namespace jointcal {

double mean_reversion_factor(double t, double kappa, double big_t) {
  if (t > big_t + 1e-12) throw InvalidInput("mean_reversion_factor: t beyond horizon");
  const double tau = std::max(big_t - t, 0.0);
  if (kappa == 0.0) return tau;
  return -std::expm1(-kappa * tau) / kappa;
}

double variance_from_x2(double t, double x2, double kappa, double theta, double big_t) {
  const double a = mean_reversion_factor(t, kappa, big_t);
  if (a <= 0.0)
    throw InvalidInput("variance_from_x2: map is singular at t = T");
  const double nu = (2.0 * x2 - theta * (big_t - t)) / a + theta;
  return std::max(nu, 0.0);
}

double x2_from_variance(double t, double nu, double kappa, double theta, double big_t) {
  const double a = mean_reversion_factor(t, kappa, big_t);
  return 0.5 * a * (nu - theta) + 0.5 * theta * (big_t - t);
}

Characteristics heston_characteristics_from_variance(double t, double nu,
                                                     const HestonParams& p,
                                                     double big_t) {
  const double a = mean_reversion_factor(t, p.kappa, big_t);
  Characteristics ch;
  ch.alpha1 = ch.alpha2 = -0.5 * nu;
  ch.beta.e11 = nu;
  ch.beta.e12 = 0.5 * p.eta * p.omega * a * nu;
  ch.beta.e22 = 0.25 * p.omega * p.omega * a * a * nu;
  return ch;
}

Characteristics heston_characteristics(double t, double x2, const HestonParams& p,
                                       double big_t) {
  const double nu = variance_from_x2(t, x2, p.kappa, p.theta, big_t);
  return heston_characteristics_from_variance(t, nu, p, big_t);
}

DiffusionSurface reference_beta(const ReferenceSpec& spec, const TimeGrid& tgrid,
                                const SpatialGrid& grid, double big_t) {
  const int n_int = tgrid.n_steps();

  if (spec.kind == ReferenceKind::External) {
    if (spec.surface.n_intervals() != n_int)
      throw InvalidInput("reference_beta: external surface interval count mismatch");
    for (int k = 0; k < n_int; ++k) {
      const GridPhase& ph = grid.phase_for_interval(k);
      if (spec.surface.slices[k].n1() != ph.x1.n || spec.surface.slices[k].n2() != ph.y2.n)
        throw InvalidInput("reference_beta: external surface grid mismatch at interval " +
                           std::to_string(k));
    }
    return spec.surface;
  }

  if (spec.kind == ReferenceKind::Constant && !spec.constants.is_psd())
    throw InvalidInput("reference_beta: constant reference matrix is not PSD");
  if (spec.kind == ReferenceKind::Heston) spec.heston.validate();

  DiffusionSurface out;
  out.slices.reserve(n_int);
  for (int k = 0; k < n_int; ++k) {
    const GridPhase& ph = grid.phase_for_interval(k);
    Sym2Field f(ph);
    if (spec.kind == ReferenceKind::Constant) {
      for (int i = 0; i < ph.x1.n; ++i)
        for (int j = 0; j < ph.y2.n; ++j) f.set(i, j, spec.constants);
    } else {
      const double t = tgrid.nodes[k];
      for (int j = 0; j < ph.y2.n; ++j) {
        const double x2 = unscale_x2(ph.y2[j], grid.scale_k);
        const Sym2 beta = heston_characteristics(t, x2, spec.heston, big_t).beta;
        for (int i = 0; i < ph.x1.n; ++i) f.set(i, j, beta);
      }
    }
    out.slices.push_back(std::move(f));
  }
  return out;
}

}  // namespace jointcal
