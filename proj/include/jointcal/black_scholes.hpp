#pragma once

#include "jointcal/common.hpp"

namespace jointcal {

double norm_cdf(double x);
double norm_pdf(double x);

// Zero-rate Black formulas on the forward. Used both for SPX options
// (forward = spot here) and for VIX options (forward = VIX futures level).
double black_price(double forward, double strike, double vol, double maturity,
                   bool is_call);
double black_vega(double forward, double strike, double vol, double maturity);

// Inverts black_price by safeguarded Newton with bisection fallback,
// absolute price tolerance 1e-10. Throws on prices outside the
// no-arbitrage bounds.
double black_implied_vol(double price, double forward, double strike,
                         double maturity, bool is_call);

}  // namespace jointcal
