#include "jointcal/black_scholes.hpp"

#include <algorithm>
#include <cmath>

namespace jointcal {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double black_price(double forward, double strike, double vol, double maturity,
                   bool is_call) {
  if (forward <= 0.0 || strike <= 0.0 || maturity < 0.0)
    throw InvalidInput("black_price: need positive forward/strike and maturity >= 0");
  const double intrinsic =
      is_call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
  if (vol <= 0.0 || maturity == 0.0) return intrinsic;
  const double sd = vol * std::sqrt(maturity);
  const double d1 = std::log(forward / strike) / sd + 0.5 * sd;
  const double d2 = d1 - sd;
  if (is_call) return forward * norm_cdf(d1) - strike * norm_cdf(d2);
  return strike * norm_cdf(-d2) - forward * norm_cdf(-d1);
}

double black_vega(double forward, double strike, double vol, double maturity) {
  if (forward <= 0.0 || strike <= 0.0 || maturity <= 0.0)
    throw InvalidInput("black_vega: need positive forward, strike, maturity");
  if (vol <= 0.0) return 0.0;
  const double sd = vol * std::sqrt(maturity);
  const double d1 = std::log(forward / strike) / sd + 0.5 * sd;
  return forward * norm_pdf(d1) * std::sqrt(maturity);
}

double black_implied_vol(double price, double forward, double strike,
                         double maturity, bool is_call) {
  if (maturity <= 0.0) throw InvalidInput("black_implied_vol: maturity must be positive");
  const double intrinsic =
      is_call ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
  const double upper = is_call ? forward : strike;
  if (price < intrinsic - 1e-12 || price > upper + 1e-12)
    throw InvalidInput("black_implied_vol: price violates no-arbitrage bounds");
  if (price <= intrinsic + 1e-14) return 0.0;

  constexpr double tol = 1e-10;
  double lo = 1e-8, hi = 1.0;
  while (black_price(forward, strike, hi, maturity, is_call) < price && hi < 50.0)
    hi *= 2.0;
  if (black_price(forward, strike, hi, maturity, is_call) < price - tol)
    throw NumericFailure("black_implied_vol: failed to bracket the root");

  double vol = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double diff = black_price(forward, strike, vol, maturity, is_call) - price;
    if (std::abs(diff) <= tol) return vol;
    if (diff > 0.0)
      hi = vol;
    else
      lo = vol;
    const double vega = black_vega(forward, strike, vol, maturity);
    double next = vega > 1e-14 ? vol - diff / vega : 0.5 * (lo + hi);
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);  // Newton left the bracket
    vol = next;
  }
  return vol;
}

}  // namespace jointcal
