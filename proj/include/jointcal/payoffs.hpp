#pragma once

#include <string>
#include <vector>

#include "jointcal/common.hpp"

namespace jointcal {

enum class InstrumentKind { SpxCall, SpxPut, VixCall, VixPut, VixFuture, SingularContract };

const char* kind_name(InstrumentKind k);
InstrumentKind kind_from_name(const std::string& name);

// VIX window: the option/futures expiry t0 and the variance horizon T
// (T = t0 + 30 days in market use).
struct VixSpec {
  double t0 = 0.0;     // years
  double big_t = 0.0;  // years

  void validate() const {
    if (!(0.0 < t0 && t0 < big_t))
      throw InvalidInput("VixSpec: need 0 < t0 < T");
  }
};

// The model VIX at t0: 100 * sqrt(2 x2 / (T - t0)). Tiny negative x2 from
// numerics is clipped before the square root.
double vix_value(double x2, const VixSpec& spec);

struct Instrument {
  InstrumentKind kind = InstrumentKind::SpxCall;
  double strike = 0.0;        // unused for VixFuture / SingularContract
  double maturity = 0.0;      // years
  double market_price = 0.0;
  double market_iv = 0.0;     // quote implied vol, used for the vega weight
  double vega_weight = 1.0;

  bool is_option() const {
    return kind != InstrumentKind::VixFuture && kind != InstrumentKind::SingularContract;
  }
  bool is_spx() const {
    return kind == InstrumentKind::SpxCall || kind == InstrumentKind::SpxPut;
  }
  bool is_vix_option() const {
    return kind == InstrumentKind::VixCall || kind == InstrumentKind::VixPut;
  }
  std::string id() const;

  double scaled_market_price() const { return market_price / vega_weight; }
};

// Payoff on the physical state (x1, x2); nonnegative by construction.
double payoff_value(const Instrument& instr, const VixSpec& spec, double x1, double x2);

// Fills vega_weight from the quote's implied vol: Black-Scholes vega on the
// forward for SPX options, Black vega on the futures level for VIX options.
// Futures and the singular contract keep weight 1.
Instrument vega_scale(Instrument instr, double implied_vol, double spot_or_future,
                      double vega_floor = 0.01);

// Calibration instrument set in the fixed multiplier order:
// SPX options (input order), VIX future, VIX options (input order),
// singular contract.
struct InstrumentSet {
  std::vector<Instrument> all;
  std::vector<int> spx;    // indices into all
  int vix_future = -1;
  std::vector<int> vix;    // VIX option indices
  int singular = -1;

  int count() const { return static_cast<int>(all.size()); }

  // Validates maturities against the spec, orders instruments and appends
  // the singular contract (price 0, maturity T).
  static InstrumentSet organize(const std::vector<Instrument>& raw, const VixSpec& spec);
};

}  // namespace jointcal
