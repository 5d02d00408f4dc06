#include "jointcal/payoffs.hpp"

#include <algorithm>
#include <cmath>

#include "jointcal/black_scholes.hpp"

namespace jointcal {

const char* kind_name(InstrumentKind k) {
  switch (k) {
    case InstrumentKind::SpxCall: return "spx_call";
    case InstrumentKind::SpxPut: return "spx_put";
    case InstrumentKind::VixCall: return "vix_call";
    case InstrumentKind::VixPut: return "vix_put";
    case InstrumentKind::VixFuture: return "vix_future";
    case InstrumentKind::SingularContract: return "singular";
  }
  return "?";
}

InstrumentKind kind_from_name(const std::string& name) {
  if (name == "spx_call") return InstrumentKind::SpxCall;
  if (name == "spx_put") return InstrumentKind::SpxPut;
  if (name == "vix_call") return InstrumentKind::VixCall;
  if (name == "vix_put") return InstrumentKind::VixPut;
  if (name == "vix_future") return InstrumentKind::VixFuture;
  if (name == "singular") return InstrumentKind::SingularContract;
  throw InvalidInput("unknown instrument kind '" + name + "'");
}

std::string Instrument::id() const {
  std::string s = kind_name(kind);
  s += "_" + std::to_string(static_cast<int>(std::lround(maturity * kDaysPerYear))) + "d";
  if (is_option())
    s += "_k" + std::to_string(static_cast<int>(std::lround(strike)));
  return s;
}

double vix_value(double x2, const VixSpec& spec) {
  const double v = std::max(x2, 0.0);
  return 100.0 * std::sqrt(2.0 * v / (spec.big_t - spec.t0));
}

double payoff_value(const Instrument& instr, const VixSpec& spec, double x1, double x2) {
  switch (instr.kind) {
    case InstrumentKind::SpxCall:
      return std::max(std::exp(x1) - instr.strike, 0.0);
    case InstrumentKind::SpxPut:
      return std::max(instr.strike - std::exp(x1), 0.0);
    case InstrumentKind::VixFuture:
      return vix_value(x2, spec);
    case InstrumentKind::VixCall:
      return std::max(vix_value(x2, spec) - instr.strike, 0.0);
    case InstrumentKind::VixPut:
      return std::max(instr.strike - vix_value(x2, spec), 0.0);
    case InstrumentKind::SingularContract: {
      const double v = std::max(x2, 0.0);
      return 1.0 - std::exp(-v * v);
    }
  }
  return 0.0;
}

Instrument vega_scale(Instrument instr, double implied_vol, double spot_or_future,
                      double vega_floor) {
  if (!instr.is_option()) {
    instr.vega_weight = 1.0;
    return instr;
  }
  if (implied_vol <= 0.0)
    throw InvalidInput("vega_scale: implied vol must be positive for " + instr.id());
  if (instr.maturity <= 0.0)
    throw InvalidInput("vega_scale: maturity must be positive for " + instr.id());
  const double vega = black_vega(spot_or_future, instr.strike, implied_vol, instr.maturity);
  instr.market_iv = implied_vol;
  instr.vega_weight = std::max(vega, vega_floor);
  return instr;
}

InstrumentSet InstrumentSet::organize(const std::vector<Instrument>& raw,
                                      const VixSpec& spec) {
  spec.validate();
  InstrumentSet set;
  const double tol = 0.5 / kDaysPerYear;

  std::vector<Instrument> spx_instr, vix_instr;
  Instrument future;
  bool have_future = false;
  for (const auto& ins : raw) {
    if (ins.market_price < 0.0)
      throw InvalidInput("instrument " + ins.id() + " has a negative price");
    if (ins.is_spx()) {
      if (ins.maturity <= 0.0 || ins.maturity > spec.big_t + tol)
        throw InvalidInput("SPX instrument " + ins.id() + " matures outside (0, T]");
      spx_instr.push_back(ins);
    } else if (ins.is_vix_option()) {
      if (std::abs(ins.maturity - spec.t0) > tol)
        throw InvalidInput("VIX option " + ins.id() + " must mature at t0");
      vix_instr.push_back(ins);
    } else if (ins.kind == InstrumentKind::VixFuture) {
      if (have_future) throw InvalidInput("more than one VIX future supplied");
      if (std::abs(ins.maturity - spec.t0) > tol)
        throw InvalidInput("VIX future must mature at t0");
      future = ins;
      have_future = true;
    } else {
      throw InvalidInput("the singular contract is appended automatically");
    }
  }

  for (auto& ins : spx_instr) {
    set.spx.push_back(set.count());
    set.all.push_back(ins);
  }
  if (have_future) {
    set.vix_future = set.count();
    set.all.push_back(future);
  }
  for (auto& ins : vix_instr) {
    set.vix.push_back(set.count());
    set.all.push_back(ins);
  }

  Instrument xi;
  xi.kind = InstrumentKind::SingularContract;
  xi.maturity = spec.big_t;
  xi.market_price = 0.0;
  xi.vega_weight = 1.0;
  set.singular = set.count();
  set.all.push_back(xi);
  return set;
}

}  // namespace jointcal
