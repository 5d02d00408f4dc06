#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "jointcal/black_scholes.hpp"
#include "jointcal/payoffs.hpp"

using namespace jointcal;

namespace {
const VixSpec kSpec{49.0 / 365.0, 79.0 / 365.0};

Instrument make(InstrumentKind kind, double strike, double maturity) {
  Instrument ins;
  ins.kind = kind;
  ins.strike = strike;
  ins.maturity = maturity;
  return ins;
}
}  // namespace

TEST_CASE("payoff values at pinned points") {
  const Instrument xi = make(InstrumentKind::SingularContract, 0, kSpec.big_t);
  CHECK(payoff_value(xi, kSpec, 0.0, 0.0) == 0.0);

  // 2 x2 / (T - t0) = 0.04 -> J = 20
  const double x2 = 0.02 * (kSpec.big_t - kSpec.t0);
  const Instrument fut = make(InstrumentKind::VixFuture, 0, kSpec.t0);
  CHECK(payoff_value(fut, kSpec, 0.0, x2) == doctest::Approx(20.0).epsilon(1e-12));

  const Instrument atm = make(InstrumentKind::SpxCall, 100, kSpec.t0);
  CHECK(payoff_value(atm, kSpec, std::log(100.0), 0.01) == doctest::Approx(0.0));

  // tiny negative x2 from numerics is clipped
  CHECK(payoff_value(fut, kSpec, 0.0, -1e-18) == 0.0);
}

TEST_CASE("payoffs are nonnegative and parity holds at payoff level") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux1(3.5, 5.5);
  std::uniform_real_distribution<double> ux2(0.0, 0.05);
  const Instrument call = make(InstrumentKind::VixCall, 20, kSpec.t0);
  const Instrument put = make(InstrumentKind::VixPut, 20, kSpec.t0);
  const Instrument fut = make(InstrumentKind::VixFuture, 0, kSpec.t0);
  const Instrument spx_c = make(InstrumentKind::SpxCall, 95, kSpec.t0);
  const Instrument spx_p = make(InstrumentKind::SpxPut, 95, kSpec.t0);
  const Instrument xi = make(InstrumentKind::SingularContract, 0, kSpec.big_t);

  for (int q = 0; q < 2000; ++q) {
    const double x1 = ux1(rng), x2 = ux2(rng);
    for (const auto& ins : {call, put, fut, spx_c, spx_p, xi})
      CHECK(payoff_value(ins, kSpec, x1, x2) >= 0.0);
    const double j = payoff_value(fut, kSpec, x1, x2);
    CHECK(payoff_value(call, kSpec, x1, x2) - payoff_value(put, kSpec, x1, x2) ==
          doctest::Approx(j - 20.0).epsilon(1e-12));
  }
}

TEST_CASE("vix-linked payoffs are nondecreasing in x2") {
  const Instrument call = make(InstrumentKind::VixCall, 25, kSpec.t0);
  const Instrument fut = make(InstrumentKind::VixFuture, 0, kSpec.t0);
  const Instrument xi = make(InstrumentKind::SingularContract, 0, kSpec.big_t);
  double prev_c = -1, prev_f = -1, prev_x = -1;
  for (int q = 0; q <= 100; ++q) {
    const double x2 = 0.0006 * q;
    const double c = payoff_value(call, kSpec, 0, x2);
    const double f = payoff_value(fut, kSpec, 0, x2);
    const double x = payoff_value(xi, kSpec, 0, x2);
    CHECK(c >= prev_c);
    CHECK(f >= prev_f);
    CHECK(x >= prev_x);
    prev_c = c;
    prev_f = f;
    prev_x = x;
  }
}

TEST_CASE("vega scaling") {
  SUBCASE("at-the-money call vega matches the closed form") {
    Instrument ins = make(InstrumentKind::SpxCall, 100, 1.0);
    ins = vega_scale(ins, 0.2, 100.0);
    // F phi(sigma sqrt(T)/2) sqrt(T), frozen from an independent evaluation
    const double expected = 100.0 * norm_pdf(0.1) * 1.0;
    CHECK(expected == doctest::Approx(39.69525474770118).epsilon(1e-10));
    CHECK(ins.vega_weight == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ins.scaled_market_price() == doctest::Approx(ins.market_price / expected));
  }
  SUBCASE("futures and the singular contract keep weight one") {
    Instrument fut = make(InstrumentKind::VixFuture, 0, kSpec.t0);
    fut = vega_scale(fut, 0.5, 30.0);
    CHECK(fut.vega_weight == 1.0);
    Instrument xi = make(InstrumentKind::SingularContract, 0, kSpec.big_t);
    xi = vega_scale(xi, 0.5, 30.0);
    CHECK(xi.vega_weight == 1.0);
  }
  SUBCASE("deep out-of-the-money quotes hit the vega floor") {
    Instrument ins = make(InstrumentKind::SpxCall, 500, 0.05);
    ins = vega_scale(ins, 0.1, 100.0);
    CHECK(ins.vega_weight == 0.01);
  }
  SUBCASE("nonpositive vol is rejected") {
    Instrument ins = make(InstrumentKind::SpxCall, 100, 1.0);
    CHECK_THROWS_AS(vega_scale(ins, 0.0, 100.0), InvalidInput);
  }
}

TEST_CASE("instrument set ordering and validation") {
  std::vector<Instrument> raw;
  raw.push_back(make(InstrumentKind::VixCall, 20, kSpec.t0));
  raw.push_back(make(InstrumentKind::SpxCall, 100, 44.0 / 365.0));
  raw.push_back(make(InstrumentKind::VixFuture, 0, kSpec.t0));
  raw.push_back(make(InstrumentKind::SpxCall, 95, kSpec.big_t));

  const InstrumentSet set = InstrumentSet::organize(raw, kSpec);
  CHECK(set.count() == 5);  // + singular
  CHECK(set.spx.size() == 2);
  CHECK(set.spx[0] == 0);
  CHECK(set.spx[1] == 1);
  CHECK(set.vix_future == 2);
  CHECK(set.vix.size() == 1);
  CHECK(set.vix[0] == 3);
  CHECK(set.singular == 4);
  CHECK(set.all[set.singular].kind == InstrumentKind::SingularContract);
  CHECK(set.all[set.singular].market_price == 0.0);
  CHECK(set.all[set.singular].maturity == doctest::Approx(kSpec.big_t));

  SUBCASE("VIX option off t0 is rejected") {
    auto bad = raw;
    bad.push_back(make(InstrumentKind::VixCall, 20, kSpec.big_t));
    CHECK_THROWS_AS(InstrumentSet::organize(bad, kSpec), InvalidInput);
  }
  SUBCASE("negative price is rejected") {
    auto bad = raw;
    bad[0].market_price = -1.0;
    CHECK_THROWS_AS(InstrumentSet::organize(bad, kSpec), InvalidInput);
  }
  SUBCASE("user-supplied singular contract is rejected") {
    auto bad = raw;
    bad.push_back(make(InstrumentKind::SingularContract, 0, kSpec.big_t));
    CHECK_THROWS_AS(InstrumentSet::organize(bad, kSpec), InvalidInput);
  }
}
