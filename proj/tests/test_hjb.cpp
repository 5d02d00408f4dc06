#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "jointcal/heston.hpp"
#include "jointcal/hjb.hpp"

using namespace jointcal;

namespace {

const double kDay = 1.0 / 365.0;
const VixSpec kSpec{49 * kDay, 79 * kDay};
const HestonParams kGenerating{0.6, 0.09, 0.4, -0.5};

struct Fixture {
  TimeGrid tgrid;
  SpatialGrid grid;
  InstrumentSet set;
  DiffusionSurface beta_bar;

  explicit Fixture(double step_days = 2.0, int n1 = 24, int n2 = 24,
                   bool heston_ref = true) {
    std::vector<Instrument> raw;
    Instrument spx;
    spx.kind = InstrumentKind::SpxCall;
    spx.strike = 100.0;
    spx.maturity = 44 * kDay;
    spx.market_iv = 0.3;
    spx.vega_weight = 10.0;
    raw.push_back(spx);
    Instrument fut;
    fut.kind = InstrumentKind::VixFuture;
    fut.maturity = kSpec.t0;
    raw.push_back(fut);
    Instrument vix;
    vix.kind = InstrumentKind::VixCall;
    vix.strike = 20.0;
    vix.maturity = kSpec.t0;
    vix.vega_weight = 2.0;
    raw.push_back(vix);
    set = InstrumentSet::organize(raw, kSpec);

    tgrid = build_time_grid(kSpec.big_t, step_days * kDay,
                            {44 * kDay, kSpec.t0, kSpec.big_t});
    GridConfig gc;
    gc.n_x1 = n1;
    gc.n_x2 = n2;
    gc.refine_steps = 4;
    grid = build_spatial_grid(gc, std::log(100.0), 0.0098, tgrid.n_nodes());
    if (heston_ref)
      beta_bar = reference_beta(ReferenceSpec::make_heston(kGenerating), tgrid,
                                grid, kSpec.big_t);
    else
      beta_bar = reference_beta(ReferenceSpec::make_constant({0.09, -0.01, 0.04}),
                                tgrid, grid, kSpec.big_t);
  }
};

}  // namespace

TEST_CASE("jump conditions") {
  Fixture fx;
  const GridPhase& ph = fx.grid.phase_for_node(fx.tgrid.n_steps());
  std::vector<double> lam(fx.set.count(), 0.0);

  SUBCASE("zero multipliers leave the slice untouched") {
    GridField phi(ph, 0.25);
    apply_jump_conditions(phi, ph, kSpec.big_t, lam, fx.set, kSpec, fx.grid.scale_k);
    for (double v : phi.v) CHECK(v == 0.25);
  }

  SUBCASE("singular jump at T reproduces the closed form") {
    GridField phi(ph, 0.0);
    lam[fx.set.singular] = 1.0;
    apply_jump_conditions(phi, ph, kSpec.big_t, lam, fx.set, kSpec, fx.grid.scale_k);
    for (int i = 0; i < ph.x1.n; i += 5)
      for (int j = 0; j < ph.y2.n; j += 3) {
        const double x2 = unscale_x2(ph.y2[j], fx.grid.scale_k);
        CHECK(phi.at(i, j) ==
              doctest::Approx(1.0 - std::exp(-x2 * x2)).epsilon(1e-14));
      }
  }

  SUBCASE("vix future jump adds the scaled payoff nodewise") {
    const int t0_node = fx.tgrid.index_of(kSpec.t0);
    const GridPhase& ph0 = fx.grid.phase_for_node(t0_node);
    GridField phi(ph0, 0.0);
    lam[fx.set.vix_future] = 2.0;
    apply_jump_conditions(phi, ph0, kSpec.t0, lam, fx.set, kSpec, fx.grid.scale_k);
    for (int i = 0; i < ph0.x1.n; i += 7)
      for (int j = 0; j < ph0.y2.n; j += 2) {
        const double x2 = unscale_x2(ph0.y2[j], fx.grid.scale_k);
        const double j_val = 100.0 * std::sqrt(2.0 * x2 / (kSpec.big_t - kSpec.t0));
        CHECK(phi.at(i, j) == doctest::Approx(2.0 * j_val).epsilon(1e-12));
      }
  }
}

TEST_CASE("operator stencil on reference fields") {
  Fixture fx;
  const GridPhase& ph = fx.grid.coarse;
  const double k = fx.grid.scale_k;

  Sym2Field beta(ph);
  for (int i = 0; i < ph.x1.n; ++i)
    for (int j = 0; j < ph.y2.n; ++j) beta.set(i, j, {1.0, 0.0, 0.0});
  const Eigen::SparseMatrix<double> L = assemble_hjb_operator(beta, ph, k);

  auto apply = [&](const GridField& f) {
    Eigen::Map<const Eigen::VectorXd> v(f.v.data(), f.v.size());
    Eigen::VectorXd out = L * v;
    GridField g = f;
    g.v.assign(out.data(), out.data() + out.size());
    return g;
  };

  SUBCASE("constants are annihilated") {
    GridField f(ph, 3.0);
    const GridField out = apply(f);
    for (int i = 1; i < ph.x1.n - 1; ++i)
      for (int j = 1; j < ph.y2.n - 1; ++j)
        CHECK(out.at(i, j) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("linear field sees the drift only") {
    GridField f(ph);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j) f.at(i, j) = ph.x1[i];
    const GridField out = apply(f);
    // L x1 = -b11/2 = -1/2
    for (int i = 1; i < ph.x1.n - 1; ++i)
      for (int j = 1; j < ph.y2.n - 1; ++j)
        CHECK(out.at(i, j) == doctest::Approx(-0.5).epsilon(1e-9));
  }

  SUBCASE("quadratic field matches a hand-coded stencil") {
    GridField f(ph);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j) f.at(i, j) = ph.x1[i] * ph.x1[i];
    const GridField out = apply(f);
    const double h1 = ph.x1.step;
    for (int i = 1; i < ph.x1.n - 1; ++i)
      for (int j = 1; j < ph.y2.n - 1; ++j) {
        const double x = ph.x1[i];
        const double d1 = ((x + h1) * (x + h1) - (x - h1) * (x - h1)) / (2 * h1);
        const double d11 =
            ((x + h1) * (x + h1) - 2 * x * x + (x - h1) * (x - h1)) / (h1 * h1);
        CHECK(out.at(i, j) == doctest::Approx(-0.5 * d1 + 0.5 * d11).epsilon(1e-9));
      }
  }

  SUBCASE("cross term uses the four-corner formula") {
    Sym2Field b2(ph);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j) b2.set(i, j, {1.0, 0.3, 0.5});
    const Eigen::SparseMatrix<double> L2 = assemble_hjb_operator(b2, ph, k);
    GridField f(ph);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : f.v) v = u(rng);
    Eigen::Map<const Eigen::VectorXd> v(f.v.data(), f.v.size());
    const Eigen::VectorXd out = L2 * v;
    const double h1 = ph.x1.step, h2 = ph.y2.step;
    const int i = 5, j = 7;
    const double expect =
        -0.5 * (f.at(i + 1, j) - f.at(i - 1, j)) / (2 * h1) -
        0.5 * k * (f.at(i, j + 1) - f.at(i, j - 1)) / (2 * h2) +
        0.5 * (f.at(i + 1, j) - 2 * f.at(i, j) + f.at(i - 1, j)) / (h1 * h1) +
        0.3 * k *
            (f.at(i + 1, j + 1) + f.at(i - 1, j - 1) - f.at(i + 1, j - 1) -
             f.at(i - 1, j + 1)) /
            (4 * h1 * h2) +
        0.5 * 0.5 * k * k *
            (f.at(i, j + 1) - 2 * f.at(i, j) + f.at(i, j - 1)) / (h2 * h2);
    CHECK(out[i * ph.y2.n + j] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("policy iteration at a fixed point and near one") {
  Fixture fx;
  const GridPhase& ph = fx.grid.coarse;
  ImplicitStepSolver solver(ph, fx.grid.scale_k);
  HjbConfig cfg;

  SUBCASE("zero terminal slice is a fixed point") {
    GridField zero(ph, 0.0);
    const PolicyStepResult res = policy_iteration_step(
        zero, zero, fx.beta_bar.slices[0], ph, fx.grid.scale_k, kDay, cfg, solver);
    CHECK(res.iters == 1);
    for (double v : res.phi.v) CHECK(v == 0.0);
    for (int i = 0; i < ph.x1.n; i += 5)
      for (int j = 0; j < ph.y2.n; j += 5) {
        const Sym2 b = res.beta_star.at(i, j);
        const Sym2 ref = fx.beta_bar.slices[0].at(i, j);
        CHECK(b.e11 == doctest::Approx(ref.e11).epsilon(1e-12));
        CHECK(b.e22 == doctest::Approx(ref.e22).epsilon(1e-12));
      }
  }

  SUBCASE("linear-in-x1 slice converges in a few iterations") {
    GridField lin(ph);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j) lin.at(i, j) = 0.05 * ph.x1[i];
    const PolicyStepResult res = policy_iteration_step(
        lin, lin, fx.beta_bar.slices[0], ph, fx.grid.scale_k, kDay, cfg, solver);
    CHECK(res.iters <= 3);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j)
        CHECK(res.beta_star.at(i, j).min_eigenvalue() >= -1e-10);
  }

  SUBCASE("iteration cap produces a named failure") {
    HjbConfig tight;
    tight.eps2 = 1e-30;  // unreachable
    tight.policy_cap = 2;
    GridField lin(ph);
    for (int i = 0; i < ph.x1.n; ++i)
      for (int j = 0; j < ph.y2.n; ++j) lin.at(i, j) = 0.5 * ph.x1[i];
    CHECK_THROWS_AS(policy_iteration_step(lin, lin, fx.beta_bar.slices[0], ph,
                                          fx.grid.scale_k, kDay, tight, solver),
                    NumericFailure);
  }
}

TEST_CASE("boundary rows freeze the normal second difference") {
  Fixture fx;
  const GridPhase& ph = fx.grid.coarse;
  ImplicitStepSolver solver(ph, fx.grid.scale_k);

  // quadratic terminal slice; the solve must reproduce its second differences
  // on the edges and its value on x2 = 0
  GridField psi(ph);
  for (int i = 0; i < ph.x1.n; ++i)
    for (int j = 0; j < ph.y2.n; ++j)
      psi.at(i, j) = 0.3 * ph.x1[i] * ph.x1[i] + 0.1 * ph.y2[j] * ph.y2[j] +
                     0.05 * ph.x1[i] * ph.y2[j];
  solver.factorize(fx.beta_bar.slices[0], kDay);
  const GridField phi = solver.solve(psi, psi);

  const int n1 = ph.x1.n, n2 = ph.y2.n;
  for (int i = 0; i < n1; ++i)
    CHECK(phi.at(i, 0) == doctest::Approx(psi.at(i, 0)).epsilon(1e-10));
  for (int j = 1; j < n2; ++j) {
    const double lhs = phi.at(0, j) - 2 * phi.at(1, j) + phi.at(2, j);
    const double rhs = psi.at(0, j) - 2 * psi.at(1, j) + psi.at(2, j);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    const double lhs2 =
        phi.at(n1 - 1, j) - 2 * phi.at(n1 - 2, j) + phi.at(n1 - 3, j);
    const double rhs2 =
        psi.at(n1 - 1, j) - 2 * psi.at(n1 - 2, j) + psi.at(n1 - 3, j);
    CHECK(lhs2 == doctest::Approx(rhs2).epsilon(1e-8));
  }
  for (int i = 1; i < n1 - 1; ++i) {
    const double lhs =
        phi.at(i, n2 - 1) - 2 * phi.at(i, n2 - 2) + phi.at(i, n2 - 3);
    const double rhs =
        psi.at(i, n2 - 1) - 2 * psi.at(i, n2 - 2) + psi.at(i, n2 - 3);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }
}

TEST_CASE("backward solve with zero multipliers is exactly zero") {
  Fixture fx;
  std::vector<double> lam(fx.set.count(), 0.0);
  const HjbSolution sol = solve_hjb_backward(lam, fx.beta_bar, fx.tgrid, fx.grid,
                                             fx.set, kSpec, {});
  CHECK(sol.phi_at_origin == 0.0);
  for (const auto& slice : sol.phi)
    for (double v : slice.v) CHECK(std::abs(v) <= 1e-12);
  for (int q = 0; q < sol.beta_star.n_intervals(); q += 9) {
    const Sym2Field& b = sol.beta_star.slices[q];
    for (int i = 0; i < b.n1(); i += 6)
      for (int j = 0; j < b.n2(); j += 6)
        CHECK(b.at(i, j).min_eigenvalue() >= -1e-8);
  }
}

TEST_CASE("singular multiplier drives a positive, increasing value") {
  Fixture fx;
  double prev = 0.0;
  for (double lam_xi : {0.5, 1.0, 2.0}) {
    std::vector<double> lam(fx.set.count(), 0.0);
    lam[fx.set.singular] = lam_xi;
    const HjbSolution sol = solve_hjb_backward(lam, fx.beta_bar, fx.tgrid,
                                               fx.grid, fx.set, kSpec, {});
    CHECK(sol.phi_at_origin > prev);
    prev = sol.phi_at_origin;
    for (int q = 0; q < sol.beta_star.n_intervals(); q += 7) {
      const Sym2Field& b = sol.beta_star.slices[q];
      for (int i = 0; i < b.n1(); i += 5)
        for (int j = 0; j < b.n2(); j += 5)
          CHECK(b.at(i, j).min_eigenvalue() >= -1e-8);
    }
  }
}

TEST_CASE("value is convex in the multipliers") {
  Fixture fx(4.0, 16, 16);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.004, 0.004);
  const int n = fx.set.count();
  HjbConfig cfg;
  cfg.eps2 = 1e-7;  // the 1e-6 midpoint slack tolerates this
  cfg.policy_cap = 100;
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<double> la(n), lb(n), lm(n);
    for (int q = 0; q < n; ++q) {
      la[q] = u(rng);
      lb[q] = u(rng);
      lm[q] = 0.5 * (la[q] + lb[q]);
    }
    const double fa =
        solve_hjb_backward(la, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, cfg)
            .phi_at_origin;
    const double fb =
        solve_hjb_backward(lb, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, cfg)
            .phi_at_origin;
    const double fm =
        solve_hjb_backward(lm, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, cfg)
            .phi_at_origin;
    CHECK(fm <= 0.5 * (fa + fb) + 1e-6);
  }
}

TEST_CASE("tightening the policy tolerance changes the value marginally") {
  Fixture fx;
  std::vector<double> lam(fx.set.count(), 0.0);
  lam[fx.set.singular] = 1.0;
  lam[0] = 0.002;
  HjbConfig loose;
  loose.eps2 = 1e-6;
  HjbConfig tight;
  tight.eps2 = 1e-10;
  const double v1 =
      solve_hjb_backward(lam, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, loose)
          .phi_at_origin;
  const double v2 =
      solve_hjb_backward(lam, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, tight)
          .phi_at_origin;
  CHECK(std::abs(v1 - v2) <= 1e-6);
}

TEST_CASE("time refinement shows first-order consistency") {
  // halving dt should roughly halve the change in phi(0, X0)
  auto value_at = [&](double step_days) {
    Fixture fx(step_days, 20, 20);
    std::vector<double> lam(fx.set.count(), 0.0);
    lam[fx.set.singular] = 1.0;
    return solve_hjb_backward(lam, fx.beta_bar, fx.tgrid, fx.grid, fx.set, kSpec, {})
        .phi_at_origin;
  };
  const double v4 = value_at(4.0);
  const double v2 = value_at(2.0);
  const double v1 = value_at(1.0);
  const double d42 = std::abs(v4 - v2);
  const double d21 = std::abs(v2 - v1);
  CHECK(d21 <= 0.75 * d42);  // contraction consistent with first order
}
