#include "jointcal/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "jointcal/hjb.hpp"

namespace jointcal {

namespace {

// Tridiagonal line solve where the first and last rows may reach two nodes
// into the interior (the frozen-curvature boundary rows):
//   first row:  f.b u0 + f.c u1 + f.d u2 = f.r
//   row i:      a[i] u_{i-1} + b[i] u_i + c[i] u_{i+1} = r[i], 0 < i < n-1
//   last row:   l.b u_{n-1} + l.c u_{n-2} + l.d u_{n-3} = l.r
struct EdgeRow {
  double b = 1.0, c = 0.0, d = 0.0, r = 0.0;
};

void solve_line(int n, const std::vector<double>& a, const std::vector<double>& b,
                const std::vector<double>& c, std::vector<double>& r,
                const EdgeRow& first, const EdgeRow& last, std::vector<double>& u,
                std::vector<double>& scratch) {
  // eliminate u0 and u_{n-1}
  double b1 = b[1], c1 = c[1], r1 = r[1];
  b1 -= a[1] * first.c / first.b;
  c1 -= a[1] * first.d / first.b;
  r1 -= a[1] * first.r / first.b;

  double bm = b[n - 2], am = a[n - 2], rm = r[n - 2];
  bm -= c[n - 2] * last.c / last.b;
  am -= c[n - 2] * last.d / last.b;
  rm -= c[n - 2] * last.r / last.b;

  // Thomas on u1..u_{n-2}
  std::vector<double>& cp = scratch;
  cp.resize(n);
  double beta = b1;
  u[1] = r1 / beta;
  cp[1] = c1 / beta;
  for (int i = 2; i <= n - 2; ++i) {
    const double ai = (i == n - 2) ? am : a[i];
    const double bi = (i == n - 2) ? bm : b[i];
    const double ri = (i == n - 2) ? rm : r[i];
    beta = bi - ai * cp[i - 1];
    cp[i] = c[i] / beta;
    u[i] = (ri - ai * u[i - 1]) / beta;
  }
  for (int i = n - 3; i >= 1; --i) u[i] -= cp[i] * u[i + 1];

  u[0] = (first.r - first.c * u[1] - first.d * u[2]) / first.b;
  u[n - 1] = (last.r - last.c * u[n - 2] - last.d * u[n - 3]) / last.b;
}

// One backward Douglas step for one payoff field. g is the payoff evaluated
// on the current phase and supplies the boundary data.
void douglas_step(GridField& u, const Sym2Field& beta, const GridPhase& g,
                  double scale_k, double dt, const GridField& bc) {
  const int n1 = g.x1.n, n2 = g.y2.n;
  const double h1 = g.x1.step, h2 = g.y2.step;
  const double k = scale_k;
  const double theta = 0.5;

  GridField a1u(g), a2u(g), y0(g);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const Sym2 b = beta.at(i, j);
      double v = 0.0;
      if (i > 0 && i < n1 - 1) {
        const double c1 = -0.5 * b.e11, d1 = 0.5 * b.e11;
        const double du = (u.at(i + 1, j) - u.at(i - 1, j)) / (2 * h1);
        const double d2u = (u.at(i + 1, j) - 2 * u.at(i, j) + u.at(i - 1, j)) / (h1 * h1);
        a1u.at(i, j) = c1 * du + d1 * d2u;
        v += a1u.at(i, j);
      }
      if (j > 0 && j < n2 - 1) {
        const double c2 = -0.5 * k * b.e11, d2 = 0.5 * k * k * b.e22;
        const double du = (u.at(i, j + 1) - u.at(i, j - 1)) / (2 * h2);
        const double d2u = (u.at(i, j + 1) - 2 * u.at(i, j) + u.at(i, j - 1)) / (h2 * h2);
        a2u.at(i, j) = c2 * du + d2 * d2u;
        v += a2u.at(i, j);
      }
      if (i > 0 && i < n1 - 1 && j > 0 && j < n2 - 1) {
        const double cx = k * b.e12;
        v += cx *
             (u.at(i + 1, j + 1) + u.at(i - 1, j - 1) - u.at(i + 1, j - 1) -
              u.at(i - 1, j + 1)) /
             (4 * h1 * h2);
      }
      y0.at(i, j) = u.at(i, j) + dt * v;
    }

  // stage 1: implicit in x1, one line per j
  GridField y1(g);
  {
    std::vector<double> a(n1), b(n1), c(n1), r(n1), sol(n1), scratch(n1);
    for (int j = 0; j < n2; ++j) {
      for (int i = 1; i < n1 - 1; ++i) {
        const Sym2 bt = beta.at(i, j);
        const double c1 = -0.5 * bt.e11, d1 = 0.5 * bt.e11;
        a[i] = -theta * dt * (-c1 / (2 * h1) + d1 / (h1 * h1));
        b[i] = 1.0 + theta * dt * 2.0 * d1 / (h1 * h1);
        c[i] = -theta * dt * (c1 / (2 * h1) + d1 / (h1 * h1));
        r[i] = y0.at(i, j) - theta * dt * a1u.at(i, j);
      }
      EdgeRow first{1.0, -2.0, 1.0, bc.at(0, j) - 2 * bc.at(1, j) + bc.at(2, j)};
      EdgeRow last{1.0, -2.0, 1.0,
                   bc.at(n1 - 1, j) - 2 * bc.at(n1 - 2, j) + bc.at(n1 - 3, j)};
      solve_line(n1, a, b, c, r, first, last, sol, scratch);
      for (int i = 0; i < n1; ++i) y1.at(i, j) = sol[i];
    }
  }

  // stage 2: implicit in y2, one line per i
  {
    std::vector<double> a(n2), b(n2), c(n2), r(n2), sol(n2), scratch(n2);
    for (int i = 0; i < n1; ++i) {
      for (int j = 1; j < n2 - 1; ++j) {
        const Sym2 bt = beta.at(i, j);
        const double c2 = -0.5 * k * bt.e11, d2 = 0.5 * k * k * bt.e22;
        a[j] = -theta * dt * (-c2 / (2 * h2) + d2 / (h2 * h2));
        b[j] = 1.0 + theta * dt * 2.0 * d2 / (h2 * h2);
        c[j] = -theta * dt * (c2 / (2 * h2) + d2 / (h2 * h2));
        r[j] = y1.at(i, j) - theta * dt * a2u.at(i, j);
      }
      EdgeRow first{1.0, 0.0, 0.0, bc.at(i, 0)};  // Dirichlet on x2 = 0
      EdgeRow last{1.0, -2.0, 1.0,
                   bc.at(i, n2 - 1) - 2 * bc.at(i, n2 - 2) + bc.at(i, n2 - 3)};
      solve_line(n2, a, b, c, r, first, last, sol, scratch);
      for (int j = 0; j < n2; ++j) u.at(i, j) = sol[j];
    }
  }
}

GridField evaluate_payoff(const PayoffFn& payoff, const GridPhase& g, double scale_k) {
  GridField f(g);
  for (int i = 0; i < g.x1.n; ++i) {
    const double x1 = g.x1[i];
    for (int j = 0; j < g.y2.n; ++j)
      f.at(i, j) = payoff(x1, unscale_x2(g.y2[j], scale_k));
  }
  return f;
}

struct MarchItem {
  int maturity_node = -1;
  PayoffFn payoff;
  bool active = false;
  GridField u;    // current value slice
  GridField psi;  // boundary reference
};

// Shared backward march. Implicit backend: boundary reference is the item's
// own slice, refreshed at every event node (matches the nonlinear solver's
// boundary treatment). ADI backend: boundary reference is the payoff itself,
// re-evaluated per phase.
std::vector<GridField> march_payoffs(const DiffusionSurface& beta,
                                     const TimeGrid& tgrid, const SpatialGrid& grid,
                                     std::vector<MarchItem>& items,
                                     PdeBackend backend) {
  const int n_steps = tgrid.n_steps();
  if (beta.n_intervals() != n_steps)
    throw InvalidInput("pricing: surface interval count mismatch");

  ImplicitStepSolver coarse_solver(grid.coarse, grid.scale_k);
  ImplicitStepSolver fine_solver(grid.fine_enabled() ? grid.fine : grid.coarse,
                                 grid.scale_k);

  for (int k = n_steps - 1; k >= 0; --k) {
    const GridPhase& ph_next = grid.phase_for_node(k + 1);
    for (auto& item : items) {
      if (item.maturity_node == k + 1) {
        item.u = evaluate_payoff(item.payoff, ph_next, grid.scale_k);
        item.psi = item.u;
        item.active = true;
      } else if (item.active && backend == PdeBackend::Implicit &&
                 tgrid.is_event[k + 1]) {
        item.psi = item.u;
      }
    }
    const bool crossing = grid.node_is_fine(k + 1) && !grid.node_is_fine(k);
    const GridPhase& ph = grid.phase_for_interval(k);
    if (crossing) {
      for (auto& item : items) {
        if (!item.active) continue;
        item.u = regrid(item.u, grid.fine, grid.coarse);
        if (backend == PdeBackend::Implicit)
          item.psi = regrid(item.psi, grid.fine, grid.coarse);
      }
    }
    if (backend == PdeBackend::Adi) {
      for (auto& item : items)
        if (item.active && (crossing || item.maturity_node == k + 1))
          item.psi = evaluate_payoff(item.payoff, ph, grid.scale_k);
    }

    const double dt = tgrid.dt(k);
    if (backend == PdeBackend::Implicit) {
      ImplicitStepSolver& solver = grid.node_is_fine(k) ? fine_solver : coarse_solver;
      bool factorized = false;
      for (auto& item : items) {
        if (!item.active) continue;
        if (!factorized) {
          solver.factorize(beta.slices[k], dt);
          factorized = true;
        }
        item.u = solver.solve(item.u, item.psi);
      }
    } else {
      for (auto& item : items)
        if (item.active)
          douglas_step(item.u, beta.slices[k], ph, grid.scale_k, dt, item.psi);
    }
  }

  std::vector<GridField> out;
  out.reserve(items.size());
  for (auto& item : items) {
    if (!item.active) throw InvalidInput("pricing: payoff never activated");
    out.push_back(std::move(item.u));
  }
  return out;
}

}  // namespace

GridField solve_pricing_pde(const DiffusionSurface& beta, const TimeGrid& tgrid,
                            const SpatialGrid& grid, const PayoffFn& payoff,
                            int maturity_node, PdeBackend backend) {
  if (maturity_node <= 0 || maturity_node > tgrid.n_steps())
    throw InvalidInput("solve_pricing_pde: maturity is not a usable grid node");
  std::vector<MarchItem> items(1);
  items[0].maturity_node = maturity_node;
  items[0].payoff = payoff;
  return std::move(march_payoffs(beta, tgrid, grid, items, backend)[0]);
}

double price_at_origin(const GridField& t0_slice, const SpatialGrid& grid) {
  return t0_slice.at(grid.i0, grid.j0_coarse);
}

std::vector<PriceQuote> model_prices(const DiffusionSurface& beta_star,
                                     const TimeGrid& tgrid, const SpatialGrid& grid,
                                     const InstrumentSet& instruments,
                                     const VixSpec& spec, PdeBackend backend) {
  std::vector<MarchItem> items(instruments.count());
  for (int q = 0; q < instruments.count(); ++q) {
    const Instrument& ins = instruments.all[q];
    items[q].maturity_node = tgrid.index_of(ins.maturity);
    items[q].payoff = [ins, &spec](double x1, double x2) {
      return payoff_value(ins, spec, x1, x2);
    };
  }
  std::vector<GridField> slices = march_payoffs(beta_star, tgrid, grid, items, backend);

  std::vector<PriceQuote> quotes(instruments.count());
  double model_future = 0.0;
  if (instruments.vix_future >= 0)
    model_future = price_at_origin(slices[instruments.vix_future], grid);

  const double spot = std::exp(grid.coarse.x1[grid.i0]);
  for (int q = 0; q < instruments.count(); ++q) {
    const Instrument& ins = instruments.all[q];
    PriceQuote& pq = quotes[q];
    pq.instrument = q;
    pq.model_price = price_at_origin(slices[q], grid);
    pq.model_price_scaled = pq.model_price / ins.vega_weight;
    if (ins.is_option()) {
      const double fwd = ins.is_spx() ? spot : model_future;
      const bool call = ins.kind == InstrumentKind::SpxCall ||
                        ins.kind == InstrumentKind::VixCall;
      if (fwd > 0.0) {
        try {
          pq.model_iv = black_implied_vol(pq.model_price, fwd, ins.strike,
                                          ins.maturity, call);
        } catch (const Error&) {
          pq.model_iv = std::nullopt;  // price outside arbitrage bounds
        }
      }
    }
  }
  return quotes;
}

namespace {

using cplx = std::complex<double>;

// log characteristic function of ln S_T under Heston, evaluated at complex z
cplx heston_log_cf(const HestonParams& p, double tau, double v0, cplx z) {
  const cplx i(0.0, 1.0);
  const cplx bhat = p.kappa - i * p.eta * p.omega * z;
  const cplx d = std::sqrt(bhat * bhat + p.omega * p.omega * (z * z + i * z));
  const cplx g = (bhat - d) / (bhat + d);
  const cplx e = std::exp(-d * tau);
  const cplx C = p.kappa * p.theta / (p.omega * p.omega) *
                 ((bhat - d) * tau - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
  const cplx D = (bhat - d) / (p.omega * p.omega) * (1.0 - e) / (1.0 - g * e);
  return C + D * v0;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double whole, double tol,
               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0)
    throw NumericFailure("heston_cf_call: quadrature did not converge");
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double heston_cf_call(const HestonParams& p, double forward, double strike,
                      double maturity, double v0) {
  p.validate();
  if (forward <= 0.0 || strike <= 0.0 || maturity <= 0.0 || v0 < 0.0)
    throw InvalidInput("heston_cf_call: bad forward/strike/maturity/v0");

  const double kmoney = std::log(forward / strike);
  auto integrand = [&](double u) {
    const cplx z(u, -0.5);
    const cplx val = std::exp(heston_log_cf(p, maturity, v0, z) +
                              cplx(0.0, u * kmoney));
    return std::real(val) / (u * u + 0.25);
  };
  // the integrand decays like a Gaussian in u; 200 covers our maturities
  const double integral = adaptive_simpson(integrand, 0.0, 200.0, 1e-11);
  const double call = forward - std::sqrt(forward * strike) / M_PI * integral;
  return call;
}

}  // namespace jointcal
