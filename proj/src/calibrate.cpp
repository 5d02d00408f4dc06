#include "jointcal/calibrate.hpp"
#include <limits>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace jointcal {

Multipliers Multipliers::zeros(const InstrumentSet& set) {
  Multipliers m;
  m.lambda_spx.assign(set.spx.size(), 0.0);
  m.lambda_vix.assign(set.vix.size(), 0.0);
  return m;
}

std::vector<double> Multipliers::flatten(const InstrumentSet& set) const {
  if (lambda_spx.size() != set.spx.size() || lambda_vix.size() != set.vix.size())
    throw InvalidInput("Multipliers: size mismatch with instrument set");
  std::vector<double> flat(set.count(), 0.0);
  for (size_t q = 0; q < set.spx.size(); ++q) flat[set.spx[q]] = lambda_spx[q];
  if (set.vix_future >= 0) flat[set.vix_future] = lambda_vix_f;
  for (size_t q = 0; q < set.vix.size(); ++q) flat[set.vix[q]] = lambda_vix[q];
  flat[set.singular] = lambda_xi;
  return flat;
}

Multipliers Multipliers::unflatten(const std::vector<double>& flat,
                                   const InstrumentSet& set) {
  if (static_cast<int>(flat.size()) != set.count())
    throw InvalidInput("Multipliers: flat vector length mismatch");
  Multipliers m;
  for (int idx : set.spx) m.lambda_spx.push_back(flat[idx]);
  if (set.vix_future >= 0) m.lambda_vix_f = flat[set.vix_future];
  for (int idx : set.vix) m.lambda_vix.push_back(flat[idx]);
  m.lambda_xi = flat[set.singular];
  return m;
}

double Multipliers::max_abs() const {
  double m = std::max(std::abs(lambda_vix_f), std::abs(lambda_xi));
  for (double v : lambda_spx) m = std::max(m, std::abs(v));
  for (double v : lambda_vix) m = std::max(m, std::abs(v));
  return m;
}

void CalibrationConfig::validate() const {
  if (eps1 <= 0.0 || eps2 <= 0.0)
    throw InvalidInput("calibration: eps1 and eps2 must be positive");
  if (bw_t < 1 || bw_x1 < 1 || bw_x2 < 1 || bw_t % 2 == 0 || bw_x1 % 2 == 0 ||
      bw_x2 % 2 == 0)
    throw InvalidInput("calibration: smoothing bandwidths must be odd positive");
  if (inner_early_stop < 1)
    throw InvalidInput("calibration: inner_early_stop must be at least 1");
  if (max_rounds < 1) throw InvalidInput("calibration: max_rounds must be at least 1");
}

std::pair<double, HjbSolution> dual_objective(const Problem& p,
                                              const std::vector<double>& multipliers) {
  HjbSolution hjb = solve_hjb_backward(multipliers, p.beta_bar, p.tgrid, p.grid,
                                       p.instruments, p.vix, p.hjb);
  double value = -hjb.phi_at_origin;
  for (int q = 0; q < p.instruments.count(); ++q)
    value += multipliers[q] * p.instruments.all[q].scaled_market_price();
  return {value, std::move(hjb)};
}

std::vector<double> gradients(const Problem& p, const HjbSolution& hjb) {
  const std::vector<PriceQuote> quotes = model_prices(
      hjb.beta_star, p.tgrid, p.grid, p.instruments, p.vix, p.backend);
  std::vector<double> g(p.instruments.count());
  for (int q = 0; q < p.instruments.count(); ++q)
    g[q] = p.instruments.all[q].scaled_market_price() - quotes[q].model_price_scaled;
  return g;
}

namespace {

// centred moving average along one axis of a stack of fields, truncated and
// renormalised at the edges
void average_time(std::vector<GridField*> fields, int bw) {
  if (bw <= 1 || fields.size() <= 1) return;
  const int half = bw / 2;
  const int n = static_cast<int>(fields.size());
  std::vector<GridField> orig(n);
  for (int k = 0; k < n; ++k) orig[k] = *fields[k];
  for (int k = 0; k < n; ++k) {
    const int lo = std::max(0, k - half), hi = std::min(n - 1, k + half);
    GridField& out = *fields[k];
    std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int q = lo; q <= hi; ++q)
      for (size_t idx = 0; idx < out.v.size(); ++idx) out.v[idx] += orig[q].v[idx];
    const double w = 1.0 / (hi - lo + 1);
    for (auto& x : out.v) x *= w;
  }
}

void average_x1(GridField& f, int bw) {
  if (bw <= 1) return;
  const int half = bw / 2;
  GridField orig = f;
  for (int i = 0; i < f.n1; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(f.n1 - 1, i + half);
    const double w = 1.0 / (hi - lo + 1);
    for (int j = 0; j < f.n2; ++j) {
      double s = 0.0;
      for (int q = lo; q <= hi; ++q) s += orig.at(q, j);
      f.at(i, j) = s * w;
    }
  }
}

void average_x2(GridField& f, int bw) {
  if (bw <= 1) return;
  const int half = bw / 2;
  GridField orig = f;
  for (int j = 0; j < f.n2; ++j) {
    const int lo = std::max(0, j - half), hi = std::min(f.n2 - 1, j + half);
    const double w = 1.0 / (hi - lo + 1);
    for (int i = 0; i < f.n1; ++i) {
      double s = 0.0;
      for (int q = lo; q <= hi; ++q) s += orig.at(i, q);
      f.at(i, j) = s * w;
    }
  }
}

}  // namespace

DiffusionSurface smooth_beta(const DiffusionSurface& surf, const SpatialGrid& grid,
                             int bw_t, int bw_x1, int bw_x2) {
  DiffusionSurface out = surf;
  const int n = out.n_intervals();

  // time averaging within contiguous blocks sharing a phase
  int block_start = 0;
  while (block_start < n) {
    int block_end = block_start;
    while (block_end + 1 < n &&
           grid.node_is_fine(block_end + 1) == grid.node_is_fine(block_start))
      ++block_end;
    for (auto component : {&Sym2Field::b11, &Sym2Field::b12, &Sym2Field::b22}) {
      std::vector<GridField*> stack;
      for (int k = block_start; k <= block_end; ++k)
        stack.push_back(&(out.slices[k].*component));
      average_time(stack, bw_t);
    }
    block_start = block_end + 1;
  }

  for (int k = 0; k < n; ++k) {
    for (auto component : {&Sym2Field::b11, &Sym2Field::b12, &Sym2Field::b22}) {
      average_x1(out.slices[k].*component, bw_x1);
      average_x2(out.slices[k].*component, bw_x2);
    }
    Sym2Field& f = out.slices[k];
    for (int i = 0; i < f.n1(); ++i)
      for (int j = 0; j < f.n2(); ++j) f.set(i, j, psd_project(f.at(i, j)));
  }
  return out;
}

DiffusionSurface despike_near_zero(const DiffusionSurface& surf,
                                   const SpatialGrid& grid, double epsilon) {
  if (epsilon <= 0.0) return surf;
  DiffusionSurface out = surf;
  const double y_cut = scale_x2(epsilon, grid.scale_k);

  for (int k = 0; k < out.n_intervals(); ++k) {
    const GridPhase& ph = grid.phase_for_interval(k);
    Sym2Field& f = out.slices[k];
    int ja = 0;
    while (ja < ph.y2.n && ph.y2[ja] < y_cut) ++ja;
    if (ja == 0) continue;  // nothing below the cutoff
    if (ja + 1 >= ph.y2.n)
      throw InvalidInput("despike: fewer than two x2 nodes at or above epsilon");
    const double ya = ph.y2[ja], yb = ph.y2[ja + 1];
    for (int i = 0; i < f.n1(); ++i) {
      for (auto component : {&Sym2Field::b11, &Sym2Field::b12, &Sym2Field::b22}) {
        GridField& c = f.*component;
        const double va = c.at(i, ja), vb = c.at(i, ja + 1);
        const double slope = (vb - va) / (yb - ya);
        for (int j = 0; j < ja; ++j) c.at(i, j) = va + slope * (ph.y2[j] - ya);
      }
      for (int j = 0; j < ja; ++j) f.set(i, j, psd_project(f.at(i, j)));
    }
  }
  return out;
}

InnerResult maximize_dual(const Problem& p, const Multipliers& start,
                          const CalibrationConfig& cfg, int iter_cap) {
  const std::vector<double> flat0 = start.flatten(p.instruments);
  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(flat0.data(), flat0.size());

  // cache the HJB solution of the most recent gradient evaluation so the
  // final solution does not need a re-solve
  InnerResult result;
  bool have_hjb = false;

  Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    std::vector<double> lam(x.data(), x.data() + x.size());
    if (!grad) {
      // line-search probe: a solver breakdown just rejects the step
      try {
        return -dual_objective(p, lam).first;
      } catch (const NumericFailure&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    auto [value, hjb] = dual_objective(p, lam);
    const std::vector<double> g = gradients(p, hjb);
    for (int q = 0; q < static_cast<int>(g.size()); ++q) (*grad)[q] = -g[q];
    result.hjb = std::move(hjb);
    have_hjb = true;
    return -value;  // maximise L by minimising -L
  };

  LbfgsOptions lopt;
  lopt.memory = cfg.lbfgs_memory;
  lopt.max_iters = iter_cap;
  lopt.grad_tol = cfg.eps1;
  result.opt = lbfgs_minimize(objective, x0, lopt);
  if (result.opt.status == OptimStatus::Diverged)
    throw NumericFailure("dual ascent diverged (non-finite objective)");
  if (!have_hjb)
    throw NumericFailure("dual ascent produced no gradient evaluation");
  return result;
}

CalibrationReport reference_measure_iteration(Problem& p,
                                              const CalibrationConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  double despike_eps = cfg.despike_epsilon;
  if (despike_eps < 0.0)
    despike_eps = 2.0 * grid_despike_default(p.grid);

  CalibrationReport report;
  Multipliers lambda = Multipliers::zeros(p.instruments);
  bool reference_settled = false;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const bool final_round = reference_settled || round == cfg.max_rounds;
    const int cap = final_round ? cfg.max_outer_iters : cfg.inner_early_stop;
    InnerResult inner = maximize_dual(p, lambda, cfg, cap);

    lambda = Multipliers::unflatten(
        std::vector<double>(inner.opt.x.data(), inner.opt.x.data() + inner.opt.x.size()),
        p.instruments);
    report.rounds = round;
    report.inner_iterations += inner.opt.iters;
    for (double v : inner.opt.f_trace) report.objective_trace.push_back(-v);
    for (double v : inner.opt.gmax_trace) report.gmax_trace.push_back(v);
    report.final_gmax = inner.opt.gmax_trace.back();

    if (final_round) {
      report.multipliers = lambda;
      report.beta_star = std::move(inner.hjb.beta_star);
      report.beta_bar_final = p.beta_bar;
      if (inner.opt.status == OptimStatus::Converged) {
        report.status = CalibrationStatus::Converged;
      } else {
        report.status = CalibrationStatus::NotConverged;
        report.possibly_infeasible = report.final_gmax > 10.0 * cfg.eps1;
      }
      break;
    }

    DiffusionSurface candidate = smooth_beta(
        despike_near_zero(inner.hjb.beta_star, p.grid, despike_eps), p.grid,
        cfg.bw_t, cfg.bw_x1, cfg.bw_x2);
    const double delta = sup_distance(candidate, p.beta_bar);
    p.beta_bar = std::move(candidate);
    if (delta <= cfg.ref_change_tol) reference_settled = true;
  }

  report.prices = build_price_table(p, report.beta_star);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

std::vector<PriceRow> build_price_table(const Problem& p,
                                        const DiffusionSurface& beta_star) {
  const std::vector<PriceQuote> quotes =
      model_prices(beta_star, p.tgrid, p.grid, p.instruments, p.vix, p.backend);
  double market_future = 0.0;
  if (p.instruments.vix_future >= 0)
    market_future = p.instruments.all[p.instruments.vix_future].market_price;
  const double spot = std::exp(p.grid.coarse.x1[p.grid.i0]);

  std::vector<PriceRow> rows;
  for (int q = 0; q < p.instruments.count(); ++q) {
    const Instrument& ins = p.instruments.all[q];
    PriceRow row;
    row.id = ins.id();
    row.kind = kind_name(ins.kind);
    row.maturity_days = ins.maturity * kDaysPerYear;
    row.strike = ins.strike;
    row.has_strike = ins.is_option();
    row.market_price = ins.market_price;
    row.model_price = quotes[q].model_price;
    row.model_iv = quotes[q].model_iv;
    if (ins.is_option()) {
      const double fwd = ins.is_spx() ? spot : market_future;
      const bool call = ins.kind == InstrumentKind::SpxCall ||
                        ins.kind == InstrumentKind::VixCall;
      try {
        if (fwd > 0.0)
          row.market_iv = black_implied_vol(ins.market_price, fwd, ins.strike,
                                            ins.maturity, call);
      } catch (const Error&) {
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double grid_despike_default(const SpatialGrid& grid) {
  return unscale_x2(grid.coarse.y2.step, grid.scale_k);
}

}  // namespace jointcal
