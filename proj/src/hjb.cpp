#include "jointcal/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace jointcal {

namespace {

// d/dx on one row of three values with spacing h, centred where possible
inline double d1_central(double fm, double, double fp, double h) {
  return (fp - fm) / (2.0 * h);
}
inline double d1_onesided(double f0, double f1, double f2, double h) {
  return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
}
inline double d2_stencil(double fa, double fb, double fc, double h) {
  return (fa - 2.0 * fb + fc) / (h * h);
}

GridField first_derivative_x1(const GridField& f, double h) {
  GridField out;
  out.n1 = f.n1;
  out.n2 = f.n2;
  out.v.assign(f.v.size(), 0.0);
  const int n1 = f.n1, n2 = f.n2;
  for (int j = 0; j < n2; ++j) {
    out.at(0, j) = d1_onesided(f.at(0, j), f.at(1, j), f.at(2, j), h);
    for (int i = 1; i < n1 - 1; ++i)
      out.at(i, j) = d1_central(f.at(i - 1, j), f.at(i, j), f.at(i + 1, j), h);
    out.at(n1 - 1, j) =
        -d1_onesided(f.at(n1 - 1, j), f.at(n1 - 2, j), f.at(n1 - 3, j), h);
  }
  return out;
}

GridField first_derivative_y2(const GridField& f, double h) {
  GridField out;
  out.n1 = f.n1;
  out.n2 = f.n2;
  out.v.assign(f.v.size(), 0.0);
  const int n1 = f.n1, n2 = f.n2;
  for (int i = 0; i < n1; ++i) {
    out.at(i, 0) = d1_onesided(f.at(i, 0), f.at(i, 1), f.at(i, 2), h);
    for (int j = 1; j < n2 - 1; ++j)
      out.at(i, j) = d1_central(f.at(i, j - 1), f.at(i, j), f.at(i, j + 1), h);
    out.at(i, n2 - 1) =
        -d1_onesided(f.at(i, n2 - 1), f.at(i, n2 - 2), f.at(i, n2 - 3), h);
  }
  return out;
}

}  // namespace

SliceDerivs central_derivatives(const GridField& phi, const GridPhase& g,
                                double scale_k) {
  const int n1 = g.x1.n, n2 = g.y2.n;
  const double h1 = g.x1.step, h2 = g.y2.step;
  SliceDerivs d;
  d.d1 = first_derivative_x1(phi, h1);
  GridField dy2 = first_derivative_y2(phi, h2);

  d.d11 = GridField(g);
  d.d22 = GridField(g);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int ic = std::clamp(i, 1, n1 - 2);
      const int jc = std::clamp(j, 1, n2 - 2);
      d.d11.at(i, j) =
          d2_stencil(phi.at(ic - 1, j), phi.at(ic, j), phi.at(ic + 1, j), h1);
      d.d22.at(i, j) =
          d2_stencil(phi.at(i, jc - 1), phi.at(i, jc), phi.at(i, jc + 1), h2);
    }

  // cross term: x1-derivative of the y2-derivative field
  d.d12 = first_derivative_x1(dy2, h1);

  // chain rule back to physical x2 = y2 / K
  d.d2 = std::move(dy2);
  for (auto& x : d.d2.v) x *= scale_k;
  for (auto& x : d.d12.v) x *= scale_k;
  for (auto& x : d.d22.v) x *= scale_k * scale_k;
  return d;
}

void apply_jump_conditions(GridField& phi, const GridPhase& phase, double t_node,
                           std::span<const double> multipliers,
                           const InstrumentSet& instruments, const VixSpec& spec,
                           double scale_k) {
  const double tol = 0.25 / kDaysPerYear;
  for (int q = 0; q < instruments.count(); ++q) {
    const Instrument& ins = instruments.all[q];
    if (std::abs(ins.maturity - t_node) > tol) continue;
    const double lam = multipliers[q];
    if (lam == 0.0) continue;
    const double w = lam / ins.vega_weight;
    for (int i = 0; i < phase.x1.n; ++i) {
      const double x1 = phase.x1[i];
      for (int j = 0; j < phase.y2.n; ++j) {
        const double x2 = unscale_x2(phase.y2[j], scale_k);
        phi.at(i, j) += w * payoff_value(ins, spec, x1, x2);
      }
    }
  }
}

Eigen::SparseMatrix<double> assemble_hjb_operator(const Sym2Field& beta,
                                                  const GridPhase& g,
                                                  double scale_k) {
  const int n1 = g.x1.n, n2 = g.y2.n;
  const double h1 = g.x1.step, h2 = g.y2.step;
  const double k = scale_k;
  Eigen::SparseMatrix<double> L(n1 * n2, n1 * n2);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n1) * n2 * 9);
  auto idx = [n2](int i, int j) { return i * n2 + j; };

  for (int i = 1; i < n1 - 1; ++i)
    for (int j = 1; j < n2 - 1; ++j) {
      const Sym2 b = beta.at(i, j);
      const double c1 = -0.5 * b.e11;           // drift along x1
      const double c2 = -0.5 * k * b.e11;       // drift along y2 (scaled)
      const double d1 = 0.5 * b.e11;
      const double d2 = 0.5 * k * k * b.e22;
      const double cx = k * b.e12 / (4.0 * h1 * h2);
      const int r = idx(i, j);
      trip.emplace_back(r, idx(i - 1, j), -c1 / (2 * h1) + d1 / (h1 * h1));
      trip.emplace_back(r, idx(i + 1, j), c1 / (2 * h1) + d1 / (h1 * h1));
      trip.emplace_back(r, idx(i, j - 1), -c2 / (2 * h2) + d2 / (h2 * h2));
      trip.emplace_back(r, idx(i, j + 1), c2 / (2 * h2) + d2 / (h2 * h2));
      trip.emplace_back(r, r, -2.0 * d1 / (h1 * h1) - 2.0 * d2 / (h2 * h2));
      trip.emplace_back(r, idx(i + 1, j + 1), cx);
      trip.emplace_back(r, idx(i - 1, j - 1), cx);
      trip.emplace_back(r, idx(i + 1, j - 1), -cx);
      trip.emplace_back(r, idx(i - 1, j + 1), -cx);
    }
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

ImplicitStepSolver::ImplicitStepSolver(const GridPhase& g, double scale_k)
    : g_(g), scale_k_(scale_k) {
  mat_.resize(g.n_nodes(), g.n_nodes());
  triplets_.reserve(static_cast<size_t>(g.n_nodes()) * 9);
}

void ImplicitStepSolver::factorize(const Sym2Field& beta, double dt) {
  const int n1 = g_.x1.n, n2 = g_.y2.n;
  const double h1 = g_.x1.step, h2 = g_.y2.step;
  const double k = scale_k_;
  auto idx = [n2](int i, int j) { return i * n2 + j; };
  triplets_.clear();

  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int r = idx(i, j);
      if (j == 0) {
        triplets_.emplace_back(r, r, 1.0);  // Dirichlet to psi on x2 = 0
      } else if (i == 0) {
        triplets_.emplace_back(r, idx(0, j), 1.0);
        triplets_.emplace_back(r, idx(1, j), -2.0);
        triplets_.emplace_back(r, idx(2, j), 1.0);
      } else if (i == n1 - 1) {
        triplets_.emplace_back(r, idx(n1 - 1, j), 1.0);
        triplets_.emplace_back(r, idx(n1 - 2, j), -2.0);
        triplets_.emplace_back(r, idx(n1 - 3, j), 1.0);
      } else if (j == n2 - 1) {
        triplets_.emplace_back(r, idx(i, n2 - 1), 1.0);
        triplets_.emplace_back(r, idx(i, n2 - 2), -2.0);
        triplets_.emplace_back(r, idx(i, n2 - 3), 1.0);
      } else {
        const Sym2 b = beta.at(i, j);
        const double c1 = -0.5 * b.e11;
        const double c2 = -0.5 * k * b.e11;
        const double d1 = 0.5 * b.e11;
        const double d2 = 0.5 * k * k * b.e22;
        const double cx = k * b.e12 / (4.0 * h1 * h2);
        // row of I - dt * L
        triplets_.emplace_back(r, idx(i - 1, j), -dt * (-c1 / (2 * h1) + d1 / (h1 * h1)));
        triplets_.emplace_back(r, idx(i + 1, j), -dt * (c1 / (2 * h1) + d1 / (h1 * h1)));
        triplets_.emplace_back(r, idx(i, j - 1), -dt * (-c2 / (2 * h2) + d2 / (h2 * h2)));
        triplets_.emplace_back(r, idx(i, j + 1), -dt * (c2 / (2 * h2) + d2 / (h2 * h2)));
        triplets_.emplace_back(r, r, 1.0 + dt * (2.0 * d1 / (h1 * h1) + 2.0 * d2 / (h2 * h2)));
        triplets_.emplace_back(r, idx(i + 1, j + 1), -dt * cx);
        triplets_.emplace_back(r, idx(i - 1, j - 1), -dt * cx);
        triplets_.emplace_back(r, idx(i + 1, j - 1), dt * cx);
        triplets_.emplace_back(r, idx(i - 1, j + 1), dt * cx);
      }
    }

  mat_.setFromTriplets(triplets_.begin(), triplets_.end());
  if (!analyzed_) {
    lu_.analyzePattern(mat_);
    analyzed_ = true;
  }
  lu_.factorize(mat_);
  if (lu_.info() != Eigen::Success)
    throw NumericFailure("implicit step: sparse factorisation failed");
}

GridField ImplicitStepSolver::solve(const GridField& interior_rhs,
                                    const GridField& psi) const {
  const int n1 = g_.x1.n, n2 = g_.y2.n;
  Eigen::VectorXd rhs(n1 * n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int r = i * n2 + j;
      if (j == 0)
        rhs[r] = psi.at(i, 0);
      else if (i == 0)
        rhs[r] = psi.at(0, j) - 2.0 * psi.at(1, j) + psi.at(2, j);
      else if (i == n1 - 1)
        rhs[r] = psi.at(n1 - 1, j) - 2.0 * psi.at(n1 - 2, j) + psi.at(n1 - 3, j);
      else if (j == n2 - 1)
        rhs[r] = psi.at(i, n2 - 1) - 2.0 * psi.at(i, n2 - 2) + psi.at(i, n2 - 3);
      else
        rhs[r] = interior_rhs.at(i, j);
    }

  Eigen::VectorXd sol = lu_.solve(rhs);
  if (lu_.info() != Eigen::Success)
    throw NumericFailure("implicit step: linear solve failed");
  GridField out;
  out.n1 = n1;
  out.n2 = n2;
  out.v.assign(sol.data(), sol.data() + sol.size());
  return out;
}

PolicyStepResult policy_iteration_step(const GridField& phi_next,
                                       const GridField& psi,
                                       const Sym2Field& beta_bar,
                                       const GridPhase& g, double scale_k,
                                       double dt, const HjbConfig& cfg,
                                       ImplicitStepSolver& solver) {
  const int n1 = g.x1.n, n2 = g.y2.n;
  PolicyStepResult res;
  res.beta_star = Sym2Field(g);
  GridField guess = phi_next;  // warm start from the later time level
  GridField interior_rhs(g);
  double residual = 0.0;

  for (int it = 1; it <= cfg.policy_cap; ++it) {
    res.iters = it;
    const SliceDerivs d = central_derivatives(guess, g, scale_k);
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        const Sym2 hess{d.d11.at(i, j), d.d12.at(i, j), d.d22.at(i, j)};
        const Characteristics ch = optimal_characteristics(
            d.d1.at(i, j), d.d2.at(i, j), hess, beta_bar.at(i, j));
        res.beta_star.set(i, j, ch.beta);
        interior_rhs.at(i, j) =
            phi_next.at(i, j) - dt * frobenius_dist2(ch.beta, beta_bar.at(i, j));
      }

    solver.factorize(res.beta_star, dt);
    GridField next = solver.solve(interior_rhs, psi);

    residual = 0.0;
    for (size_t q = 0; q < next.v.size(); ++q)
      residual = std::max(residual, std::abs(next.v[q] - guess.v[q]));
    if (residual <= cfg.eps2) {
      res.phi = std::move(next);
      return res;
    }
    if (it >= 10) {
      // the non-monotone stencil can settle into a small policy two-cycle;
      // damping the update breaks it
      for (size_t q = 0; q < next.v.size(); ++q)
        next.v[q] = 0.5 * (next.v[q] + guess.v[q]);
    }
    guess = std::move(next);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", residual);
  throw NumericFailure("policy iteration did not converge within " +
                       std::to_string(cfg.policy_cap) +
                       " iterations (residual " + std::string(buf) + ")");
}

HjbSolution solve_hjb_backward(std::span<const double> multipliers,
                               const DiffusionSurface& beta_bar,
                               const TimeGrid& tgrid, const SpatialGrid& grid,
                               const InstrumentSet& instruments,
                               const VixSpec& spec, const HjbConfig& cfg) {
  const int n_steps = tgrid.n_steps();
  if (static_cast<int>(multipliers.size()) != instruments.count())
    throw InvalidInput("solve_hjb_backward: multiplier count mismatch");
  if (beta_bar.n_intervals() != n_steps)
    throw InvalidInput("solve_hjb_backward: reference surface interval count mismatch");

  HjbSolution sol;
  sol.phi.resize(n_steps + 1);
  sol.beta_star.slices.resize(n_steps);
  sol.phi[n_steps] = GridField(grid.phase_for_node(n_steps), 0.0);

  ImplicitStepSolver coarse_solver(grid.coarse, grid.scale_k);
  ImplicitStepSolver fine_solver(grid.fine_enabled() ? grid.fine : grid.coarse,
                                 grid.scale_k);

  GridField psi = sol.phi[n_steps];  // boundary reference of the running interval

  for (int k = n_steps - 1; k >= 0; --k) {
    GridField phi_minus = sol.phi[k + 1];
    if (tgrid.is_event[k + 1]) {
      apply_jump_conditions(phi_minus, grid.phase_for_node(k + 1),
                            tgrid.nodes[k + 1], multipliers, instruments, spec,
                            grid.scale_k);
      psi = phi_minus;
    }
    if (grid.node_is_fine(k + 1) && !grid.node_is_fine(k)) {
      phi_minus = regrid(phi_minus, grid.fine, grid.coarse);
      psi = regrid(psi, grid.fine, grid.coarse);
    }

    const GridPhase& ph = grid.phase_for_interval(k);
    ImplicitStepSolver& solver =
        grid.node_is_fine(k) ? fine_solver : coarse_solver;
    PolicyStepResult step;
    try {
      step = policy_iteration_step(phi_minus, psi, beta_bar.slices[k], ph,
                                   grid.scale_k, tgrid.dt(k), cfg, solver);
    } catch (const NumericFailure& e) {
      throw NumericFailure("HJB step at time index " + std::to_string(k) + ": " +
                           e.what());
    }
    sol.total_policy_iters += step.iters;
    sol.max_step_policy_iters = std::max(sol.max_step_policy_iters, step.iters);
    sol.phi[k] = std::move(step.phi);
    sol.beta_star.slices[k] = std::move(step.beta_star);
  }

  sol.phi_at_origin = sol.phi[0].at(grid.i0, grid.j0_coarse);
  return sol;
}

}  // namespace jointcal
