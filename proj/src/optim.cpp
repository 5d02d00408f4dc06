#include "jointcal/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace jointcal {

const char* optim_status_name(OptimStatus s) {
  switch (s) {
    case OptimStatus::Converged: return "converged";
    case OptimStatus::Stalled: return "stalled";
    case OptimStatus::IterCap: return "iteration_cap";
    case OptimStatus::Diverged: return "diverged";
  }
  return "?";
}

namespace {

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

Eigen::VectorXd two_loop_direction(const Eigen::VectorXd& grad,
                                   const std::deque<Pair>& mem) {
  Eigen::VectorXd q = grad;
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    alpha[i] = mem[i].rho * mem[i].s.dot(q);
    q -= alpha[i] * mem[i].y;
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.dot(q);
    q += (alpha[i] - beta) * mem[i].s;
  }
  return -q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0,
                           const LbfgsOptions& opt) {
  LbfgsResult res;
  res.x = std::move(x0);
  res.grad.resize(res.x.size());
  res.f = f(res.x, &res.grad);
  res.f_trace.push_back(res.f);
  res.gmax_trace.push_back(res.grad.cwiseAbs().maxCoeff());
  if (!std::isfinite(res.f)) {
    res.status = OptimStatus::Diverged;
    return res;
  }

  std::deque<Pair> mem;
  int escapes_used = 0;
  bool fresh_start = true;
  for (res.iters = 0; res.iters < opt.max_iters;) {
    if (res.grad.cwiseAbs().maxCoeff() <= opt.grad_tol) {
      res.status = OptimStatus::Converged;
      return res;
    }

    Eigen::VectorXd dir = two_loop_direction(res.grad, mem);
    double slope = res.grad.dot(dir);
    if (slope >= 0.0) {  // not a descent direction; restart from steepest
      mem.clear();
      dir = -res.grad;
      slope = res.grad.dot(dir);
    }

    // the very first move is capped by the direction norm
    const double t_init =
        fresh_start ? std::min(1.0, 1.0 / std::max(1.0, dir.norm())) : 1.0;
    fresh_start = false;

    // line search: initial trial and a quadratic-interpolation trial (the
    // interpolant is the exact minimiser for quadratic objectives), then
    // backtracking; a greedy doubling phase lets steps grow out of narrow
    // valleys
    auto armijo = [&](double t, double ft) {
      return std::isfinite(ft) && ft <= res.f + opt.armijo_c1 * t * slope;
    };
    double t = t_init;
    double ft = f(res.x + t * dir, nullptr);
    bool accepted = false;
    {
      double t_best = t, f_best = ft;
      const double denom = ft - res.f - t * slope;
      if (std::isfinite(ft) && denom > 0.0) {
        const double tq = -slope * t * t / (2.0 * denom);
        if (tq > 1e-14 && tq < 8.0 * t_init) {
          const double fq = f(res.x + tq * dir, nullptr);
          if (std::isfinite(fq) && (!std::isfinite(f_best) || fq < f_best)) {
            t_best = tq;
            f_best = fq;
          }
        }
      }
      if (armijo(t_best, f_best)) {
        t = t_best;
        ft = f_best;
        accepted = true;
      } else {
        t = std::min(t_best, 0.5 * t_init);
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
          ft = f(res.x + t * dir, nullptr);
          if (armijo(t, ft)) {
            accepted = true;
            break;
          }
          t *= 0.5;
          if (t < 1e-16) break;
        }
      }
    }
    if (accepted) {
      for (int grow = 0; grow < 6; ++grow) {
        const double t2 = 2.0 * t;
        const double f2 = f(res.x + t2 * dir, nullptr);
        if (!std::isfinite(f2) || f2 >= ft) break;
        t = t2;
        ft = f2;
      }
    }
    if (!accepted && escapes_used < 2) {
      // The objective can have a nonsmooth ridge at the current point (the
      // payoff-kink corner of the dual at zero multipliers). Take the least
      // bad small probe, drop the curvature memory and continue from there.
      const double dn = dir.cwiseAbs().maxCoeff();
      double bf = std::numeric_limits<double>::infinity(), bt = 0.0;
      for (double scale : {1e-3, 3e-3, 1e-2}) {
        const double tp = scale / std::max(dn, 1e-300);
        const double fp = f(res.x + tp * dir, nullptr);
        if (std::isfinite(fp) && fp < bf) {
          bf = fp;
          bt = tp;
        }
      }
      if (std::isfinite(bf)) {
        t = bt;
        ft = bf;
        accepted = true;
        mem.clear();
        fresh_start = true;
        ++escapes_used;
      }
    }
    if (!accepted) {
      res.status = std::isfinite(ft) ? OptimStatus::Stalled : OptimStatus::Diverged;
      return res;
    }

    Eigen::VectorXd x_new = res.x + t * dir;
    Eigen::VectorXd g_new(res.x.size());
    const double f_new = f(x_new, &g_new);
    if (!std::isfinite(f_new)) {
      res.status = OptimStatus::Diverged;
      return res;
    }

    Pair pr;
    pr.s = x_new - res.x;
    pr.y = g_new - res.grad;
    const double sy = pr.s.dot(pr.y);
    if (sy > 1e-12 * pr.s.norm() * pr.y.norm()) {
      pr.rho = 1.0 / sy;
      mem.push_back(std::move(pr));
      if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
    }

    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = std::move(g_new);
    ++res.iters;
    res.f_trace.push_back(res.f);
    res.gmax_trace.push_back(res.grad.cwiseAbs().maxCoeff());
  }
  res.status = OptimStatus::IterCap;
  return res;
}

}  // namespace jointcal
