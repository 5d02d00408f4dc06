#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "jointcal/common.hpp"

namespace jointcal {

enum class OptimStatus { Converged, Stalled, IterCap, Diverged };

const char* optim_status_name(OptimStatus s);

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 200;
  double grad_tol = 1e-4;    // stop when the gradient sup-norm drops below
  double armijo_c1 = 1e-4;
  int max_line_search = 30;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iters = 0;
  OptimStatus status = OptimStatus::IterCap;
  std::vector<double> f_trace;     // objective after each accepted step
  std::vector<double> gmax_trace;  // gradient sup-norm per iterate
};

// Objective callback: returns f(x); fills *grad when grad is non-null.
// Line-search probes pass grad = nullptr.
using Objective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

// Limited-memory BFGS minimiser with an Armijo backtracking line search that
// first tries the unit step and a quadratic-interpolation step (exact for
// quadratic objectives).
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0,
                           const LbfgsOptions& opt = {});

}  // namespace jointcal
