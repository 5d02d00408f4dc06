#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "jointcal/optim.hpp"

using namespace jointcal;

TEST_CASE("quadratic objective is solved exactly in at most dim iterations") {
  // f(x) = 1/2 x^T A x - b^T x with diagonal A
  const Eigen::Vector2d diag(1.0, 3.0);
  const Eigen::Vector2d b(0.7, -1.9);
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::VectorXd ax = diag.asDiagonal() * x;
    if (grad) *grad = ax - b;
    return 0.5 * x.dot(ax) - b.dot(x);
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-10;
  const LbfgsResult res = lbfgs_minimize(f, Eigen::VectorXd::Zero(2), opt);
  CHECK(res.status == OptimStatus::Converged);
  CHECK(res.iters <= 2);
  CHECK(res.x[0] == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(res.x[1] == doctest::Approx(-1.9 / 3.0).epsilon(1e-9));
}

TEST_CASE("larger quadratic converges well under the memory limit") {
  const int n = 12;
  Eigen::VectorXd diag(n), b(n);
  for (int i = 0; i < n; ++i) {
    diag[i] = 1.0 + i;
    b[i] = std::sin(1.0 + i);
  }
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = diag.asDiagonal() * x - b;
    return 0.5 * x.dot(diag.asDiagonal() * x) - b.dot(x);
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-9;
  opt.max_iters = 100;
  const LbfgsResult res = lbfgs_minimize(f, Eigen::VectorXd::Zero(n), opt);
  CHECK(res.status == OptimStatus::Converged);
  CHECK(res.iters <= n + 2);
  for (int i = 0; i < n; ++i)
    CHECK(res.x[i] == doctest::Approx(b[i] / diag[i]).epsilon(1e-7));
}

TEST_CASE("rosenbrock valley converges") {
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double a = 1.0 - x[0];
    const double c = x[1] - x[0] * x[0];
    if (grad) {
      (*grad)[0] = -2.0 * a - 400.0 * x[0] * c;
      (*grad)[1] = 200.0 * c;
    }
    return a * a + 100.0 * c * c;
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-8;
  opt.max_iters = 500;
  const LbfgsResult res = lbfgs_minimize(f, Eigen::Vector2d(-1.2, 1.0), opt);
  CHECK(res.status == OptimStatus::Converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("already optimal start converges with zero iterations") {
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = 2.0 * x;
    return x.squaredNorm();
  };
  const LbfgsResult res = lbfgs_minimize(f, Eigen::VectorXd::Zero(3), {});
  CHECK(res.status == OptimStatus::Converged);
  CHECK(res.iters == 0);
}

TEST_CASE("non-finite objective reports divergence") {
  Objective f = [&](const Eigen::VectorXd&, Eigen::VectorXd* grad) {
    if (grad) (*grad)[0] = 1.0;
    return std::numeric_limits<double>::quiet_NaN();
  };
  const LbfgsResult res = lbfgs_minimize(f, Eigen::VectorXd::Ones(1), {});
  CHECK(res.status == OptimStatus::Diverged);
}

TEST_CASE("infinite probes are rejected and backtracked through") {
  // objective is +inf outside |x| <= 0.1, quadratic inside
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (x.cwiseAbs().maxCoeff() > 0.1) {
      if (grad) grad->setZero();
      return std::numeric_limits<double>::infinity();
    }
    if (grad) *grad = 200.0 * x;
    return 100.0 * x.squaredNorm();
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-8;
  const LbfgsResult res =
      lbfgs_minimize(f, Eigen::VectorXd::Constant(1, 0.09), opt);
  CHECK(res.status == OptimStatus::Converged);
  CHECK(std::abs(res.x[0]) < 1e-8);
}

TEST_CASE("gradient trace is recorded") {
  Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = x;
    return 0.5 * x.squaredNorm();
  };
  const LbfgsResult res = lbfgs_minimize(f, Eigen::VectorXd::Constant(2, 4.0), {});
  CHECK(res.status == OptimStatus::Converged);
  CHECK(res.gmax_trace.size() == res.f_trace.size());
  CHECK(res.gmax_trace.front() == doctest::Approx(4.0));
  CHECK(res.gmax_trace.back() <= 1e-4);
}
