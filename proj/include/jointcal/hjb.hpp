#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <span>
#include <vector>

#include "jointcal/conjugate.hpp"
#include "jointcal/fields.hpp"
#include "jointcal/grid.hpp"
#include "jointcal/payoffs.hpp"

namespace jointcal {

struct HjbConfig {
  double eps2 = 1e-8;   // policy-iteration sup-norm tolerance
  int policy_cap = 50;  // iterations per time step before giving up
};

struct HjbSolution {
  std::vector<GridField> phi;  // one slice per time node (pre-jump values)
  DiffusionSurface beta_star;  // optimal diffusion per time interval
  double phi_at_origin = 0.0;  // phi(0, X0) read at the snapped node
  int total_policy_iters = 0;
  int max_step_policy_iters = 0;
};

// Central-difference derivative fields of a slice, in physical units
// (the K factors of the x2 scaling are already applied). One-sided stencils
// of the same width at the edges.
struct SliceDerivs {
  GridField d1, d2, d11, d22, d12;
};
SliceDerivs central_derivatives(const GridField& phi, const GridPhase& g,
                                double scale_k);

// phi(t-) = phi(t) + sum of multiplier-weighted vega-scaled payoffs maturing
// at this node. Multipliers are flat in the instrument-set order.
void apply_jump_conditions(GridField& phi, const GridPhase& phase, double t_node,
                           std::span<const double> multipliers,
                           const InstrumentSet& instruments, const VixSpec& spec,
                           double scale_k);

// Second-order operator L(beta) as a sparse matrix over row-major node
// indices. Interior rows discretise
//   -b11/2 d1 - b11/2 d2 + b11/2 d11 + b12 d12 + b22/2 d22
// in physical coordinates (scaled-grid coefficients carry the K factors);
// boundary rows are zero.
Eigen::SparseMatrix<double> assemble_hjb_operator(const Sym2Field& beta,
                                                  const GridPhase& g,
                                                  double scale_k);

// One backward implicit step (I - dt L(beta)) phi = rhs with the frozen-
// curvature boundary rows. Reused by the HJB policy iteration and by the
// implicit pricing backend; the factorisation is refreshed per call to
// factorize and can serve many right-hand sides.
class ImplicitStepSolver {
 public:
  ImplicitStepSolver(const GridPhase& g, double scale_k);

  void factorize(const Sym2Field& beta, double dt);

  // interior rows take interior_rhs; boundary rows pin phi to psi on x2=0 and
  // freeze the normal second difference to psi's elsewhere
  GridField solve(const GridField& interior_rhs, const GridField& psi) const;

 private:
  GridPhase g_;
  double scale_k_;
  bool analyzed_ = false;
  Eigen::SparseMatrix<double> mat_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  std::vector<Eigen::Triplet<double>> triplets_;
};

struct PolicyStepResult {
  GridField phi;
  Sym2Field beta_star;
  int iters = 0;
};

// Policy iteration for one time step: alternate the nodewise conjugate
// maximisation with the implicit linear solve until phi stabilises.
PolicyStepResult policy_iteration_step(const GridField& phi_next,
                                       const GridField& psi,
                                       const Sym2Field& beta_bar,
                                       const GridPhase& g, double scale_k,
                                       double dt, const HjbConfig& cfg,
                                       ImplicitStepSolver& solver);

// Full backward march from T to 0 with payoff jumps at event nodes and the
// phase switch handled by regridding.
HjbSolution solve_hjb_backward(std::span<const double> multipliers,
                               const DiffusionSurface& beta_bar,
                               const TimeGrid& tgrid, const SpatialGrid& grid,
                               const InstrumentSet& instruments,
                               const VixSpec& spec, const HjbConfig& cfg = {});

}  // namespace jointcal
