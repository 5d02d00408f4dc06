#pragma once

#include "jointcal/common.hpp"

namespace jointcal {

// Which branch of the closed-form conjugate produced beta_star.
enum class ConjugateCase { Interior, Zero, ConeBoundary };

struct ConjugateResult {
  double value = 0.0;   // F*(a, b)
  Sym2 beta_star;       // maximiser, PSD
  ConjugateCase tag = ConjugateCase::Interior;
};

// Shifted target matrix M = [[A,B],[B,C]] entering the PSD projection:
//   A = bbar11 + b11/2 - a1/4 - a2/4,  B = bbar12 + b12/2,  C = bbar22 + b22/2.
void intermediate_abc(double a1, double a2, const Sym2& b, const Sym2& beta_bar,
                      double& A, double& B, double& C);

// Convex conjugate of the quadratic penalty cost over the constrained
// characteristics cone. beta_star is the PSD matrix closest to M in the
// (weighted) Frobenius norm, evaluated in closed form.
ConjugateResult conjugate_f_star(double a1, double a2, const Sym2& b,
                                 const Sym2& beta_bar);

struct Characteristics {
  double alpha1 = 0.0;  // equals alpha2; both are -beta11/2
  double alpha2 = 0.0;
  Sym2 beta;
};

// Optimal characteristics fed back into the nonlinear equation:
// beta from the conjugate at (a, b) = (grad_phi, hess_phi / 2), drift pinned
// to the constraint cone.
Characteristics optimal_characteristics(double dphi_1, double dphi_2,
                                        const Sym2& hess_phi, const Sym2& beta_bar);

}  // namespace jointcal
