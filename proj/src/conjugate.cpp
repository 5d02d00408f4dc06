#include "jointcal/conjugate.hpp"

#include <cmath>

namespace jointcal {

namespace {
constexpr double kPsdTol = 1e-10;
}

void intermediate_abc(double a1, double a2, const Sym2& b, const Sym2& beta_bar,
                      double& A, double& B, double& C) {
  A = beta_bar.e11 + 0.5 * b.e11 - 0.25 * a1 - 0.25 * a2;
  B = beta_bar.e12 + 0.5 * b.e12;
  C = beta_bar.e22 + 0.5 * b.e22;
}

ConjugateResult conjugate_f_star(double a1, double a2, const Sym2& b,
                                 const Sym2& beta_bar) {
  double A, B, C;
  intermediate_abc(a1, a2, b, beta_bar, A, B, C);

  ConjugateResult res;
  if (A >= -kPsdTol && C >= -kPsdTol && A * C - B * B >= -kPsdTol) {
    res.beta_star = {A, B, C};
    res.tag = ConjugateCase::Interior;
  } else if (A * C >= B * B && A + C < 0.0) {
    res.beta_star = {0.0, 0.0, 0.0};
    res.tag = ConjugateCase::Zero;
  } else {
    // Projection onto the cone surface. Work in axes rotated 45 degrees about
    // the off-diagonal direction, where the PSD cone is a circular cone.
    const double xb = 0.5 * (A - C);
    const double yb = B;
    const double zb = 0.5 * (A + C);
    const double s = std::hypot(xb, yb);
    // s == 0 implies A == C, B == 0, which lands in one of the other cases
    const double shift = zb / (2.0 * s);
    Sym2 best;
    double best_obj = 0.0;
    for (int sign = 0; sign < 2; ++sign) {
      const double f = sign == 0 ? 0.5 + shift : 0.5 - shift;
      const double xp = xb * f;
      const double yp = yb * f;
      const double zp = std::hypot(xp, yp);
      const Sym2 cand{xp + zp, yp, zp - xp};
      const double obj = (cand.e11 - A) * (cand.e11 - A) +
                         2.0 * (cand.e12 - B) * (cand.e12 - B) +
                         (cand.e22 - C) * (cand.e22 - C);
      if (sign == 0 || obj < best_obj) {
        best = cand;
        best_obj = obj;
      }
    }
    res.beta_star = best;
    res.tag = ConjugateCase::ConeBoundary;
  }

  const Sym2& bs = res.beta_star;
  res.value = (b.e11 - 0.5 * a1 - 0.5 * a2) * bs.e11 + 2.0 * b.e12 * bs.e12 +
              b.e22 * bs.e22 - frobenius_dist2(bs, beta_bar);
  return res;
}

Characteristics optimal_characteristics(double dphi_1, double dphi_2,
                                        const Sym2& hess_phi, const Sym2& beta_bar) {
  const ConjugateResult res =
      conjugate_f_star(dphi_1, dphi_2, hess_phi * 0.5, beta_bar);
  Characteristics ch;
  ch.beta = res.beta_star;
  ch.alpha1 = ch.alpha2 = -0.5 * res.beta_star.e11;
  return ch;
}

}  // namespace jointcal
