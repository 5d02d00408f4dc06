#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace jointcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad arguments, malformed configs, schema violations
struct InvalidInput : Error {
  using Error::Error;
};

// solver breakdowns: iteration caps, non-bracketable roots, NaNs
struct NumericFailure : Error {
  using Error::Error;
};

// Symmetric 2x2 matrix stored as its upper triangle.
struct Sym2 {
  double e11 = 0.0;
  double e12 = 0.0;
  double e22 = 0.0;

  double trace() const { return e11 + e22; }
  double det() const { return e11 * e22 - e12 * e12; }

  double min_eigenvalue() const {
    const double h = 0.5 * (e11 - e22);
    return 0.5 * (e11 + e22) - std::hypot(h, e12);
  }
  double max_eigenvalue() const {
    const double h = 0.5 * (e11 - e22);
    return 0.5 * (e11 + e22) + std::hypot(h, e12);
  }

  bool is_psd(double tol = 1e-10) const {
    return e11 >= -tol && e22 >= -tol && det() >= -tol;
  }

  Sym2 operator+(const Sym2& o) const { return {e11 + o.e11, e12 + o.e12, e22 + o.e22}; }
  Sym2 operator-(const Sym2& o) const { return {e11 - o.e11, e12 - o.e12, e22 - o.e22}; }
  Sym2 operator*(double s) const { return {s * e11, s * e12, s * e22}; }
};

// Frobenius distance; the off-diagonal entry counts twice.
inline double frobenius_dist2(const Sym2& a, const Sym2& b) {
  const double d11 = a.e11 - b.e11, d12 = a.e12 - b.e12, d22 = a.e22 - b.e22;
  return d11 * d11 + 2.0 * d12 * d12 + d22 * d22;
}

// Closest PSD matrix in Frobenius norm (eigenvalue clip).
inline Sym2 psd_project(const Sym2& m) {
  const double mid = 0.5 * (m.e11 + m.e22);
  const double rad = std::hypot(0.5 * (m.e11 - m.e22), m.e12);
  const double lo = mid - rad, hi = mid + rad;
  if (lo >= 0.0) return m;
  if (hi <= 0.0) return {0.0, 0.0, 0.0};
  // rank-one part hi * v v^T, v the unit eigenvector for hi
  double vx, vy;
  if (std::abs(m.e12) > 1e-300) {
    vx = m.e12;
    vy = hi - m.e11;
  } else {
    // diagonal matrix: hi is whichever diagonal entry is larger
    vx = m.e11 >= m.e22 ? 1.0 : 0.0;
    vy = 1.0 - vx;
  }
  const double n2 = vx * vx + vy * vy;
  const double s = hi / n2;
  return {s * vx * vx, s * vx * vy, s * vy * vy};
}

constexpr double kDaysPerYear = 365.0;  // ACT/365

inline double years_from_days(double days) { return days / kDaysPerYear; }

}  // namespace jointcal
