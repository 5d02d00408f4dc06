#pragma once

#include <vector>

#include "jointcal/common.hpp"
#include "jointcal/grid.hpp"

namespace jointcal {

// Symmetric-matrix field over one time slice.
struct Sym2Field {
  GridField b11, b12, b22;

  Sym2Field() = default;
  explicit Sym2Field(const GridPhase& g) : b11(g), b12(g), b22(g) {}

  Sym2 at(int i, int j) const { return {b11.at(i, j), b12.at(i, j), b22.at(i, j)}; }
  void set(int i, int j, const Sym2& s) {
    b11.at(i, j) = s.e11;
    b12.at(i, j) = s.e12;
    b22.at(i, j) = s.e22;
  }
  int n1() const { return b11.n1; }
  int n2() const { return b11.n2; }
};

// Diffusion coefficients per time interval, each slice on the phase of its
// interval. Entries are in physical (unscaled) units.
struct DiffusionSurface {
  std::vector<Sym2Field> slices;

  int n_intervals() const { return static_cast<int>(slices.size()); }
};

// Componentwise sup-norm distance between surfaces with identical layout.
double sup_distance(const DiffusionSurface& a, const DiffusionSurface& b);

}  // namespace jointcal
