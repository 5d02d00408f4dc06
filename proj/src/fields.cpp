#include "jointcal/fields.hpp"

#include <algorithm>
#include <cmath>

namespace jointcal {

double sup_distance(const DiffusionSurface& a, const DiffusionSurface& b) {
  if (a.n_intervals() != b.n_intervals())
    throw InvalidInput("sup_distance: surfaces have different interval counts");
  double d = 0.0;
  for (int k = 0; k < a.n_intervals(); ++k) {
    const Sym2Field& fa = a.slices[k];
    const Sym2Field& fb = b.slices[k];
    if (fa.b11.v.size() != fb.b11.v.size())
      throw InvalidInput("sup_distance: slice shapes differ");
    for (size_t q = 0; q < fa.b11.v.size(); ++q) {
      d = std::max(d, std::abs(fa.b11.v[q] - fb.b11.v[q]));
      d = std::max(d, std::abs(fa.b12.v[q] - fb.b12.v[q]));
      d = std::max(d, std::abs(fa.b22.v[q] - fb.b22.v[q]));
    }
  }
  return d;
}

}  // namespace jointcal
