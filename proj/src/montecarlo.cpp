#include "jointcal/montecarlo.hpp"

#include <algorithm>
#include <cmath>

namespace jointcal {

namespace {

// splitmix64: cheap counter-based stream so path i is reproducible
// independently of evaluation order
struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t s) : state(s) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() {  // in (0, 1]
    return (next() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }
};

struct GaussianStream {
  SplitMix64 rng;
  bool have_spare = false;
  double spare = 0.0;
  explicit GaussianStream(uint64_t s) : rng(s) {}
  double next() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare = r * std::sin(a);
    have_spare = true;
    return r * std::cos(a);
  }
};

Sym2 beta_at(const SimSource& src, int interval, double t, double x1, double x2) {
  if (src.use_heston) return heston_characteristics(t, x2, src.heston, src.big_t).beta;
  const GridPhase& ph = src.grid->phase_for_interval(interval);
  const Sym2Field& f = src.surface->slices[interval];
  const double y2 = scale_x2(x2, src.grid->scale_k);
  Sym2 b;
  b.e11 = interpolate_bilinear_clamped(f.b11, ph, x1, y2);
  b.e12 = interpolate_bilinear_clamped(f.b12, ph, x1, y2);
  b.e22 = interpolate_bilinear_clamped(f.b22, ph, x1, y2);
  // interpolation can leave the cone; clip back
  if (!b.is_psd(0.0)) b = psd_project(b);
  return b;
}

}  // namespace

PathBatch euler_simulate(const SimSource& source, double x1_0, double x2_0,
                         const TimeGrid& tgrid, int n_paths, uint64_t seed,
                         int trajectory_paths) {
  if (n_paths < 1) throw InvalidInput("euler_simulate: need at least one path");
  if (!source.use_heston && (source.surface == nullptr || source.grid == nullptr))
    throw InvalidInput("euler_simulate: surface source requires surface and grid");
  if (!source.use_heston && source.surface->n_intervals() != tgrid.n_steps())
    throw InvalidInput("euler_simulate: surface interval count mismatch");

  PathBatch batch;
  batch.times = tgrid.nodes;
  batch.n_paths = n_paths;
  batch.seed = seed;
  batch.trajectory_paths = std::min(trajectory_paths, n_paths);
  for (int k = 0; k <= tgrid.n_steps(); ++k)
    if (tgrid.is_event[k]) batch.snapshot_nodes.push_back(k);
  batch.snap_x1.assign(batch.snapshot_nodes.size(), std::vector<double>(n_paths));
  batch.snap_x2.assign(batch.snapshot_nodes.size(), std::vector<double>(n_paths));
  batch.traj_x1.assign(batch.trajectory_paths, {});
  batch.traj_x2.assign(batch.trajectory_paths, {});

  const int n_steps = tgrid.n_steps();
  for (int path = 0; path < n_paths; ++path) {
    GaussianStream gauss(seed * 0x9e3779b97f4a7c15ULL + 0x51ed270b0a1ULL +
                         static_cast<uint64_t>(path));
    double x1 = x1_0, x2 = x2_0;
    const bool keep = path < batch.trajectory_paths;
    if (keep) {
      batch.traj_x1[path].reserve(n_steps + 1);
      batch.traj_x2[path].reserve(n_steps + 1);
      batch.traj_x1[path].push_back(x1);
      batch.traj_x2[path].push_back(x2);
    }
    size_t snap = 0;
    if (!batch.snapshot_nodes.empty() && batch.snapshot_nodes[0] == 0) {
      batch.snap_x1[0][path] = x1;
      batch.snap_x2[0][path] = x2;
      snap = 1;
    }
    for (int k = 0; k < n_steps; ++k) {
      const double dt = tgrid.dt(k);
      const Sym2 b = beta_at(source, k, tgrid.nodes[k], x1, x2);
      const double l11 = std::sqrt(std::max(b.e11 * dt, 0.0));
      const double l21 = l11 > 0.0 ? b.e12 * dt / l11 : 0.0;
      const double l22 = std::sqrt(std::max(b.e22 * dt - l21 * l21, 0.0));
      const double z1 = gauss.next();
      const double z2 = gauss.next();
      const double drift = -0.5 * b.e11 * dt;
      x1 += drift + l11 * z1;
      x2 += drift + l21 * z1 + l22 * z2;
      x2 = std::max(x2, 0.0);
      if (keep) {
        batch.traj_x1[path].push_back(x1);
        batch.traj_x2[path].push_back(x2);
      }
      if (snap < batch.snapshot_nodes.size() && batch.snapshot_nodes[snap] == k + 1) {
        batch.snap_x1[snap][path] = x1;
        batch.snap_x2[snap][path] = x2;
        ++snap;
      }
    }
  }
  return batch;
}

TerminalDiagnostics terminal_diagnostics(const PathBatch& batch, const VixSpec& spec) {
  if (batch.snapshot_nodes.empty())
    throw InvalidInput("terminal_diagnostics: batch has no snapshots");
  const size_t last = batch.snapshot_nodes.size() - 1;
  const std::vector<double>& x1_T = batch.snap_x1[last];
  const std::vector<double>& x2_T = batch.snap_x2[last];
  const int n = batch.n_paths;

  TerminalDiagnostics d;
  double sum_exp = 0.0, sum_exp2 = 0.0;
  for (int p = 0; p < n; ++p) {
    const double xi = 1.0 - std::exp(-x2_T[p] * x2_T[p]);
    d.mean_xi += xi;
    d.mean_x2_T += x2_T[p];
    const double e = std::exp(x1_T[p]);
    sum_exp += e;
    sum_exp2 += e * e;
  }
  d.mean_xi /= n;
  d.mean_x2_T /= n;
  d.mean_exp_x1_T = sum_exp / n;
  const double var = std::max(0.0, sum_exp2 / n - d.mean_exp_x1_T * d.mean_exp_x1_T);
  d.se_exp_x1_T = std::sqrt(var / n);

  std::vector<double> sorted = x2_T;
  std::sort(sorted.begin(), sorted.end());
  d.q95_x2_T = sorted[static_cast<size_t>(0.95 * (n - 1))];

  // J at the t0 snapshot when present (first snapshot at t0 < T)
  const double t0_tol = 0.25 / kDaysPerYear;
  for (size_t s = 0; s < batch.snapshot_nodes.size(); ++s) {
    if (std::abs(batch.times[batch.snapshot_nodes[s]] - spec.t0) < t0_tol) {
      double m = 0.0;
      for (int p = 0; p < n; ++p) m += vix_value(batch.snap_x2[s][p], spec);
      d.mean_vix_t0 = m / n;
      break;
    }
  }
  return d;
}

}  // namespace jointcal
