#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "jointcal/grid.hpp"

using namespace jointcal;

namespace {

// direct construction oracle: anchors 0, events, horizon; each gap split into
// ceil(gap/step) equal pieces
int interval_count_oracle(double horizon, double step, std::vector<double> events) {
  events.push_back(horizon);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  double prev = 0.0;
  int intervals = 0;
  for (double e : events) {
    intervals += static_cast<int>(std::ceil((e - prev) / step - 1e-9));
    prev = e;
  }
  return intervals;
}

}  // namespace

TEST_CASE("time grid hits every event and respects the step target") {
  const double day = 1.0 / 365.0;
  const std::vector<double> events = {44 * day, 49 * day, 79 * day};
  const TimeGrid grid = build_time_grid(79 * day, 0.5 * day, events);

  const int expected = interval_count_oracle(79 * day, 0.5 * day, events);
  CHECK(expected == 158);  // 88 + 10 + 60 half-day steps
  CHECK(grid.n_steps() == expected);

  for (double e : events) {
    const int k = grid.index_of(e);
    CHECK(grid.nodes[k] == doctest::Approx(e).epsilon(1e-15));
    CHECK(grid.is_event[k] == 1);
  }
  for (int k = 0; k < grid.n_steps(); ++k) {
    CHECK(grid.dt(k) > 0.0);
    CHECK(grid.dt(k) <= 0.5 * day + 1e-12);
  }
  CHECK(grid.nodes.front() == 0.0);
  CHECK(grid.nodes.back() == doctest::Approx(79 * day));
}

TEST_CASE("time grid single step and error cases") {
  const TimeGrid g = build_time_grid(1.0, 1.0, {});
  CHECK(g.n_nodes() == 2);
  CHECK(g.nodes[0] == 0.0);
  CHECK(g.nodes[1] == 1.0);

  CHECK_THROWS_AS(build_time_grid(1.0, 0.1, {1.5}), InvalidInput);
  CHECK_THROWS_AS(build_time_grid(-1.0, 0.1, {}), InvalidInput);
  CHECK_THROWS_AS(build_time_grid(1.0, 0.1, {-0.2}), InvalidInput);
}

TEST_CASE("x2 scaling round trip") {
  CHECK(scale_x2(0.0098, 40.0) == doctest::Approx(0.392).epsilon(1e-12));
  CHECK(scale_x2(0.0, 40.0) == 0.0);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(1e-6, 10.0);
  for (int q = 0; q < 1000; ++q) {
    const double x = u(rng);
    CHECK(unscale_x2(scale_x2(x, 40.0), 40.0) == doctest::Approx(x).epsilon(1e-15));
  }
}

TEST_CASE("spatial grid snaps the initial state onto both phases") {
  GridConfig cfg;
  cfg.n_x1 = 50;
  cfg.n_x2 = 50;
  const double x1_0 = std::log(100.0), x2_0 = 0.0098;
  const SpatialGrid g = build_spatial_grid(cfg, x1_0, x2_0, 80);

  CHECK(g.coarse.x1[g.i0] == doctest::Approx(x1_0).epsilon(1e-15));
  CHECK(g.coarse.y2[g.j0_coarse] ==
        doctest::Approx(scale_x2(x2_0, cfg.scale_k)).epsilon(1e-12));
  CHECK(g.coarse.y2.front() == 0.0);
  CHECK(g.fine.y2.front() == 0.0);
  CHECK(g.fine.y2[g.j0_fine] ==
        doctest::Approx(scale_x2(x2_0, cfg.scale_k)).epsilon(1e-12));
  CHECK(g.fine.y2.back() == doctest::Approx(g.coarse.y2.back()).epsilon(1e-12));
  CHECK(g.switch_node == 80 - 1 - cfg.refine_steps);
  CHECK(g.node_is_fine(79));
  CHECK_FALSE(g.node_is_fine(g.switch_node - 1));
}

TEST_CASE("bilinear interpolation is exact on nodes and for bilinear fields") {
  GridPhase ph;
  ph.x1 = {1.0, 0.25, 9};
  ph.y2 = {0.0, 0.5, 7};

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  GridField f(ph);
  for (int i = 0; i < ph.x1.n; ++i)
    for (int j = 0; j < ph.y2.n; ++j)
      f.at(i, j) = a + b * ph.x1[i] + c * ph.y2[j] + d * ph.x1[i] * ph.y2[j];

  for (int i = 0; i < ph.x1.n; ++i)
    for (int j = 0; j < ph.y2.n; ++j)
      CHECK(interpolate_bilinear(f, ph, ph.x1[i], ph.y2[j]) ==
            doctest::Approx(f.at(i, j)).epsilon(1e-14));

  std::uniform_real_distribution<double> ux(ph.x1.front(), ph.x1.back());
  std::uniform_real_distribution<double> uy(ph.y2.front(), ph.y2.back());
  for (int q = 0; q < 200; ++q) {
    const double x = ux(rng), y = uy(rng);
    const double expected = a + b * x + c * y + d * x * y;
    CHECK(interpolate_bilinear(f, ph, x, y) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  CHECK_THROWS_AS(interpolate_bilinear(f, ph, ph.x1.back() + 1.0, 0.1), InvalidInput);
}

TEST_CASE("bilinear interpolation matches the four-corner formula") {
  GridPhase ph;
  ph.x1 = {-0.3, 0.11, 12};
  ph.y2 = {0.0, 0.07, 10};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  GridField f(ph);
  for (auto& v : f.v) v = u(rng);

  std::uniform_real_distribution<double> ux(ph.x1.front(), ph.x1.back());
  std::uniform_real_distribution<double> uy(ph.y2.front(), ph.y2.back());
  for (int q = 0; q < 500; ++q) {
    const double x = ux(rng), y = uy(rng);
    const int i = std::min(static_cast<int>((x - ph.x1.origin) / ph.x1.step), ph.x1.n - 2);
    const int j = std::min(static_cast<int>((y - ph.y2.origin) / ph.y2.step), ph.y2.n - 2);
    const double wx = (x - ph.x1[i]) / ph.x1.step;
    const double wy = (y - ph.y2[j]) / ph.y2.step;
    const double expected = (1 - wx) * (1 - wy) * f.at(i, j) +
                            (1 - wx) * wy * f.at(i, j + 1) +
                            wx * (1 - wy) * f.at(i + 1, j) +
                            wx * wy * f.at(i + 1, j + 1);
    CHECK(interpolate_bilinear(f, ph, x, y) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("regrid between phases") {
  GridConfig cfg;
  cfg.n_x1 = 8;
  cfg.n_x2 = 9;
  cfg.refine_factor = 4;
  const SpatialGrid g = build_spatial_grid(cfg, 0.0, 0.01, 40);

  SUBCASE("linear fields survive a coarse-fine-coarse round trip") {
    GridField f(g.coarse);
    for (int i = 0; i < g.coarse.x1.n; ++i)
      for (int j = 0; j < g.coarse.y2.n; ++j)
        f.at(i, j) = 0.3 - 1.7 * g.coarse.y2[j] + 0.2 * g.coarse.x1[i];
    const GridField back = regrid(regrid(f, g.coarse, g.fine), g.fine, g.coarse);
    for (size_t q = 0; q < f.v.size(); ++q)
      CHECK(back.v[q] == doctest::Approx(f.v[q]).epsilon(1e-13));
  }

  SUBCASE("constants stay constant") {
    GridField f(g.coarse, 3.25);
    const GridField fine = regrid(f, g.coarse, g.fine);
    for (double v : fine.v) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));
  }

  SUBCASE("coarse to fine matches a per-row 1-D interpolation oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridField f(g.coarse);
    for (auto& v : f.v) v = u(rng);
    const GridField fine = regrid(f, g.coarse, g.fine);
    for (int i = 0; i < g.fine.x1.n; ++i)
      for (int j = 0; j < g.fine.y2.n; ++j) {
        const double y = g.fine.y2[j];
        int cell = std::min(static_cast<int>(y / g.coarse.y2.step), g.coarse.y2.n - 2);
        const double w = (y - g.coarse.y2[cell]) / g.coarse.y2.step;
        const double expected = (1 - w) * f.at(i, cell) + w * f.at(i, cell + 1);
        CHECK(fine.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
      }
  }

  SUBCASE("x1 axis mismatch is rejected") {
    GridPhase other = g.fine;
    other.x1.origin += 0.5;
    GridField f(g.coarse);
    CHECK_THROWS_AS(regrid(f, g.coarse, other), InvalidInput);
  }
}
