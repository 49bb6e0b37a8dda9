#include "doctest.h"

#include <memory>

#include "helpers.hpp"
#include "hjm3/sim.hpp"

using namespace hjm3;

namespace {

BlockVolSpec zero_vol_spec() {
  BlockVolSpec s = testutil::model_a();
  s.A_N.setZero();
  s.A_R.setZero();
  s.A_S.setZero();
  s.sigma_I.setZero();
  s.sigma_J.setZero();
  return s;
}

SimConfig small_config() {
  SimConfig c;
  c.n_paths = 40;
  c.horizon = 1.0;
  c.record_every = 13;
  c.seed = 9;
  return c;
}

SimState initial(const SimConfig& c) {
  const auto init = testutil::model_a_init();
  auto grid = std::make_shared<const std::vector<double>>(build_sim_grid(init.grid.tenors(), c.dt, c.horizon));
  return make_initial_state(init, grid);
}

}  // namespace

TEST_CASE("grid contains pillars exactly and spans tail plus horizon") {
  const std::vector<double> p{0.25, 0.5, 1, 2, 3, 5, 7, 10, 0.3};
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const auto g = build_sim_grid(sorted, 1.0 / 52, 5.0);
  for (double x : p) CHECK(std::find(g.begin(), g.end(), x) != g.end());
  CHECK(g.front() == 0.0);
  CHECK(g.back() >= 15.0 - 1e-12);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
}

TEST_CASE("zero-vol step is exact roll-down of a linear curve") {
  const auto spec = zero_vol_spec();
  const double dt = 1.0 / 52;
  auto grid = std::make_shared<const std::vector<double>>(build_sim_grid({0.25, 1, 5, 10}, dt, 1.0));
  SimState s;
  s.grid = grid;
  const auto& g = *grid;
  for (double t : g) {
    s.fN.push_back(0.10 + 0.002 * t);
    s.fR.push_back(0.05 - 0.001 * t);
    s.sCDI.push_back(0.015 + 0.0005 * t);
  }
  const auto next = step(s, spec, Eigen::VectorXd::Zero(spec.m()), dt);
  double worst = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] + dt > g.back()) break;
    const double t = g[i] + dt;
    worst = std::max(worst, std::abs(next.fN[i] - (0.10 + 0.002 * t)));
    worst = std::max(worst, std::abs(next.fR[i] - (0.05 - 0.001 * t)));
    worst = std::max(worst, std::abs(next.sCDI[i] - (0.015 + 0.0005 * t)));
  }
  CHECK(worst < 1e-12);
  // deterministic exchange rates and accounts
  CHECK(next.BN == doctest::Approx(std::exp(0.10 * dt)).epsilon(1e-14));
  CHECK(next.I == doctest::Approx(std::exp((0.10 - 0.05) * dt)).epsilon(1e-14));
}

TEST_CASE("recorded curves at t = 0 equal the initial curves bit for bit") {
  const auto spec = testutil::model_a();
  const auto init = testutil::model_a_init();
  auto c = small_config();
  c.record_pillars = init.grid.tenors();
  const auto out = run_paths(initial(c), spec, c);
  for (int p = 0; p < c.n_paths; ++p) {
    const double* fn = out.curve_row(p, 0, CurveField::fN);
    const double* fr = out.curve_row(p, 0, CurveField::fR);
    const double* sc = out.curve_row(p, 0, CurveField::sCDI);
    for (std::size_t i = 0; i < init.grid.size(); ++i) {
      CHECK(fn[i] == init.f_nominal[i]);
      CHECK(fr[i] == init.f_real[i]);
      CHECK(sc[i] == init.s_cdi[i]);
    }
  }
}

TEST_CASE("credit-over-inflation identity and triangle identity on every record") {
  const auto spec = testutil::model_a();
  auto c = small_config();
  c.record_every = 1;
  const auto out = run_paths(initial(c), spec, c);
  double worst_k = 0, worst_tri = 0;
  for (int p = 0; p < c.n_paths; ++p)
    for (std::size_t r = 0; r < out.records(); ++r) {
      const double k = out.scalar(p, r, ScalarField::K);
      const double ji = out.scalar(p, r, ScalarField::J) / out.scalar(p, r, ScalarField::I);
      worst_k = std::max(worst_k, std::abs(k - ji) / std::abs(ji));
      const double* fn = out.curve_row(p, r, CurveField::fN);
      const double* fr = out.curve_row(p, r, CurveField::fR);
      const double* sc = out.curve_row(p, r, CurveField::sCDI);
      const double* si = out.curve_row(p, r, CurveField::sIPCA);
      for (std::size_t i = 0; i < out.pillars.size(); ++i)
        worst_tri = std::max(worst_tri, std::abs(si[i] - sc[i] - (fn[i] - fr[i])));
    }
  CHECK(worst_k < 1e-12);
  CHECK(worst_tri < 1e-10);
}

TEST_CASE("thread count does not change results") {
  const auto spec = testutil::model_a();
  auto c = small_config();
  const auto a = run_paths(initial(c), spec, c);
  c.threads = 3;
  const auto b = run_paths(initial(c), spec, c);
  CHECK(a.scalars == b.scalars);
  CHECK(a.curves == b.curves);
}

TEST_CASE("antithetic pairs mirror the shocks") {
  auto spec = testutil::model_a();
  auto c = small_config();
  c.antithetic = true;
  c.horizon = 1.0 / 52;
  c.record_every = 1;
  const auto out = run_paths(initial(c), spec, c);
  // one step with mirrored shocks: the deterministic part (roll-down plus drift) is shared, so a + b is
  // the same for every pair
  auto change = [&](int p) { return out.curve_row(p, 1, CurveField::fN)[3] - out.curve_row(p, 0, CurveField::fN)[3]; };
  const double common = change(0) + change(1);
  for (int p = 0; p < c.n_paths; p += 2) {
    CHECK(std::abs(change(p) + change(p + 1) - common) < 1e-15);
    CHECK(std::abs(change(p) - change(p + 1)) > 0);
  }
  c.n_paths = 3;
  CHECK_THROWS_AS(run_paths(initial(c), spec, c), ValidationError);
}

TEST_CASE("sim csv round trip") {
  const auto spec = testutil::model_a();
  auto c = small_config();
  c.n_paths = 5;
  const auto out = run_paths(initial(c), spec, c);
  const auto dir = testutil::scratch("sim_csv");
  write_sim_csv(out, (dir / "s.csv").string());
  const auto back = read_sim_csv((dir / "s.csv").string());
  CHECK(back.n_paths == 5);
  CHECK(back.times == out.times);
  CHECK(back.pillars == out.pillars);
  CHECK(back.scalars == out.scalars);
  CHECK(back.curves == out.curves);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.horizon = 1.01;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimConfig{};
  c.n_paths = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = SimConfig{};
  c.record_pillars = {1.0, 0.5};
  CHECK_THROWS(c.validate());
  c = SimConfig{};
  auto st = initial(c);
  c.record_pillars = {0.3};
  CHECK_THROWS_AS(run_paths(st, testutil::model_a(), c), ValidationError);
}
