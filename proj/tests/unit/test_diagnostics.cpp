#include "doctest.h"

#include <boost/math/distributions/normal.hpp>
#include <random>

#include "helpers.hpp"
#include "hjm3/diagnostics.hpp"

using namespace hjm3;

namespace {

SimOutput small_sim(int paths = 30) {
  const auto spec = testutil::model_a();
  const auto init = testutil::model_a_init();
  SimConfig c;
  c.n_paths = paths;
  c.horizon = 1.0;
  c.record_every = 13;
  c.seed = 4;
  auto grid = std::make_shared<const std::vector<double>>(build_sim_grid(init.grid.tenors(), c.dt, c.horizon));
  return run_paths(make_initial_state(init, grid), spec, c);
}

}  // namespace

TEST_CASE("triangle check passes on a simulation and catches injected faults") {
  auto sim = small_sim();
  const auto ok = triangle_check(sim);
  CHECK(ok.pass());
  CHECK(ok.max_violation < 1e-12);
  sim.curve_row(7, 2, CurveField::sIPCA)[4] += 1e-8;
  const auto bad = triangle_check(sim);
  CHECK_FALSE(bad.pass());
  CHECK(bad.path == 7);
  CHECK(bad.record == 2);
  CHECK(bad.pillar == 4);
  CHECK(bad.max_violation == doctest::Approx(1e-8).epsilon(1e-6));
  sim.curve_row(3, 1, CurveField::fR)[0] = kNaN;
  const auto nan = triangle_check(sim);
  CHECK_FALSE(nan.pass());
  CHECK(nan.path == 3);
}

TEST_CASE("martingale statistics against a direct computation") {
  const auto sim = small_sim(50);
  const auto rep = martingale_test(sim, {0.25, 1.0});
  CHECK(rep.z_crit == doctest::Approx(1.959963984540054).epsilon(1e-12));
  REQUIRE(rep.rows.size() == 4);
  const auto rec = std::size_t(std::find(sim.steps.begin(), sim.steps.end(), 52) - sim.steps.begin());
  std::vector<double> x;
  for (int p = 0; p < sim.n_paths; ++p) x.push_back(sim.credit_ratio(p, rec) / sim.credit_ratio(p, 0));
  double mean = 0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= double(x.size() - 1);
  const auto& row = rep.rows[3];
  CHECK(row.ratio == DeflatedRatio::Credit);
  CHECK(row.horizon == 1.0);
  CHECK(row.bias_bp == doctest::Approx((mean - 1) * 1e4).epsilon(1e-9));
  CHECK(row.se_bp == doctest::Approx(std::sqrt(var / double(x.size())) * 1e4).epsilon(1e-7));
  CHECK(row.z == doctest::Approx(row.bias_bp / row.se_bp).epsilon(1e-12));
  CHECK_THROWS_AS(martingale_test(sim, {0.3}), ValidationError);
  CHECK(martingale_test(sim, {1.0}, 0.01).z_crit == doctest::Approx(2.5758293035489).epsilon(1e-12));
}

TEST_CASE("second difference on a quadratic") {
  std::vector<double> t{0.5, 1.0, 2.0, 3.0, 5.0}, f;
  for (double x : t) f.push_back(1.0 + 0.1 * x * x);
  const double fmax = f.back();
  // exact second derivative 0.2 everywhere
  CHECK(normalized_second_difference(t, f, 0.5, 5.0) == doctest::Approx(0.2 / fmax).epsilon(1e-12));
  CHECK(normalized_second_difference(t, f, 0.5, 2.0) == doctest::Approx(0.2 / f[2]).epsilon(1e-12));
  std::vector<double> lin;
  for (double x : t) lin.push_back(1.0 + 0.3 * x);
  CHECK(normalized_second_difference(t, lin, 0, 10) < 1e-14);
  CHECK_THROWS_AS(normalized_second_difference(t, f, 2.5, 4.0), ValidationError);
}

TEST_CASE("smoothness metric reports every curve and window") {
  const auto sim = small_sim();
  const auto rows = smoothness_metric(sim, {{"short", 0.25, 3.0}, {"long", 3.0, 10.0}});
  CHECK(rows.size() == 10);
  for (const auto& r : rows) {
    CHECK(r.p95 <= r.max);
    CHECK(r.baseline >= 0);
  }
}

TEST_CASE("coverage counts changes inside the band") {
  CHECK(coverage_fraction(104, 110) == doctest::Approx(104.0 / 110));
  CurvePanel p;
  p.grid = PillarGrid({1.0});
  const double vol = 0.01, dt = 1.0 / 52;
  const double z = boost::math::quantile(boost::math::normal(), 0.95);
  const double half = z * vol * std::sqrt(dt);
  std::vector<double> level{0.1};
  int inside = 0;
  for (int i = 0; i < 60; ++i) {
    const double d = (i % 4 == 0 ? 1.5 : 0.5) * half * (i % 2 ? 1 : -1);
    if (std::abs(d) <= half) ++inside;
    level.push_back(level.back() + d);
  }
  p.values = Eigen::Map<Eigen::VectorXd>(level.data(), Eigen::Index(level.size()));
  for (std::size_t i = 0; i < level.size(); ++i) p.dates.push_back(parse_date("2024-01-05") + std::chrono::days(7 * i));
  const auto rep = coverage_test({{"dfN", p, {vol}}});
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].n == 60);
  CHECK(rep.rows[0].inside == inside);
  CHECK(inside == 45);
  CHECK_THROWS_AS(coverage_test({{"dfN", p, {vol}}}, 0.9, dt, 61), ValidationError);
  CHECK_THROWS_AS(coverage_test({{"dfN", p, {vol, vol}}}), ValidationError);
}

TEST_CASE("realized vol, model vol and ratios") {
  CurvePanel p;
  p.grid = PillarGrid({1.0, 2.0});
  p.values.resize(5, 2);
  p.values << 0.10, 0.2, 0.11, 0.2, 0.09, 0.2, 0.12, 0.2, 0.125, 0.2;
  for (int i = 0; i < 5; ++i) p.dates.push_back(parse_date("2024-01-05") + std::chrono::days(7 * i));
  const std::vector<double> d{0.01, -0.02, 0.03, 0.005};
  const double m = (0.01 - 0.02 + 0.03 + 0.005) / 4;
  double v = 0;
  for (double x : d) v += (x - m) * (x - m);
  CHECK(realized_vol(p, 0) == doctest::Approx(std::sqrt(52 * v / 3)).epsilon(1e-12));
  CHECK(realized_vol(p, 1) == 0.0);
  const auto spec = testutil::model_a();
  const auto g = shape_eval(spec.shape, Block::N, 3.0);
  CHECK(model_vol(spec, Block::N, 3.0) == doctest::Approx((spec.A_N * g).norm()).epsilon(1e-14));
  CHECK(vol_ratio(115.1, 81.1) == doctest::Approx(115.1 / 81.1));
  CHECK(std::isnan(vol_ratio(1.0, 0.0)));
}

TEST_CASE("moments of a known sample") {
  const auto m = moments({1, 2, 3, 4, 10});
  CHECK(m.n == 5);
  CHECK(m.mean == doctest::Approx(4.0));
  CHECK(m.sd == doctest::Approx(std::sqrt(12.5)));
  CHECK(m.skew > 0);
}

TEST_CASE("column correlation") {
  Eigen::MatrixXd z(4, 2);
  z << 1, 2, 2, 4, 3, 6, 4, 8.5;
  CHECK(column_correlation(z, 0, 1) > 0.99);
  CHECK(column_correlation(z, 0, 0) == doctest::Approx(1.0));
}
