#include "doctest.h"

#include <cmath>
#include <random>

#include "hjm3/curves.hpp"

using namespace hjm3;

TEST_CASE("bootstrap discount matches business-day compounding") {
  const std::vector<double> y{0.1050, 0.1100, 0.1080, 0.1120};
  const std::vector<int> du{21, 126, 252, 756};
  const auto z = bootstrap_discount(y, du);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double expect = std::pow(1.0 + y[i], -du[i] / 252.0);
    CHECK(discount(z, du[i] / 252.0) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK_THROWS_AS(bootstrap_discount({0.1, 0.1}, {21, 21}), ValidationError);
  CHECK_THROWS_AS(bootstrap_discount({0.1}, {21, 42}), ValidationError);
}

TEST_CASE("zeros -> forwards -> zeros round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 0.15);
  std::vector<double> y;
  std::vector<int> du{5, 21, 63, 126, 252, 504, 756, 1260, 1764, 2520};
  for (std::size_t i = 0; i < du.size(); ++i) y.push_back(u(rng));
  const auto z = bootstrap_discount(y, du);
  const auto f = forward_from_zero(z);
  const auto back = zero_from_forward(f);
  for (std::size_t i = 0; i < du.size(); ++i) CHECK(std::abs(back.zeros[i] - z.zeros[i]) < 1e-9);
}

TEST_CASE("flat forward interpolation between nodes") {
  ZeroCurve z;
  z.grid = PillarGrid({1.0, 2.0});
  z.zeros = {0.10, 0.12};
  // forward on (1,2] is 0.14, so zero at 1.5 is (0.10 + 0.14 * 0.5) / 1.5
  CHECK(interp_flat_forward(z, 1.5) == doctest::Approx((0.10 + 0.07) / 1.5).epsilon(1e-14));
  CHECK(interp_flat_forward(z, 3.0) == doctest::Approx((0.24 + 0.14) / 3.0).epsilon(1e-14));
  CHECK(interp_flat_forward(z, 0.5) == doctest::Approx(0.10).epsilon(1e-14));
  CHECK_THROWS_AS(interp_flat_forward(z, -0.1), ValidationError);
}

TEST_CASE("svensson fit is exact on family data") {
  SvenssonParams p{0.055, -0.01, 0.02, -0.015, 1.2, 0.25};
  PillarGrid g({0.5, 1, 1.5, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20});
  std::vector<double> y;
  for (double t : g.tenors()) y.push_back(svensson_yield(p, t));
  const auto fit = fit_svensson(y, g);
  CHECK(fit.max_residual < 1e-8);
  for (double t : {0.75, 2.5, 9.0}) CHECK(std::abs(svensson_yield(fit.params, t) - svensson_yield(p, t)) < 1e-8);
}

TEST_CASE("svensson forward is the derivative of tau * yield") {
  SvenssonParams p{0.05, 0.01, -0.02, 0.03, 0.9, 0.2};
  for (double t : {0.5, 2.0, 7.0}) {
    const double h = 1e-5;
    const double num = ((t + h) * svensson_yield(p, t + h) - (t - h) * svensson_yield(p, t - h)) / (2 * h);
    CHECK(svensson_forward(p, t) == doctest::Approx(num).epsilon(1e-8));
  }
}

TEST_CASE("bucket spreads are invariant to weight rescaling") {
  ConstituentPanel a;
  const Date d1 = parse_date("2023-01-02"), d2 = parse_date("2023-01-03");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dur(0.5, 6.0), spr(0.005, 0.03), w(1, 10);
  for (int i = 0; i < 60; ++i)
    a.rows.push_back({i % 2 ? d1 : d2, Family::CDI, "iss" + std::to_string(i), "T" + std::to_string(i),
                      spr(rng), dur(rng), w(rng)});
  ConstituentPanel b = a;
  for (auto& r : b.rows)
    if (r.date == d1) r.weight *= 37.5;
  const PillarGrid v({1, 2, 3, 5});
  const std::vector<double> hw{0.5, 0.5, 0.75, 1.0};
  const auto pa = bucket_spreads(a, Family::CDI, v, hw, 2);
  const auto pb = bucket_spreads(b, Family::CDI, v, hw, 2);
  REQUIRE(pa.rows() == 2);
  for (Eigen::Index i = 0; i < pa.values.rows(); ++i)
    for (Eigen::Index j = 0; j < pa.values.cols(); ++j) {
      if (std::isnan(pa.values(i, j))) {
        CHECK(std::isnan(pb.values(i, j)));
        continue;
      }
      CHECK(pa.values(i, j) == doctest::Approx(pb.values(i, j)).epsilon(1e-13));
    }
  CHECK(pa.kind == SeriesKind::CdiSpread);
  // no IPCA rows at all
  CHECK(bucket_spreads(a, Family::IPCA, v, hw, 2).rows() == 0);
}
