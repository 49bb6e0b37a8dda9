#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "helpers.hpp"
#include "hjm3/volarch.hpp"

using namespace hjm3;

namespace {

double quad(const std::function<double(double)>& f, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, hi, 15, 1e-14);
}

}  // namespace

TEST_CASE("cumulative shape integrals match adaptive quadrature") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  double worst = 0;
  for (int draw = 0; draw < 25; ++draw) {
    ShapeFamily f{u(rng), u(rng), u(rng)};
    for (double tau = 0.1; tau <= 10.0 + 1e-9; tau += 0.1) {
      const auto g = cum_integral(f, Block::N, tau);
      worst = std::max(worst, std::abs(g[0] - quad([](double) { return 1.0; }, tau)));
      worst = std::max(worst, std::abs(g[1] - quad([&](double s) { return std::exp(-f.b2 * s); }, tau)));
      worst = std::max(worst, std::abs(g[2] - quad([&](double s) { return s * std::exp(-f.b3 * s); }, tau)));
      const auto h = cum_integral(f, Block::S, tau);
      worst = std::max(worst, std::abs(h[1] - quad([&](double s) { return std::exp(-f.c2 * s); }, tau)));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("own-block drift equals the weighted inner product") {
  const auto spec = testutil::model_a();
  for (Block b : {Block::N, Block::R, Block::S})
    for (double tau = 0.1; tau <= 10.0 + 1e-9; tau += 0.3) {
      const double lhs = hjm_drift_own(spec, b, tau);
      const double rhs = weighted_inner(spec, block_vol(spec, b, tau), cum_block_vol(spec, b, tau));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("own-block drift against an explicit sum") {
  const auto spec = testutil::model_a();
  const double tau = 2.5;
  const auto g = shape_eval(spec.shape, Block::R, tau);
  const auto G = cum_integral(spec.shape, Block::R, tau);
  double expect = 0;
  for (int k = 0; k < 2; ++k) {
    double s = 0, a = 0;
    for (int j = 0; j < 3; ++j) {
      s += spec.A_R(k, j) * g[j];
      a += spec.A_R(k, j) * G[j];
    }
    expect += s * a;
  }
  CHECK(hjm_drift_own(spec, Block::R, tau) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("spread drift reduces to the own-block drift without N-S coupling") {
  auto spec = testutil::model_a();
  for (int i = 0; i < 3; ++i)
    for (int j = 5; j < 7; ++j) spec.rho(i, j) = spec.rho(j, i) = 0.0;
  spec.sigma_J.setZero();
  spec.validate();
  for (double tau = 0.0; tau <= 10.0; tau += 0.25) CHECK(spread_drift(spec, tau) == hjm_drift_own(spec, Block::S, tau));
}

TEST_CASE("spec validation") {
  const auto good = testutil::model_a();
  CHECK_NOTHROW(good.validate());
  SUBCASE("within-block correlation") {
    auto s = good;
    s.rho(0, 1) = s.rho(1, 0) = 0.05;
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("not positive definite") {
    auto s = good;
    s.rho(0, 3) = s.rho(3, 0) = 0.99;
    s.rho(0, 4) = s.rho(4, 0) = 0.99;
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("asymmetric") {
    auto s = good;
    s.rho(0, 3) = 0.3;
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("fx loading outside its blocks") {
    auto s = good;
    s.sigma_I[5] = 0.001;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = good;
    s.unrestricted_fx = true;
    s.sigma_I[5] = 0.001;
    CHECK_NOTHROW(s.validate());
  }
  SUBCASE("bad decay") {
    auto s = good;
    s.shape.b2 = 0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
}

TEST_CASE("spec json round trip in basis points") {
  const auto spec = testutil::model_a();
  CHECK(spec.A_N(0, 0) == doctest::Approx(188.1e-4).epsilon(1e-14));
  const auto back = spec_from_json(to_json(spec));
  CHECK((back.A_N - spec.A_N).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((back.rho - spec.rho).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.sigma_J - spec.sigma_J).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::sqrt(weighted_inner(spec, spec.sigma_I, spec.sigma_I)) == doctest::Approx(135.1e-4).epsilon(1e-9));
  CHECK(std::sqrt(weighted_inner(spec, spec.sigma_J, spec.sigma_J)) == doctest::Approx(80.7e-4).epsilon(1e-9));
}

TEST_CASE("empirical spread loadings") {
  EmpiricalLoadings e;
  e.pillars = {2, 3, 5};
  e.values.resize(2, 3);
  e.values << 164.8e-4, 12.5e-4, 38.4e-4, 9.7e-4, -47.7e-4, -26.0e-4;
  CHECK(e.eval(1.0)[0] == e.values(0, 0));
  CHECK(e.eval(2.5)[1] == doctest::Approx(0.5 * (9.7e-4 - 47.7e-4)).epsilon(1e-14));
  CHECK(e.eval(9.0)[0] == e.values(0, 2));
  for (double tau : {0.5, 2.7, 4.0, 8.0}) {
    const auto I = e.integral(tau);
    const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double s) { return e.eval(s)[1]; }, 0.0, tau, 20, 1e-14);
    CHECK(I[1] == doctest::Approx(q).epsilon(1e-10));
  }
}
