#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vkh/corrector.hpp"
#include "vkh/extrapolation.hpp"

using namespace vkh;

TEST_SUITE("corrector") {
  TEST_CASE("zero imposed strain gives zero") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    const auto r = k_value(f, 0.125, RasterDomain::rectangle({0, 0, 1, 1}, 0.125), {}, {});
    CHECK(r.k_value == 0.0);
    CHECK(r.admissibility == 0.0);
  }

  TEST_CASE("unit square membrane value lies between relaxed and unrelaxed densities") {
    // q(iota(E11)) = 3 and the relaxed value 8/3 for lambda = mu = 1
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    CorrectorOptions o;
    o.nz = 4;
    const auto r = k_value(f, 0.125, RasterDomain::rectangle({0, 0, 1, 1}, 0.125), {1, 0, 0}, {}, o);
    CHECK(r.k_per_area > 8.0 / 3.0);
    CHECK(r.k_per_area < 3.0);
    CHECK(r.k_value >= r.lower_bound);
    CHECK(r.k_value <= r.upper_bound);
    CHECK(r.residual <= o.tol);
  }

  TEST_CASE("admissibility decays with h") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    const auto dom = RasterDomain::ball({0.5, 0.5}, 0.25, 1.0 / 16);
    CorrectorOptions o;
    o.nz = 4;
    const auto t = h_sweep(f, dom, {1, 0, 0}, {0, 1, 0}, {0.25, 0.125, 0.0625}, o);
    REQUIRE(t.rows.size() == 3);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
      CHECK(t.rows[i].admissibility < t.rows[i - 1].admissibility);
      const double order = std::log(t.rows[i - 1].admissibility / t.rows[i].admissibility) / std::log(2.0);
      CHECK(order > 0.5);
    }
    CHECK_FALSE(t.admissibility_warning);
    CHECK(t.to_csv().rfind("h,k_value,k_per_area,admissibility,sym_norm,cg_iters,residual\n", 0) == 0);
  }

  TEST_CASE("h list validation") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    const auto dom = RasterDomain::rectangle({0, 0, 1, 1}, 0.25);
    CHECK_THROWS_AS(h_sweep(f, dom, {1, 0, 0}, {}, {0.25, 0.125}), PreconditionError);
    CHECK_THROWS_AS(h_sweep(f, dom, {1, 0, 0}, {}, {0.125, 0.25, 0.0625}), PreconditionError);
    CHECK_THROWS_AS(h_sweep(f, dom, {1, 0, 0}, {}, {0.25, 0.125, -1.0}), PreconditionError);
  }

  TEST_CASE("iteration cap raises a solver error") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    CorrectorOptions o;
    o.maxit = 2;
    CHECK_THROWS_AS(k_value(f, 0.125, RasterDomain::rectangle({0, 0, 1, 1}, 0.0625), {1, 0, 0}, {}, o),
                    SolverError);
  }
}

TEST_SUITE("extrapolation") {
  TEST_CASE("recovers a synthetic power law") {
    const std::vector<double> h{0.5, 0.25, 0.125, 0.0625};
    for (double p : {0.7, 1.0, 2.0}) {
      std::vector<double> k;
      for (double x : h) k.push_back(3.0 - 0.8 * std::pow(x, p));
      const auto m = fit_power_law(h, k);
      CHECK(m.k_inf == doctest::Approx(3.0).epsilon(1e-6));
      CHECK(m.c == doctest::Approx(-0.8).epsilon(1e-5));
      CHECK(m.p == doctest::Approx(p).epsilon(1e-5));
      CHECK(m.residual < 1e-8);
      CHECK_FALSE(m.p_at_bound);
    }
  }

  TEST_CASE("constant data") {
    const std::vector<double> h{0.3, 0.2, 0.1}, k{2.0, 2.0, 2.0};
    const auto m = fit_power_law(h, k);
    CHECK(m.k_inf == doctest::Approx(2.0));
    CHECK(m.c == doctest::Approx(0.0));
  }

  TEST_CASE("steep data pins the rate at the bound") {
    const std::vector<double> h{0.5, 0.25, 0.125}, k{1.0 + std::pow(0.5, 6), 1.0 + std::pow(0.25, 6), 1.0};
    CHECK(fit_power_law(h, k).p_at_bound);
  }

  TEST_CASE("too few points") {
    const std::vector<double> h{0.5, 0.25}, k{1, 2};
    CHECK_THROWS(fit_power_law(h, k));
  }
}
