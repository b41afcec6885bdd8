#include "doctest.h"
#include "support.hpp"
#include "vkh/elastic_form.hpp"
#include "vkh/error.hpp"

using namespace vkh;

TEST_SUITE("elastic_form") {
  TEST_CASE("vec_sym is an isometry on symmetric parts") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
      const Mat3 g = test::random_mat3(rng);
      CHECK(vec_sym(g).norm() == doctest::Approx(g.sym().frobenius()).epsilon(1e-14));
      const Mat3 back = unvec_sym(vec_sym(g));
      for (int i = 0; i < 9; ++i) CHECK(back.a[i] == doctest::Approx(g.sym().a[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("sym2 vec matches iota") {
    const Sym2 m{0.3, -1.2, 0.7};
    CHECK(m.norm2() == doctest::Approx(iota(m).frobenius2()));
    CHECK((vec_iota(m) - vec_sym(iota(m))).norm() < 1e-15);
    CHECK(Sym2::unvec(m.vec()) == m);
  }

  TEST_CASE("isotropic spectrum") {
    const auto f = isotropic_form(1.5, 0.75);
    const auto [lo, hi] = f.spectral_bounds();
    CHECK(lo == doctest::Approx(1.5));
    CHECK(hi == doctest::Approx(1.5 + 4.5));
    // q(I) = 2 mu 3 + lambda 9
    CHECK(f(Mat3::identity()) == doctest::Approx(2 * 0.75 * 3 + 1.5 * 9));
  }

  TEST_CASE("form ignores the skew part") {
    const auto f = isotropic_form(1.0, 1.0);
    Mat3 w;
    w(0, 1) = 1.0;
    w(1, 0) = -1.0;
    CHECK(f(w) == 0.0);
  }

  TEST_CASE("non-symmetric matrix rejected") {
    Mat6 c = Mat6::Identity();
    c(0, 1) = 1.0;
    CHECK_THROWS_AS(ElasticForm{c}, Error);
  }

  TEST_CASE("lipschitz gap within beta bound") {
    std::mt19937_64 rng(11);
    const auto f = isotropic_form(2.0, 0.5);
    for (int k = 0; k < 200; ++k) {
      const auto g = lipschitz_gap(f, test::random_mat3(rng), test::random_mat3(rng));
      CHECK(g.gap <= g.bound * (1 + 1e-12));
    }
  }
}
