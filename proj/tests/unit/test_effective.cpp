#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vkh/effective.hpp"

using namespace vkh;

namespace {

// min over b of q(iota(G) + b (x) e3 + e3 (x) b), by the normal equations of the
// quadratic in b assembled from form evaluations only.
double relaxed_by_minimization(const ElasticForm& f, const Sym2& g) {
  auto shifted = [&](const Eigen::Vector3d& b) {
    Mat3 m = iota(g);
    for (int i = 0; i < 3; ++i) {
      m(i, 2) += b(i);
      m(2, i) += b(i);
    }
    return f(m);
  };
  const double q0 = shifted(Eigen::Vector3d::Zero());
  Eigen::Matrix3d hess;
  Eigen::Vector3d lin;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d ei = Eigen::Vector3d::Unit(i);
    lin(i) = 0.25 * (shifted(ei) - shifted(-ei));
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d ej = Eigen::Vector3d::Unit(j);
      hess(i, j) = 0.5 * (shifted(ei + ej) - shifted(ei) - shifted(ej) + q0);
    }
  }
  // q(b) = q0 + 2 lin.b + b^T hess b
  const Eigen::Vector3d b = -hess.ldlt().solve(lin);
  return shifted(b);
}

}  // namespace

TEST_SUITE("effective") {
  TEST_CASE("relaxed form agrees with direct minimization") {
    const auto f = isotropic_form(1, 1);
    const Mat3x3 q2 = relaxed_form_analytic(f);
    CHECK(Sym2{1, 0, 0}.vec().dot(q2 * Sym2{1, 0, 0}.vec()) == doctest::Approx(8.0 / 3.0));
    CHECK(relaxed_by_minimization(f, {1, 0, 0}) == doctest::Approx(8.0 / 3.0));
    // shear 4 mu
    CHECK(Sym2{0, 0, 1}.vec().dot(q2 * Sym2{0, 0, 1}.vec()) == doctest::Approx(4.0));
    std::mt19937_64 rng(1);
    for (const auto& form : {isotropic_form(1, 1), isotropic_form(0, 2), isotropic_form(3, 0.5)}) {
      const Mat3x3 q = relaxed_form_analytic(form);
      for (int k = 0; k < 10; ++k) {
        const Sym2 g = test::random_sym2(rng);
        CHECK(g.vec().dot(q * g.vec()) == doctest::Approx(relaxed_by_minimization(form, g)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("lambda zero leaves the in-plane form unrelaxed") {
    const Mat3x3 q2 = relaxed_form_analytic(isotropic_form(0, 1));
    CHECK((q2 - 2.0 * Mat3x3::Identity()).norm() < 1e-14);
  }

  TEST_CASE("plate density is block diagonal with the bending factor") {
    const auto f = isotropic_form(1, 1);
    const Mat6 q = relaxed_plate_density(f);
    const Mat3x3 q2 = relaxed_form_analytic(f);
    CHECK((q.topLeftCorner<3, 3>() - q2).norm() < 1e-15);
    CHECK((q.bottomRightCorner<3, 3>() - q2 / 12).norm() < 1e-15);
    CHECK(q.topRightCorner<3, 3>().norm() == 0.0);
    CHECK(q(3, 3) == doctest::Approx(2.0 / 9.0));
  }

  TEST_CASE("upper triangle round trip") {
    Mat6 m = Mat6::Random();
    m = (m + m.transpose()).eval();
    const auto v = upper_triangle(m);
    CHECK(v.size() == 21);
    CHECK(from_upper_triangle(v) == m);
  }

  TEST_CASE("density record json round trip") {
    EffectiveDensity d;
    d.x0 = {0.5, 0.5};
    d.r_used = 0.25;
    d.h_list = {0.25, 0.125, 0.0625};
    d.qhat = relaxed_plate_density(isotropic_form(1, 1));
    const Eigen::SelfAdjointEigenSolver<Mat6> es(d.qhat);
    d.min_eig = es.eigenvalues()(0);
    d.max_eig = es.eigenvalues()(5);
    d.alpha = 2.0;
    d.beta = 5.0;
    d.flags.non_converged = true;
    const auto j = d.to_json();
    const auto back = EffectiveDensity::from_json(j);
    CHECK(back.qhat == d.qhat);
    CHECK(back.flags.non_converged);
    CHECK(back.to_json().dump() == j.dump());
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(std::is_sorted(keys.begin(), keys.end()));
  }

  TEST_CASE("density estimate preconditions") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    const std::vector<double> h{0.25, 0.125, 0.0625};
    CHECK_THROWS_AS(estimate_density(f, {0.1, 0.5}, {1, 0, 0}, {}, {0.25}, h), PreconditionError);
    CHECK_THROWS_AS(estimate_density(f, {0.5, 0.5}, {1, 0, 0}, {}, {0.125, 0.25}, h), PreconditionError);
  }

  TEST_CASE("polarization reproduces the sampled values") {
    const auto f = MicrostructureField::constant_isotropic(1, 1);
    EffectiveOptions o;
    o.delta = 1.0 / 16;
    o.corrector.nz = 4;
    const auto d = polarize(f, {0.5, 0.5}, 0.25, {0.25, 0.125, 0.0625}, o);
    REQUIRE(d.samples.size() == 21);
    for (int i = 0; i < 6; ++i) CHECK(d.qhat(i, i) == doctest::Approx(d.samples[i]));
    CHECK((d.qhat - d.qhat.transpose()).norm() == 0.0);
    CHECK(d.min_eig > 0.0);
    const Mat6 exact = relaxed_plate_density(isotropic_form(1, 1));
    CHECK((d.qhat - exact).norm() / exact.norm() < 0.1);
    const Sym2 m1{1, 0.5, 0}, m2{0, 0, 1};
    const Vec6 v = vec_pair(m1, m2);
    CHECK(d.eval(m1, m2) == doctest::Approx(v.dot(d.qhat * v)));
  }

  TEST_CASE("property suite passes on small fixtures") {
    const auto f = MicrostructureField::checkerboard({1, 1}, {0.5, 2}, 0.25);
    PropertyFixtures fx{RasterDomain::rectangle({0, 0, 0.5, 0.5}, 0.125)};
    std::mt19937_64 rng(4);
    for (int k = 0; k < 4; ++k) fx.samples.emplace_back(test::random_sym2(rng), test::random_sym2(rng));
    fx.disjoint = std::make_pair(RasterDomain::from_rects({0, 0}, 0.125, 8, 8, {{0, 0, 0.25, 0.25}}),
                                 RasterDomain::from_rects({0, 0}, 0.125, 8, 8, {{0.5, 0.5, 0.875, 0.875}}));
    CorrectorOptions o;
    o.nz = 2;
    const auto rep = property_suite(f, fx, 0.25, o);
    CHECK(rep.all_pass());
    CHECK(rep.to_csv().rfind("property,pass,slack,tolerance,checks\n", 0) == 0);
    for (const auto& e : rep.entries) CHECK_MESSAGE(e.checks > 0, e.name);
  }
}
