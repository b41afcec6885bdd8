#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vkh/error.hpp"
#include "vkh/griso.hpp"

using namespace vkh;

namespace {

double r1_of(const Point2& p) { return std::sin(p.x1) + p.x2; }
double r2_of(const Point2& p) { return p.x1 * p.x2 - 0.5; }

// psi_hat0 + r0 ^ x3 e3 with (r1, r2, 0) ^ (0, 0, x3) = x3 (r2, -r1, 0)
DisplacementField rigid_field(const ExtrudedGrid& g) {
  return DisplacementField::sample(g, [](const Point3& x) {
    const Point2 p{x.x1, x.x2};
    return std::array<double, 3>{0.3 * x.x1 + x.x3 * r2_of(p), -x.x2 * x.x2 - x.x3 * r1_of(p), std::cos(x.x1)};
  });
}

DisplacementField smooth_family(const ExtrudedGrid& g, double h) {
  return DisplacementField::sample(g, [h](const Point3& x) {
    const double a1 = std::sin(2 * x.x1 + x.x2), a2 = std::cos(x.x1 - x.x2);
    const double s = std::sin(3 * x.x1) * std::cos(2 * x.x2);
    return std::array<double, 3>{h * a1 + h * x.x3 * std::cos(x.x2), h * a2 + h * x.x3 * x.x1,
                                 s + h * x.x3 * x.x3 * x.x1 * x.x2};
  });
}

}  // namespace

TEST_SUITE("griso") {
  TEST_CASE("rigid-type fields decompose exactly") {
    const ExtrudedGrid g(RasterDomain::ball({0.5, 0.5}, 0.4, 1.0 / 16), 6);
    const auto psi = rigid_field(g);
    const auto parts = decompose(psi, g);
    double worst = 0.0;
    for (int b = 0; b < g.base().node_count(); ++b) {
      const Point2 p = g.base().node_pos(b);
      worst = std::max({worst, std::abs(parts.r[b][0] - r1_of(p)), std::abs(parts.r[b][1] - r2_of(p)),
                        std::abs(parts.psi_hat[b](0) - 0.3 * p.x1), std::abs(parts.psi_hat[b](2) - std::cos(p.x1))});
    }
    CHECK(worst < 1e-14);
    for (double v : parts.psi_bar.vec()) CHECK(std::abs(v) < 1e-14);
  }

  TEST_CASE("moment factor 3/2 recovers an eighth of r") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.125), 4);
    const auto parts = decompose(rigid_field(g), g, 1.5);
    for (int b = 0; b < g.base().node_count(); ++b) {
      const Point2 p = g.base().node_pos(b);
      CHECK(parts.r[b][0] == doctest::Approx(r1_of(p) / 8).epsilon(1e-12));
    }
  }

  TEST_CASE("reconstruction and column means") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.125), 8);
    const auto psi = random_smooth_field(g, 0.1, 42);
    const auto parts = decompose(psi, g);
    const auto back = reconstruct(parts, g);
    for (std::size_t i = 0; i < psi.vec().size(); ++i) CHECK(back.vec()[i] == doctest::Approx(psi.vec()[i]));
    const auto n = griso_norms(parts, g);
    CHECK(n.mean_psi_bar < 1e-14);
    const auto again = decompose(parts.psi_bar, g);
    for (const auto& r : again.r) CHECK(std::abs(r[0]) + std::abs(r[1]) < 1e-13);
  }

  TEST_CASE("seeded fields are reproducible") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.25), 4);
    CHECK(random_smooth_field(g, 0.1, 7).vec() == random_smooth_field(g, 0.1, 7).vec());
    CHECK(random_smooth_field(g, 0.1, 7).vec() != random_smooth_field(g, 0.1, 8).vec());
  }

  TEST_CASE("korn ratio") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.125), 4);
    // x3-independent in-plane field: psi_bar = 0, lhs = rhs
    const auto planar = DisplacementField::sample(g, [](const Point3& x) {
      return std::array<double, 3>{std::sin(x.x1 + 2 * x.x2), x.x1 * x.x2, 0.0};
    });
    CHECK(korn_ratio(planar, g, 0.1).ratio == doctest::Approx(1.0).epsilon(1e-12));
    const auto rigid = DisplacementField::sample(g, [](const Point3&) { return std::array<double, 3>{1, 2, 3}; });
    CHECK_THROWS_AS(korn_ratio(rigid, g, 0.1), PreconditionError);
    for (std::uint64_t s = 0; s < 5; ++s) CHECK(korn_ratio(random_smooth_field(g, 0.1, s), g, 0.1).ratio >= 1.0);
  }

  TEST_CASE("regularize recovers affine potentials") {
    const auto dom = RasterDomain::ball({0.5, 0.5}, 0.3, 1.0 / 16);
    // (r2, -r1) = (0.7, -0.2) constant, so phi = -0.7 x1 + 0.2 x2 up to a constant
    std::vector<std::array<double, 2>> r(dom.node_count(), {0.2, 0.7});
    const auto res = regularize(r, dom, 1e-12);
    CHECK(res.misfit < 1e-9);
    const NodalDifferences nd(dom);
    const auto& m = nd.mass();
    double mean = 0.0, area = 0.0;
    for (int n = 0; n < dom.node_count(); ++n) {
      mean += m[n] * res.phi[n];
      area += m[n];
    }
    CHECK(std::abs(mean / area) < 1e-12);
    const Point2 a = dom.node_pos(0), b = dom.node_pos(dom.node_count() - 1);
    CHECK(res.phi[dom.node_count() - 1] - res.phi[0] ==
          doctest::Approx(-0.7 * (b.x1 - a.x1) + 0.2 * (b.x2 - a.x2)).epsilon(1e-8));
  }

  TEST_CASE("regularize is a minimizer") {
    const auto dom = RasterDomain::rectangle({0, 0, 1, 1}, 0.0625);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::array<double, 2>> r(dom.node_count());
    for (auto& x : r) x = {u(rng), u(rng)};
    const auto res = regularize(r, dom, 1e-12);
    CHECK(res.misfit == doctest::Approx(regularize_misfit(res.phi, r, dom)));
    for (int k = 0; k < 20; ++k) {
      auto phi = res.phi;
      for (double& x : phi) x += 1e-3 * u(rng);
      CHECK(regularize_misfit(phi, r, dom) >= res.misfit);
    }
  }

  TEST_CASE("nodal differences") {
    const auto dom = RasterDomain::rectangle({0, 0, 1, 1}, 0.125);
    const NodalDifferences nd(dom);
    std::vector<double> quad(dom.node_count());
    for (int n = 0; n < dom.node_count(); ++n) {
      const Point2 p = dom.node_pos(n);
      quad[n] = 0.5 * p.x1 * p.x1 + 3 * p.x1 * p.x2 - p.x2;
    }
    const auto d1 = nd.d(quad, 0);
    const auto hs = nd.hessian(quad);
    const int c = dom.node_id(4, 4);
    CHECK(d1[c] == doctest::Approx(0.5 + 3 * 0.5));
    CHECK(hs[c].e11 == doctest::Approx(1.0));
    CHECK(hs[c].e12 == doctest::Approx(3.0));
    CHECK(std::abs(hs[c].e22) < 1e-10);
  }

  TEST_CASE("mollify") {
    const auto dom = RasterDomain::rectangle({0, 0, 1, 1}, 1.0 / 32);
    std::vector<double> ones(dom.node_count(), 2.5), lin(dom.node_count());
    for (int n = 0; n < dom.node_count(); ++n) lin[n] = dom.node_pos(n).x1;
    for (double v : mollify(ones, dom, 0.1)) CHECK(v == doctest::Approx(2.5));
    const auto ml = mollify(lin, dom, 0.1);
    const int c = dom.node_id(16, 16);
    CHECK(ml[c] == doctest::Approx(0.5));
    CHECK_THROWS_AS(mollify(ones, dom, 0.01), PreconditionError);
  }

  TEST_CASE("second split identity and vanishing data") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 1.0 / 16), 8);
    const double h = 0.125;
    const auto s = second_form(smooth_family(g, h), g, h);
    CHECK(s.identity_defect <= 1e-12 * s.strain_scale);
    const auto z = second_form(DisplacementField(g.node_count()), g, h);
    CHECK(z.o_norm == 0.0);
    CHECK(z.identity_defect == 0.0);
    for (double v : z.psi_tilde.vec()) CHECK(v == 0.0);
    CHECK_THROWS_AS(second_form(DisplacementField(ExtrudedGrid(g.base(), 2).node_count()), ExtrudedGrid(g.base(), 2), h),
                    PreconditionError);
  }

  TEST_CASE("second split residual decreases on a smooth family") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 1.0 / 32), 8);
    double prev = INFINITY;
    for (double h : {0.25, 0.125, 0.0625}) {
      const auto s = second_form(smooth_family(g, h), g, h);
      CHECK(s.o_norm < prev);
      prev = s.o_norm;
    }
  }

  TEST_CASE("field csv header") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.5), 2);
    const auto csv = field_csv(DisplacementField(g.node_count()), g);
    CHECK(csv.rfind("x1,x2,x3,psi1,psi2,psi3\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == g.node_count() + 1);
  }
}
