#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vkh/error.hpp"
#include "vkh/fem.hpp"
#include "vkh/kernels.hpp"

using namespace vkh;

namespace {

DisplacementField random_field(const ExtrudedGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DisplacementField f(g.node_count());
  for (double& x : f.vec()) x = u(rng);
  return f;
}

// Direct 2x2x2 Gauss quadrature of Q(iota(M1 + x3 M2) + grad_h psi).
double quadrature_energy(const ExtrudedGrid& g, const MicrostructureField& field, double h, const Sym2& m1,
                         const Sym2& m2, const DisplacementField& psi) {
  const double lo = 0.5 - 0.5 / std::sqrt(3.0), hi = 0.5 + 0.5 / std::sqrt(3.0);
  const auto& b = g.base();
  const double w = b.spacing() * b.spacing() * g.dz() / 8.0;
  double e = 0.0;
  for (int i = 0; i < b.nx(); ++i)
    for (int j = 0; j < b.ny(); ++j) {
      if (!b.occupied(i, j)) continue;
      for (int k = 0; k < g.nz(); ++k)
        for (double a : {lo, hi})
          for (double c : {lo, hi})
            for (double d : {lo, hi}) {
              const QuadPoint q{i, j, k, a, c, d};
              const Point3 x{b.origin().x1 + (i + a) * b.spacing(), b.origin().x2 + (j + c) * b.spacing(),
                             g.z(k) + d * g.dz()};
              const Mat3 grad = iota(m1 + x.x3 * m2) + scaled_gradient(g, h, psi, q);
              e += w * field.eval(h, x, grad);
            }
    }
  return e;
}

}  // namespace

TEST_SUITE("fem") {
  TEST_CASE("quadratic system matches direct quadrature") {
    const ExtrudedGrid g(RasterDomain::ball({0.5, 0.5}, 0.25, 1.0 / 16), 3);
    const auto field = MicrostructureField::checkerboard({1, 1}, {0.5, 3}, 0.125);
    const Sym2 m1{0.4, -0.2, 0.3}, m2{-1.0, 0.5, 0.1};
    const double h = 0.2;
    const auto sys = assemble(g, field, h, m1, m2);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto psi = random_field(g, seed);
      CHECK(test::rel(sys.energy(psi.data()), quadrature_energy(g, field, h, m1, m2, psi)) < 1e-12);
    }
  }

  TEST_CASE("scaled gradient of an affine field") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.25), 2);
    const double h = 0.1;
    const auto psi = DisplacementField::sample(g, [](const Point3& x) {
      return std::array<double, 3>{2 * x.x1 - x.x3, x.x2 + 3 * x.x3, 0.5 * x.x1};
    });
    const Mat3 gr = scaled_gradient(g, h, psi, {1, 2, 1, 0.3, 0.6, 0.2});
    CHECK(gr(0, 0) == doctest::Approx(2.0));
    CHECK(gr(0, 2) == doctest::Approx(-1.0 / h));
    CHECK(gr(1, 2) == doctest::Approx(3.0 / h));
    CHECK(gr(2, 0) == doctest::Approx(0.5));
    CHECK(gr(2, 2) == doctest::Approx(0.0));
  }

  TEST_CASE("parallel assembly agrees with the serial reference") {
    const ExtrudedGrid g(RasterDomain::ball({0.5, 0.5}, 0.3, 1.0 / 16), 4);
    const auto field = MicrostructureField::smooth_modulated({1, 1}, 0.5, 0.25);
    const Sym2 m1{1, 0, 0.2}, m2{0, 1, 0};
    const auto a = assemble(g, field, 0.125, m1, m2);
    const auto b = reference::assemble_serial(g, field, 0.125, m1, m2);
    REQUIRE(a.dof_count() == b.dof_count());
    double worst = 0.0, scale = 0.0;
    for (int n = 0; n < a.op.node_count(); ++n)
      for (int s = 0; s < StencilOperator::kSlots; ++s)
        for (int k = 0; k < 9; ++k) {
          worst = std::max(worst, std::abs(a.op.block(n, s)[k] - b.op.block(n, s)[k]));
          scale = std::max(scale, std::abs(b.op.block(n, s)[k]));
        }
    CHECK(worst <= 1e-14 * scale);
    for (int i = 0; i < a.dof_count(); ++i) CHECK(a.linear[i] == doctest::Approx(b.linear[i]).epsilon(1e-13));
    CHECK(a.constant == doctest::Approx(b.constant).epsilon(1e-13));
  }

  TEST_CASE("stencil apply agrees with elementwise apply") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 0.5, 0.5}, 1.0 / 16), 4);
    const auto field = MicrostructureField::laminate({1, 1}, {2, 3}, 0.125);
    const auto sys = assemble(g, field, 0.1, {}, {});
    const auto x = random_field(g, 9);
    std::vector<double> y1(x.vec().size()), y2(x.vec().size());
    sys.op.apply(x.data(), y1);
    reference::apply_elementwise(g, field, 0.1, x.data(), y2);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
      worst = std::max(worst, std::abs(y1[i] - y2[i]));
      scale = std::max(scale, std::abs(y2[i]));
    }
    CHECK(worst <= 1e-13 * scale);
  }

  TEST_CASE("operator is symmetric") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 0.5, 0.5}, 0.125), 2);
    const auto sys = assemble(g, MicrostructureField::constant_isotropic(1, 1), 0.3, {}, {});
    for (int r = 0; r < sys.dof_count(); r += 7)
      for (int c = 0; c < sys.dof_count(); c += 5) CHECK(sys.op.entry(r, c) == doctest::Approx(sys.op.entry(c, r)));
  }

  TEST_CASE("gradient check") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 0.5, 0.5}, 0.125), 2);
    const auto sys = assemble(g, MicrostructureField::constant_isotropic(1, 2), 0.3, {1, 0, 0}, {0, 0, 1});
    const auto psi = random_field(g, 4), dir = random_field(g, 5);
    const auto gc = gradient_check(sys, psi.data(), dir.data(), 1e-4);
    CHECK(test::rel(gc.analytic, gc.numeric) < 1e-8);
  }

  TEST_CASE("CG solves the constrained system") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 0.5, 0.5}, 0.0625), 4);
    auto sys = apply_lateral_dirichlet(assemble(g, MicrostructureField::constant_isotropic(1, 1), 0.25,
                                                {1, 0.5, 0}, {0, 0, 1}),
                                       g);
    const auto r = solve_cg(sys, 1e-11, 10000);
    REQUIRE(r.converged);
    const auto grad = sys.gradient(r.psi.data());
    double gn = 0.0, bn = 0.0;
    for (int i = 0; i < sys.dof_count(); ++i) {
      if (sys.constrained[i]) {
        CHECK(r.psi.vec()[i] == 0.0);
        continue;
      }
      gn += grad[i] * grad[i];
      bn += sys.linear[i] * sys.linear[i];
    }
    CHECK(std::sqrt(gn / bn) <= 1e-11);
  }

  TEST_CASE("column preconditioner converges to the same minimizer") {
    const ExtrudedGrid g(RasterDomain::ball({0.5, 0.5}, 0.25, 1.0 / 16), 6);
    const auto sys = apply_lateral_dirichlet(
        assemble(g, MicrostructureField::laminate({1, 1}, {2, 3}, 0.125), 0.0625, {1, 0, 0.5}, {0, 1, 0}), g);
    const auto a = solve_cg(sys, 1e-11, 20000, nullptr, Preconditioner::Jacobi);
    const auto b = solve_cg(sys, 1e-11, 20000, nullptr, Preconditioner::Column);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(b.iterations < a.iterations);
    CHECK(test::rel(sys.energy(a.psi.data()), sys.energy(b.psi.data())) < 1e-12);
    CHECK(preconditioner_from_string(to_string(Preconditioner::Column)) == Preconditioner::Column);
  }

  TEST_CASE("imposed norm") {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 0.5}, 0.125), 2);
    const Sym2 m1{1, 2, 0.5}, m2{0, -1, 1};
    CHECK(imposed_norm_sq(g, m1, m2) == doctest::Approx(0.5 * (m1.norm2() + m2.norm2() / 12)));
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("blocked dot equals serial dot to rounding") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> a(100003), b(100003);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    CHECK(kernels::dot(a, b) == doctest::Approx(reference::dot(a, b)).epsilon(1e-12));
  }

  TEST_CASE("reductions are bit-identical across thread counts") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> a(50001), b(50001);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const int saved = kernels::thread_count();
    kernels::set_thread_count(1);
    const double d1 = kernels::dot(a, b);
    kernels::set_thread_count(4);
    const double d4 = kernels::dot(a, b);
    kernels::set_thread_count(saved);
    CHECK(d1 == d4);
  }

  TEST_CASE("axpy and xpby") {
    std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    kernels::axpy(2.0, x, y);
    CHECK(y == std::vector<double>{6, 9, 12});
    kernels::xpby(x, 0.5, y);
    CHECK(y == std::vector<double>{4, 6.5, 9});
  }
}
