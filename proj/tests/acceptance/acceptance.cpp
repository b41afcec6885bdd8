// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vkh/effective.hpp"
#include "vkh/griso.hpp"
#include "vkh/kernels.hpp"
#include "vkh/plate.hpp"

using namespace vkh;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s  %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

const PropertyEntry& entry(const PropertyReport& r, const std::string& name) {
  for (const auto& e : r.entries)
    if (e.name == name) return e;
  throw std::runtime_error("missing property entry " + name);
}

// min over b of q(iota(G) + b (x) e3 + e3 (x) b) from form evaluations only.
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
  return shifted(-hess.ldlt().solve(lin));
}

// Samples on a random walk with log-uniform step sizes, so consecutive pairs
// range from nearly equal to unrelated.
std::vector<std::pair<Sym2, Sym2>> walk_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), e(-3.0, 0.0);
  auto rnd = [&](double s) { return Sym2{s * u(rng), s * u(rng), s * u(rng)}; };
  std::vector<std::pair<Sym2, Sym2>> out{{rnd(1.0), rnd(1.0)}};
  while (static_cast<int>(out.size()) < n) {
    const double s = std::pow(10.0, e(rng));
    const auto& [a, b] = out.back();
    out.emplace_back(a + rnd(s), b + rnd(s));
  }
  return out;
}

struct Suites {
  PropertyReport checker, modulated;
};

const Suites& property_suites() {
  static const Suites s = [] {
    CorrectorOptions o;
    o.nz = 4;
    o.tol = 1e-9;
    const double h = 0.125;
    Suites r;
    {
      const auto f = MicrostructureField::checkerboard({1, 1}, {0.5, 2}, 0.125);
      PropertyFixtures fx(RasterDomain::ball({0.5, 0.5}, 0.25, 1.0 / 16));
      fx.samples = walk_samples(101, 2024);
      r.checker = property_suite(f, fx, h, o);
    }
    {
      const auto f = MicrostructureField::smooth_modulated({1, 0.5}, 0.6, 0.25);
      PropertyFixtures fx(RasterDomain::ball({0.5, 0.5}, 0.25, 1.0 / 16));
      fx.samples = walk_samples(21, 7);
      fx.disjoint = std::make_pair(RasterDomain::from_rects({0, 0}, 1.0 / 16, 16, 16, {{0.125, 0.125, 0.375, 0.375}}),
                                   RasterDomain::from_rects({0, 0}, 1.0 / 16, 16, 16, {{0.5, 0.5, 0.875, 0.8125}}));
      r.modulated = property_suite(f, fx, h, o);
    }
    return r;
  }();
  return s;
}

int bounded_solves = 0;  // solves completed by criteria 1 and 11, each bound-checked inside k_value

double weighted_norm(const std::vector<double>& v, const PlateDomain& d) {
  double s = 0.0;
  for (int n = 0; n < d.node_count(); ++n) s += d.weight(n) * v[n] * v[n];
  return std::sqrt(s);
}

// Linear Kirchhoff oracle: minimize sum_n w_n Qb(-D^2 v) - sum_n w_n g v over v vanishing
// on the boundary and the first interior ring, with Qb the bending block. Dense assembly
// from its own three-point difference rows.
std::vector<double> kirchhoff_oracle(int n1, double dl, const Mat3x3& qb, double load) {
  const int nn = n1 * n1;
  auto idx = [n1](int i, int j) { return j * n1 + i; };
  auto second = [n1, dl](int i) {
    const int c = std::clamp(i, 1, n1 - 2);
    return std::array<std::pair<int, double>, 3>{{{c - 1, 1 / (dl * dl)}, {c, -2 / (dl * dl)}, {c + 1, 1 / (dl * dl)}}};
  };
  auto first = [n1, dl](int i) -> std::vector<std::pair<int, double>> {
    if (i == 0) return {{0, -1.5 / dl}, {1, 2.0 / dl}, {2, -0.5 / dl}};
    if (i == n1 - 1) return {{n1 - 3, 0.5 / dl}, {n1 - 2, -2.0 / dl}, {n1 - 1, 1.5 / dl}};
    return {{i - 1, -0.5 / dl}, {i + 1, 0.5 / dl}};
  };
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nn, nn);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(nn);
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n1; ++i) {
      const double w = dl * dl * ((i == 0 || i == n1 - 1) ? 0.5 : 1.0) * ((j == 0 || j == n1 - 1) ? 0.5 : 1.0);
      // sparse rows of (d11 v, d22 v, sqrt2 d12 v)
      std::array<std::vector<std::pair<int, double>>, 3> b;
      for (auto [a, c] : second(i)) b[0].emplace_back(idx(a, j), c);
      for (auto [a, c] : second(j)) b[1].emplace_back(idx(i, a), c);
      for (auto [a, ca] : first(i))
        for (auto [bb, cb] : first(j)) b[2].emplace_back(idx(a, bb), std::sqrt(2.0) * ca * cb);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          for (auto [ra, va] : b[r])
            for (auto [cb, vb] : b[c]) k(ra, cb) += 2.0 * w * qb(r, c) * va * vb;
      f(idx(i, j)) += w * load;
    }
  std::vector<int> free;
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n1; ++i)
      if (i > 1 && j > 1 && i < n1 - 2 && j < n1 - 2) free.push_back(idx(i, j));
  const int nf = static_cast<int>(free.size());
  Eigen::MatrixXd kf(nf, nf);
  Eigen::VectorXd ff(nf);
  for (int a = 0; a < nf; ++a) {
    ff(a) = f(free[a]);
    for (int c = 0; c < nf; ++c) kf(a, c) = k(free[a], free[c]);
  }
  const Eigen::VectorXd vf = kf.ldlt().solve(ff);
  std::vector<double> v(nn, 0.0);
  for (int a = 0; a < nf; ++a) v[free[a]] = vf(a);
  return v;
}

}  // namespace

int main() {
  std::printf("acceptance run, %d OpenMP thread(s)\n", kernels::thread_count());

  run(1, "homogeneous effective density", [] {
    const auto form = isotropic_form(1, 1);
    const double membrane = relaxed_by_minimization(form, {1, 0, 0});
    const double bending = relaxed_by_minimization(form, {1, 0, 0}) / 12.0;
    const Mat6 exact = relaxed_plate_density(form);
    const bool oracle_ok = std::abs(exact(0, 0) - membrane) < 1e-12 && std::abs(exact(3, 3) - bending) < 1e-12 &&
                           std::abs(membrane - 8.0 / 3.0) < 1e-12 && std::abs(bending - 2.0 / 9.0) < 1e-12;
    EffectiveOptions o;
    o.delta = 1.0 / 32;
    o.corrector.nz = 8;
    const auto d = polarize(MicrostructureField::constant_isotropic(1, 1), {0.5, 0.5}, 0.25, {0.25, 0.125, 0.0625}, o);
    bounded_solves += 21 * 3;
    const double err = (d.qhat - exact).norm() / exact.norm();
    return Outcome{oracle_ok && err <= 0.02,
                   fmt("rel Frobenius error %.4e (tol 2e-2); Qhat(0,0)=%.6f vs 8/3, Qhat(3,3)=%.6f vs 2/9; "
                       "oracle %s; non_converged=%d",
                       err, d.qhat(0, 0), d.qhat(3, 3), oracle_ok ? "ok" : "MISMATCH", d.flags.non_converged)};
  });

  run(2, "homogeneity and parallelogram identities", [] {
    const auto& s = property_suites();
    const PropertyEntry* es[] = {&entry(s.checker, "(i) homogeneity"), &entry(s.checker, "(j) parallelogram"),
                                 &entry(s.modulated, "(i) homogeneity"), &entry(s.modulated, "(j) parallelogram")};
    bool pass = true;
    double worst = 0.0;
    int checks = 0;
    for (const auto* e : es) {
      pass = pass && e->pass && e->tolerance <= 1e-8;
      worst = std::max(worst, e->slack);
      checks += e->checks;
    }
    const int pairs = std::min(es[1]->checks, es[3]->checks);
    pass = pass && pairs >= 20;
    return Outcome{pass, fmt("worst relative defect %.3e (tol 1e-8) over %d checks, >= %d pairs per microstructure",
                             worst, checks, pairs)};
  });

  run(3, "exact energy bounds on every solve", [] {
    const auto& s = property_suites();
    bool pass = true;
    double worst = -INFINITY;
    int checks = 0;
    for (const auto* r : {&s.checker, &s.modulated})
      for (const char* n : {"(d) upper bound", "(k) lower bound"}) {
        const auto& e = entry(*r, n);
        pass = pass && e.pass;
        worst = std::max(worst, e.slack);
        checks += e.checks;
      }
    return Outcome{pass, fmt("%d suite solves, worst signed slack %.3e (rounding allowance 1e-11); "
                             "%d further solves checked in place",
                             checks / 2, worst, bounded_solves)};
  });

  run(4, "disjoint additivity", [] {
    const auto& e = entry(property_suites().modulated, "(g) additivity");
    return Outcome{e.pass && e.tolerance <= 1e-9,
                   fmt("worst relative defect %.3e (tol 1e-9) over %d samples", e.slack, e.checks)};
  });

  run(5, "continuity estimate with C = beta", [] {
    const auto& e = entry(property_suites().checker, "(h) continuity");
    return Outcome{e.pass && e.checks >= 100,
                   fmt("%d pairs, largest |dk| / bound - 1 = %.3e", e.checks, e.slack)};
  });

  run(6, "Griso projection exactness", [] {
    const ExtrudedGrid g(RasterDomain::ball({0.5, 0.5}, 0.4, 1.0 / 32), 8);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1, 1);
    const double c[6] = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    auto r1 = [&](double x, double y) { return c[0] * std::sin(2 * x) + c[1] * y * y; };
    auto r2 = [&](double x, double y) { return c[2] * std::cos(3 * y) + c[3] * x * y; };
    auto hat = [&](double x, double y) { return std::array<double, 3>{c[4] * x * y, std::sin(x - y), c[5] * std::cos(x)}; };
    const auto psi = DisplacementField::sample(g, [&](const Point3& p) {
      const auto h = hat(p.x1, p.x2);
      return std::array<double, 3>{h[0] + p.x3 * r2(p.x1, p.x2), h[1] - p.x3 * r1(p.x1, p.x2), h[2]};
    });
    const auto exact = decompose(psi, g);
    const auto loose = decompose(psi, g, 1.5);
    double err = 0.0, scale = 0.0, factor_err = 0.0;
    for (int b = 0; b < g.base().node_count(); ++b) {
      const Point2 p = g.base().node_pos(b);
      const auto h = hat(p.x1, p.x2);
      const double e1 = r1(p.x1, p.x2), e2 = r2(p.x1, p.x2);
      for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(exact.psi_hat[b](k) - h[k]));
      err = std::max({err, std::abs(exact.r[b][0] - e1), std::abs(exact.r[b][1] - e2)});
      scale = std::max({scale, std::abs(e1), std::abs(e2)});
      factor_err = std::max({factor_err, std::abs(loose.r[b][0] - e1 / 8), std::abs(loose.r[b][1] - e2 / 8)});
    }
    for (double v : exact.psi_bar.vec()) err = std::max(err, std::abs(v));
    const bool sensitive = factor_err <= 1e-13 * scale;
    return Outcome{err <= 1e-13 * scale && sensitive,
                   fmt("kappa=12 max error %.2e (scale %.2f); kappa=3/2 recovers r/8 to %.2e", err, scale, factor_err)};
  });

  run(7, "Korn ratio stability under mesh doubling", [] {
    const double h = 0.125;
    double mx[2] = {0.0, 0.0};
    for (int f = 0; f < 2; ++f) {
      const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 0.125 / (1 << f)), 8 << f);
      for (std::uint64_t s = 0; s < 100; ++s) mx[f] = std::max(mx[f], korn_ratio(random_smooth_field(g, h, s), g, h).ratio);
    }
    const double change = std::abs(mx[1] - mx[0]) / mx[0];
    return Outcome{change < 0.2, fmt("max ratio %.4f -> %.4f, change %.2f%% (tol 20%%)", mx[0], mx[1], 100 * change)};
  });

  run(8, "second-split residual decreases in h", [] {
    const ExtrudedGrid g(RasterDomain::rectangle({0, 0, 1, 1}, 1.0 / 32), 8);
    std::vector<double> o;
    double defect = 0.0;
    for (double h : {0.25, 0.125, 0.0625}) {
      const auto s = second_form(smooth_family_field(g, h, 31), g, h);
      o.push_back(s.o_norm);
      defect = std::max(defect, s.identity_defect / s.strain_scale);
    }
    const bool mono = o[1] < o[0] && o[2] < o[1];
    return Outcome{mono, fmt("||o|| = %.4e, %.4e, %.4e; split identity defect %.1e", o[0], o[1], o[2], defect)};
  });

  run(9, "plate gradient and equivalence invariance", [] {
    const PlateDomain d({0, 0, 1, 1}, 0.1, PlateMode::Free);
    const Mat6 base = relaxed_plate_density(isotropic_form(1, 1));
    std::vector<Mat6> per;
    for (int n = 0; n < d.node_count(); ++n) per.push_back(base * (1.0 + 0.3 * std::sin(3 * d.pos(n).x1 + d.pos(n).x2)));
    const auto q = DensityField::per_node(per);
    const auto load = LoadSpec::uniform(d, 0.4);
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nrm(0, 1);
    auto random_state = [&] {
      PlateState s = PlateState::zero(d);
      for (int n = 0; n < d.node_count(); ++n) s.u1[n] = 0.1 * nrm(rng), s.u2[n] = 0.1 * nrm(rng), s.v[n] = 0.3 * nrm(rng);
      return s;
    };
    double grad_err = 0.0, inv = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto s = random_state();
      const auto dir = random_state();
      const auto g = gradient(s, q, load, d);
      double an = 0.0, scale = 0.0;
      for (int n = 0; n < d.node_count(); ++n) {
        an += g.u1[n] * dir.u1[n] + g.u2[n] * dir.u2[n] + g.v[n] * dir.v[n];
        scale = std::max({scale, std::abs(s.u1[n]), std::abs(s.u2[n]), std::abs(s.v[n])});
      }
      const double step = 1e-5 * scale;
      PlateState p = s, m = s;
      for (int n = 0; n < d.node_count(); ++n) {
        p.u1[n] += step * dir.u1[n], p.u2[n] += step * dir.u2[n], p.v[n] += step * dir.v[n];
        m.u1[n] -= step * dir.u1[n], m.u2[n] -= step * dir.u2[n], m.v[n] -= step * dir.v[n];
      }
      const double fd = (energy(p, q, load, d) - energy(m, q, load, d)) / (2 * step);
      grad_err = std::max(grad_err, std::abs(an - fd) / std::abs(an));
    }
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 20; ++k) {
      const auto s = random_state();
      const EquivalenceParams prm{u(rng), u(rng), u(rng)};
      inv = std::max(inv, invariance_check(s, prm, q, d) / (1.0 + std::abs(energy(s, q, LoadSpec::zero(), d))));
    }
    return Outcome{grad_err < 1e-6 && inv <= 1e-10,
                   fmt("gradient rel error %.2e (tol 1e-6); invariance %.2e (tol 1e-10)", grad_err, inv)};
  });

  run(10, "clamped plate linear response", [] {
    const double dl = 1.0 / 32;
    const PlateDomain d({0, 0, 1, 1}, dl, PlateMode::Clamped);
    const Mat6 qhat = relaxed_plate_density(isotropic_form(1, 1));
    const auto q = DensityField::constant(qhat);
    MinimizeOptions mo;
    mo.tol = 1e-12;
    double nv[2] = {0, 0}, oracle_err = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double eps = 1e-3 * (k + 1);
      const auto r = minimize(q, LoadSpec::uniform(d, eps), d, PlateState::zero(d), mo);
      if (!r.converged) return Outcome{false, "minimizer did not converge"};
      nv[k] = weighted_norm(r.state.v, d);
      const auto lin = kirchhoff_oracle(d.n1(), dl, qhat.bottomRightCorner<3, 3>(), eps);
      std::vector<double> diff(lin.size());
      for (std::size_t n = 0; n < lin.size(); ++n) diff[n] = r.state.v[n] - lin[n];
      oracle_err = std::max(oracle_err, weighted_norm(diff, d) / weighted_norm(lin, d));
    }
    const double ratio = nv[1] / nv[0];
    return Outcome{std::abs(ratio - 2.0) <= 0.02 && oracle_err <= 0.02,
                   fmt("|v(2e)|/|v(e)| = %.8f (2 +- 1%%); deviation from linear Kirchhoff oracle %.2e (tol 2e-2)", ratio,
                       oracle_err)};
  });

  run(11, "laminate h-sweep stability with eps = h", [] {
    auto f = MicrostructureField::laminate({1, 1}, {2, 3}, 1.0, 0);
    f.with_scale_rule({ScaleRule::Type::Linear, 1.0, 1.0});
    const Rect a{0, 0, 1, 1};
    const std::vector<double> hs{0.125, 0.0625, 0.03125};
    const Sym2 m1{1, 0, 0.5}, m2{0, 1, 0};
    SweepTable t[2];
    for (int level = 0; level < 2; ++level) {
      CorrectorOptions o;
      o.nz = 2 << level;
      o.preconditioner = Preconditioner::Column;
      const double cells_per_period = 2 << level;
      t[level] = h_sweep_scaled(f, [&](double sp) { return RasterDomain::rectangle(a, sp); }, 1.0 / cells_per_period,
                                m1, m2, hs, o, 0.02);
      bounded_solves += 3;
    }
    double drift = 0.0;
    for (std::size_t i = 0; i < hs.size(); ++i)
      drift = std::max(drift, std::abs(t[1].rows[i].k_per_area - t[0].rows[i].k_per_area) / t[1].rows[i].k_per_area);
    const double spread0 = t[0].gap / t[0].rows.back().k_per_area, spread1 = t[1].gap / t[1].rows.back().k_per_area;
    return Outcome{t[0].cauchy && t[1].cauchy && drift <= 0.05,
                   fmt("tail spread %.2f%% (2 cells/eps, nz=2) and %.2f%% (4 cells/eps, nz=4), tol 2%%; "
                       "K/area %.4f %.4f %.4f; mesh-doubling drift %.2f%% (tol 5%%)",
                       100 * spread0, 100 * spread1, t[1].rows[0].k_per_area, t[1].rows[1].k_per_area,
                       t[1].rows[2].k_per_area, 100 * drift)};
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
