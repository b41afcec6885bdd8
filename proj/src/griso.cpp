#include "vkh/griso.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Sparse>

#include "vkh/error.hpp"

namespace vkh {

GrisoParts decompose(const DisplacementField& psi, const ExtrudedGrid& grid, double kappa) {
  if (grid.nz() < 2) throw PreconditionError("decompose: nz must be at least 2");
  if (psi.node_count() != grid.node_count()) throw PreconditionError("decompose: field does not match grid");
  const int nb = grid.base().node_count(), nz = grid.nz();
  const double dz = grid.dz();
  GrisoParts p;
  p.kappa = kappa;
  p.psi_hat.assign(nb, Vec3::Zero());
  p.r.assign(nb, {0.0, 0.0});
  p.psi_bar = DisplacementField(grid.node_count());
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b) {
    Vec3 mean = Vec3::Zero(), moment = Vec3::Zero();
    for (int k = 0; k < nz; ++k) {
      const int n0 = grid.node(b, k), n1 = grid.node(b, k + 1);
      const double z0 = grid.z(k), z1 = grid.z(k + 1);
      for (int c = 0; c < 3; ++c) {
        mean(c) += 0.5 * dz * (psi(n0, c) + psi(n1, c));
        moment(c) += dz / 6.0 * ((2.0 * z0 + z1) * psi(n0, c) + (z0 + 2.0 * z1) * psi(n1, c));
      }
    }
    p.psi_hat[b] = mean;
    // e3 ^ psi = (-psi2, psi1, 0)
    p.r[b] = {-kappa * moment(1), kappa * moment(0)};
    for (int k = 0; k <= nz; ++k) {
      const int n = grid.node(b, k);
      const double z = grid.z(k);
      p.psi_bar(n, 0) = psi(n, 0) - mean(0) - p.r[b][1] * z;
      p.psi_bar(n, 1) = psi(n, 1) - mean(1) + p.r[b][0] * z;
      p.psi_bar(n, 2) = psi(n, 2) - mean(2);
    }
  }
  return p;
}

DisplacementField rigid_part(const GrisoParts& parts, const ExtrudedGrid& grid) {
  const int nb = grid.base().node_count();
  if (static_cast<int>(parts.psi_hat.size()) != nb || static_cast<int>(parts.r.size()) != nb)
    throw PreconditionError("rigid_part: parts do not match grid");
  DisplacementField out(grid.node_count());
  for (int b = 0; b < nb; ++b)
    for (int k = 0; k <= grid.nz(); ++k) {
      const int n = grid.node(b, k);
      const double z = grid.z(k);
      out(n, 0) = parts.psi_hat[b](0) + parts.r[b][1] * z;
      out(n, 1) = parts.psi_hat[b](1) - parts.r[b][0] * z;
      out(n, 2) = parts.psi_hat[b](2);
    }
  return out;
}

DisplacementField reconstruct(const GrisoParts& parts, const ExtrudedGrid& grid) {
  if (parts.psi_bar.node_count() != grid.node_count()) throw PreconditionError("reconstruct: shape mismatch");
  DisplacementField out = rigid_part(parts, grid);
  for (std::size_t i = 0; i < out.vec().size(); ++i) out.vec()[i] += parts.psi_bar.vec()[i];
  return out;
}

KornRatio korn_ratio(const DisplacementField& psi, const ExtrudedGrid& grid, double h, double kappa) {
  const FieldNorms whole = field_norms(grid, h, psi);
  if (!(whole.sym_grad_sq > 1e-24 * (whole.grad_sq + whole.l2sq[0] + whole.l2sq[1] + whole.l2sq[2])))
    throw PreconditionError("korn_ratio: sym grad_h psi vanishes");
  const GrisoParts parts = decompose(psi, grid, kappa);
  const FieldNorms rigid = field_norms(grid, h, rigid_part(parts, grid));
  const FieldNorms bar = field_norms(grid, h, parts.psi_bar);
  const double bar_l2 = bar.l2sq[0] + bar.l2sq[1] + bar.l2sq[2] / (h * h);
  KornRatio k;
  k.lhs = rigid.sym_grad_sq + bar.grad_sq + bar_l2 / (h * h);
  k.rhs = whole.sym_grad_sq;
  k.ratio = k.lhs / k.rhs;
  return k;
}

namespace {

// Bilinear shape data at the 2x2 Gauss points of a unit cell; corner l = a + 2b.
struct Bilinear {
  double n[4][4];
  double dxi[4][4], deta[4][4];
  Bilinear() {
    const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (int q = 0; q < 4; ++q) {
      const double xi = g[q & 1], eta = g[q >> 1];
      for (int l = 0; l < 4; ++l) {
        const int a = l & 1, b = l >> 1;
        const double fx = a ? xi : 1.0 - xi, fy = b ? eta : 1.0 - eta;
        n[q][l] = fx * fy;
        dxi[q][l] = (a ? 1.0 : -1.0) * fy;
        deta[q][l] = fx * (b ? 1.0 : -1.0);
      }
    }
  }
};

std::array<int, 4> cell_nodes(const RasterDomain& d, int i, int j) {
  return {d.node_id(i, j), d.node_id(i + 1, j), d.node_id(i, j + 1), d.node_id(i + 1, j + 1)};
}

void remove_component_means(std::vector<double>& f, const RasterDomain& dom, const std::vector<double>& mass) {
  int ncomp = 0;
  const std::vector<int> comp = dom.node_components(&ncomp);
  std::vector<double> s(ncomp, 0.0), m(ncomp, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    s[comp[i]] += mass[i] * f[i];
    m[comp[i]] += mass[i];
  }
  for (std::size_t i = 0; i < f.size(); ++i) f[i] -= s[comp[i]] / m[comp[i]];
}

std::vector<double> lumped_mass(const RasterDomain& dom) {
  std::vector<double> m(dom.node_count(), 0.0);
  const double q = 0.25 * dom.spacing() * dom.spacing();
  for (int i = 0; i < dom.nx(); ++i)
    for (int j = 0; j < dom.ny(); ++j)
      if (dom.occupied(i, j))
        for (int n : cell_nodes(dom, i, j)) m[n] += q;
  return m;
}

}  // namespace

double regularize_misfit(const std::vector<double>& phi, const std::vector<std::array<double, 2>>& r,
                         const RasterDomain& dom) {
  static const Bilinear bl;
  const double dl = dom.spacing(), w = 0.25 * dl * dl;
  double s = 0.0;
  for (int i = 0; i < dom.nx(); ++i)
    for (int j = 0; j < dom.ny(); ++j) {
      if (!dom.occupied(i, j)) continue;
      const auto nodes = cell_nodes(dom, i, j);
      for (int q = 0; q < 4; ++q) {
        double g1 = 0.0, g2 = 0.0;
        for (int l = 0; l < 4; ++l) {
          const int n = nodes[l];
          g1 += bl.dxi[q][l] / dl * phi[n] + bl.n[q][l] * r[n][1];
          g2 += bl.deta[q][l] / dl * phi[n] - bl.n[q][l] * r[n][0];
        }
        s += w * (g1 * g1 + g2 * g2);
      }
    }
  return std::sqrt(s);
}

RegularizeResult regularize(const std::vector<std::array<double, 2>>& r, const RasterDomain& dom, double tol,
                            int maxit) {
  const int nn = dom.node_count();
  if (static_cast<int>(r.size()) != nn) throw PreconditionError("regularize: r does not match domain");
  static const Bilinear bl;
  const double dl = dom.spacing(), w = 0.25 * dl * dl;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(nn);
  for (int i = 0; i < dom.nx(); ++i)
    for (int j = 0; j < dom.ny(); ++j) {
      if (!dom.occupied(i, j)) continue;
      const auto nodes = cell_nodes(dom, i, j);
      double ke[4][4] = {};
      for (int q = 0; q < 4; ++q) {
        double g1 = 0.0, g2 = 0.0;
        for (int l = 0; l < 4; ++l) {
          g1 += bl.n[q][l] * r[nodes[l]][1];
          g2 -= bl.n[q][l] * r[nodes[l]][0];
        }
        for (int a = 0; a < 4; ++a) {
          const double ax = bl.dxi[q][a] / dl, ay = bl.deta[q][a] / dl;
          f(nodes[a]) += w * (ax * g1 + ay * g2);
          for (int b = 0; b < 4; ++b) ke[a][b] += w * (ax * bl.dxi[q][b] / dl + ay * bl.deta[q][b] / dl);
        }
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) trip.emplace_back(nodes[a], nodes[b], ke[a][b]);
    }
  Eigen::SparseMatrix<double> k(nn, nn);
  k.setFromTriplets(trip.begin(), trip.end());

  // K phi = -f; the system is singular but consistent (constants per component).
  RegularizeResult res;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nn), rr = -f;
  const double bnorm = rr.norm();
  if (bnorm > 0.0) {
    const Eigen::VectorXd dinv = k.diagonal().cwiseInverse();
    Eigen::VectorXd z = dinv.cwiseProduct(rr), p = z, ap(nn);
    double rz = rr.dot(z);
    int it = 0;
    while (it < maxit && rr.norm() > tol * bnorm) {
      ap = k * p;
      const double alpha = rz / p.dot(ap);
      x += alpha * p;
      rr -= alpha * ap;
      z = dinv.cwiseProduct(rr);
      const double rz_new = rr.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
      ++it;
    }
    res.iterations = it;
    res.residual = (-f - k * x).norm() / bnorm;
    if (res.residual > tol * 10.0) throw SolverError("regularize: CG did not converge", it, res.residual);
  }
  res.phi.assign(x.data(), x.data() + nn);
  remove_component_means(res.phi, dom, lumped_mass(dom));
  res.misfit = regularize_misfit(res.phi, r, dom);
  return res;
}

NodalDifferences::NodalDifferences(const RasterDomain& domain) : dom_(&domain) {
  const int nn = domain.node_count();
  nbr_.resize(nn);
  for (int n = 0; n < nn; ++n) {
    const auto [i, j] = domain.node_ij(n);
    nbr_[n] = {domain.node_id(i - 1, j), domain.node_id(i + 1, j), domain.node_id(i, j - 1), domain.node_id(i, j + 1)};
  }
  mass_ = lumped_mass(domain);
}

std::vector<double> NodalDifferences::d(const std::vector<double>& f, int axis) const {
  const double dl = dom_->spacing();
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t n = 0; n < f.size(); ++n) {
    const int lo = nbr_[n][2 * axis], hi = nbr_[n][2 * axis + 1];
    if (lo >= 0 && hi >= 0)
      out[n] = (f[hi] - f[lo]) / (2.0 * dl);
    else if (hi >= 0)
      out[n] = (f[hi] - f[n]) / dl;
    else if (lo >= 0)
      out[n] = (f[n] - f[lo]) / dl;
  }
  return out;
}

std::vector<Sym2> NodalDifferences::hessian(const std::vector<double>& f) const {
  const auto d1 = d(f, 0), d2 = d(f, 1);
  const auto d11 = d(d1, 0), d22 = d(d2, 1), d12 = d(d1, 1), d21 = d(d2, 0);
  std::vector<Sym2> out(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) out[n] = {d11[n], d22[n], 0.5 * (d12[n] + d21[n])};
  return out;
}

std::vector<Vec6> nodal_sym_strain(const DisplacementField& psi, const ExtrudedGrid& grid, double h) {
  const RasterDomain& base = grid.base();
  const NodalDifferences nd(base);
  const int nb = base.node_count(), nz = grid.nz();
  const double dz = grid.dz();
  std::vector<Vec6> out(grid.node_count());
  std::vector<double> layer(nb);
  for (int k = 0; k <= nz; ++k) {
    std::array<std::array<std::vector<double>, 2>, 3> g;  // g[c][axis]
    for (int c = 0; c < 3; ++c) {
      for (int b = 0; b < nb; ++b) layer[b] = psi(grid.node(b, k), c);
      g[c][0] = nd.d(layer, 0);
      g[c][1] = nd.d(layer, 1);
    }
    const int klo = k > 0 ? k - 1 : k, khi = k < nz ? k + 1 : k;
    const double span = (khi - klo) * dz;
    for (int b = 0; b < nb; ++b) {
      const int n = grid.node(b, k);
      Mat3 m;
      for (int c = 0; c < 3; ++c) {
        m(c, 0) = g[c][0][b];
        m(c, 1) = g[c][1][b];
        m(c, 2) = (psi(grid.node(b, khi), c) - psi(grid.node(b, klo), c)) / span / h;
      }
      out[n] = vec_sym(m);
    }
  }
  return out;
}

double nodal_norm_sq(const std::vector<Vec6>& field, const ExtrudedGrid& grid) {
  const std::vector<double> mass = lumped_mass(grid.base());
  const int nz = grid.nz();
  double s = 0.0;
  for (int b = 0; b < grid.base().node_count(); ++b)
    for (int k = 0; k <= nz; ++k) {
      const double wz = (k == 0 || k == nz) ? 0.5 * grid.dz() : grid.dz();
      s += mass[b] * wz * field[grid.node(b, k)].squaredNorm();
    }
  return s;
}

std::vector<double> mollify(const std::vector<double>& f, const RasterDomain& dom, double radius) {
  const double dl = dom.spacing();
  if (radius < dl) throw PreconditionError("mollify: radius below grid spacing");
  const int nn = dom.node_count();
  if (static_cast<int>(f.size()) != nn) throw PreconditionError("mollify: field does not match domain");
  const std::vector<double> mass = lumped_mass(dom);
  const int reach = static_cast<int>(std::floor(radius / dl));
  std::vector<double> out(nn);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < nn; ++n) {
    const auto [i, j] = dom.node_ij(n);
    double s = 0.0, wsum = 0.0;
    for (int di = -reach; di <= reach; ++di) {
      const double kx = 1.0 - std::abs(di) * dl / radius;
      if (kx <= 0.0) continue;
      for (int dj = -reach; dj <= reach; ++dj) {
        const double ky = 1.0 - std::abs(dj) * dl / radius;
        if (ky <= 0.0) continue;
        const int m = dom.node_id(i + di, j + dj);
        if (m < 0) continue;
        const double wgt = kx * ky * mass[m];
        s += wgt * f[m];
        wsum += wgt;
      }
    }
    out[n] = s / wsum;
  }
  return out;
}

SecondSplit second_form(const DisplacementField& psi_in, const ExtrudedGrid& grid, double h, double mollify_radius,
                        double kappa) {
  if (grid.nz() < 4) throw PreconditionError("second_form: nz must be at least 4");
  if (!(h > 0.0)) throw PreconditionError("second_form: h must be positive");
  const RasterDomain& base = grid.base();
  const int nb = base.node_count(), nz = grid.nz();
  SecondSplit s;
  s.kappa = kappa;
  s.mollify_radius = mollify_radius > 0.0 ? mollify_radius : std::sqrt(h);
  if (s.mollify_radius < base.spacing()) throw PreconditionError("second_form: mollify radius below grid spacing");

  // Zero mean of psi3 on every connected component.
  const NodalDifferences nd(base);
  DisplacementField psi = psi_in;
  {
    const GrisoParts p0 = decompose(psi, grid, kappa);
    int ncomp = 0;
    const std::vector<int> comp = base.node_components(&ncomp);
    std::vector<double> sum(ncomp, 0.0), m(ncomp, 0.0);
    for (int b = 0; b < nb; ++b) {
      sum[comp[b]] += nd.mass()[b] * p0.psi_hat[b](2);
      m[comp[b]] += nd.mass()[b];
    }
    s.psi3_shift.resize(ncomp);
    for (int c = 0; c < ncomp; ++c) s.psi3_shift[c] = sum[c] / m[c];
    for (int b = 0; b < nb; ++b)
      for (int k = 0; k <= nz; ++k) psi(grid.node(b, k), 2) -= s.psi3_shift[comp[b]];
  }
  const GrisoParts parts = decompose(psi, grid, kappa);

  const RegularizeResult reg = regularize(parts.r, base);
  s.phi = reg.phi;
  s.regularize_misfit = reg.misfit;
  s.w.resize(nb);
  for (int b = 0; b < nb; ++b) s.w[b] = parts.psi_hat[b](2) - s.phi[b] / h;
  s.w_tilde = mollify(s.w, base, s.mollify_radius);

  const auto dphi1 = nd.d(s.phi, 0), dphi2 = nd.d(s.phi, 1);
  const auto dw1 = nd.d(s.w_tilde, 0), dw2 = nd.d(s.w_tilde, 1);
  const auto hphi = nd.hessian(s.phi), hw = nd.hessian(s.w_tilde);

  s.psi_tilde = DisplacementField(grid.node_count());
  s.o_term.assign(grid.node_count(), Vec6::Zero());
  for (int b = 0; b < nb; ++b)
    for (int k = 0; k <= nz; ++k) {
      const int n = grid.node(b, k);
      const double z = grid.z(k);
      s.psi_tilde(n, 0) = parts.psi_hat[b](0) + z * (dphi1[b] + parts.r[b][1]) + h * z * dw1[b] + parts.psi_bar(n, 0);
      s.psi_tilde(n, 1) = parts.psi_hat[b](1) + z * (dphi2[b] - parts.r[b][0]) + h * z * dw2[b] + parts.psi_bar(n, 1);
      s.psi_tilde(n, 2) = s.w[b] - s.w_tilde[b] + parts.psi_bar(n, 2);
      s.o_term[n] = -h * z * vec_iota(hw[b]);
    }
  s.o_norm = std::sqrt(nodal_norm_sq(s.o_term, grid));

  const auto sp = nodal_sym_strain(psi, grid, h);
  const auto st = nodal_sym_strain(s.psi_tilde, grid, h);
  for (int b = 0; b < nb; ++b)
    for (int k = 0; k <= nz; ++k) {
      const int n = grid.node(b, k);
      const Vec6 defect = sp[n] + grid.z(k) * vec_iota(hphi[b]) - st[n] - s.o_term[n];
      s.identity_defect = std::max(s.identity_defect, defect.cwiseAbs().maxCoeff());
      s.strain_scale = std::max(s.strain_scale, sp[n].cwiseAbs().maxCoeff());
    }
  return s;
}

GrisoNorms griso_norms(const GrisoParts& parts, const ExtrudedGrid& grid) {
  const std::vector<double> mass = lumped_mass(grid.base());
  GrisoNorms g;
  for (std::size_t b = 0; b < mass.size(); ++b) {
    g.psi_hat += mass[b] * parts.psi_hat[b].squaredNorm();
    g.r += mass[b] * (parts.r[b][0] * parts.r[b][0] + parts.r[b][1] * parts.r[b][1]);
  }
  g.psi_hat = std::sqrt(g.psi_hat);
  g.r = std::sqrt(g.r);
  const FieldNorms fb = field_norms(grid, 1.0, parts.psi_bar);
  g.psi_bar = std::sqrt(fb.l2sq[0] + fb.l2sq[1] + fb.l2sq[2]);
  const GrisoParts again = decompose(parts.psi_bar, grid, parts.kappa);
  for (const auto& v : again.psi_hat) g.mean_psi_bar = std::max(g.mean_psi_bar, v.cwiseAbs().maxCoeff());
  return g;
}

std::string field_csv(const DisplacementField& psi, const ExtrudedGrid& grid) {
  std::string out = "x1,x2,x3,psi1,psi2,psi3\n";
  char buf[256];
  for (int n = 0; n < grid.node_count(); ++n) {
    const Point3 p = grid.node_pos(n);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x1, p.x2, p.x3, psi(n, 0), psi(n, 1),
                  psi(n, 2));
    out += buf;
  }
  return out;
}

namespace {

struct TrigSum {
  struct Mode {
    double c, k1, k2, k3, phase;
  };
  std::vector<Mode> modes;

  double operator()(const Point3& x) const {
    double s = 0.0;
    for (const auto& m : modes) s += m.c * std::sin(m.k1 * x.x1 + m.k2 * x.x2 + m.k3 * x.x3 + m.phase);
    return s;
  }
};

// Wavenumbers pi*{1,2,3}, or uniform in [1, 3] when `gentle`.
TrigSum random_sum(std::mt19937_64& rng, int modes, bool with_x3, bool gentle = false) {
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto freq = [&] { return gentle ? 1.0 + 2.0 * unit() : std::numbers::pi * static_cast<double>(1 + rng() % 3); };
  TrigSum t;
  for (int i = 0; i < modes; ++i) {
    TrigSum::Mode m;
    m.c = 2.0 * unit() - 1.0;
    m.k1 = freq();
    m.k2 = freq();
    m.k3 = with_x3 ? freq() : 0.0;
    m.phase = 2.0 * std::numbers::pi * unit();
    t.modes.push_back(m);
  }
  return t;
}

}  // namespace

DisplacementField random_smooth_field(const ExtrudedGrid& grid, double h, std::uint64_t seed, int modes) {
  if (modes < 1) throw PreconditionError("random_smooth_field: modes must be positive");
  std::mt19937_64 rng(seed);
  std::array<TrigSum, 3> f, g;
  for (auto& t : f) t = random_sum(rng, modes, true);
  for (auto& t : g) t = random_sum(rng, modes, false);
  return DisplacementField::sample(grid, [&](const Point3& x) {
    return std::array<double, 3>{h * f[0](x) + x.x3 * g[0](x), h * f[1](x) + x.x3 * g[1](x), g[2](x) + h * f[2](x)};
  });
}

DisplacementField smooth_family_field(const ExtrudedGrid& grid, double h, std::uint64_t seed, int modes) {
  if (modes < 1) throw PreconditionError("smooth_family_field: modes must be positive");
  std::mt19937_64 rng(seed);
  std::array<TrigSum, 6> t;  // a1, a2, b1, b2, s, c
  for (auto& f : t) f = random_sum(rng, modes, false, true);
  return DisplacementField::sample(grid, [&](const Point3& x) {
    return std::array<double, 3>{h * t[0](x) + h * x.x3 * t[2](x), h * t[1](x) + h * x.x3 * t[3](x),
                                 t[4](x) + h * x.x3 * x.x3 * t[5](x)};
  });
}

}  // namespace vkh
