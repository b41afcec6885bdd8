#include "vkh/fem.hpp"

#include <cmath>
#include <optional>

#include "vkh/error.hpp"
#include "vkh/kernels.hpp"

namespace vkh {

namespace {

constexpr double kGaussLo = 0.5 - 0.28867513459481288225;  // 1/2 - 1/(2 sqrt3)
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

double f1(int a, double t) { return a ? t : 1.0 - t; }
double df1(int a) { return a ? 1.0 : -1.0; }

// Shape values and scaled gradients of the 8 trilinear functions at (xi, eta, zeta).
void shape_at(double xi, double eta, double zeta, double delta, double dz, double h, std::array<double, 8>& n,
              std::array<std::array<double, 3>, 8>& dn) {
  for (int l = 0; l < 8; ++l) {
    const int a = l & 1, b = (l >> 1) & 1, c = (l >> 2) & 1;
    n[l] = f1(a, xi) * f1(b, eta) * f1(c, zeta);
    dn[l] = {df1(a) * f1(b, eta) * f1(c, zeta) / delta, f1(a, xi) * df1(b) * f1(c, zeta) / delta,
             f1(a, xi) * f1(b, eta) * df1(c) / (dz * h)};
  }
}

struct ElementList {
  std::vector<std::pair<int, int>> cells;
};

ElementList occupied_cells(const RasterDomain& base) {
  ElementList el;
  for (int i = 0; i < base.nx(); ++i)
    for (int j = 0; j < base.ny(); ++j)
      if (base.occupied(i, j)) el.cells.emplace_back(i, j);
  return el;
}

// Gauss-point forms and imposed strains of one element.
void element_inputs(const ExtrudedGrid& grid, const MicrostructureField& field, double h, const Sym2& m1,
                    const Sym2& m2, int ci, int cj, int k, std::array<ElasticForm, 8>& forms,
                    std::array<Vec6, 8>& imposed) {
  const auto& base = grid.base();
  for (int g = 0; g < 8; ++g) {
    const auto r = HexKernel::gauss_ref(g);
    const Point3 x{base.origin().x1 + (ci + r[0]) * base.spacing(), base.origin().x2 + (cj + r[1]) * base.spacing(),
                   grid.z(k) + r[2] * grid.dz()};
    forms[g] = field.form_at(h, x);
    imposed[g] = vec_iota(m1 + x.x3 * m2);
  }
}

void scatter(QuadSystem& sys, const std::array<int, 8>& nodes, const ElemMat& ke, const ElemVec& fe) {
  for (int a = 0; a < 8; ++a) {
    const int na = nodes[a];
    for (int b = 0; b < 8; ++b) {
      const int s = StencilOperator::slot((b & 1) - (a & 1), ((b >> 1) & 1) - ((a >> 1) & 1),
                                          ((b >> 2) & 1) - ((a >> 2) & 1));
      double* blk = sys.op.block(na, s);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) blk[3 * r + c] += ke(3 * a + r, 3 * b + c);
    }
    for (int r = 0; r < 3; ++r) sys.linear[3 * static_cast<std::size_t>(na) + r] += fe(3 * a + r);
  }
}

QuadSystem empty_system(const ExtrudedGrid& grid) {
  QuadSystem sys;
  sys.op = StencilOperator(grid);
  sys.linear.assign(grid.dof_count(), 0.0);
  sys.constrained.assign(grid.dof_count(), 0);
  return sys;
}

}  // namespace

std::array<double, 3> HexKernel::gauss_ref(int g) {
  return {(g & 1) ? kGaussHi : kGaussLo, ((g >> 1) & 1) ? kGaussHi : kGaussLo, ((g >> 2) & 1) ? kGaussHi : kGaussLo};
}

HexKernel::HexKernel(double delta, double dz, double h) : weight_(delta * delta * dz / 8.0) {
  if (!(h > 0.0)) throw PreconditionError("HexKernel: h must be positive");
  for (int g = 0; g < 8; ++g) {
    const auto r = gauss_ref(g);
    shape_at(r[0], r[1], r[2], delta, dz, h, n_[g], dn_[g]);
    auto& b = b_[g];
    b.setZero();
    for (int l = 0; l < 8; ++l) {
      const auto [g1, g2, g3] = dn_[g][l];
      const int c = 3 * l;
      b(0, c) = g1;
      b(1, c + 1) = g2;
      b(2, c + 2) = g3;
      b(3, c) = g2 / kSqrt2;
      b(3, c + 1) = g1 / kSqrt2;
      b(4, c) = g3 / kSqrt2;
      b(4, c + 2) = g1 / kSqrt2;
      b(5, c + 1) = g3 / kSqrt2;
      b(5, c + 2) = g2 / kSqrt2;
    }
  }
}

void HexKernel::element(const std::array<ElasticForm, 8>& forms, const std::array<Vec6, 8>& imposed, ElemMat& ke,
                        ElemVec& fe, double& ce) const {
  ke.setZero();
  fe.setZero();
  ce = 0.0;
  for (int g = 0; g < 8; ++g) {
    const Mat6& c = forms[g].matrix();
    const Eigen::Matrix<double, 6, 24> cb = c * b_[g];
    ke.noalias() += (2.0 * weight_) * b_[g].transpose() * cb;
    const Vec6 cm = c * imposed[g];
    fe.noalias() += (2.0 * weight_) * b_[g].transpose() * cm;
    ce += weight_ * imposed[g].dot(cm);
  }
}

std::array<int, 8> element_nodes(const ExtrudedGrid& grid, int ci, int cj, int layer) {
  std::array<int, 8> nodes{};
  for (int l = 0; l < 8; ++l) {
    const int a = l & 1, b = (l >> 1) & 1, c = (l >> 2) & 1;
    nodes[l] = grid.node(grid.base().node_id(ci + a, cj + b), layer + c);
  }
  return nodes;
}

Mat3 scaled_gradient(const ExtrudedGrid& grid, double h, const DisplacementField& psi, const QuadPoint& q) {
  if (!(h > 0.0)) throw PreconditionError("scaled_gradient: h must be positive");
  std::array<double, 8> n;
  std::array<std::array<double, 3>, 8> dn;
  shape_at(q.xi, q.eta, q.zeta, grid.base().spacing(), grid.dz(), h, n, dn);
  const auto nodes = element_nodes(grid, q.cell_i, q.cell_j, q.layer);
  Mat3 g;
  for (int l = 0; l < 8; ++l)
    for (int d = 0; d < 3; ++d)
      for (int j = 0; j < 3; ++j) g(d, j) += psi(nodes[l], d) * dn[l][j];
  return g;
}

StencilOperator::StencilOperator(const ExtrudedGrid& grid) : nodes_(grid.node_count()), layers_(grid.nz() + 1) {
  const auto& base = grid.base();
  nbr_.assign(static_cast<std::size_t>(nodes_) * kSlots, -1);
  blk_.assign(static_cast<std::size_t>(nodes_) * kSlots * 9, 0.0);
  for (int n = 0; n < nodes_; ++n) {
    const auto [i, j] = base.node_ij(grid.base_of(n));
    const int k = grid.layer_of(n);
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          const int b = base.node_id(i + di, j + dj);
          if (b < 0 || k + dk < 0 || k + dk > grid.nz()) continue;
          nbr_[static_cast<std::size_t>(n) * kSlots + slot(di, dj, dk)] = grid.node(b, k + dk);
        }
  }
}

void StencilOperator::apply(std::span<const double> x, std::span<double> y) const {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < nodes_; ++n) {
    double acc[3] = {0.0, 0.0, 0.0};
    const int* nb = &nbr_[static_cast<std::size_t>(n) * kSlots];
    const double* bl = &blk_[static_cast<std::size_t>(n) * kSlots * 9];
    for (int s = 0; s < kSlots; ++s) {
      if (nb[s] < 0) continue;
      const double* xv = &x[3 * static_cast<std::size_t>(nb[s])];
      const double* m = bl + 9 * s;
      acc[0] += m[0] * xv[0] + m[1] * xv[1] + m[2] * xv[2];
      acc[1] += m[3] * xv[0] + m[4] * xv[1] + m[5] * xv[2];
      acc[2] += m[6] * xv[0] + m[7] * xv[1] + m[8] * xv[2];
    }
    y[3 * static_cast<std::size_t>(n)] = acc[0];
    y[3 * static_cast<std::size_t>(n) + 1] = acc[1];
    y[3 * static_cast<std::size_t>(n) + 2] = acc[2];
  }
}

double StencilOperator::entry(int row, int col) const {
  const int rn = row / 3, cn = col / 3;
  for (int s = 0; s < kSlots; ++s)
    if (neighbor(rn, s) == cn) return block(rn, s)[3 * (row % 3) + col % 3];
  return 0.0;
}

int QuadSystem::free_dof_count() const {
  int n = 0;
  for (auto c : constrained) n += c ? 0 : 1;
  return n;
}

double QuadSystem::energy(std::span<const double> psi) const {
  std::vector<double> ax(psi.size());
  op.apply(psi, ax);
  return 0.5 * kernels::dot(psi, ax) + kernels::dot(linear, psi) + constant;
}

std::vector<double> QuadSystem::gradient(std::span<const double> psi) const {
  std::vector<double> g(psi.size());
  op.apply(psi, g);
  kernels::axpy(1.0, linear, g);
  return g;
}

QuadSystem assemble(const ExtrudedGrid& grid, const MicrostructureField& field, double h, const Sym2& m1,
                    const Sym2& m2) {
  QuadSystem sys = empty_system(grid);
  const auto& base = grid.base();
  const HexKernel kernel(base.spacing(), grid.dz(), h);
  const int nx = base.nx(), ny = base.ny(), nz = grid.nz();
  // Element constants, stored per element and summed in natural order afterwards.
  std::vector<double> ce_all(static_cast<std::size_t>(nx) * ny * nz, 0.0);
  for (int color = 0; color < 8; ++color) {
    const int pi = color & 1, pj = (color >> 1) & 1, pk = (color >> 2) & 1;
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = pi; i < nx; i += 2) {
      std::array<ElasticForm, 8> forms;
      std::array<Vec6, 8> imposed;
      ElemMat ke;
      ElemVec fe;
      for (int j = pj; j < ny; j += 2) {
        if (!base.occupied(i, j)) continue;
        for (int k = pk; k < nz; k += 2) {
          element_inputs(grid, field, h, m1, m2, i, j, k, forms, imposed);
          double ce = 0.0;
          kernel.element(forms, imposed, ke, fe, ce);
          scatter(sys, element_nodes(grid, i, j, k), ke, fe);
          ce_all[(static_cast<std::size_t>(i) * ny + j) * nz + k] = ce;
        }
      }
    }
  }
  for (double c : ce_all) sys.constant += c;
  return sys;
}

QuadSystem apply_lateral_dirichlet(QuadSystem system, const ExtrudedGrid& grid) {
  const auto& base = grid.base();
  for (int b = 0; b < base.node_count(); ++b) {
    if (!base.is_lateral_boundary(b)) continue;
    for (int k = 0; k <= grid.nz(); ++k)
      for (int c = 0; c < 3; ++c) system.constrained[3 * static_cast<std::size_t>(grid.node(b, k)) + c] = 1;
  }
  if (system.free_dof_count() == 0)
    throw PreconditionError("apply_lateral_dirichlet: every dof is constrained (degenerate domain)");
  return system;
}

const char* to_string(Preconditioner p) { return p == Preconditioner::Jacobi ? "jacobi" : "column"; }

Preconditioner preconditioner_from_string(const std::string& s) {
  if (s == "jacobi") return Preconditioner::Jacobi;
  if (s == "column") return Preconditioner::Column;
  throw PreconditionError("unknown preconditioner '" + s + "'");
}

namespace {

// Block LDL^T of the x3-coupling of every column: A_col = L D L^T with unit
// block-bidiagonal L (sub-diagonal blocks e) and block-diagonal D.
class ColumnSolver {
 public:
  using M3 = Eigen::Matrix3d;

  ColumnSolver(const QuadSystem& sys, std::span<const double> mask, int layers) : layers_(layers) {
    const int cols = sys.op.node_count() / layers;
    dinv_.resize(static_cast<std::size_t>(cols) * layers);
    e_.resize(static_cast<std::size_t>(cols) * layers);
    auto masked = [&](int node, int slot, int other) {
      M3 m = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(sys.op.block(node, slot));
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) *= mask[3 * node + r] * mask[3 * other + c];
      if (node == other)
        for (int r = 0; r < 3; ++r)
          if (mask[3 * node + r] == 0.0) m(r, r) = 1.0;
      return m;
    };
    const int below = StencilOperator::slot(0, 0, -1), self = StencilOperator::slot(0, 0, 0),
              above = StencilOperator::slot(0, 0, 1);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < cols; ++b) {
      const int n0 = b * layers;
      M3 d = masked(n0, self, n0);
      dinv_[n0] = d.inverse();
      e_[n0].setZero();
      for (int k = 1; k < layers; ++k) {
        const int n = n0 + k;
        const M3 sub = masked(n, below, n - 1);
        e_[n] = sub * dinv_[n - 1];
        d = masked(n, self, n) - e_[n] * masked(n - 1, above, n);
        dinv_[n] = d.inverse();
      }
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    const int cols = static_cast<int>(dinv_.size()) / layers_;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < cols; ++b) {
      const int n0 = b * layers_;
      std::vector<Eigen::Vector3d> y(layers_);
      for (int k = 0; k < layers_; ++k) {
        y[k] = Eigen::Map<const Eigen::Vector3d>(&r[3 * (n0 + k)]);
        if (k > 0) y[k] -= e_[n0 + k] * y[k - 1];
      }
      Eigen::Vector3d x = dinv_[n0 + layers_ - 1] * y[layers_ - 1];
      for (int k = layers_ - 1;; --k) {
        Eigen::Map<Eigen::Vector3d> out(&z[3 * (n0 + k)]);
        out = x;
        if (k == 0) break;
        x = dinv_[n0 + k - 1] * y[k - 1] - e_[n0 + k].transpose() * x;
      }
    }
  }

 private:
  int layers_;
  std::vector<M3> dinv_, e_;
};

}  // namespace

CgResult solve_cg(const QuadSystem& sys, double tol, int maxit, const DisplacementField* init, Preconditioner pc) {
  if (!(tol > 0.0)) throw PreconditionError("solve_cg: tol must be positive");
  const std::size_t n = sys.linear.size();
  const int nodes = static_cast<int>(n / 3);
  CgResult res;
  res.psi = init ? *init : DisplacementField(nodes);
  auto& x = res.psi.vec();
  if (x.size() != n) throw PreconditionError("solve_cg: initial guess has wrong size");

  std::vector<double> mask(n), dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = sys.constrained[i] ? 0.0 : 1.0;
    x[i] *= mask[i];
    const double d = sys.op.diag(static_cast<int>(i / 3), static_cast<int>(i % 3));
    dinv[i] = (mask[i] > 0.0 && d > 0.0) ? 1.0 / d : 0.0;
  }
  const double bnorm = std::sqrt(kernels::blocked_sum(n, [&](std::size_t i) {
    return mask[i] * sys.linear[i] * sys.linear[i];
  }));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }

  std::optional<ColumnSolver> column;
  if (pc == Preconditioner::Column) column.emplace(sys, mask, sys.op.layers());
  auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
    if (column) {
      column->apply(r, z);
      for (std::size_t i = 0; i < n; ++i) z[i] *= mask[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    }
  };

  std::vector<double> r(n), z(n), p(n), ap(n);
  sys.op.apply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = -mask[i] * (r[i] + sys.linear[i]);
  precondition(r, z);
  p = z;
  double rz = kernels::dot(r, z);
  double rnorm = std::sqrt(kernels::norm2(r));
  int it = 0;
  while (rnorm / bnorm > tol && it < maxit) {
    sys.op.apply(p, ap);
    for (std::size_t i = 0; i < n; ++i) ap[i] *= mask[i];
    const double alpha = rz / kernels::dot(p, ap);
    kernels::axpy(alpha, p, x);
    kernels::axpy(-alpha, ap, r);
    precondition(r, z);
    const double rz_new = kernels::dot(r, z);
    kernels::xpby(z, rz_new / rz, p);
    rz = rz_new;
    rnorm = std::sqrt(kernels::norm2(r));
    ++it;
  }
  // True residual of the returned iterate.
  sys.op.apply(x, r);
  const double true_res = std::sqrt(kernels::blocked_sum(n, [&](std::size_t i) {
    const double v = mask[i] * (r[i] + sys.linear[i]);
    return v * v;
  }));
  res.iterations = it;
  res.residual = true_res / bnorm;
  res.converged = rnorm / bnorm <= tol;
  return res;
}

GradientCheck gradient_check(const QuadSystem& sys, std::span<const double> psi, std::span<const double> dir,
                             double step) {
  if (!(step > 0.0)) throw PreconditionError("gradient_check: step must be positive");
  const auto g = sys.gradient(psi);
  std::vector<double> plus(psi.begin(), psi.end()), minus(psi.begin(), psi.end());
  kernels::axpy(step, dir, plus);
  kernels::axpy(-step, dir, minus);
  return {kernels::dot(g, dir), (sys.energy(plus) - sys.energy(minus)) / (2.0 * step)};
}

FieldNorms field_norms(const ExtrudedGrid& grid, double h, const DisplacementField& psi) {
  const auto& base = grid.base();
  const HexKernel kernel(base.spacing(), grid.dz(), h);
  const auto cells = occupied_cells(base).cells;
  const int nz = grid.nz();
  const auto sums = kernels::blocked_sum_n<5>(cells.size() * nz, [&](std::size_t e, std::array<double, 5>& acc) {
    const auto [ci, cj] = cells[e / nz];
    const auto nodes = element_nodes(grid, ci, cj, static_cast<int>(e % nz));
    for (int g = 0; g < 8; ++g) {
      double val[3] = {0, 0, 0};
      Mat3 gr;
      for (int l = 0; l < 8; ++l)
        for (int d = 0; d < 3; ++d) {
          const double v = psi(nodes[l], d);
          val[d] += v * kernel.shape(g, l);
          for (int j = 0; j < 3; ++j) gr(d, j) += v * kernel.shape_grad(g, l)[j];
        }
      const double w = kernel.weight();
      acc[0] += w * val[0] * val[0];
      acc[1] += w * val[1] * val[1];
      acc[2] += w * h * h * val[2] * val[2];
      acc[3] += w * gr.sym().frobenius2();
      acc[4] += w * gr.frobenius2();
    }
  });
  FieldNorms out;
  out.l2sq = {sums[0], sums[1], sums[2]};
  out.sym_grad_sq = sums[3];
  out.grad_sq = sums[4];
  return out;
}

double imposed_norm_sq(const ExtrudedGrid& grid, const Sym2& m1, const Sym2& m2) {
  return grid.base().area() * (m1.norm2() + m2.norm2() / 12.0);
}

}  // namespace vkh

namespace vkh::reference {

QuadSystem assemble_serial(const ExtrudedGrid& grid, const MicrostructureField& field, double h, const Sym2& m1,
                           const Sym2& m2) {
  QuadSystem sys = empty_system(grid);
  const auto& base = grid.base();
  const HexKernel kernel(base.spacing(), grid.dz(), h);
  std::array<ElasticForm, 8> forms;
  std::array<Vec6, 8> imposed;
  ElemMat ke;
  ElemVec fe;
  for (int i = 0; i < base.nx(); ++i)
    for (int j = 0; j < base.ny(); ++j) {
      if (!base.occupied(i, j)) continue;
      for (int k = 0; k < grid.nz(); ++k) {
        element_inputs(grid, field, h, m1, m2, i, j, k, forms, imposed);
        double ce = 0.0;
        kernel.element(forms, imposed, ke, fe, ce);
        scatter(sys, element_nodes(grid, i, j, k), ke, fe);
        sys.constant += ce;
      }
    }
  return sys;
}

void apply_elementwise(const ExtrudedGrid& grid, const MicrostructureField& field, double h,
                       std::span<const double> x, std::span<double> y) {
  const auto& base = grid.base();
  const HexKernel kernel(base.spacing(), grid.dz(), h);
  std::fill(y.begin(), y.end(), 0.0);
  std::array<ElasticForm, 8> forms;
  std::array<Vec6, 8> imposed;
  ElemMat ke;
  ElemVec fe, xe;
  for (int i = 0; i < base.nx(); ++i)
    for (int j = 0; j < base.ny(); ++j) {
      if (!base.occupied(i, j)) continue;
      for (int k = 0; k < grid.nz(); ++k) {
        element_inputs(grid, field, h, {}, {}, i, j, k, forms, imposed);
        double ce = 0.0;
        kernel.element(forms, imposed, ke, fe, ce);
        const auto nodes = element_nodes(grid, i, j, k);
        for (int l = 0; l < 8; ++l)
          for (int d = 0; d < 3; ++d) xe(3 * l + d) = x[3 * static_cast<std::size_t>(nodes[l]) + d];
        const ElemVec ye = ke * xe;
        for (int l = 0; l < 8; ++l)
          for (int d = 0; d < 3; ++d) y[3 * static_cast<std::size_t>(nodes[l]) + d] += ye(3 * l + d);
      }
    }
}

}  // namespace vkh::reference
