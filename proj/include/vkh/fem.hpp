#pragma once

// Scaled-gradient trilinear finite elements on extruded raster domains.
//
// The corrector energy
//   E(psi) = sum_q w_q Q^h(x_q, iota(M1 + x3 M2) + grad_h psi(x_q))
// with grad_h = (d1, d2, h^-1 d3) is assembled with 2x2x2 Gauss quadrature as
//   E(psi) = 1/2 psi^T A psi + b^T psi + c.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vkh/grid.hpp"

namespace vkh {

/// A point inside hexahedron (cell_i, cell_j, layer), reference coordinates in [0,1]^3.
struct QuadPoint {
  int cell_i = 0;
  int cell_j = 0;
  int layer = 0;
  double xi = 0.5;
  double eta = 0.5;
  double zeta = 0.5;
};

/// grad_h psi at q: columns d1 psi, d2 psi, h^-1 d3 psi of the trilinear interpolant.
Mat3 scaled_gradient(const ExtrudedGrid& grid, double h, const DisplacementField& psi, const QuadPoint& q);

using ElemMat = Eigen::Matrix<double, 24, 24>;
using ElemVec = Eigen::Matrix<double, 24, 1>;

/// Element strain operators at the eight Gauss points of a uniform hexahedron.
class HexKernel {
 public:
  HexKernel(double delta, double dz, double h);

  static constexpr int kGauss = 8;
  /// Reference coordinates of Gauss point g.
  static std::array<double, 3> gauss_ref(int g);
  /// vec(sym grad_h psi) = B_g * (element dofs), dofs ordered node-major (3 per node).
  const Eigen::Matrix<double, 6, 24>& strain_op(int g) const { return b_[g]; }
  double weight() const { return weight_; }
  double shape(int g, int l) const { return n_[g][l]; }
  /// Scaled gradient (d1, d2, h^-1 d3) of shape function l at Gauss point g.
  const std::array<double, 3>& shape_grad(int g, int l) const { return dn_[g][l]; }

  /// Element contributions for local forms C_g and imposed strains m_g.
  void element(const std::array<ElasticForm, 8>& forms, const std::array<Vec6, 8>& imposed, ElemMat& ke,
               ElemVec& fe, double& ce) const;

 private:
  std::array<Eigen::Matrix<double, 6, 24>, 8> b_;
  std::array<std::array<double, 8>, 8> n_{};
  std::array<std::array<std::array<double, 3>, 8>, 8> dn_{};
  double weight_;
};

/// Local node l = a + 2b + 4c of element (i, j, k) maps to lattice (i+a, j+b, k+c).
std::array<int, 8> element_nodes(const ExtrudedGrid& grid, int ci, int cj, int layer);

/// Symmetric block operator on the 27-point node stencil of an extruded grid.
class StencilOperator {
 public:
  StencilOperator() = default;
  explicit StencilOperator(const ExtrudedGrid& grid);

  static constexpr int kSlots = 27;
  static int slot(int di, int dj, int dk) { return (di + 1) * 9 + (dj + 1) * 3 + (dk + 1); }

  int node_count() const { return nodes_; }
  /// Nodes per x3 column; columns are numbered contiguously.
  int layers() const { return layers_; }
  /// Neighbor node in `slot` of `node`, or -1.
  int neighbor(int node, int s) const { return nbr_[static_cast<std::size_t>(node) * kSlots + s]; }
  double* block(int node, int s) { return &blk_[(static_cast<std::size_t>(node) * kSlots + s) * 9]; }
  const double* block(int node, int s) const { return &blk_[(static_cast<std::size_t>(node) * kSlots + s) * 9]; }
  /// Diagonal entry of dof 3*node + c.
  double diag(int node, int c) const { return block(node, 13)[4 * c]; }

  /// y = A x, OpenMP-parallel over rows.
  void apply(std::span<const double> x, std::span<double> y) const;
  /// Entry (row dof, column dof); zero outside the stencil. For tests and dense oracles.
  double entry(int row, int col) const;

 private:
  int nodes_ = 0;
  int layers_ = 1;
  std::vector<int> nbr_;
  std::vector<double> blk_;
};

struct QuadSystem {
  StencilOperator op;
  std::vector<double> linear;
  double constant = 0.0;
  std::vector<std::uint8_t> constrained;

  int dof_count() const { return static_cast<int>(linear.size()); }
  int free_dof_count() const;
  double energy(std::span<const double> psi) const;
  /// A psi + b (unmasked).
  std::vector<double> gradient(std::span<const double> psi) const;
};

/// Parallel colored assembly (elements of one parity class share no node).
QuadSystem assemble(const ExtrudedGrid& grid, const MicrostructureField& field, double h, const Sym2& m1,
                    const Sym2& m2);

/// Pins all three components on lateral-boundary nodes of every layer.
QuadSystem apply_lateral_dirichlet(QuadSystem system, const ExtrudedGrid& grid);

struct CgResult {
  DisplacementField psi;
  int iterations = 0;
  double residual = 0.0;  // ||A psi + b||_free / ||b||_free
  bool converged = false;
};

enum class Preconditioner {
  Jacobi,  // diagonal
  Column,  // exact block-tridiagonal solve along each x3 column
};

const char* to_string(Preconditioner p);
Preconditioner preconditioner_from_string(const std::string& s);

/// Preconditioned conjugate gradients on the free dofs.
CgResult solve_cg(const QuadSystem& system, double tol, int maxit, const DisplacementField* init = nullptr,
                  Preconditioner pc = Preconditioner::Jacobi);

struct GradientCheck {
  double analytic = 0.0;
  double numeric = 0.0;
};

GradientCheck gradient_check(const QuadSystem& system, std::span<const double> psi, std::span<const double> dir,
                             double step);

/// Integrals of a displacement field over A x I, by the element Gauss rule.
struct FieldNorms {
  std::array<double, 3> l2sq{};  // ||psi1||^2, ||psi2||^2, ||h psi3||^2
  double sym_grad_sq = 0.0;      // ||sym grad_h psi||^2
  double grad_sq = 0.0;          // ||grad_h psi||^2
};
FieldNorms field_norms(const ExtrudedGrid& grid, double h, const DisplacementField& psi);

/// Exact L2(A x I) norm squared of M1 + x3 M2: area (|M1|^2 + |M2|^2/12).
double imposed_norm_sq(const ExtrudedGrid& grid, const Sym2& m1, const Sym2& m2);

}  // namespace vkh

namespace vkh::reference {

/// Element-by-element serial assembly in natural element order.
QuadSystem assemble_serial(const ExtrudedGrid& grid, const MicrostructureField& field, double h, const Sym2& m1,
                           const Sym2& m2);

/// Matrix-free y = A x, recomputing every element matrix.
void apply_elementwise(const ExtrudedGrid& grid, const MicrostructureField& field, double h,
                       std::span<const double> x, std::span<double> y);

}  // namespace vkh::reference
