#pragma once
// Thin-domain decomposition psi = psi_hat + r ^ x3 e3 + psi_bar and the
// two-term strain splitting built on top of it.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vkh/fem.hpp"

namespace vkh {

inline constexpr double kMomentExact = 12.0;

struct GrisoParts {
  std::vector<Vec3> psi_hat;             // per base node
  std::vector<std::array<double, 2>> r;  // per base node
  DisplacementField psi_bar;
  double kappa = kMomentExact;
};

/// psi_hat = int_I psi dx3, r = kappa int_I x3 (e3 ^ psi) dx3, psi_bar the remainder.
/// The x3 integrals are exact for the piecewise-linear column interpolant.
GrisoParts decompose(const DisplacementField& psi, const ExtrudedGrid& grid, double kappa = kMomentExact);

/// psi_hat + r ^ x3 e3 + psi_bar, nodewise.
DisplacementField reconstruct(const GrisoParts& parts, const ExtrudedGrid& grid);

/// psi_hat + r ^ x3 e3 as a grid field.
DisplacementField rigid_part(const GrisoParts& parts, const ExtrudedGrid& grid);

struct KornRatio {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

/// lhs = |sym grad_h(psi_hat + r ^ x3 e3)|^2 + |grad_h psi_bar|^2 + h^-2 |psi_bar|^2,
/// rhs = |sym grad_h psi|^2, all over A x I with the element Gauss rule.
KornRatio korn_ratio(const DisplacementField& psi, const ExtrudedGrid& grid, double h, double kappa = kMomentExact);

struct RegularizeResult {
  std::vector<double> phi;  // per base node, zero mean on every connected component
  double misfit = 0.0;      // || grad phi + (r2, -r1) ||_{L2(A)}
  int iterations = 0;
  double residual = 0.0;
};

/// min over bilinear phi of int_A |grad phi + (r2, -r1)|^2, zero mean per component.
RegularizeResult regularize(const std::vector<std::array<double, 2>>& r, const RasterDomain& domain,
                            double tol = 1e-12, int maxit = 100000);

/// || grad phi + (r2, -r1) ||_{L2(A)} for bilinear phi and r.
double regularize_misfit(const std::vector<double>& phi, const std::vector<std::array<double, 2>>& r,
                         const RasterDomain& domain);

/// Nodal difference operators on a raster: central where both neighbours exist,
/// one-sided otherwise.
class NodalDifferences {
 public:
  explicit NodalDifferences(const RasterDomain& domain);
  /// d/dx_{axis+1} of a nodal scalar.
  std::vector<double> d(const std::vector<double>& f, int axis) const;
  /// (d11 f, d22 f, (d1 d2 f + d2 d1 f)/2) per node.
  std::vector<Sym2> hessian(const std::vector<double>& f) const;
  /// Lumped bilinear mass: int_A f = sum m_i f_i for bilinear f.
  const std::vector<double>& mass() const { return mass_; }

 private:
  const RasterDomain* dom_;
  std::vector<std::array<int, 4>> nbr_;  // -x1, +x1, -x2, +x2
  std::vector<double> mass_;
};

/// Nodal sym grad_h psi from the same difference operators (x3 differences along columns).
std::vector<Vec6> nodal_sym_strain(const DisplacementField& psi, const ExtrudedGrid& grid, double h);

/// Nodal-quadrature L2(A x I) norm squared of a nodal tensor field.
double nodal_norm_sq(const std::vector<Vec6>& field, const ExtrudedGrid& grid);

/// Tensor-product triangular kernel of the given radius, renormalized on the raster.
std::vector<double> mollify(const std::vector<double>& f, const RasterDomain& domain, double radius);

struct SecondSplit {
  std::vector<double> phi;
  std::vector<double> w;
  std::vector<double> w_tilde;
  DisplacementField psi_tilde;
  std::vector<Vec6> o_term;          // -h x3 iota(D^2 w_tilde) per node
  std::vector<double> psi3_shift;    // mean removed from psi3, per connected component
  double mollify_radius = 0.0;
  double kappa = kMomentExact;
  double o_norm = 0.0;               // ||o||_{L2}
  double identity_defect = 0.0;      // max |sym grad psi + x3 iota(D^2 phi) - sym grad psi_tilde - o|
  double strain_scale = 0.0;         // max |sym grad psi|
  double regularize_misfit = 0.0;
};

/// Decompose, regularize r into phi, split psi_hat3 = phi/h + w, mollify w, and
/// assemble psi_tilde and o. `mollify_radius <= 0` selects sqrt(h).
SecondSplit second_form(const DisplacementField& psi, const ExtrudedGrid& grid, double h,
                        double mollify_radius = 0.0, double kappa = kMomentExact);

struct GrisoNorms {
  double psi_hat = 0.0;  // ||psi_hat||_{L2(A)}
  double r = 0.0;
  double psi_bar = 0.0;  // ||psi_bar||_{L2(A x I)}
  double mean_psi_bar = 0.0;  // max over columns of |int_I psi_bar dx3|
};

GrisoNorms griso_norms(const GrisoParts& parts, const ExtrudedGrid& grid);

/// Seeded smooth test field with thin-domain scaling:
///   psi = (h f1 + x3 g1, h f2 + x3 g2, g3 + h f3),
/// f_i random trigonometric sums in (x1, x2, x3), g_i in (x1, x2). Platform independent.
DisplacementField random_smooth_field(const ExtrudedGrid& grid, double h, std::uint64_t seed, int modes = 4);

/// Seeded family with bounded sym grad_h:
///   psi^h = (h a1 + h x3 b1, h a2 + h x3 b2, s + h x3^2 c),
/// a, b, s, c random trigonometric sums in (x1, x2) with wavenumbers in [1, 3].
DisplacementField smooth_family_field(const ExtrudedGrid& grid, double h, std::uint64_t seed, int modes = 3);

/// x1,x2,x3,psi1,psi2,psi3 per node.
std::string field_csv(const DisplacementField& psi, const ExtrudedGrid& grid);

}  // namespace vkh
