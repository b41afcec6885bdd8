#pragma once
// Limit plate energy
//   I(u, v) = sum_n m_n Q(x_n, sym Du + 1/2 Dv (x) Dv, -D^2 v) - sum_n m_n g_n v_n
// on a rectangular node grid with nodal (trapezoid) quadrature.

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "vkh/effective.hpp"

namespace vkh {

enum class PlateMode { Free, Clamped };

const char* to_string(PlateMode m);
PlateMode plate_mode_from_string(const std::string& s);

/// Uniform node grid on a rectangle with difference operators: central in the
/// interior, one-sided three-point on the boundary; second differences use shifted
/// three-point stencils at the boundary. All are exact on quadratics.
class PlateDomain {
 public:
  /// Sides must be integer multiples of `spacing`; at least 3 nodes per direction
  /// (5 when clamped).
  PlateDomain(const Rect& rect, double spacing, PlateMode mode);

  PlateMode mode() const { return mode_; }
  const Rect& rect() const { return rect_; }
  double spacing() const { return spacing_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  int node_count() const { return n1_ * n2_; }
  int node(int i, int j) const { return j * n1_ + i; }
  Point2 pos(int n) const { return {rect_.x0 + (n % n1_) * spacing_, rect_.y0 + (n / n1_) * spacing_}; }
  double weight(int n) const { return weight_[n]; }
  bool on_boundary(int n) const;
  /// Clamped mode: u and v fixed on the boundary, v also on the first interior ring.
  bool u_fixed(int n) const;
  bool v_fixed(int n) const;

  using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const SpMat& d1() const { return d1_; }
  const SpMat& d2() const { return d2_; }
  const SpMat& h11() const { return h11_; }
  const SpMat& h22() const { return h22_; }
  const SpMat& h12() const { return h12_; }

 private:
  Rect rect_;
  double spacing_;
  PlateMode mode_;
  int n1_, n2_;
  std::vector<double> weight_;
  SpMat d1_, d2_, h11_, h22_, h12_;
};

struct PlateState {
  std::vector<double> u1, u2, v;

  static PlateState zero(const PlateDomain& d);
  int size() const { return static_cast<int>(v.size()); }
  /// Serialization as x1,x2,u1,u2,v.
  std::string to_csv(const PlateDomain& d) const;
};

/// Symmetric positive definite 6x6 plate densities, one per node or one overall.
class DensityField {
 public:
  static DensityField constant(const Mat6& q);
  static DensityField per_node(std::vector<Mat6> q);
  /// Bilinear interpolation between records on a tensor grid of sample points
  /// (clamped outside their hull). One record gives a constant field.
  static DensityField from_records(const std::vector<EffectiveDensity>& records, const PlateDomain& domain);

  const Mat6& at(int node) const { return q_.size() == 1 ? q_[0] : q_[node]; }
  bool is_constant() const { return q_.size() == 1; }
  DensityField scaled(double t) const;

 private:
  explicit DensityField(std::vector<Mat6> q);
  std::vector<Mat6> q_;
};

struct LoadSpec {
  std::vector<double> g;  // transverse load per node; empty means zero

  static LoadSpec zero() { return {}; }
  static LoadSpec uniform(const PlateDomain& d, double value);
};

struct EquivalenceParams {
  double a1 = 0.0;
  double a2 = 0.0;
  double theta = 0.0;  // A = [[0, theta], [-theta, 0]]
};

/// sym Du + 1/2 Dv (x) Dv per node.
std::vector<Sym2> membrane_strain(const PlateState& s, const PlateDomain& d);
/// -D^2 v per node.
std::vector<Sym2> bending_strain(const PlateState& s, const PlateDomain& d);

double energy(const PlateState& s, const DensityField& q, const LoadSpec& load, const PlateDomain& d);
/// Gradient with respect to all nodal values, shaped like the state.
PlateState gradient(const PlateState& s, const DensityField& q, const LoadSpec& load, const PlateDomain& d);

/// u2 = u1 + (A - 1/2 a (x) a) x - v1 a,  v2 = v1 + a . x
PlateState apply_equivalence(const PlateState& s, const EquivalenceParams& p, const PlateDomain& d);

/// |I(s) - I(~s)| at zero load. Rejected in clamped mode.
double invariance_check(const PlateState& s, const EquivalenceParams& p, const DensityField& q,
                        const PlateDomain& d);

struct MinimizeOptions {
  double tol = 1e-10;
  int max_iterations = 2000;
  int memory = 10;
};

struct GaugeReport {
  double u_mean1 = 0.0, u_mean2 = 0.0, u_rotation = 0.0;  // components along the u-null family
  double v_mean = 0.0, v_slope1 = 0.0, v_slope2 = 0.0;    // components along 1, x1, x2
};

struct PlateResult {
  PlateState state;
  double energy = 0.0;
  double initial_energy = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;  // projected in free mode
  bool converged = false;
  bool stalled = false;  // stopped at the rounding floor of the energy
  GaugeReport gauge;
};

/// Alternates an exact u-solve (sparse LDLT) with L-BFGS steps on v and Armijo
/// backtracking; the bending block of the Hessian serves as initial inverse.
/// Throws SolverError on line-search failure or when the iteration cap is reached.
PlateResult minimize(const DensityField& q, const LoadSpec& load, const PlateDomain& d, const PlateState& init,
                     const MinimizeOptions& opts = {});

GaugeReport gauge_report(const PlateState& s, const PlateDomain& d);

}  // namespace vkh
