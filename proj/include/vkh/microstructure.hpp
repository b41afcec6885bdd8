#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "vkh/elastic_form.hpp"

namespace vkh {

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

struct Point3 {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;
};

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  bool contains(const Point2& p, double tol = 0.0) const {
    return p.x1 >= x0 - tol && p.x1 <= x1 + tol && p.x2 >= y0 - tol && p.x2 <= y1 + tol;
  }
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

enum class FieldKind { ConstantIsotropic, InPlaneLaminate, Checkerboard, SmoothModulated, X3Graded, Table };

const char* to_string(FieldKind k);
FieldKind field_kind_from_string(const std::string& s);

/// How the oscillation length depends on the plate thickness h.
struct ScaleRule {
  enum class Type { Fixed, Linear, Power };
  Type type = Type::Fixed;
  double factor = 1.0;  // eps = factor*h (Linear) or factor*h^p (Power)
  double p = 1.0;

  double period(double h, double fixed_period) const;
};

struct Phase {
  double lambda = 0.0;
  double mu = 1.0;
};

/// A family h -> Q^h(x, .) of elastic forms on Omega = omega x (-1/2, 1/2).
///
/// Evaluation is pure: the same (h, x) always yields the same form, and a field
/// may be shared read-only between threads.
class MicrostructureField {
 public:
  static MicrostructureField constant_isotropic(double lambda, double mu);
  /// Two phases alternating along x_{axis+1} with volume fraction `fraction` of phase a.
  static MicrostructureField laminate(Phase a, Phase b, double period, int axis = 0,
                                      double fraction = 0.5);
  static MicrostructureField checkerboard(Phase a, Phase b, double period);
  /// Lame parameters base*(1 + amplitude sin(2 pi x1/eps) sin(2 pi x2/eps)), amplitude < 1.
  static MicrostructureField smooth_modulated(Phase base, double amplitude, double period);
  /// Cross-sectional grading from phase a to phase b. `symmetric` grades in |x3|
  /// (mirror symmetric about the mid-plane), otherwise linearly bottom to top.
  static MicrostructureField x3_graded(Phase a, Phase b, bool symmetric = false);
  /// Piecewise-constant cell table over omega, nearest-cell lookup; row-major in (ix, iy).
  static MicrostructureField table(int nx, int ny, std::vector<ElasticForm> cells);

  /// Parses a JSON descriptor; relative table paths resolve against `base_dir`.
  static MicrostructureField from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;

  MicrostructureField& with_scale_rule(ScaleRule rule);
  MicrostructureField& with_omega(Rect omega);
  /// Overrides the automatically derived ellipticity bounds.
  MicrostructureField& with_bounds(double alpha, double beta);

  FieldKind kind() const { return kind_; }
  const Rect& omega() const { return omega_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const ScaleRule& scale_rule() const { return scale_; }
  double period(double h) const { return scale_.period(h, period_); }
  /// True when the form does not depend on h.
  bool h_independent() const;

  /// Local form at thickness h and point x; throws PreconditionError outside Omega.
  ElasticForm form_at(double h, const Point3& x) const;
  double eval(double h, const Point3& x, const Mat3& g) const { return form_at(h, x)(g); }

 private:
  ElasticForm form_unchecked(double h, const Point3& x) const;
  void derive_bounds();

  FieldKind kind_ = FieldKind::ConstantIsotropic;
  std::vector<Phase> phases_;
  double period_ = 1.0;
  ScaleRule scale_;
  int axis_ = 0;
  double fraction_ = 0.5;
  double amplitude_ = 0.0;
  bool symmetric_ = false;
  int table_nx_ = 0;
  int table_ny_ = 0;
  std::vector<ElasticForm> table_;
  std::string table_file_;
  Rect omega_;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  bool bounds_declared_ = false;
};

/// Reads a cell table: header row, then `ix,iy,c00,c01,...,c55` (21 upper-triangle entries).
std::vector<ElasticForm> read_form_table_csv(const std::filesystem::path& file, int nx, int ny);

struct BoundsReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int samples = 0;
  bool pass = false;
};

/// Samples `samples` deterministic points of Omega and checks every local
/// spectrum against the declared [alpha, beta]. Violations are reported, not thrown.
BoundsReport verify_bounds(const MicrostructureField& field, double h, int samples);

}  // namespace vkh
