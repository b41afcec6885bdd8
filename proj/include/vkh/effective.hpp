#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vkh/corrector.hpp"
#include "vkh/extrapolation.hpp"

namespace vkh {

/// Pointwise relaxation: min over b in R^3 of q(iota(G) + b (x) e3 + e3 (x) b),
/// as a 3x3 matrix on Sym2::vec() coordinates (Schur complement of the form).
Mat3x3 relaxed_form_analytic(const ElasticForm& form);

/// blockdiag(Q2, Q2/12) on vec_pair coordinates.
Mat6 relaxed_plate_density(const ElasticForm& form);

struct EffectiveOptions {
  double delta = 1.0 / 32.0;     // lattice spacing of the ball raster
  double spacing_per_h = 0.0;    // > 0: spacing = spacing_per_h * h instead of delta
  CorrectorOptions corrector;
  double cauchy_tol = 0.02;
};

struct DensityEstimate {
  double value = 0.0;
  ExtrapolationModel model;        // fit at the smallest radius
  std::vector<double> r_list;
  std::vector<double> k_inf;       // one per radius
  std::vector<SweepTable> sweeps;  // one per radius
  double r_spread = 0.0;           // max - min of k_inf
  bool cauchy = true;              // every sweep Cauchy
};

/// Q(x0, M1, M2) from h-sweeps on balls B(x0, r). When a sweep is not Cauchy the
/// value falls back to the smallest-h row and `cauchy` is false.
DensityEstimate estimate_density(const MicrostructureField& field, Point2 x0, const Sym2& m1, const Sym2& m2,
                                 const std::vector<double>& r_list, const std::vector<double>& h_list,
                                 const EffectiveOptions& opts = {});

struct DensityFlags {
  bool non_converged = false;  // some sweep failed the Cauchy test
  bool q1_lower = true;        // lambda_min >= alpha/12
  bool q1_upper = true;        // lambda_max <= beta
  bool p_at_bound = false;     // some fitted rate hit the search interval
};

struct EffectiveDensity {
  Point2 x0;
  double r_used = 0.0;
  std::vector<double> h_list;
  Mat6 qhat = Mat6::Zero();
  double fit_residual = 0.0;  // largest RMS misfit over the 21 fits
  double min_eig = 0.0;
  double max_eig = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  DensityFlags flags;
  std::vector<double> samples;  // the 21 sampled values, diagonal first then pairs (i<j)
  std::vector<SweepTable> sweeps;  // h-sweep behind each sample, same order; not serialized

  double eval(const Sym2& m1, const Sym2& m2) const;
  nlohmann::json to_json() const;
  static EffectiveDensity from_json(const nlohmann::json& j);
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double eigenvalue) : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Full 6x6 density from 21 estimate_density evaluations (basis vectors and pairwise sums).
EffectiveDensity polarize(const MicrostructureField& field, Point2 x0, double r, const std::vector<double>& h_list,
                          const EffectiveOptions& opts = {});

/// Upper-triangle entries (row-major) and back.
std::vector<double> upper_triangle(const Mat6& m);
Mat6 from_upper_triangle(const std::vector<double>& v);

struct PropertyFixtures {
  explicit PropertyFixtures(RasterDomain d) : domain(std::move(d)) {}

  RasterDomain domain;
  std::vector<std::pair<Sym2, Sym2>> samples;
  /// Two separated rasters on one lattice, for additivity.
  std::optional<std::pair<RasterDomain, RasterDomain>> disjoint;
  /// inner contained in outer, for monotonicity of the extrapolated values.
  std::optional<std::pair<RasterDomain, RasterDomain>> nested;
  /// A and a cover (A1, A2) of it, for subadditivity of the extrapolated values.
  std::optional<std::array<RasterDomain, 3>> cover;
  std::vector<double> h_list;  // limit-level checks; empty skips them
};

struct PropertyEntry {
  std::string name;
  bool pass = false;
  double slack = 0.0;      // worst measured relative defect (<= 0 means inside the bound)
  double tolerance = 0.0;
  int checks = 0;
};

struct PropertyReport {
  std::vector<PropertyEntry> entries;
  bool all_pass() const;
  std::string to_csv() const;
};

/// Exact identities at fixed h (bounds, homogeneity, parallelogram, additivity,
/// continuity) and limit-level monotonicity and subadditivity on extrapolated values.
PropertyReport property_suite(const MicrostructureField& field, const PropertyFixtures& fixtures, double h,
                              const CorrectorOptions& opts = {}, double limit_tol = 0.02,
                              double identity_tol = 1e-8, double additivity_tol = 1e-9);

}  // namespace vkh
