#pragma once

#include "vkh/sym.hpp"

namespace vkh {

/// Quadratic form q(G) = vec(sym G)^T C vec(sym G) on 3x3 matrices.
class ElasticForm {
 public:
  ElasticForm() : c_(Mat6::Zero()) {}
  /// Takes the symmetric part of `c`; throws if `c` is far from symmetric.
  explicit ElasticForm(const Mat6& c);

  const Mat6& matrix() const { return c_; }

  double operator()(const Mat3& g) const { return eval_vec(vec_sym(g)); }
  double eval_vec(const Vec6& v) const { return v.dot(c_ * v); }

  /// Smallest and largest eigenvalue of C.
  std::pair<double, double> spectral_bounds() const;

  ElasticForm operator*(double t) const { return ElasticForm(c_ * t); }
  ElasticForm operator+(const ElasticForm& o) const { return ElasticForm(c_ + o.c_); }

 private:
  Mat6 c_;
};

/// q(G) = 2 mu |sym G|^2 + lambda (tr G)^2. Bounds alpha = 2mu, beta = 2mu + 3lambda.
ElasticForm isotropic_form(double lambda, double mu);

struct LipschitzGap {
  double gap = 0.0;
  double bound = 0.0;
};

/// |q(G1) - q(G2)| against beta |sym G1 - sym G2| |sym G1 + sym G2|, with beta
/// the largest eigenvalue of the form.
LipschitzGap lipschitz_gap(const ElasticForm& form, const Mat3& g1, const Mat3& g2);

}  // namespace vkh
