#include "vkh/elastic_form.hpp"

#include <Eigen/Eigenvalues>

#include "vkh/error.hpp"

namespace vkh {

ElasticForm::ElasticForm(const Mat6& c) {
  const double asym = (c - c.transpose()).norm();
  if (asym > 1e-10 * (1.0 + c.norm())) throw PreconditionError("ElasticForm: matrix is not symmetric");
  c_ = 0.5 * (c + c.transpose());
}

std::pair<double, double> ElasticForm::spectral_bounds() const {
  Eigen::SelfAdjointEigenSolver<Mat6> es(c_, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(5)};
}

ElasticForm isotropic_form(double lambda, double mu) {
  if (!(mu > 0.0)) throw PreconditionError("isotropic_form: mu must be positive");
  if (!(lambda >= 0.0)) throw PreconditionError("isotropic_form: lambda must be non-negative");
  Vec6 trace_dir = Vec6::Zero();
  trace_dir.head<3>().setOnes();
  return ElasticForm(2.0 * mu * Mat6::Identity() + lambda * trace_dir * trace_dir.transpose());
}

LipschitzGap lipschitz_gap(const ElasticForm& form, const Mat3& g1, const Mat3& g2) {
  const Vec6 a = vec_sym(g1);
  const Vec6 b = vec_sym(g2);
  const double beta = form.spectral_bounds().second;
  return {std::abs(form.eval_vec(a) - form.eval_vec(b)), beta * (a - b).norm() * (a + b).norm()};
}

}  // namespace vkh
