#include "vkh/extrapolation.hpp"

#include <cmath>
#include <vector>

#include "vkh/error.hpp"

namespace vkh {

namespace {

// Linear least squares for fixed p; returns the sum of squared residuals.
double fit_fixed(std::span<const double> h, std::span<const double> k, double p, double& k_inf, double& c) {
  const std::size_t n = h.size();
  double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::pow(h[i], p);
    sx += x;
    sxx += x * x;
    sy += k[i];
    sxy += x * k[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) <= 1e-300) {
    c = 0.0;
    k_inf = sy / n;
  } else {
    c = (n * sxy - sx * sy) / det;
    k_inf = (sy - c * sx) / n;
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = k_inf + c * std::pow(h[i], p) - k[i];
    ss += r * r;
  }
  return ss;
}

}  // namespace

ExtrapolationModel fit_power_law(std::span<const double> h, std::span<const double> k) {
  if (h.size() != k.size() || h.size() < 3) throw PreconditionError("fit_power_law: need >= 3 (h, k) pairs");
  double kmax = 0.0;
  for (double v : k) kmax = std::max(kmax, std::abs(v));

  ExtrapolationModel m;
  // Exactly constant data: nothing to extrapolate.
  double spread = 0.0;
  for (double v : k) spread = std::max(spread, std::abs(v - k[0]));
  if (spread <= 1e-14 * kmax) {
    m.k_inf = k[0];
    m.c = 0.0;
    m.p = 1.0;
    return m;
  }

  const int nscan = 400;
  const double lmin = std::log(kMinRate), lmax = std::log(kMaxRate);
  int best = 0;
  double best_ss = 1e300;
  std::vector<double> ss(nscan + 1);
  for (int i = 0; i <= nscan; ++i) {
    double ki, c;
    ss[i] = fit_fixed(h, k, std::exp(lmin + (lmax - lmin) * i / nscan), ki, c);
    if (ss[i] < best_ss) {
      best_ss = ss[i];
      best = i;
    }
  }
  double a = lmin + (lmax - lmin) * std::max(0, best - 1) / nscan;
  double b = lmin + (lmax - lmin) * std::min(nscan, best + 1) / nscan;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double ki, c;
  for (int it = 0; it < 100; ++it) {
    const double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    if (fit_fixed(h, k, std::exp(x1), ki, c) < fit_fixed(h, k, std::exp(x2), ki, c))
      b = x2;
    else
      a = x1;
  }
  m.p = std::exp(0.5 * (a + b));
  const double sse = fit_fixed(h, k, m.p, m.k_inf, m.c);
  m.residual = std::sqrt(sse / h.size());
  m.p_at_bound = best == 0 || best == nscan;
  return m;
}

}  // namespace vkh
