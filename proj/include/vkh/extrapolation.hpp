#pragma once

#include <span>

namespace vkh {

/// k(h) ~ k_inf + c h^p fitted by least squares.
struct ExtrapolationModel {
  double k_inf = 0.0;
  double c = 0.0;
  double p = 1.0;
  double residual = 0.0;  // RMS misfit of the fit
  bool p_at_bound = false;
};

inline constexpr double kMinRate = 0.25;
inline constexpr double kMaxRate = 4.0;

/// For fixed p the problem is linear in (k_inf, c); p is found by a log-spaced
/// scan over [kMinRate, kMaxRate] followed by golden-section refinement.
/// Needs at least three points with distinct h.
ExtrapolationModel fit_power_law(std::span<const double> h, std::span<const double> k);

}  // namespace vkh
