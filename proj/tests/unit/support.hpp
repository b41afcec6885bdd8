#pragma once

#include <random>

#include "vkh/sym.hpp"

namespace vkh::test {

inline Sym2 random_sym2(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Mat3 random_mat3(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 m;
  for (double& x : m.a) x = u(rng);
  return m;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace vkh::test
