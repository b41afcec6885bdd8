#pragma once

// Data-parallel building blocks. Reductions split the index range into fixed
// blocks independent of the thread count and add the block partials in order,
// so results are bit-identical for any OMP_NUM_THREADS.

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace vkh::kernels {

inline constexpr std::size_t kReduceBlock = 2048;

/// sum_{i<n} term(i) with a thread-count independent summation order.
template <class F>
double blocked_sum(std::size_t n, F&& term) {
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

/// K simultaneous blocked sums; term(i, acc) adds item i into acc[0..K).
template <std::size_t K, class F>
std::array<double, K> blocked_sum_n(std::size_t n, F&& term) {
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<std::array<double, K>> partial(nblocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    std::array<double, K> s{};
    for (std::size_t i = lo; i < hi; ++i) term(i, s);
    partial[static_cast<std::size_t>(b)] = s;
  }
  std::array<double, K> s{};
  for (const auto& p : partial)
    for (std::size_t k = 0; k < K; ++k) s[k] += p[k];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
/// y = x + beta * y
void xpby(std::span<const double> x, double beta, std::span<double> y);

/// Number of threads OpenMP regions will use.
int thread_count();
void set_thread_count(int n);

}  // namespace vkh::kernels

namespace vkh::reference {

/// Plain left-to-right serial dot product.
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace vkh::reference
