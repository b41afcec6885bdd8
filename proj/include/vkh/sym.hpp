#pragma once

// Small symmetric-matrix algebra shared by every module.
//
// Symmetric 3x3 matrices are represented by 6-vectors in the orthonormal basis
//   { E11, E22, E33, (E12+E21)/sqrt2, (E13+E31)/sqrt2, (E23+E32)/sqrt2 }
// so vec() is an isometry for the Frobenius norm. Symmetric 2x2 matrices use the
// restriction { E11, E22, (E12+E21)/sqrt2 }.

#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace vkh {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3x3 = Eigen::Matrix3d;

inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Symmetric 2x2 matrix stored by its three independent components.
struct Sym2 {
  double e11 = 0.0;
  double e22 = 0.0;
  double e12 = 0.0;

  static Sym2 identity() { return {1.0, 1.0, 0.0}; }

  Sym2 operator+(const Sym2& o) const { return {e11 + o.e11, e22 + o.e22, e12 + o.e12}; }
  Sym2 operator-(const Sym2& o) const { return {e11 - o.e11, e22 - o.e22, e12 - o.e12}; }
  Sym2 operator*(double t) const { return {t * e11, t * e22, t * e12}; }
  friend Sym2 operator*(double t, const Sym2& s) { return s * t; }
  bool operator==(const Sym2&) const = default;

  /// Frobenius norm squared (the off-diagonal entry counts twice).
  double norm2() const { return e11 * e11 + e22 * e22 + 2.0 * e12 * e12; }
  double norm() const { return std::sqrt(norm2()); }
  double dot(const Sym2& o) const { return e11 * o.e11 + e22 * o.e22 + 2.0 * e12 * o.e12; }

  Eigen::Vector3d vec() const { return {e11, e22, kSqrt2 * e12}; }
  static Sym2 unvec(const Eigen::Vector3d& v) { return {v(0), v(1), v(2) / kSqrt2}; }
};

/// General 3x3 matrix, row-major: m(i,j) = a[3*i+j].
struct Mat3 {
  std::array<double, 9> a{};

  double& operator()(int i, int j) { return a[3 * i + j]; }
  double operator()(int i, int j) const { return a[3 * i + j]; }

  static Mat3 zero() { return {}; }
  static Mat3 identity() {
    Mat3 m;
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    return m;
  }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int k = 0; k < 9; ++k) r.a[k] = a[k] + o.a[k];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int k = 0; k < 9; ++k) r.a[k] = a[k] - o.a[k];
    return r;
  }
  Mat3 operator*(double t) const {
    Mat3 r;
    for (int k = 0; k < 9; ++k) r.a[k] = t * a[k];
    return r;
  }
  bool operator==(const Mat3&) const = default;

  Mat3 transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  Mat3 sym() const { return (*this + transpose()) * 0.5; }
  double trace() const { return a[0] + a[4] + a[8]; }
  double frobenius2() const {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
  }
  double frobenius() const { return std::sqrt(frobenius2()); }
};

/// Natural injection of 2x2 symmetric matrices into 3x3: zero third row and column.
inline Mat3 iota(const Sym2& m) {
  Mat3 r;
  r(0, 0) = m.e11;
  r(1, 1) = m.e22;
  r(0, 1) = r(1, 0) = m.e12;
  return r;
}

/// 6-vector of sym(G) in the orthonormal basis above.
inline Vec6 vec_sym(const Mat3& g) {
  Vec6 v;
  v << g(0, 0), g(1, 1), g(2, 2), (g(0, 1) + g(1, 0)) / kSqrt2, (g(0, 2) + g(2, 0)) / kSqrt2,
      (g(1, 2) + g(2, 1)) / kSqrt2;
  return v;
}

/// Inverse of vec_sym on symmetric matrices.
inline Mat3 unvec_sym(const Vec6& v) {
  Mat3 m;
  m(0, 0) = v(0);
  m(1, 1) = v(1);
  m(2, 2) = v(2);
  m(0, 1) = m(1, 0) = v(3) / kSqrt2;
  m(0, 2) = m(2, 0) = v(4) / kSqrt2;
  m(1, 2) = m(2, 1) = v(5) / kSqrt2;
  return m;
}

/// vec(iota(m)) without going through Mat3.
inline Vec6 vec_iota(const Sym2& m) {
  Vec6 v;
  v << m.e11, m.e22, 0.0, kSqrt2 * m.e12, 0.0, 0.0;
  return v;
}

/// Coordinates of (M1, M2) in the 6-dimensional plate strain space.
inline Vec6 vec_pair(const Sym2& m1, const Sym2& m2) {
  Vec6 v;
  v << m1.vec(), m2.vec();
  return v;
}

inline std::pair<Sym2, Sym2> unvec_pair(const Vec6& v) {
  return {Sym2::unvec(v.head<3>()), Sym2::unvec(v.tail<3>())};
}

}  // namespace vkh
