#include "vkh/plate.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <set>

#include <Eigen/SparseCholesky>

#include "vkh/error.hpp"

namespace vkh {

const char* to_string(PlateMode m) { return m == PlateMode::Free ? "free" : "clamped"; }

PlateMode plate_mode_from_string(const std::string& s) {
  if (s == "free") return PlateMode::Free;
  if (s == "clamped") return PlateMode::Clamped;
  throw PreconditionError("unknown plate mode '" + s + "'");
}

namespace {

using SpMat = PlateDomain::SpMat;
using Vec = Eigen::VectorXd;

int cells_along(double length, double spacing, const char* what) {
  const double c = length / spacing;
  const long n = std::lround(c);
  if (n < 1 || std::abs(c - n) > 1e-9 * std::max(1.0, c))
    throw PreconditionError(std::string("plate domain: ") + what + " is not a multiple of the spacing");
  return static_cast<int>(n);
}

// 1D first and second difference rows for index i of n.
void first_row(int i, int n, double dl, std::vector<std::pair<int, double>>& row) {
  row.clear();
  if (i > 0 && i < n - 1) {
    row = {{i - 1, -0.5 / dl}, {i + 1, 0.5 / dl}};
  } else if (i == 0) {
    row = {{0, -1.5 / dl}, {1, 2.0 / dl}, {2, -0.5 / dl}};
  } else {
    row = {{n - 3, 0.5 / dl}, {n - 2, -2.0 / dl}, {n - 1, 1.5 / dl}};
  }
}

void second_row(int i, int n, double dl, std::vector<std::pair<int, double>>& row) {
  const int c = std::clamp(i, 1, n - 2);
  const double s = 1.0 / (dl * dl);
  row = {{c - 1, s}, {c, -2.0 * s}, {c + 1, s}};
}

}  // namespace

PlateDomain::PlateDomain(const Rect& rect, double spacing, PlateMode mode) : rect_(rect), spacing_(spacing), mode_(mode) {
  if (!(spacing > 0.0)) throw PreconditionError("plate domain: spacing must be positive");
  n1_ = cells_along(rect.width(), spacing, "width") + 1;
  n2_ = cells_along(rect.height(), spacing, "height") + 1;
  const int need = mode == PlateMode::Clamped ? 5 : 3;
  if (n1_ < need || n2_ < need) throw PreconditionError("plate domain: too few nodes per direction");

  const int nn = node_count();
  weight_.resize(nn);
  for (int j = 0; j < n2_; ++j)
    for (int i = 0; i < n1_; ++i) {
      const double wx = (i == 0 || i == n1_ - 1) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == n2_ - 1) ? 0.5 : 1.0;
      weight_[node(i, j)] = wx * wy * spacing * spacing;
    }

  std::vector<Eigen::Triplet<double>> t1, t2, t11, t22;
  std::vector<std::pair<int, double>> row;
  for (int j = 0; j < n2_; ++j)
    for (int i = 0; i < n1_; ++i) {
      const int n = node(i, j);
      first_row(i, n1_, spacing, row);
      for (auto [k, c] : row) t1.emplace_back(n, node(k, j), c);
      first_row(j, n2_, spacing, row);
      for (auto [k, c] : row) t2.emplace_back(n, node(i, k), c);
      second_row(i, n1_, spacing, row);
      for (auto [k, c] : row) t11.emplace_back(n, node(k, j), c);
      second_row(j, n2_, spacing, row);
      for (auto [k, c] : row) t22.emplace_back(n, node(i, k), c);
    }
  d1_.resize(nn, nn);
  d2_.resize(nn, nn);
  h11_.resize(nn, nn);
  h22_.resize(nn, nn);
  d1_.setFromTriplets(t1.begin(), t1.end());
  d2_.setFromTriplets(t2.begin(), t2.end());
  h11_.setFromTriplets(t11.begin(), t11.end());
  h22_.setFromTriplets(t22.begin(), t22.end());
  h12_ = d1_ * d2_;
  h12_.prune(0.0);
}

bool PlateDomain::on_boundary(int n) const {
  const int i = n % n1_, j = n / n1_;
  return i == 0 || j == 0 || i == n1_ - 1 || j == n2_ - 1;
}

bool PlateDomain::u_fixed(int n) const { return mode_ == PlateMode::Clamped && on_boundary(n); }

bool PlateDomain::v_fixed(int n) const {
  if (mode_ != PlateMode::Clamped) return false;
  const int i = n % n1_, j = n / n1_;
  return i <= 1 || j <= 1 || i >= n1_ - 2 || j >= n2_ - 2;
}

PlateState PlateState::zero(const PlateDomain& d) {
  const auto n = static_cast<std::size_t>(d.node_count());
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

std::string PlateState::to_csv(const PlateDomain& d) const {
  std::string out = "x1,x2,u1,u2,v\n";
  char buf[200];
  for (int n = 0; n < size(); ++n) {
    const Point2 p = d.pos(n);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x1, p.x2, u1[n], u2[n], v[n]);
    out += buf;
  }
  return out;
}

DensityField::DensityField(std::vector<Mat6> q) : q_(std::move(q)) {
  if (q_.empty()) throw PreconditionError("density field: empty");
  for (auto& m : q_) {
    if ((m - m.transpose()).norm() > 1e-9 * std::max(1.0, m.norm()))
      throw PreconditionError("density field: matrix is not symmetric");
    m = 0.5 * (m + m.transpose());
    Eigen::LLT<Mat6> llt(m);
    if (llt.info() != Eigen::Success) throw PreconditionError("density field: matrix is not positive definite");
  }
}

DensityField DensityField::constant(const Mat6& q) { return DensityField(std::vector<Mat6>{q}); }

DensityField DensityField::per_node(std::vector<Mat6> q) { return DensityField(std::move(q)); }

DensityField DensityField::scaled(double t) const {
  std::vector<Mat6> q = q_;
  for (auto& m : q) m *= t;
  return DensityField(std::move(q));
}

DensityField DensityField::from_records(const std::vector<EffectiveDensity>& recs, const PlateDomain& d) {
  if (recs.empty()) throw PreconditionError("density field: no records");
  if (recs.size() == 1) return constant(recs[0].qhat);
  std::set<double> xs_set, ys_set;
  std::map<std::pair<double, double>, const Mat6*> at;
  for (const auto& r : recs) {
    xs_set.insert(r.x0.x1);
    ys_set.insert(r.x0.x2);
    at[{r.x0.x1, r.x0.x2}] = &r.qhat;
  }
  const std::vector<double> xs(xs_set.begin(), xs_set.end()), ys(ys_set.begin(), ys_set.end());
  if (at.size() != xs.size() * ys.size())
    throw PreconditionError("density field: sample points do not form a tensor grid");
  auto bracket = [](const std::vector<double>& g, double x, int& k, double& t) {
    if (g.size() == 1 || x <= g.front()) {
      k = 0, t = 0.0;
    } else if (x >= g.back()) {
      k = static_cast<int>(g.size()) - 2, t = 1.0;
    } else {
      k = static_cast<int>(std::upper_bound(g.begin(), g.end(), x) - g.begin()) - 1;
      t = (x - g[k]) / (g[k + 1] - g[k]);
    }
  };
  std::vector<Mat6> q(d.node_count());
  for (int n = 0; n < d.node_count(); ++n) {
    const Point2 p = d.pos(n);
    int i, j;
    double tx, ty;
    bracket(xs, p.x1, i, tx);
    bracket(ys, p.x2, j, ty);
    const int i1 = std::min<int>(i + 1, xs.size() - 1), j1 = std::min<int>(j + 1, ys.size() - 1);
    q[n] = (1 - tx) * (1 - ty) * *at[{xs[i], ys[j]}] + tx * (1 - ty) * *at[{xs[i1], ys[j]}] +
           (1 - tx) * ty * *at[{xs[i], ys[j1]}] + tx * ty * *at[{xs[i1], ys[j1]}];
  }
  return DensityField(std::move(q));
}

LoadSpec LoadSpec::uniform(const PlateDomain& d, double value) {
  return {std::vector<double>(d.node_count(), value)};
}

namespace {

Vec as_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

struct Strains {
  Vec d1u1, d2u1, d1u2, d2u2, d1v, d2v, h11, h22, h12;
};

Strains strains(const PlateState& s, const PlateDomain& d) {
  const Vec u1 = as_vec(s.u1), u2 = as_vec(s.u2), v = as_vec(s.v);
  return {d.d1() * u1, d.d2() * u1, d.d1() * u2, d.d2() * u2, d.d1() * v, d.d2() * v,
          d.h11() * v, d.h22() * v, d.h12() * v};
}

Vec6 strain_vector(const Strains& e, int n) {
  Vec6 z;
  z << e.d1u1(n) + 0.5 * e.d1v(n) * e.d1v(n), e.d2u2(n) + 0.5 * e.d2v(n) * e.d2v(n),
      kSqrt2 * (0.5 * (e.d2u1(n) + e.d1u2(n)) + 0.5 * e.d1v(n) * e.d2v(n)), -e.h11(n), -e.h22(n),
      -kSqrt2 * e.h12(n);
  return z;
}

void check_shapes(const PlateState& s, const PlateDomain& d) {
  const auto n = static_cast<std::size_t>(d.node_count());
  if (s.u1.size() != n || s.u2.size() != n || s.v.size() != n) throw PreconditionError("plate state does not match domain");
}

}  // namespace

std::vector<Sym2> membrane_strain(const PlateState& s, const PlateDomain& d) {
  check_shapes(s, d);
  const Strains e = strains(s, d);
  std::vector<Sym2> out(d.node_count());
  for (int n = 0; n < d.node_count(); ++n) {
    const Vec6 z = strain_vector(e, n);
    out[n] = Sym2::unvec(z.head<3>());
  }
  return out;
}

std::vector<Sym2> bending_strain(const PlateState& s, const PlateDomain& d) {
  check_shapes(s, d);
  const Strains e = strains(s, d);
  std::vector<Sym2> out(d.node_count());
  for (int n = 0; n < d.node_count(); ++n) out[n] = {-e.h11(n), -e.h22(n), -e.h12(n)};
  return out;
}

double energy(const PlateState& s, const DensityField& q, const LoadSpec& load, const PlateDomain& d) {
  check_shapes(s, d);
  const Strains e = strains(s, d);
  double total = 0.0;
  for (int n = 0; n < d.node_count(); ++n) {
    const Vec6 z = strain_vector(e, n);
    total += d.weight(n) * z.dot(q.at(n) * z);
    if (!load.g.empty()) total -= d.weight(n) * load.g[n] * s.v[n];
  }
  return total;
}

PlateState gradient(const PlateState& s, const DensityField& q, const LoadSpec& load, const PlateDomain& d) {
  check_shapes(s, d);
  const int nn = d.node_count();
  const Strains e = strains(s, d);
  Vec s0(nn), s1(nn), s2(nn), s3(nn), s4(nn), s5(nn);
  for (int n = 0; n < nn; ++n) {
    const Vec6 z = strain_vector(e, n);
    const Vec6 sig = 2.0 * d.weight(n) * (q.at(n) * z);
    s0(n) = sig(0), s1(n) = sig(1), s2(n) = sig(2) / kSqrt2, s3(n) = sig(3), s4(n) = sig(4), s5(n) = sig(5);
  }
  const Vec gu1 = d.d1().transpose() * s0 + d.d2().transpose() * s2;
  const Vec gu2 = d.d2().transpose() * s1 + d.d1().transpose() * s2;
  Vec gv = d.d1().transpose() * (s0.cwiseProduct(e.d1v) + s2.cwiseProduct(e.d2v)) +
           d.d2().transpose() * (s1.cwiseProduct(e.d2v) + s2.cwiseProduct(e.d1v)) - d.h11().transpose() * s3 -
           d.h22().transpose() * s4 - kSqrt2 * (d.h12().transpose() * s5);
  if (!load.g.empty())
    for (int n = 0; n < nn; ++n) gv(n) -= d.weight(n) * load.g[n];
  PlateState g;
  g.u1.assign(gu1.data(), gu1.data() + nn);
  g.u2.assign(gu2.data(), gu2.data() + nn);
  g.v.assign(gv.data(), gv.data() + nn);
  return g;
}

PlateState apply_equivalence(const PlateState& s, const EquivalenceParams& p, const PlateDomain& d) {
  check_shapes(s, d);
  PlateState t = s;
  // B = A - 1/2 a (x) a
  const double b11 = -0.5 * p.a1 * p.a1, b12 = p.theta - 0.5 * p.a1 * p.a2;
  const double b21 = -p.theta - 0.5 * p.a2 * p.a1, b22 = -0.5 * p.a2 * p.a2;
  for (int n = 0; n < d.node_count(); ++n) {
    const Point2 x = d.pos(n);
    t.u1[n] = s.u1[n] + b11 * x.x1 + b12 * x.x2 - s.v[n] * p.a1;
    t.u2[n] = s.u2[n] + b21 * x.x1 + b22 * x.x2 - s.v[n] * p.a2;
    t.v[n] = s.v[n] + p.a1 * x.x1 + p.a2 * x.x2;
  }
  return t;
}

double invariance_check(const PlateState& s, const EquivalenceParams& p, const DensityField& q,
                        const PlateDomain& d) {
  if (d.mode() == PlateMode::Clamped)
    throw PreconditionError("invariance_check: the transform does not preserve clamped boundary data");
  const LoadSpec none;
  return std::abs(energy(s, q, none, d) - energy(apply_equivalence(s, p, d), q, none, d));
}

GaugeReport gauge_report(const PlateState& s, const PlateDomain& d) {
  double w = 0.0, cx = 0.0, cy = 0.0;
  for (int n = 0; n < d.node_count(); ++n) {
    const Point2 x = d.pos(n);
    w += d.weight(n), cx += d.weight(n) * x.x1, cy += d.weight(n) * x.x2;
  }
  cx /= w, cy /= w;
  GaugeReport g;
  double sxx = 0.0, syy = 0.0, srr = 0.0;
  for (int n = 0; n < d.node_count(); ++n) {
    const Point2 x = d.pos(n);
    const double m = d.weight(n), dx = x.x1 - cx, dy = x.x2 - cy;
    g.u_mean1 += m * s.u1[n];
    g.u_mean2 += m * s.u2[n];
    g.u_rotation += m * (s.u1[n] * dy - s.u2[n] * dx);
    g.v_mean += m * s.v[n];
    g.v_slope1 += m * s.v[n] * dx;
    g.v_slope2 += m * s.v[n] * dy;
    sxx += m * dx * dx, syy += m * dy * dy, srr += m * (dx * dx + dy * dy);
  }
  g.u_mean1 /= w, g.u_mean2 /= w, g.u_rotation /= srr;
  g.v_mean /= w, g.v_slope1 /= sxx, g.v_slope2 /= syy;
  return g;
}

namespace {

// Euclidean projection onto the complement of span(basis), basis orthonormal.
struct Projector {
  std::vector<Vec> basis;
  void add(Vec b) {
    for (const auto& q : basis) b -= q.dot(b) * q;
    const double nb = b.norm();
    if (nb > 1e-12) basis.push_back(b / nb);
  }
  Vec operator()(Vec x) const {
    for (const auto& q : basis) x -= q.dot(x) * q;
    return x;
  }
};

class Solver {
 public:
  Solver(const DensityField& q, const LoadSpec& load, const PlateDomain& d, const MinimizeOptions& opts)
      : q_(q), load_(load), d_(d), opts_(opts), nn_(d.node_count()) {
    for (int n = 0; n < nn_; ++n) {
      if (!d.u_fixed(n)) ufree_.push_back(n);
      if (!d.v_fixed(n)) vfree_.push_back(n);
    }
    if (vfree_.empty()) throw PreconditionError("minimize: no free transverse unknowns");
    build_u_system();
    build_v_preconditioner();
    if (d.mode() == PlateMode::Free) {
      Vec one(vfree_.size()), x1(vfree_.size()), x2(vfree_.size());
      for (std::size_t k = 0; k < vfree_.size(); ++k) {
        const int n = vfree_[k];
        const Point2 p = d.pos(n);
        one(k) = d.weight(n), x1(k) = d.weight(n) * p.x1, x2(k) = d.weight(n) * p.x2;
      }
      proj_.add(one);
      proj_.add(x1);
      proj_.add(x2);
    }
  }

  // Sets u to the exact minimizer for the current v, in gauge.
  void solve_u(PlateState& s) const {
    if (ufree_.empty()) return;
    PlateState s0 = s;
    std::fill(s0.u1.begin(), s0.u1.end(), 0.0);
    std::fill(s0.u2.begin(), s0.u2.end(), 0.0);
    for (int n = 0; n < nn_; ++n)
      if (d_.u_fixed(n)) s0.u1[n] = s.u1[n], s0.u2[n] = s.u2[n];
    const PlateState g = gradient(s0, q_, LoadSpec{}, d_);
    Vec rhs(ukeep_.size());
    for (std::size_t k = 0; k < ukeep_.size(); ++k) {
      const int dof = ukeep_[k];
      rhs(k) = -(dof < nn_ ? g.u1[dof] : g.u2[dof - nn_]);
    }
    const Vec x = uchol_.solve(rhs);
    s.u1 = s0.u1, s.u2 = s0.u2;
    for (std::size_t k = 0; k < ukeep_.size(); ++k) {
      const int dof = ukeep_[k];
      (dof < nn_ ? s.u1[dof] : s.u2[dof - nn_]) = x(k);
    }
    if (d_.mode() == PlateMode::Free) {
      const GaugeReport gr = gauge_report(s, d_);
      double w = 0.0, cx = 0.0, cy = 0.0;
      for (int n = 0; n < nn_; ++n) {
        const Point2 p = d_.pos(n);
        w += d_.weight(n), cx += d_.weight(n) * p.x1, cy += d_.weight(n) * p.x2;
      }
      cx /= w, cy /= w;
      for (int n = 0; n < nn_; ++n) {
        const Point2 p = d_.pos(n);
        s.u1[n] -= gr.u_mean1 + gr.u_rotation * (p.x2 - cy);
        s.u2[n] -= gr.u_mean2 - gr.u_rotation * (p.x1 - cx);
      }
    }
  }

  Vec reduced_gradient(const PlateState& s, double* unorm = nullptr) const {
    const PlateState g = gradient(s, q_, load_, d_);
    Vec gv(vfree_.size());
    for (std::size_t k = 0; k < vfree_.size(); ++k) gv(k) = g.v[vfree_[k]];
    if (unorm) {
      double su = 0.0;
      for (int n : ufree_) su += g.u1[n] * g.u1[n] + g.u2[n] * g.u2[n];
      *unorm = std::sqrt(su);
    }
    return proj_(gv);
  }

  Vec precondition(const Vec& g) const { return proj_(vchol_.solve(g)); }
  Vec project(const Vec& x) const { return proj_(x); }
  const std::vector<int>& vfree() const { return vfree_; }

 private:
  void build_u_system() {
    // Hessian of the energy in u: L^T B L, L the membrane strain map.
    std::vector<Eigen::Triplet<double>> lt, bt;
    const SpMat& d1 = d_.d1();
    const SpMat& d2 = d_.d2();
    const double c = kSqrt2 / 2.0;
    for (int n = 0; n < nn_; ++n) {
      for (SpMat::InnerIterator it(d1, n); it; ++it) {
        lt.emplace_back(3 * n, it.col(), it.value());
        lt.emplace_back(3 * n + 2, nn_ + it.col(), c * it.value());
      }
      for (SpMat::InnerIterator it(d2, n); it; ++it) {
        lt.emplace_back(3 * n + 1, nn_ + it.col(), it.value());
        lt.emplace_back(3 * n + 2, it.col(), c * it.value());
      }
      const Mat6& q = q_.at(n);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) bt.emplace_back(3 * n + a, 3 * n + b, 2.0 * d_.weight(n) * q(a, b));
    }
    Eigen::SparseMatrix<double> l(3 * nn_, 2 * nn_), b(3 * nn_, 3 * nn_);
    l.setFromTriplets(lt.begin(), lt.end());
    b.setFromTriplets(bt.begin(), bt.end());
    const Eigen::SparseMatrix<double> s = l.transpose() * b * l;

    // Free mode: pin (u1, u2) at one corner and u2 at the next corner along x1 (gauge).
    std::vector<char> keep(2 * nn_, 0);
    for (int n : ufree_) keep[n] = keep[nn_ + n] = 1;
    if (d_.mode() == PlateMode::Free) {
      keep[0] = keep[nn_] = 0;
      keep[nn_ + d_.node(d_.n1() - 1, 0)] = 0;
    }
    std::vector<int> index(2 * nn_, -1);
    for (int k = 0; k < 2 * nn_; ++k)
      if (keep[k]) {
        index[k] = static_cast<int>(ukeep_.size());
        ukeep_.push_back(k);
      }
    std::vector<Eigen::Triplet<double>> st;
    for (int k = 0; k < s.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(s, k); it; ++it)
        if (index[it.row()] >= 0 && index[it.col()] >= 0) st.emplace_back(index[it.row()], index[it.col()], it.value());
    Eigen::SparseMatrix<double> sr(ukeep_.size(), ukeep_.size());
    sr.setFromTriplets(st.begin(), st.end());
    uchol_.compute(sr);
    if (uchol_.info() != Eigen::Success) throw SolverError("minimize: membrane system factorization failed", 0, 0.0);
  }

  void build_v_preconditioner() {
    // Bending part of the Hessian in v, restricted to free nodes, plus a small
    // mass shift so the free-mode affine kernel does not make it singular.
    std::vector<Eigen::Triplet<double>> kt, bt;
    for (int n = 0; n < nn_; ++n) {
      for (SpMat::InnerIterator it(d_.h11(), n); it; ++it) kt.emplace_back(3 * n, it.col(), -it.value());
      for (SpMat::InnerIterator it(d_.h22(), n); it; ++it) kt.emplace_back(3 * n + 1, it.col(), -it.value());
      for (SpMat::InnerIterator it(d_.h12(), n); it; ++it) kt.emplace_back(3 * n + 2, it.col(), -kSqrt2 * it.value());
      const Mat6& q = q_.at(n);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) bt.emplace_back(3 * n + a, 3 * n + b, 2.0 * d_.weight(n) * q(3 + a, 3 + b));
    }
    Eigen::SparseMatrix<double> k(3 * nn_, nn_), b(3 * nn_, 3 * nn_);
    k.setFromTriplets(kt.begin(), kt.end());
    b.setFromTriplets(bt.begin(), bt.end());
    const Eigen::SparseMatrix<double> h = k.transpose() * b * k;
    std::vector<int> index(nn_, -1);
    for (std::size_t i = 0; i < vfree_.size(); ++i) index[vfree_[i]] = static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> st;
    double trace = 0.0;
    for (int c = 0; c < h.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(h, c); it; ++it)
        if (index[it.row()] >= 0 && index[it.col()] >= 0) {
          st.emplace_back(index[it.row()], index[it.col()], it.value());
          if (it.row() == it.col()) trace += it.value();
        }
    if (d_.mode() == PlateMode::Free) {
      const double shift = 1e-8 * trace / vfree_.size();
      for (std::size_t i = 0; i < vfree_.size(); ++i) st.emplace_back(i, i, shift);
    }
    Eigen::SparseMatrix<double> hr(vfree_.size(), vfree_.size());
    hr.setFromTriplets(st.begin(), st.end());
    vchol_.compute(hr);
    if (vchol_.info() != Eigen::Success) throw SolverError("minimize: bending preconditioner failed", 0, 0.0);
  }

  const DensityField& q_;
  const LoadSpec& load_;
  const PlateDomain& d_;
  MinimizeOptions opts_;
  int nn_;
  std::vector<int> ufree_, vfree_, ukeep_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> uchol_, vchol_;
  Projector proj_;
};

}  // namespace

PlateResult minimize(const DensityField& q, const LoadSpec& load, const PlateDomain& d, const PlateState& init,
                     const MinimizeOptions& opts) {
  if (!(opts.tol > 0.0)) throw PreconditionError("minimize: tol must be positive");
  check_shapes(init, d);
  if (!load.g.empty() && static_cast<int>(load.g.size()) != d.node_count())
    throw PreconditionError("minimize: load does not match domain");
  const Solver solver(q, load, d, opts);
  const auto& vfree = solver.vfree();

  PlateResult res;
  res.initial_energy = energy(init, q, load, d);
  PlateState s = init;
  for (int n = 0; n < d.node_count(); ++n) {
    if (d.u_fixed(n)) s.u1[n] = s.u2[n] = 0.0;
    if (d.v_fixed(n)) s.v[n] = 0.0;
  }
  solver.solve_u(s);
  double e = energy(s, q, load, d);
  Vec g = solver.reduced_gradient(s);

  std::deque<std::pair<Vec, Vec>> mem;  // (s_k, y_k)
  auto set_v = [&](PlateState& st, const Vec& vv) {
    for (std::size_t k = 0; k < vfree.size(); ++k) st.v[vfree[k]] = vv(k);
  };
  Vec v(vfree.size());
  for (std::size_t k = 0; k < vfree.size(); ++k) v(k) = s.v[vfree[k]];

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (g.norm() <= opts.tol * (1.0 + std::abs(e))) break;
    // Two-loop recursion with the bending solve as initial inverse Hessian.
    Vec r = g;
    std::vector<double> alpha(mem.size());
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
      alpha[k] = mem[k].first.dot(r) / mem[k].second.dot(mem[k].first);
      r -= alpha[k] * mem[k].second;
    }
    r = solver.precondition(r);
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double beta = mem[k].second.dot(r) / mem[k].second.dot(mem[k].first);
      r += (alpha[k] - beta) * mem[k].first;
    }
    Vec dir = solver.project(-r);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      mem.clear();
      dir = solver.project(-solver.precondition(g));
      slope = g.dot(dir);
      if (!(slope < 0.0)) dir = -g, slope = -g.squaredNorm();
    }
    double step = 1.0;
    bool accepted = false;
    PlateState trial = s;
    double e_new = e;
    for (int ls = 0; ls < 60; ++ls) {
      set_v(trial, v + step * dir);
      solver.solve_u(trial);
      e_new = energy(trial, q, load, d);
      if (e_new <= e + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Rounding floor: the predicted decrease is below what the energy can resolve.
      if (std::abs(slope) <= 1e-10 * std::abs(e)) {
        res.stalled = true;
        break;
      }
      throw SolverError("minimize: line search failed", it, g.norm());
    }
    const Vec v_new = v + step * dir;
    const Vec g_new = solver.reduced_gradient(trial);
    const Vec sk = v_new - v, yk = g_new - g;
    if (sk.dot(yk) > 1e-14 * sk.norm() * yk.norm()) {
      mem.emplace_back(sk, yk);
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }
    s = std::move(trial);
    v = v_new;
    g = g_new;
    e = e_new;
  }
  double unorm = 0.0;
  g = solver.reduced_gradient(s, &unorm);
  res.grad_norm = std::sqrt(g.squaredNorm() + unorm * unorm);
  if (it >= opts.max_iterations) throw SolverError("minimize: iteration cap reached", it, g.norm());
  res.converged = true;
  res.state = std::move(s);
  res.energy = e;
  res.iterations = it;
  res.gauge = gauge_report(res.state, d);
  return res;
}

}  // namespace vkh
