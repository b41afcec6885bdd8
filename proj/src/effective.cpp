#include "vkh/effective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>

#include <Eigen/Eigenvalues>

#include "vkh/error.hpp"

namespace vkh {

Mat3x3 relaxed_form_analytic(const ElasticForm& form) {
  // In-plane components E11, E22, E12 and the e3-coupled ones E33, E13, E23.
  static constexpr int in[3] = {0, 1, 3};
  static constexpr int out[3] = {2, 4, 5};
  const Mat6& c = form.matrix();
  Mat3x3 a, b, d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a(i, j) = c(in[i], in[j]);
      b(i, j) = c(in[i], out[j]);
      d(i, j) = c(out[i], out[j]);
    }
  Eigen::LLT<Mat3x3> llt(d);
  if (llt.info() != Eigen::Success) throw PreconditionError("relaxed_form_analytic: form is not positive definite");
  Mat3x3 q = a - b * llt.solve(b.transpose());
  return 0.5 * (q + q.transpose());
}

Mat6 relaxed_plate_density(const ElasticForm& form) {
  const Mat3x3 q2 = relaxed_form_analytic(form);
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = q2;
  m.bottomRightCorner<3, 3>() = q2 / 12.0;
  return m;
}

namespace {

void check_decreasing(const std::vector<double>& v, const char* field) {
  if (v.empty()) throw PreconditionError(std::string(field) + ": empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw PreconditionError(std::string(field) + ": values must be positive");
    if (i > 0 && !(v[i] < v[i - 1])) throw PreconditionError(std::string(field) + ": values must be strictly decreasing");
  }
}

}  // namespace

DensityEstimate estimate_density(const MicrostructureField& field, Point2 x0, const Sym2& m1, const Sym2& m2,
                                 const std::vector<double>& r_list, const std::vector<double>& h_list,
                                 const EffectiveOptions& opts) {
  check_decreasing(r_list, "r_list");
  check_h_list(h_list);
  const Rect& om = field.omega();
  for (double r : r_list) {
    if (x0.x1 - r < om.x0 || x0.x1 + r > om.x1 || x0.x2 - r < om.y0 || x0.x2 + r > om.y1)
      throw PreconditionError("estimate_density: ball B(x0, r) leaves omega");
  }

  DensityEstimate est;
  est.r_list = r_list;
  std::vector<double> hs(h_list.begin(), h_list.end());
  for (double r : r_list) {
    SweepTable t;
    if (opts.spacing_per_h > 0.0) {
      t = h_sweep_scaled(
          field, [&](double s) { return RasterDomain::ball(x0, r, s); }, opts.spacing_per_h, m1, m2, h_list,
          opts.corrector, opts.cauchy_tol);
    } else {
      t = h_sweep(field, RasterDomain::ball(x0, r, opts.delta), m1, m2, h_list, opts.corrector, opts.cauchy_tol);
    }
    std::vector<double> ks;
    for (const auto& row : t.rows) ks.push_back(row.k_per_area);
    est.model = fit_power_law(hs, ks);
    est.k_inf.push_back(t.cauchy ? est.model.k_inf : ks.back());
    est.cauchy = est.cauchy && t.cauchy;
    est.sweeps.push_back(std::move(t));
  }
  const auto [lo, hi] = std::minmax_element(est.k_inf.begin(), est.k_inf.end());
  est.r_spread = *hi - *lo;
  est.value = est.k_inf.back();
  return est;
}

double EffectiveDensity::eval(const Sym2& m1, const Sym2& m2) const {
  const Vec6 v = vec_pair(m1, m2);
  return v.dot(qhat * v);
}

std::vector<double> upper_triangle(const Mat6& m) {
  std::vector<double> v;
  v.reserve(21);
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) v.push_back(m(i, j));
  return v;
}

Mat6 from_upper_triangle(const std::vector<double>& v) {
  if (v.size() != 21) throw PreconditionError("from_upper_triangle: expected 21 entries");
  Mat6 m;
  int k = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) m(i, j) = m(j, i) = v[k++];
  return m;
}

nlohmann::json EffectiveDensity::to_json() const {
  nlohmann::json j;
  j["x0"] = {x0.x1, x0.x2};
  j["r_used"] = r_used;
  j["h_list"] = h_list;
  j["Qhat"] = upper_triangle(qhat);
  j["fit_residual"] = fit_residual;
  j["min_eig"] = min_eig;
  j["max_eig"] = max_eig;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["flags"] = {{"non_converged", flags.non_converged},
                {"q1_lower", flags.q1_lower},
                {"q1_upper", flags.q1_upper},
                {"p_at_bound", flags.p_at_bound}};
  return j;
}

EffectiveDensity EffectiveDensity::from_json(const nlohmann::json& j) {
  EffectiveDensity d;
  try {
    const auto x = j.at("x0").get<std::vector<double>>();
    if (x.size() != 2) throw ConfigError("x0", "expected two coordinates");
    d.x0 = {x[0], x[1]};
    d.r_used = j.value("r_used", 0.0);
    d.h_list = j.value("h_list", std::vector<double>{});
    d.qhat = from_upper_triangle(j.at("Qhat").get<std::vector<double>>());
    d.fit_residual = j.value("fit_residual", 0.0);
    d.alpha = j.value("alpha", 0.0);
    d.beta = j.value("beta", 0.0);
    if (j.contains("flags")) {
      const auto& f = j["flags"];
      d.flags.non_converged = f.value("non_converged", false);
      d.flags.q1_lower = f.value("q1_lower", true);
      d.flags.q1_upper = f.value("q1_upper", true);
      d.flags.p_at_bound = f.value("p_at_bound", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("density", e.what());
  }
  Eigen::SelfAdjointEigenSolver<Mat6> es(d.qhat, Eigen::EigenvaluesOnly);
  d.min_eig = es.eigenvalues()(0);
  d.max_eig = es.eigenvalues()(5);
  return d;
}

EffectiveDensity polarize(const MicrostructureField& field, Point2 x0, double r, const std::vector<double>& h_list,
                          const EffectiveOptions& opts) {
  std::vector<std::pair<int, int>> tasks;
  for (int i = 0; i < 6; ++i) tasks.emplace_back(i, i);
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) tasks.emplace_back(i, j);

  const std::vector<double> r_list{r};
  std::vector<std::optional<DensityEstimate>> results(tasks.size());
  std::exception_ptr failure;
  // One task per sample; the solver kernels inside run serially under this region.
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < static_cast<int>(tasks.size()); ++t) {
    try {
      Vec6 v = Vec6::Zero();
      v(tasks[t].first) += 1.0;
      if (tasks[t].second != tasks[t].first) v(tasks[t].second) += 1.0;
      const auto [m1, m2] = unvec_pair(v);
      results[t] = estimate_density(field, x0, m1, m2, r_list, h_list, opts);
    } catch (...) {
#pragma omp critical(vkh_polarize)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  EffectiveDensity d;
  d.x0 = x0;
  d.r_used = r;
  d.h_list = h_list;
  d.alpha = field.alpha();
  d.beta = field.beta();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const DensityEstimate& e = *results[t];
    d.samples.push_back(e.k_inf.back());
    d.sweeps.push_back(e.sweeps.back());
    d.fit_residual = std::max(d.fit_residual, e.model.residual);
    d.flags.non_converged = d.flags.non_converged || !e.cauchy;
    d.flags.p_at_bound = d.flags.p_at_bound || e.model.p_at_bound;
  }
  // Mixing extrapolated and raw samples would break the polarization identity,
  // so one non-Cauchy sweep sends every sample back to its smallest-h row.
  if (d.flags.non_converged)
    for (std::size_t t = 0; t < tasks.size(); ++t) d.samples[t] = results[t]->sweeps.back().rows.back().k_per_area;
  for (int i = 0; i < 6; ++i) d.qhat(i, i) = d.samples[i];
  for (std::size_t t = 6; t < tasks.size(); ++t) {
    const auto [i, j] = tasks[t];
    d.qhat(i, j) = d.qhat(j, i) = 0.5 * (d.samples[t] - d.samples[i] - d.samples[j]);
  }

  Eigen::SelfAdjointEigenSolver<Mat6> es(d.qhat, Eigen::EigenvaluesOnly);
  d.min_eig = es.eigenvalues()(0);
  d.max_eig = es.eigenvalues()(5);
  if (!(d.min_eig > 1e-12 * std::abs(d.max_eig))) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "polarize: density is not positive definite (eigenvalue %.6g)", d.min_eig);
    throw NotPositiveDefinite(buf, d.min_eig);
  }
  d.flags.q1_lower = d.min_eig >= d.alpha / 12.0 * (1.0 - opts.cauchy_tol);
  d.flags.q1_upper = d.max_eig <= d.beta * (1.0 + opts.cauchy_tol);
  return d;
}

bool PropertyReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const PropertyEntry& e) { return e.pass; });
}

std::string PropertyReport::to_csv() const {
  std::string out = "property,pass,slack,tolerance,checks\n";
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%d\n", e.name.c_str(), e.pass ? 1 : 0, e.slack, e.tolerance,
                  e.checks);
    out += buf;
  }
  return out;
}

namespace {

class Tracker {
 public:
  Tracker(std::string name, double tol) { e_.name = std::move(name), e_.tolerance = tol, e_.slack = -1e300; }
  void add(double defect) {
    e_.slack = std::max(e_.slack, defect);
    ++e_.checks;
  }
  PropertyEntry done() const {
    PropertyEntry e = e_;
    e.pass = e.checks > 0 && e.slack <= e.tolerance;
    return e;
  }

 private:
  PropertyEntry e_;
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

PropertyReport property_suite(const MicrostructureField& field, const PropertyFixtures& fx, double h,
                              const CorrectorOptions& opts, double limit_tol, double identity_tol,
                              double additivity_tol) {
  if (fx.samples.empty()) throw PreconditionError("property_suite: no samples");
  const ExtrudedGrid grid(fx.domain, opts.nz);
  const double bound_tol = 1e-11;

  Tracker upper("(d) upper bound", bound_tol), lower("(k) lower bound", bound_tol);
  Tracker homog("(i) homogeneity", identity_tol), para("(j) parallelogram", identity_tol);
  Tracker cont("(h) continuity", bound_tol);

  auto solve = [&](const Sym2& a, const Sym2& b) {
    const CorrectorResult r = k_value(field, h, grid, a, b, opts);
    upper.add((r.k_value - r.upper_bound) / std::max(r.upper_bound, 1e-300));
    lower.add((r.lower_bound - r.k_value) / std::max(r.upper_bound, 1e-300));
    return r;
  };
  const double vol = grid.volume();
  auto mnorm = [&](const Sym2& a, const Sym2& b) { return std::sqrt(vol * (a.norm2() + b.norm2() / 12.0)); };

  std::vector<double> kv;
  for (const auto& [a, b] : fx.samples) kv.push_back(solve(a, b).k_value);

  for (std::size_t s = 0; s < fx.samples.size(); ++s) {
    const auto& [a, b] = fx.samples[s];
    for (double t : {2.0, -1.0, 0.5}) {
      const double kt = solve(a * t, b * t).k_value;
      homog.add(rel(kt, t * t * kv[s]));
    }
  }
  for (std::size_t s = 0; s + 1 < fx.samples.size(); ++s) {
    const auto& [a, b] = fx.samples[s];
    const auto& [c, d] = fx.samples[s + 1];
    const double kp = solve(a + c, b + d).k_value;
    const double km = solve(a - c, b - d).k_value;
    const double scale = 2.0 * kv[s] + 2.0 * kv[s + 1];
    para.add(std::abs(kp + km - scale) / std::max(scale, 1e-300));
    const double bound = field.beta() * mnorm(a - c, b - d) * (mnorm(a, b) + mnorm(c, d));
    cont.add((std::abs(kv[s] - kv[s + 1]) - bound) / std::max(bound, 1e-300));
  }

  PropertyReport rep;
  rep.entries.push_back(upper.done());
  rep.entries.push_back(lower.done());
  rep.entries.push_back(homog.done());
  rep.entries.push_back(para.done());
  rep.entries.push_back(cont.done());

  if (fx.disjoint) {
    const auto& [d1, d2] = *fx.disjoint;
    if (!d1.same_lattice(d2) || !d1.disjoint_from(d2))
      throw PreconditionError("property_suite: additivity fixture is not a disjoint pair on one lattice");
    const RasterDomain both = d1.united_with(d2);
    Tracker add("(g) additivity", additivity_tol);
    for (const auto& [a, b] : fx.samples) {
      const double k1 = k_value(field, h, ExtrudedGrid(d1, opts.nz), a, b, opts).k_value;
      const double k2 = k_value(field, h, ExtrudedGrid(d2, opts.nz), a, b, opts).k_value;
      const double k12 = k_value(field, h, ExtrudedGrid(both, opts.nz), a, b, opts).k_value;
      add.add(rel(k12, k1 + k2));
    }
    rep.entries.push_back(add.done());
  }

  if (!fx.h_list.empty() && (fx.nested || fx.cover)) {
    const auto& [a, b] = fx.samples.front();
    auto limit = [&](const RasterDomain& dom) {
      const SweepTable t = h_sweep(field, dom, a, b, fx.h_list, opts, limit_tol);
      std::vector<double> ks;
      for (const auto& row : t.rows) ks.push_back(row.k_value);
      return fit_power_law(fx.h_list, ks).k_inf;
    };
    if (fx.nested) {
      Tracker mono("(e) monotonicity", limit_tol);
      const double kin = limit(fx.nested->first), kout = limit(fx.nested->second);
      mono.add((kin - kout) / std::max(std::abs(kout), 1e-300));
      rep.entries.push_back(mono.done());
    }
    if (fx.cover) {
      Tracker sub("(l) subadditivity", limit_tol);
      const auto& [d, c1, c2] = *fx.cover;
      const double k = limit(d), k1 = limit(c1), k2 = limit(c2);
      sub.add((k - k1 - k2) / std::max(std::abs(k1 + k2), 1e-300));
      rep.entries.push_back(sub.done());
    }
  }
  return rep;
}

}  // namespace vkh
