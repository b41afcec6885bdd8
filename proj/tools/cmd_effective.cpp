#include <algorithm>
#include <cmath>

#include "commands.hpp"

namespace vkh::cli {

using nlohmann::json;

MicrostructureField load_field(Config& cfg) {
  const MicrostructureField f = MicrostructureField::from_json(cfg.node("microstructure"), cfg.base_dir());
  return f;
}

CorrectorOptions corrector_options(Config& cfg) {
  CorrectorOptions o;
  o.nz = positive("mesh.nz", cfg.get<int>("mesh.nz", o.nz));
  o.tol = positive("solver.cg_tol", cfg.get<double>("solver.cg_tol", o.tol));
  o.maxit = positive("solver.cg_maxit", cfg.get<int>("solver.cg_maxit", o.maxit));
  try {
    o.preconditioner = preconditioner_from_string(cfg.get<std::string>("solver.preconditioner", "jacobi"));
  } catch (const PreconditionError& e) {
    throw ConfigError("solver.preconditioner", e.what());
  }
  return o;
}

std::vector<double> h_list(Config& cfg) {
  const auto h = cfg.require<std::vector<double>>("h_list");
  strictly_decreasing("h_list", h, 3);
  return h;
}

Point2 point(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(key, "expected [x1, x2]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect rect(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(key, "expected [x0, y0, x1, y1]");
  for (const auto& v : j)
    if (!v.is_number()) throw ConfigError(key, "expected numbers");
  const Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw ConfigError(key, "empty rectangle");
  return r;
}

namespace {

std::string record_row(const EffectiveDensity& d, double r) {
  std::string s = num(d.x0.x1) + "," + num(d.x0.x2) + "," + num(r);
  for (double v : upper_triangle(d.qhat)) s += "," + num(v);
  s += "," + num(d.min_eig) + "," + num(d.max_eig) + "," + num(d.fit_residual) + "," +
       (d.flags.non_converged ? "1" : "0") + "\n";
  return s;
}

std::string record_header() {
  std::string s = "x1,x2,r";
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) s += ",q" + std::to_string(i) + std::to_string(j);
  return s + ",min_eig,max_eig,fit_residual,non_converged\n";
}

}  // namespace

std::vector<EffectiveDensity> run_effective(Context& ctx) {
  Config& cfg = ctx.cfg;
  Report& rep = ctx.report;
  const MicrostructureField field = load_field(cfg);
  rep.section("microstructure") = field.to_json();

  const auto hs = h_list(cfg);
  const json& pts = cfg.node("effective.points");
  if (!pts.is_array() || pts.empty()) throw ConfigError("effective.points", "at least one sample point required");
  std::vector<Point2> points;
  for (std::size_t k = 0; k < pts.size(); ++k) points.push_back(point(pts[k], "effective.points"));
  const auto r_list = cfg.get<std::vector<double>>("effective.r_list", {0.25});
  strictly_decreasing("effective.r_list", r_list);

  EffectiveOptions eo;
  eo.delta = positive("mesh.delta", cfg.get<double>("mesh.delta", eo.delta));
  eo.spacing_per_h = cfg.get<double>("mesh.spacing_per_h", eo.spacing_per_h);
  if (eo.spacing_per_h < 0) throw ConfigError("mesh.spacing_per_h", "must be non-negative");
  eo.corrector = corrector_options(cfg);
  eo.cauchy_tol = positive("solver.cauchy_tol", cfg.get<double>("solver.cauchy_tol", eo.cauchy_tol));
  for (double r : r_list)
    if (r < 2 * eo.delta) throw ConfigError("effective.r_list", "radius below two lattice spacings");
  const Rect& om = field.omega();
  for (const Point2& p : points)
    if (p.x1 - r_list[0] < om.x0 || p.x1 + r_list[0] > om.x1 || p.x2 - r_list[0] < om.y0 || p.x2 + r_list[0] > om.y1)
      throw ConfigError("effective.points", "ball of the largest radius leaves omega");

  const std::string reference = cfg.get<std::string>("effective.reference", "none");
  if (reference != "none" && reference != "relaxed")
    throw ConfigError("effective.reference", "expected 'none' or 'relaxed'");
  if (reference == "relaxed" && field.kind() != FieldKind::ConstantIsotropic)
    throw ConfigError("effective.reference", "'relaxed' needs a constant-isotropic microstructure");
  const double ref_tol =
      reference == "relaxed" ? positive("effective.reference_tol", cfg.get<double>("effective.reference_tol", 0.02))
                             : 0.0;

  std::string csv = record_header();
  std::string sweeps = "x1,x2,r,sample,h,k_value,k_per_area,admissibility,sym_norm,cg_iters,residual,gap,cauchy\n";
  std::vector<EffectiveDensity> finest;
  json per_point = json::array();
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Point2 x0 = points[k];
    const std::string tag = "point " + std::to_string(k);
    std::vector<EffectiveDensity> by_r;
    for (double r : r_list) {
      by_r.push_back(timed(rep, "polarize " + tag + " r=" + num(r), [&] { return polarize(field, x0, r, hs, eo); }));
      const EffectiveDensity& d = by_r.back();
      csv += record_row(d, r);
      for (std::size_t s = 0; s < d.sweeps.size(); ++s)
        for (const auto& row : d.sweeps[s].rows)
          sweeps += num(x0.x1) + "," + num(x0.x2) + "," + num(r) + "," + std::to_string(s) + "," + num(row.h) + "," +
                    num(row.k_value) + "," + num(row.k_per_area) + "," + num(row.admissibility) + "," +
                    num(row.sym_norm) + "," + std::to_string(row.cg_iterations) + "," + num(row.residual) + "," +
                    num(d.sweeps[s].gap) + "," + (d.sweeps[s].cauchy ? "1" : "0") + "\n";
    }
    const EffectiveDensity& d = by_r.back();
    double r_spread = 0.0;
    for (const auto& e : by_r) r_spread = std::max(r_spread, (e.qhat - d.qhat).norm() / d.qhat.norm());

    if (d.flags.non_converged || std::any_of(by_r.begin(), by_r.end(), [](auto& e) { return e.flags.non_converged; }))
      rep.flag("NON-CONVERGED: h-sweep not Cauchy at " + tag + "; smallest-h values used");
    if (d.flags.p_at_bound) rep.flag("RATE-AT-BOUND: fitted rate hit the search interval at " + tag);
    rep.check("Q1 lower bound " + tag, d.flags.q1_lower, d.min_eig, d.alpha / 12.0 * (1.0 - eo.cauchy_tol),
              "min eigenvalue vs alpha/12 (1 - cauchy_tol)");
    rep.check("Q1 upper bound " + tag, d.flags.q1_upper, d.max_eig, d.beta * (1.0 + eo.cauchy_tol),
              "max eigenvalue vs beta (1 + cauchy_tol)");

    json pj = {{"x0", {x0.x1, x0.x2}}, {"r_used", d.r_used}, {"r_spread", r_spread},
               {"min_eig", d.min_eig},  {"max_eig", d.max_eig}, {"fit_residual", d.fit_residual}};
    if (reference == "relaxed") {
      const Mat6 exact = relaxed_plate_density(field.form_at(hs.back(), {x0.x1, x0.x2, 0.0}));
      const double err = (d.qhat - exact).norm() / exact.norm();
      const double coupling = d.qhat.topRightCorner<3, 3>().norm() / d.qhat.norm();
      rep.check("relaxed density " + tag, err <= ref_tol, err, ref_tol, "relative Frobenius error");
      rep.check("block-diagonal " + tag, coupling <= ref_tol, coupling, ref_tol, "membrane-bending coupling share");
      pj["reference_error"] = err;
    }
    per_point.push_back(std::move(pj));
    finest.push_back(d);
  }

  json records = json::array();
  for (const auto& d : finest) records.push_back(d.to_json());
  write_text(ctx.out / "densities.json", records.dump(2) + "\n");
  write_text(ctx.out / "densities.csv", csv);
  write_text(ctx.out / "effective_sweeps.csv", sweeps);
  rep.section("effective") = {{"points", per_point}, {"cauchy_tail", 3}, {"extrapolation", "k_inf + c h^p"}};
  return finest;
}

void cmd_effective(Context& ctx) {
  ctx.report.stage = "effective";
  run_effective(ctx);
}

}  // namespace vkh::cli
