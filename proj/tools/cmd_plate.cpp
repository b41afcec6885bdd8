#include <cmath>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "vkh/plate.hpp"

namespace vkh::cli {

using nlohmann::json;

namespace {

double weighted_norm(const std::vector<double>& v, const PlateDomain& d) {
  double s = 0.0;
  for (int n = 0; n < d.node_count(); ++n) s += d.weight(n) * v[n] * v[n];
  return std::sqrt(s);
}

std::vector<EffectiveDensity> read_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("plate.density.path", e.what());
  }
  if (j.is_object() && j.contains("records")) j = j["records"];
  if (!j.is_array() || j.empty()) throw ConfigError("plate.density.path", "expected a non-empty array of records");
  std::vector<EffectiveDensity> out;
  for (const auto& r : j) out.push_back(EffectiveDensity::from_json(r));
  return out;
}

DensityField make_density(Config& cfg, const PlateDomain& d, const std::vector<EffectiveDensity>* records) {
  const std::string src = cfg.get<std::string>("plate.density.source", records ? "effective" : "analytic");
  try {
    if (src == "analytic") {
      const double lambda = cfg.get<double>("plate.density.lambda", 1.0);
      const double mu = positive("plate.density.mu", cfg.get<double>("plate.density.mu", 1.0));
      return DensityField::constant(relaxed_plate_density(isotropic_form(lambda, mu)));
    }
    if (src == "inline") {
      const auto v = cfg.require<std::vector<double>>("plate.density.qhat");
      if (v.size() != 21) throw ConfigError("plate.density.qhat", "expected 21 upper-triangle entries");
      return DensityField::constant(from_upper_triangle(v));
    }
    if (src == "file") return DensityField::from_records(read_records(cfg.existing_path("plate.density.path")), d);
    if (src == "effective") {
      if (!records) throw ConfigError("plate.density.source", "'effective' is only available in the pipeline");
      return DensityField::from_records(*records, d);
    }
  } catch (const PreconditionError& e) {
    throw ConfigError("plate.density", e.what());
  }
  throw ConfigError("plate.density.source", "expected analytic, inline, file or effective");
}

struct Run {
  double load = 0.0;
  PlateResult result;
};

}  // namespace

void run_plate(Context& ctx, const std::vector<EffectiveDensity>* records) {
  Config& cfg = ctx.cfg;
  Report& rep = ctx.report;
  const Rect r = rect(cfg.get<json>("plate.rect", {0, 0, 1, 1}), "plate.rect");
  const double spacing = positive("plate.spacing", cfg.get<double>("plate.spacing", 1.0 / 16));
  const std::string mode_s = cfg.get<std::string>("plate.mode", "clamped");
  PlateMode mode;
  try {
    mode = plate_mode_from_string(mode_s);
  } catch (const Error& e) {
    throw ConfigError("plate.mode", e.what());
  }
  if (mode == PlateMode::Clamped && cfg.has("plate.invariance"))
    throw ConfigError("plate.invariance", "the equivalence transform is incompatible with clamped boundary data");
  const PlateDomain dom = [&] {
    try {
      return PlateDomain(r, spacing, mode);
    } catch (const PreconditionError& e) {
      throw ConfigError("plate.spacing", e.what());
    }
  }();
  const DensityField q = make_density(cfg, dom, records);

  std::vector<double> loads;
  if (cfg.has("plate.load_sweep")) {
    loads = cfg.require<std::vector<double>>("plate.load_sweep");
    if (loads.empty()) throw ConfigError("plate.load_sweep", "empty");
  } else {
    loads = {cfg.get<double>("plate.load", 0.0)};
  }
  MinimizeOptions mo;
  mo.tol = positive("plate.tol", cfg.get<double>("plate.tol", mo.tol));
  mo.max_iterations = positive("plate.max_iterations", cfg.get<int>("plate.max_iterations", mo.max_iterations));
  mo.memory = positive("plate.memory", cfg.get<int>("plate.memory", mo.memory));

  // Independent load cases share nothing mutable.
  const auto runs = timed(rep, "plate minimize", [&] {
    return parallel_map<Run>(static_cast<int>(loads.size()), [&](int k) {
      return Run{loads[k], minimize(q, LoadSpec::uniform(dom, loads[k]), dom, PlateState::zero(dom), mo)};
    });
  });

  const bool sweep = loads.size() > 1;
  json out = json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const PlateResult& res = runs[k].result;
    const std::string tag = "load " + num(runs[k].load);
    write_text(ctx.out / (sweep ? "plate_state_" + std::to_string(k) + ".csv" : std::string("plate_state.csv")),
               res.state.to_csv(dom));
    rep.check("minimizer converged at " + tag, res.converged || res.stalled, res.grad_norm, mo.tol,
              std::to_string(res.iterations) + " iterations; projected gradient norm");
    if (res.stalled) rep.flag("STALLED: minimizer stopped at the energy rounding floor at " + tag);
    const GaugeReport& g = res.gauge;
    out.push_back({{"load", runs[k].load},
                   {"energy", res.energy},
                   {"initial_energy", res.initial_energy},
                   {"iterations", res.iterations},
                   {"grad_norm", res.grad_norm},
                   {"converged", res.converged},
                   {"stalled", res.stalled},
                   {"v_norm", weighted_norm(res.state.v, dom)},
                   {"gauge",
                    {{"u_mean1", g.u_mean1},
                     {"u_mean2", g.u_mean2},
                     {"u_rotation", g.u_rotation},
                     {"v_mean", g.v_mean},
                     {"v_slope1", g.v_slope1},
                     {"v_slope2", g.v_slope2}}}});
  }

  if (sweep) {
    const double tol = positive("plate.linear_tol", cfg.get<double>("plate.linear_tol", 0.01));
    const double n0 = weighted_norm(runs[0].result.state.v, dom);
    for (std::size_t k = 1; k < runs.size(); ++k) {
      if (runs[0].load == 0.0 || n0 == 0.0) throw ConfigError("plate.load_sweep", "first load must be non-zero");
      const double ratio = weighted_norm(runs[k].result.state.v, dom) / n0 / (runs[k].load / runs[0].load);
      rep.check("linear response " + num(runs[k].load) + "/" + num(runs[0].load), std::abs(ratio - 1.0) <= tol,
                std::abs(ratio - 1.0), tol, "|v| ratio over load ratio = " + num(ratio));
    }
  }

  if (cfg.has("plate.invariance")) {
    EquivalenceParams p;
    const auto a = cfg.get<std::vector<double>>("plate.invariance.a", {0.1, -0.2});
    if (a.size() != 2) throw ConfigError("plate.invariance.a", "expected two components");
    p.a1 = a[0];
    p.a2 = a[1];
    p.theta = cfg.get<double>("plate.invariance.theta", 0.3);
    const double tol = positive("plate.invariance.tol", cfg.get<double>("plate.invariance.tol", 1e-10));
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& s = runs[k].result.state;
      const double e0 = energy(s, q, LoadSpec::zero(), dom);
      const double inv = invariance_check(s, p, q, dom) / (1.0 + std::abs(e0));
      rep.check("invariance at load " + num(runs[k].load), inv <= tol, inv, tol, "|I(s) - I(~s)| / (1 + |I(s)|)");
      out[k]["invariance"] = inv;
    }
  }
  rep.section("plate") = {{"runs", out}, {"nodes", {dom.n1(), dom.n2()}}, {"mode", to_string(mode)}};
}

void cmd_plate(Context& ctx) {
  ctx.report.stage = "plate";
  run_plate(ctx, nullptr);
}

void cmd_pipeline(Context& ctx) {
  Config& cfg = ctx.cfg;
  Report& rep = ctx.report;
  rep.stage = "effective";
  const auto records = run_effective(ctx);

  rep.stage = "plate";
  if (cfg.get<std::string>("plate.density.source", "effective") != "effective")
    throw ConfigError("plate.density.source", "the pipeline feeds the plate from the effective stage");
  for (const auto& d : records)
    if (d.flags.non_converged) rep.flag("NON-CONVERGED: plate density built from non-Cauchy effective records");
  run_plate(ctx, &records);

  if (cfg.has("pipeline.compare_analytic")) {
    rep.stage = "compare";
    const double lambda = cfg.get<double>("pipeline.compare_analytic.lambda", 1.0);
    const double mu = positive("pipeline.compare_analytic.mu", cfg.get<double>("pipeline.compare_analytic.mu", 1.0));
    const double tol = positive("pipeline.compare_analytic.tol", cfg.get<double>("pipeline.compare_analytic.tol", 0.05));
    const auto& runs = rep.section("plate")["runs"];
    const PlateDomain dom(rect(cfg.resolved().at("plate").at("rect"), "plate.rect"),
                          cfg.resolved().at("plate").at("spacing").get<double>(),
                          plate_mode_from_string(cfg.resolved().at("plate").at("mode").get<std::string>()));
    const auto q = DensityField::constant(relaxed_plate_density(isotropic_form(lambda, mu)));
    MinimizeOptions mo;
    mo.tol = cfg.resolved().at("plate").at("tol");
    mo.max_iterations = cfg.resolved().at("plate").at("max_iterations");
    mo.memory = cfg.resolved().at("plate").at("memory");
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const double load = runs[k].at("load");
      const auto ref = timed(rep, "analytic plate", [&] {
        return minimize(q, LoadSpec::uniform(dom, load), dom, PlateState::zero(dom), mo);
      });
      const double e = runs[k].at("energy").get<double>();
      const double rel = std::abs(e - ref.energy) / std::max(std::abs(ref.energy), 1e-300);
      rep.check("pipeline vs analytic density at load " + num(load), rel <= tol, rel, tol,
                "relative energy difference; analytic energy " + num(ref.energy));
    }
  }
}

}  // namespace vkh::cli
