#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "vkh/griso.hpp"

namespace vkh::cli {

using nlohmann::json;

namespace {

// Reads the field_csv layout back; rows must follow the grid's node order.
DisplacementField read_field_csv(const std::filesystem::path& file, const ExtrudedGrid& g) {
  std::ifstream in(file);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("griso.field_file", "empty file");
  DisplacementField psi(g.node_count());
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (n >= g.node_count()) throw ConfigError("griso.field_file", "more rows than grid nodes");
    std::stringstream ss(line);
    std::string cell;
    double v[6];
    for (double& x : v) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("griso.field_file", "row " + std::to_string(n + 2) + ": expected 6 columns");
      try {
        x = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("griso.field_file", "row " + std::to_string(n + 2) + ": bad number '" + cell + "'");
      }
    }
    const Point3 p = g.node_pos(n);
    if (std::abs(p.x1 - v[0]) + std::abs(p.x2 - v[1]) + std::abs(p.x3 - v[2]) > 1e-9)
      throw ConfigError("griso.field_file", "row " + std::to_string(n + 2) + ": position does not match the grid");
    for (int c = 0; c < 3; ++c) psi(n, c) = v[3 + c];
    ++n;
  }
  if (n != g.node_count()) throw ConfigError("griso.field_file", "fewer rows than grid nodes");
  return psi;
}

std::string norms_row(const KornRatio& k, const GrisoNorms& g) {
  return num(k.ratio) + "," + num(k.lhs) + "," + num(k.rhs) + "," + num(g.psi_hat) + "," + num(g.r) + "," +
         num(g.psi_bar) + "," + num(g.mean_psi_bar);
}

struct EnsembleRow {
  KornRatio korn;
  GrisoNorms norms;
};

}  // namespace

void cmd_griso(Context& ctx) {
  Config& cfg = ctx.cfg;
  Report& rep = ctx.report;
  rep.stage = "griso";
  const Rect a = rect(cfg.get<json>("griso.rect", {0, 0, 1, 1}), "griso.rect");
  const double delta = positive("griso.delta", cfg.get<double>("griso.delta", 0.125));
  const int nz = positive("griso.nz", cfg.get<int>("griso.nz", 8));
  const double h = positive("griso.h", cfg.get<double>("griso.h", 0.125));
  const double kappa = positive("griso.kappa", cfg.get<double>("griso.kappa", kMomentExact));
  ExtrudedGrid grid = [&] {
    try {
      return ExtrudedGrid(RasterDomain::rectangle(a, delta), nz);
    } catch (const PreconditionError& e) {
      throw ConfigError("griso.delta", e.what());
    }
  }();
  json section;

  // Projection property on a field with known parts.
  {
    const double tol = positive("griso.projection.tol", cfg.get<double>("griso.projection.tol", 1e-12));
    std::mt19937_64 rng(cfg.get<std::uint64_t>("griso.projection.seed", 99));
    double c[6];
    for (double& x : c) x = 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
    auto r1 = [&](double x, double y) { return c[0] * std::sin(2 * x) + c[1] * y * y; };
    auto r2 = [&](double x, double y) { return c[2] * std::cos(3 * y) + c[3] * x * y; };
    auto hat = [&](double x, double y) {
      return std::array<double, 3>{c[4] * x * y, std::sin(x - y), c[5] * std::cos(x)};
    };
    const auto psi = DisplacementField::sample(grid, [&](const Point3& p) {
      const auto hv = hat(p.x1, p.x2);
      return std::array<double, 3>{hv[0] + p.x3 * r2(p.x1, p.x2), hv[1] - p.x3 * r1(p.x1, p.x2), hv[2]};
    });
    const auto parts = decompose(psi, grid, kappa);
    double err = 0.0, scale = 0.0, num_f = 0.0, den_f = 0.0;
    for (int b = 0; b < grid.base().node_count(); ++b) {
      const Point2 p = grid.base().node_pos(b);
      const auto hv = hat(p.x1, p.x2);
      const double e[2] = {r1(p.x1, p.x2), r2(p.x1, p.x2)};
      for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(parts.psi_hat[b](k) - hv[k]));
      for (int k = 0; k < 2; ++k) {
        err = std::max(err, std::abs(parts.r[b][k] - e[k]));
        scale = std::max(scale, std::abs(e[k]));
        num_f += parts.r[b][k] * e[k];
        den_f += e[k] * e[k];
      }
    }
    for (double v : parts.psi_bar.vec()) err = std::max(err, std::abs(v));
    const double factor = num_f / den_f;
    rep.check("projection exactness", err <= tol * scale, err / scale, tol,
              "recovered r / exact r = " + num(factor) + " at kappa = " + num(kappa));
    section["projection"] = {{"kappa", kappa}, {"max_error", err}, {"r_scale", scale}, {"r_factor", factor}};
  }

  // Korn ratios over a seeded ensemble, optionally on the doubled mesh too.
  if (cfg.get<bool>("griso.ensemble.enabled", true)) {
    const int size = positive("griso.ensemble.size", cfg.get<int>("griso.ensemble.size", 20));
    const auto seed = cfg.get<std::uint64_t>("griso.ensemble.seed", 0);
    const int modes = positive("griso.ensemble.modes", cfg.get<int>("griso.ensemble.modes", 4));
    const bool refine = cfg.get<bool>("griso.ensemble.refine", true);
    const double stab_tol = positive("griso.ensemble.stability_tol", cfg.get<double>("griso.ensemble.stability_tol", 0.2));
    std::string csv = "level,seed,ratio,lhs,rhs,psi_hat,r,psi_bar,mean_psi_bar\n";
    std::vector<double> max_ratio;
    for (int level = 0; level < (refine ? 2 : 1); ++level) {
      const ExtrudedGrid g = level == 0 ? grid : grid.refined(2, 2);
      const auto rows = timed(rep, "korn ensemble level " + std::to_string(level), [&] {
        return parallel_map<EnsembleRow>(size, [&](int i) {
          const auto psi = random_smooth_field(g, h, seed + static_cast<std::uint64_t>(i), modes);
          return EnsembleRow{korn_ratio(psi, g, h, kappa), griso_norms(decompose(psi, g, kappa), g)};
        });
      });
      double mx = 0.0;
      for (int i = 0; i < size; ++i) {
        mx = std::max(mx, rows[i].korn.ratio);
        csv += std::to_string(level) + "," + std::to_string(seed + static_cast<std::uint64_t>(i)) + "," +
               norms_row(rows[i].korn, rows[i].norms) + "\n";
      }
      max_ratio.push_back(mx);
    }
    write_text(ctx.out / "griso_ensemble.csv", csv);
    section["ensemble"] = {{"size", size}, {"max_ratio", max_ratio}};
    if (refine) {
      const double change = std::abs(max_ratio[1] - max_ratio[0]) / max_ratio[0];
      rep.check("Korn ratio mesh stability", change <= stab_tol, change, stab_tol,
                "max ratio " + num(max_ratio[0]) + " -> " + num(max_ratio[1]));
    }
  }

  // Second splitting on the smooth family across h.
  if (cfg.get<bool>("griso.split.enabled", true)) {
    const auto hs = cfg.get<std::vector<double>>("griso.split.h_list", {0.25, 0.125, 0.0625});
    strictly_decreasing("griso.split.h_list", hs, 2);
    const auto seed = cfg.get<std::uint64_t>("griso.split.seed", 31);
    const double sd = positive("griso.split.delta", cfg.get<double>("griso.split.delta", 1.0 / 32));
    const int snz = positive("griso.split.nz", cfg.get<int>("griso.split.nz", 8));
    const double radius = cfg.get<double>("griso.split.mollify_radius", 0.0);
    const ExtrudedGrid g(RasterDomain::rectangle(a, sd), snz);
    const auto splits = timed(rep, "second split", [&] {
      return parallel_map<SecondSplit>(static_cast<int>(hs.size()), [&](int i) {
        return second_form(smooth_family_field(g, hs[i], seed), g, hs[i], radius, kappa);
      });
    });
    std::string csv = "h,o_norm,identity_defect,strain_scale,regularize_misfit,mollify_radius\n";
    bool mono = true;
    double worst = 0.0;
    json o = json::array();
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto& s = splits[i];
      csv += num(hs[i]) + "," + num(s.o_norm) + "," + num(s.identity_defect) + "," + num(s.strain_scale) + "," +
             num(s.regularize_misfit) + "," + num(s.mollify_radius) + "\n";
      if (i > 0) {
        mono = mono && s.o_norm < splits[i - 1].o_norm;
        worst = std::max(worst, s.o_norm / splits[i - 1].o_norm);
      }
      o.push_back(s.o_norm);
    }
    write_text(ctx.out / "griso_split.csv", csv);
    rep.check("o residual decreasing in h", mono, worst, 1.0, "largest ratio of consecutive ||o||");
    section["split"] = {{"h_list", hs}, {"o_norm", o}};
  }

  if (cfg.has("griso.field_file")) {
    const auto file = cfg.existing_path("griso.field_file");
    const auto psi = read_field_csv(file, grid);
    const auto k = korn_ratio(psi, grid, h, kappa);
    const auto n = griso_norms(decompose(psi, grid, kappa), grid);
    write_text(ctx.out / "griso_field.csv", "ratio,lhs,rhs,psi_hat,r,psi_bar,mean_psi_bar\n" + norms_row(k, n) + "\n");
    section["field"] = {{"korn_ratio", k.ratio}, {"psi_bar", n.psi_bar}};
  }
  rep.section("griso") = section;
  rep.note("the Korn constant is existential; ratios are empirical maxima only");
}

}  // namespace vkh::cli
