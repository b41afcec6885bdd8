#include "vkh/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vkh/error.hpp"

namespace vkh {

CorrectorResult k_value(const MicrostructureField& field, double h, const RasterDomain& domain, const Sym2& m1,
                        const Sym2& m2, const CorrectorOptions& opts) {
  return k_value(field, h, ExtrudedGrid(domain, opts.nz), m1, m2, opts);
}

CorrectorResult k_value(const MicrostructureField& field, double h, const ExtrudedGrid& grid, const Sym2& m1,
                        const Sym2& m2, const CorrectorOptions& opts) {
  if (!(h > 0.0)) throw PreconditionError("k_value: h must be positive");
  const QuadSystem sys = apply_lateral_dirichlet(assemble(grid, field, h, m1, m2), grid);
  CgResult cg = solve_cg(sys, opts.tol, opts.maxit, nullptr, opts.preconditioner);
  if (!cg.converged)
    throw SolverError("k_value: CG did not converge at h=" + std::to_string(h), cg.iterations, cg.residual);

  CorrectorResult r;
  r.h = h;
  r.area = grid.base().area();
  r.k_value = sys.energy(cg.psi.vec());
  r.k_per_area = r.k_value / r.area;
  const double mnorm = imposed_norm_sq(grid, m1, m2);
  r.lower_bound = field.alpha() * mnorm;
  r.upper_bound = field.beta() * mnorm;
  const FieldNorms fn = field_norms(grid, h, cg.psi);
  r.admissibility = std::sqrt((fn.l2sq[0] + fn.l2sq[1] + fn.l2sq[2]) / grid.volume());
  r.sym_norm = std::sqrt(fn.sym_grad_sq);
  r.cg_iterations = cg.iterations;
  r.residual = cg.residual;
  r.minimizer = std::move(cg.psi);

  // Both bounds hold for every admissible psi, so only rounding may break them.
  const double slack = 1e-11 * (r.upper_bound + std::abs(r.k_value)) + 1e-300;
  if (r.k_value < r.lower_bound - slack || r.k_value > r.upper_bound + slack) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "k_value: bound violated (%.12g not in [%.12g, %.12g])", r.k_value, r.lower_bound,
                  r.upper_bound);
    throw Error(buf);
  }
  return r;
}

AdmissibilityReport admissibility_report(const CorrectorResult& result, const ExtrudedGrid& grid) {
  const FieldNorms fn = field_norms(grid, result.h, result.minimizer);
  const double vol = grid.volume();
  AdmissibilityReport rep;
  rep.psi1 = std::sqrt(fn.l2sq[0] / vol);
  rep.psi2 = std::sqrt(fn.l2sq[1] / vol);
  rep.h_psi3 = std::sqrt(fn.l2sq[2] / vol);
  rep.total = std::sqrt((fn.l2sq[0] + fn.l2sq[1] + fn.l2sq[2]) / vol);
  return rep;
}

void check_h_list(const std::vector<double>& h_list, const char* field) {
  if (h_list.size() < 3) throw PreconditionError(std::string(field) + ": at least three values required");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (!(h_list[i] > 0.0)) throw PreconditionError(std::string(field) + ": values must be positive");
    if (i > 0 && !(h_list[i] < h_list[i - 1]))
      throw PreconditionError(std::string(field) + ": values must be strictly decreasing");
  }
}

void finalize_sweep(SweepTable& t) {
  const std::size_t n = t.rows.size();
  if (n == 0) return;
  const std::size_t first = n >= 3 ? n - 3 : 0;
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = first; i < n; ++i) {
    lo = std::min(lo, t.rows[i].k_per_area);
    hi = std::max(hi, t.rows[i].k_per_area);
  }
  t.gap = hi - lo;
  t.cauchy = n >= 3 && t.gap <= t.cauchy_tol * std::abs(t.rows.back().k_per_area);
  t.admissibility_warning = false;
  for (std::size_t i = first + 1; i < n; ++i)
    if (t.rows[i].admissibility > t.rows[i - 1].admissibility * (1.0 + 1e-12)) t.admissibility_warning = true;
}

SweepTable h_sweep(const MicrostructureField& field, const RasterDomain& domain, const Sym2& m1, const Sym2& m2,
                   const std::vector<double>& h_list, const CorrectorOptions& opts, double cauchy_tol) {
  return h_sweep_scaled(field, [&](double) { return domain; }, 1.0, m1, m2, h_list, opts, cauchy_tol);
}

std::string SweepTable::to_csv() const {
  std::string out = "h,k_value,k_per_area,admissibility,sym_norm,cg_iters,residual\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", r.h, r.k_value, r.k_per_area,
                  r.admissibility, r.sym_norm, r.cg_iterations, r.residual);
    out += buf;
  }
  return out;
}

}  // namespace vkh
