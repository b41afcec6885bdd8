#pragma once

#include <string>
#include <vector>

#include "vkh/error.hpp"
#include "vkh/fem.hpp"

namespace vkh {

struct CorrectorOptions {
  int nz = 8;
  double tol = 1e-9;  // CG relative residual
  int maxit = 200000;
  Preconditioner preconditioner = Preconditioner::Jacobi;
};

/// Discrete minimum of the corrector energy on A x I with lateral Dirichlet data.
struct CorrectorResult {
  double h = 0.0;
  double k_value = 0.0;
  double k_per_area = 0.0;  // k_value / rasterized area
  double area = 0.0;
  DisplacementField minimizer;
  double admissibility = 0.0;  // RMS of (psi1, psi2, h psi3) over A x I
  double sym_norm = 0.0;       // ||sym grad_h psi||_{L2}
  double lower_bound = 0.0;    // alpha ||M1 + x3 M2||^2
  double upper_bound = 0.0;    // beta ||M1 + x3 M2||^2
  int cg_iterations = 0;
  double residual = 0.0;
};

/// Assembles, constrains and solves. Throws SolverError on non-convergence and
/// Error if either exact bound is violated beyond rounding.
CorrectorResult k_value(const MicrostructureField& field, double h, const RasterDomain& domain, const Sym2& m1,
                        const Sym2& m2, const CorrectorOptions& opts = {});

/// Same, on an explicit grid.
CorrectorResult k_value(const MicrostructureField& field, double h, const ExtrudedGrid& grid, const Sym2& m1,
                        const Sym2& m2, const CorrectorOptions& opts = {});

struct AdmissibilityReport {
  double psi1 = 0.0;  // RMS values over A x I
  double psi2 = 0.0;
  double h_psi3 = 0.0;
  double total = 0.0;
};

AdmissibilityReport admissibility_report(const CorrectorResult& result, const ExtrudedGrid& grid);

struct SweepRow {
  double h = 0.0;
  double k_value = 0.0;
  double k_per_area = 0.0;
  double admissibility = 0.0;
  double sym_norm = 0.0;
  int cg_iterations = 0;
  double residual = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;  // decreasing h
  double gap = 0.0;            // spread of k_per_area over the last three rows
  double cauchy_tol = 0.02;
  bool cauchy = false;
  bool admissibility_warning = false;  // tail admissibility not non-increasing

  std::string to_csv() const;
};

class SweepError : public Error {
 public:
  SweepError(const std::string& what, SweepTable partial) : Error(what), partial_(std::move(partial)) {}
  const SweepTable& partial() const { return partial_; }

 private:
  SweepTable partial_;
};

/// Runs k_value for every h (strictly decreasing, at least three values).
/// `cauchy_tol` is relative to the last k_per_area.
SweepTable h_sweep(const MicrostructureField& field, const RasterDomain& domain, const Sym2& m1, const Sym2& m2,
                   const std::vector<double>& h_list, const CorrectorOptions& opts = {}, double cauchy_tol = 0.02);

/// Sweep in which the lattice spacing follows h: spacing = h * spacing_per_h.
/// `make_domain(spacing)` builds the raster for each row.
template <class MakeDomain>
SweepTable h_sweep_scaled(const MicrostructureField& field, MakeDomain&& make_domain, double spacing_per_h,
                          const Sym2& m1, const Sym2& m2, const std::vector<double>& h_list,
                          const CorrectorOptions& opts = {}, double cauchy_tol = 0.02);

void finalize_sweep(SweepTable& table);
void check_h_list(const std::vector<double>& h_list, const char* field = "h_list");

template <class MakeDomain>
SweepTable h_sweep_scaled(const MicrostructureField& field, MakeDomain&& make_domain, double spacing_per_h,
                          const Sym2& m1, const Sym2& m2, const std::vector<double>& h_list,
                          const CorrectorOptions& opts, double cauchy_tol) {
  check_h_list(h_list);
  SweepTable t;
  t.cauchy_tol = cauchy_tol;
  for (double h : h_list) {
    const RasterDomain dom = make_domain(h * spacing_per_h);
    try {
      const auto r = k_value(field, h, dom, m1, m2, opts);
      t.rows.push_back({h, r.k_value, r.k_per_area, r.admissibility, r.sym_norm, r.cg_iterations, r.residual});
    } catch (const Error& e) {
      finalize_sweep(t);
      throw SweepError(e.what(), t);
    }
  }
  finalize_sweep(t);
  return t;
}

}  // namespace vkh
