// Parallel kernels against their serial references.
// CSV on stdout: kernel,variant,threads,seconds,speedup,max_abs_diff

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "CLI11.hpp"

#include "vkh/fem.hpp"
#include "vkh/kernels.hpp"

using namespace vkh;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void row(const char* kernel, const char* variant, int threads, double secs, double ref_secs, double diff) {
  std::printf("%s,%s,%d,%.6e,%.3f,%.3e\n", kernel, variant, threads, secs, ref_secs / secs, diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel benchmark"};
  int cells = 32, nz = 8, reps = 3, threads = kernels::thread_count();
  app.add_option("--cells", cells, "cells per side of the unit square")->check(CLI::PositiveNumber);
  app.add_option("--nz", nz, "layers")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "repetitions, best time kept")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "threads for the parallel variants")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const ExtrudedGrid grid(RasterDomain::rectangle({0, 0, 1, 1}, 1.0 / cells), nz);
  const auto field = MicrostructureField::checkerboard({1, 1}, {0.5, 2}, 0.25);
  const double h = 0.1;
  const Sym2 m1{1, 0.5, 0.2}, m2{0.3, -1, 0};
  std::fprintf(stderr, "grid %dx%dx%d, %d dofs, %d parallel threads\n", cells, cells, nz, grid.dof_count(), threads);
  std::printf("kernel,variant,threads,seconds,speedup,max_abs_diff\n");
  bool ok = true;

  kernels::set_thread_count(1);
  QuadSystem serial;
  const double t_asm_ref = best_of(reps, [&] { serial = reference::assemble_serial(grid, field, h, m1, m2); });
  kernels::set_thread_count(threads);
  QuadSystem par;
  const double t_asm = best_of(reps, [&] { par = assemble(grid, field, h, m1, m2); });
  double asm_diff = max_diff(serial.linear, par.linear);
  {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(grid.dof_count()), y1(x.size()), y2(x.size()), y3(x.size());
    for (double& v : x) v = u(rng);
    serial.op.apply(x, y1);
    par.op.apply(x, y2);
    asm_diff = std::max(asm_diff, max_diff(y1, y2) / (1.0 + *std::max_element(y1.begin(), y1.end())));
    row("assemble", "serial", 1, t_asm_ref, t_asm_ref, 0.0);
    row("assemble", "parallel", threads, t_asm, t_asm_ref, asm_diff);
    ok = ok && asm_diff < 1e-12;

    kernels::set_thread_count(1);
    const double t_mf = best_of(reps, [&] { reference::apply_elementwise(grid, field, h, x, y3); });
    const double t_apply1 = best_of(reps, [&] { par.op.apply(x, y1); });
    kernels::set_thread_count(threads);
    const double t_apply = best_of(reps, [&] { par.op.apply(x, y2); });
    const double mf_diff = max_diff(y3, y2) / (1.0 + *std::max_element(y3.begin(), y3.end()));
    row("matvec", "elementwise", 1, t_mf, t_mf, 0.0);
    row("matvec", "stencil", 1, t_apply1, t_mf, max_diff(y1, y2));
    row("matvec", "stencil", threads, t_apply, t_mf, mf_diff);
    ok = ok && mf_diff < 1e-12 && max_diff(y1, y2) == 0.0;

    double d_ref = 0.0, d_par = 0.0;
    const double t_dot_ref = best_of(reps * 10, [&] { d_ref = reference::dot(x, y1); });
    const double t_dot = best_of(reps * 10, [&] { d_par = kernels::dot(x, y1); });
    row("dot", "serial", 1, t_dot_ref, t_dot_ref, 0.0);
    row("dot", "blocked", threads, t_dot, t_dot_ref, std::abs(d_ref - d_par) / std::abs(d_ref));
    ok = ok && std::abs(d_ref - d_par) <= 1e-12 * std::abs(d_ref);
  }

  const QuadSystem sys = apply_lateral_dirichlet(std::move(par), grid);
  CgResult jac, col;
  const double t_jac = best_of(1, [&] { jac = solve_cg(sys, 1e-9, 100000, nullptr, Preconditioner::Jacobi); });
  const double t_col = best_of(1, [&] { col = solve_cg(sys, 1e-9, 100000, nullptr, Preconditioner::Column); });
  const double e_jac = sys.energy(jac.psi.data()), e_col = sys.energy(col.psi.data());
  std::fprintf(stderr, "cg iterations: jacobi %d, column %d\n", jac.iterations, col.iterations);
  row("cg", "jacobi", threads, t_jac, t_jac, 0.0);
  row("cg", "column", threads, t_col, t_jac, std::abs(e_jac - e_col) / std::abs(e_jac));
  ok = ok && jac.converged && col.converged && std::abs(e_jac - e_col) <= 1e-7 * std::abs(e_jac);

  if (!ok) std::fprintf(stderr, "parallel and serial results disagree\n");
  return ok ? 0 : 1;
}
