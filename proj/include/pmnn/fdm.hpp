#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "pmnn/problem.hpp"

namespace pmnn {

/// Solution values on the full space-time grid, time level major.
///
/// `axes` holds one coordinate vector per spatial dimension (none for a
/// scalar problem). Within a time level, values are laid out row major in
/// the axis order, so `at(n, i, j)` reads u(t_n, x_i, y_j).
struct GridSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> axes;
  std::vector<double> values;

  std::size_t frame_size() const;
  double at(std::size_t n, std::size_t i = 0, std::size_t j = 0) const;
};

/// Direct time-stepping for the scalar problem u' (fractional) = -u + f
/// using the same first-order-kernel quadrature the trainer targets.
/// `n_steps` is the number of time steps (n_steps + 1 levels come back).
GridSolution fdm_solve_fode(const FractionalIVP& problem, int n_steps);

/// Same problem, stepped with the shifted-point quadrature. The operator
/// and forcing are taken at t_{n-1+sigma}; the solution value there is
/// closed by linear interpolation between the neighbouring levels.
GridSolution fdm_solve_fode_l2sigma(const FractionalIVP& problem, int n_steps);

/// Implicit scheme for u_t (fractional) = u_xx + f on [a,b] with Dirichlet
/// data, `n_x` grid nodes including both ends. Each step solves one
/// tridiagonal system.
GridSolution fdm_solve_1d(const FractionalIVP& problem, int n_steps, int n_x);

/// Implicit scheme for the 2-d problem with the 5-point Laplacian, `n_x`
/// nodes per axis. Each step solves the SPD interior system by conjugate
/// gradients to a 1e-12 relative residual; exhausting the iteration budget
/// throws ConvergenceError.
GridSolution fdm_solve_2d(const FractionalIVP& problem, int n_steps, int n_x);

/// Writes "t,u", "t,x,u" or "t,x,y,u" rows, shortest round-trip formatting.
void export_csv(const GridSolution& sol, std::ostream& out);

namespace detail {

/// Tridiagonal solve; `lower` and `upper` have size n-1. The inputs are
/// copied, not clobbered.
std::vector<double> thomas_solve(std::span<const double> lower, std::span<const double> diag,
                                 std::span<const double> upper, std::span<const double> rhs);

using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Conjugate gradients for SPD `apply`; `x` carries the initial guess in and
/// the solution out. Returns the iteration count, throws ConvergenceError
/// with the residual norm reached when `max_iter` is not enough.
int cg_solve(const ApplyFn& apply, std::span<const double> b, std::span<double> x, double rel_tol,
             int max_iter);

}  // namespace detail

}  // namespace pmnn
