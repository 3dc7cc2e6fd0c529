#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmnn/caputo.hpp"
#include "pmnn/lbfgs.hpp"

namespace pmnn {

enum class Scheme { L1, L2Sigma };

std::string to_string(Scheme scheme);

/// Integer-order spatial operator on the right-hand side of
/// D^alpha u = L u + f. None means L = 0; NegIdentity is the scalar case
/// L u = -u; the PDE operators have unit coefficient.
enum class OperatorKind { None, NegIdentity, SecondDerivX, LaplacianXY };

using SpaceTimeFn = std::function<double(std::span<const double>, double)>;
using SpaceFn = std::function<double(std::span<const double>)>;

/// Initial-value problem D^alpha u = L u + f on a box, with Dirichlet data mu
/// on the spatial boundary and initial state phi. spatial_dim 0 is a scalar
/// equation in time.
struct FractionalIVP {
  explicit FractionalIVP(FractionalOrder a) : alpha(a) {}

  FractionalOrder alpha;
  double horizon = 1.0;
  int spatial_dim = 0;
  std::array<std::array<double, 2>, 2> spatial_domain{{{0.0, 1.0}, {0.0, 1.0}}};
  OperatorKind operator_L = OperatorKind::None;
  SpaceTimeFn forcing;
  SpaceTimeFn boundary;
  SpaceFn initial;
  SpaceTimeFn exact_solution;  // may be empty

  /// Dimension/operator consistency and callable presence.
  void validate() const;
};

/// Training points: interior residual points carry a time index on the grid
/// {t_1..t_N}; initial points sit at t = 0; boundary points carry a real time.
struct CollocationSet {
  std::vector<std::pair<std::vector<double>, int>> interior;
  std::vector<std::vector<double>> initial_pts;
  std::vector<std::pair<std::vector<double>, double>> boundary_pts;

  std::size_t n_f() const { return interior.size(); }
  std::size_t n_ic() const { return initial_pts.size(); }
  std::size_t n_bc() const { return boundary_pts.size(); }
};

struct LossBreakdown {
  double loss_f = 0.0;
  double loss_ic = 0.0;
  double loss_bc = 0.0;
  double total = 0.0;
};

struct SolveReport {
  Scheme scheme = Scheme::L1;
  double alpha = 0.0;
  int nt = 0;  // time nodes (steps + 1)
  int nx = 0;  // spatial nodes per axis, 0 for scalar problems
  std::uint64_t seed = 0;
  int iterations = 0;
  double wall_time_s = 0.0;
  LossBreakdown final_losses;
  std::optional<double> l2_relative_error;
  std::vector<double> loss_history;
  LbfgsStatus status = LbfgsStatus::Converged;

  /// JSON document with fields {scheme, alpha, nt, nx, seed, iterations,
  /// wall_time_s, loss_f, loss_ic, loss_bc, l2_relative_error, loss_history,
  /// status}; l2_relative_error is omitted when absent.
  std::string to_json(int indent = 2) const;
};

}  // namespace pmnn
