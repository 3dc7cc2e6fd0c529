#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pmnn/caputo.hpp"
#include "pmnn/network.hpp"
#include "pmnn/problem.hpp"
#include "pmnn/tape.hpp"

namespace pmnn {

/// Pointwise view of a candidate solution: its value and the operator term
/// L u. The iteration targets accept any evaluator, so they can be driven by
/// exact-solution samplers as well as by networks.
struct PointEvaluator {
  virtual double value(std::span<const double> space, double t) const = 0;
  virtual double operator_term(std::span<const double> space, double t) const = 0;
  virtual ~PointEvaluator() = default;
};

/// Evaluator backed by a network; holds references, so it must not outlive
/// the parameters it wraps.
class NetworkEvaluator final : public PointEvaluator {
 public:
  NetworkEvaluator(const NetworkParams& params, OperatorKind op) : params_(params), op_(op) {}
  double value(std::span<const double> space, double t) const override;
  double operator_term(std::span<const double> space, double t) const override;

 private:
  const NetworkParams& params_;
  OperatorKind op_;
};

/// Iteration target U^n for the scheme built on the weights a_l:
/// U^n = Gamma(2-a) tau^a / a_0 [L u^n + f^n]
///     + sum_{k=1}^{n-1} (a_{n-k-1} - a_{n-k})/a_0 u^k + a_{n-1}/a_0 u^0.
/// The history sum is empty at n = 1.
double l1_target(const FractionalIVP& problem, const NetworkParams& params,
                 std::span<const double> space, int n, const L1Weights& weights, double tau);
double l1_target(const FractionalIVP& problem, const PointEvaluator& evaluator,
                 std::span<const double> space, int n, const L1Weights& weights, double tau);

/// Iteration target for the scheme built on the row c_k^{(n)}, evaluated at
/// the off-grid time t_{n-1+sigma}:
/// U^n = Gamma(2-a) tau^a / c_0 [L u^{n-1+sigma} + f^{n-1+sigma}]
///     + sum_{k=1}^{n-1} c_k/c_0 (u^{n-k-1} - u^{n-k}) + u^{n-1}.
double l2sigma_target(const FractionalIVP& problem, const NetworkParams& params,
                      std::span<const double> space, int n, const L2SigmaWeightRow& row,
                      double tau);
double l2sigma_target(const FractionalIVP& problem, const PointEvaluator& evaluator,
                      std::span<const double> space, int n, const L2SigmaWeightRow& row,
                      double tau);

/// Tensor-grid training points: interior nodes at {t_1..t_N}, the t = 0 layer
/// for the initial term, and boundary nodes crossed with all time nodes.
/// n_x is the per-axis node count and is ignored for scalar problems.
CollocationSet build_collocation(const FractionalIVP& problem, const TimeGrid& grid, int n_x);

/// Mean-squared residual, initial and boundary mismatches with unit weights.
/// The reduction order is canonical (space lexicographic, then time), so the
/// result does not depend on the order of the collocation arrays.
LossBreakdown assemble_loss(const FractionalIVP& problem, const NetworkParams& params,
                            Scheme scheme, const CollocationSet& collocation,
                            const TimeGrid& grid);

struct TrainOptions {
  int n_t = 41;  // time nodes (the grid has n_t - 1 steps)
  int n_x = 11;  // spatial nodes per axis, ignored for scalar problems
  std::uint64_t seed = 42;
  NetworkSpec net{};  // input_dim is derived from the problem
  LbfgsConfig opt{};
};

/// Train a network against the chosen iteration scheme and report the run.
std::pair<NetworkParams, SolveReport> train(const FractionalIVP& problem, Scheme scheme,
                                            const TrainOptions& options);

/// sqrt(sum (approx - u)^2) / sqrt(sum u^2) over the standard test grid:
/// 500 time points for scalar problems, 100 x 100 for 1D, 100^3 for 2D.
double l2_relative_error(const std::function<double(std::span<const double>, double)>& approx,
                         const FractionalIVP& problem);
double l2_relative_error(const NetworkParams& params, const FractionalIVP& problem);

namespace detail {

/// Precomputed temporal weights for one scheme on an N-step grid.
struct SchemeWeights {
  Scheme scheme;
  L1Weights l1;
  std::vector<L2SigmaWeightRow> rows;  // rows n = 1..N
};
SchemeWeights make_scheme_weights(Scheme scheme, FractionalOrder alpha, int n_steps);

struct RecordedLoss {
  Var f, ic, bc, total;
};

/// Record the three loss terms on the tape. Network evaluations at repeated
/// grid points are created once and shared between residuals.
RecordedLoss record_loss(Tape& tape, const FractionalIVP& problem, const CollocationSet& colloc,
                         double tau, int n_steps, const SchemeWeights& weights);

}  // namespace detail

}  // namespace pmnn
