#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pmnn {

struct LbfgsConfig {
  int memory = 10;
  int max_iterations = 5000;
  double grad_tolerance = 1e-9;      // infinity norm
  double loss_rel_tolerance = 1e-12;  // relative change, 5 successive iterations
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailure };

std::string to_string(LbfgsStatus status);

/// One accepted line-search step: f/directional-derivative pairs at the start
/// and at the accepted point, for auditing the Wolfe conditions.
struct StepRecord {
  double step;
  double f0, g0;
  double f1, g1;
};

struct LbfgsResult {
  std::vector<double> x;
  std::vector<double> history;  // loss at the start plus after every iteration
  LbfgsStatus status = LbfgsStatus::Converged;
  std::vector<StepRecord> steps;
  int iterations = 0;
};

/// Evaluates the objective at x and writes the gradient into grad
/// (same length as x).
using ObjectiveWithGradient = std::function<double(std::span<const double>, std::span<double>)>;

/// Limited-memory BFGS with a strong-Wolfe bracketing line search.
/// Stops when the gradient infinity norm falls below grad_tolerance, when the
/// relative loss change stays below loss_rel_tolerance for 5 successive
/// iterations, or at max_iterations. A failed line search (40 trial
/// evaluations without a Wolfe point) returns the best parameters seen.
LbfgsResult lbfgs_minimize(const ObjectiveWithGradient& objective, std::vector<double> initial,
                           const LbfgsConfig& config = {});

}  // namespace pmnn
