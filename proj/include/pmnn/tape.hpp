#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "pmnn/network.hpp"

namespace pmnn {

class Tape;

/// Handle to a scalar recorded on a Tape. Cheap to copy; arithmetic on Vars
/// appends nodes to the owning tape.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;
  double val() const;
};

/// Records a scalar computation built from network evaluations, parameters
/// and arithmetic, then differentiates it with respect to the flat parameter
/// vector in one reverse sweep. Network evaluations enter the recording as
/// composite leaves; their parameter gradients are resolved by the exact
/// backward pass through the jet propagation.
class Tape {
 public:
  explicit Tape(const NetworkParams& params);

  /// Rebind to (possibly updated) parameters and discard the recording.
  void reset(const NetworkParams& params);

  Var constant(double v);
  /// The i-th entry of the flat parameter vector as a differentiable leaf.
  Var param(int index);

  /// Network output at `input`, recorded for the backward pass.
  Var eval(std::span<const double> input);

  struct JetVars {
    Var value;
    std::array<Var, 2> d1{};
    std::array<Var, 2> d2{};
    int tracked = 0;
  };
  /// Network output plus first/second derivatives with respect to the tracked
  /// input coordinates, each component a differentiable leaf.
  JetVars eval_jet(std::span<const double> input, std::span<const int> tracked);

  double val(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  /// d(loss)/d(flat). One reverse sweep over the recording followed by the
  /// jet backward pass for every evaluation the sweep touched.
  std::vector<double> gradient(Var loss);

  /// What was evaluated where; lets tests assert evaluation placement.
  struct EvalInfo {
    std::array<double, 3> input{};
    int in_dim = 0;
    std::array<int, 2> tracked{};
    int m = 0;
  };
  std::vector<EvalInfo> eval_log() const;

  struct Node {
    double val;
    std::int32_t p0, p1;
    double w0, w1;
  };

 private:
  friend struct Var;
  friend Var make_node(Tape& t, double val, std::int32_t p0, std::int32_t p1, double w0, double w1,
                       const char* tag);

  struct EvalRec {
    std::array<double, 3> input{};
    int in_dim = 0;
    std::array<int, 2> tracked{};
    int m = 0;
    std::size_t cache_off = 0;
    std::array<double, 5> adj{};  // value, d1[0], d1[1], d2[0], d2[1]
    bool touched = false;
  };

  Var record_eval(std::span<const double> input, std::span<const int> tracked, JetVars* jet);

  const NetworkParams* params_;
  std::vector<Node> nodes_;
  std::vector<EvalRec> evals_;
  std::vector<double> cache_;
  detail::BackwardScratch scratch_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator-(Var a);
Var square(Var a);

/// Mean of squares with a fixed left-to-right reduction order, so the result
/// is bit-stable for a given operand order.
Var mean_square(std::span<const Var> xs);

/// Objective recorded against a tape bound to the supplied parameters.
using RecordedObjective = std::function<Var(Tape&)>;

/// Evaluate a recorded objective at `params` and return the loss together
/// with its exact-to-roundoff gradient with respect to `params.flat`.
std::pair<double, std::vector<double>> loss_gradient(const RecordedObjective& objective,
                                                     const NetworkParams& params);

}  // namespace pmnn
