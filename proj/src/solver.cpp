#include "pmnn/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>

#include "json.hpp"
#include "pmnn/errors.hpp"

namespace pmnn {

std::string to_string(Scheme scheme) { return scheme == Scheme::L1 ? "l1" : "l2sigma"; }

void FractionalIVP::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (spatial_dim < 0 || spatial_dim > 2)
    throw std::invalid_argument("spatial_dim must be 0, 1 or 2");
  const int want =
      operator_L == OperatorKind::None || operator_L == OperatorKind::NegIdentity ? 0
      : operator_L == OperatorKind::SecondDerivX                                  ? 1
                                                                                  : 2;
  if (spatial_dim != want)
    throw std::invalid_argument("operator does not match the spatial dimension");
  if (!forcing) throw std::invalid_argument("forcing callable is required");
  if (!initial) throw std::invalid_argument("initial callable is required");
  if (spatial_dim > 0) {
    if (!boundary)
      throw std::invalid_argument("boundary callable is required for spatial problems");
    for (int a = 0; a < spatial_dim; ++a)
      if (!(spatial_domain[a][0] < spatial_domain[a][1]))
        throw std::invalid_argument("spatial domain bounds must be increasing");
  }
}

std::string SolveReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["scheme"] = to_string(scheme);
  j["alpha"] = alpha;
  j["nt"] = nt;
  j["nx"] = nx;
  j["seed"] = seed;
  j["iterations"] = iterations;
  j["wall_time_s"] = wall_time_s;
  j["loss_f"] = final_losses.loss_f;
  j["loss_ic"] = final_losses.loss_ic;
  j["loss_bc"] = final_losses.loss_bc;
  if (l2_relative_error) j["l2_relative_error"] = *l2_relative_error;
  j["loss_history"] = loss_history;
  j["status"] = to_string(status);
  return j.dump(indent);
}

double NetworkEvaluator::value(std::span<const double> space, double t) const {
  std::vector<double> in(space.begin(), space.end());
  in.push_back(t);
  return forward(params_, in);
}

double NetworkEvaluator::operator_term(std::span<const double> space, double t) const {
  switch (op_) {
    case OperatorKind::None: return 0.0;
    case OperatorKind::NegIdentity: return -value(space, t);
    case OperatorKind::SecondDerivX: {
      std::vector<double> in(space.begin(), space.end());
      in.push_back(t);
      static constexpr int tr[] = {0};
      return forward_jet(params_, in, tr).d2[0];
    }
    case OperatorKind::LaplacianXY: {
      std::vector<double> in(space.begin(), space.end());
      in.push_back(t);
      static constexpr int tr[] = {0, 1};
      const JetValue j = forward_jet(params_, in, tr);
      return j.d2[0] + j.d2[1];
    }
  }
  throw std::logic_error("unhandled operator kind");
}

namespace {

// One implementation of each target formula, shared between the plain-number
// path (evaluators, truncation studies) and the recorded path (training).
template <class S, class ValFn, class OpFn>
S l1_target_core(const FractionalIVP& p, std::span<const double> space, int n, const L1Weights& w,
                 double tau, ValFn&& val, OpFn&& op) {
  const double a = p.alpha.value();
  const double pref = gamma_fn(2.0 - a) * std::pow(tau, a) / w.a[0];
  const double fn = p.forcing(space, n * tau);
  S U = pref * (op() + fn);
  for (int k = 1; k <= n - 1; ++k) U = U + ((w.a[n - k - 1] - w.a[n - k]) / w.a[0]) * val(k);
  return U + (w.a[n - 1] / w.a[0]) * val(0);
}

template <class S, class ValFn, class OpFn>
S l2sigma_target_core(const FractionalIVP& p, std::span<const double> space, int n,
                      const L2SigmaWeightRow& row, double tau, ValFn&& val, OpFn&& op) {
  const double a = p.alpha.value();
  const double c0 = row.c[0];
  const double t_off = (n - 1 + row.sigma) * tau;
  const double pref = gamma_fn(2.0 - a) * std::pow(tau, a) / c0;
  const double f_off = p.forcing(space, t_off);
  S U = pref * (op() + f_off);
  for (int k = 1; k <= n - 1; ++k) U = U + (row.c[k] / c0) * (val(n - k - 1) - val(n - k));
  return U + val(n - 1);
}

void check_target_args(const FractionalIVP& p, std::span<const double> space, int n, double tau) {
  p.validate();
  if (static_cast<int>(space.size()) != p.spatial_dim)
    throw std::invalid_argument("space point dimension does not match the problem");
  if (n < 1) throw std::invalid_argument("time index must be at least 1");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
}

}  // namespace

double l1_target(const FractionalIVP& problem, const PointEvaluator& evaluator,
                 std::span<const double> space, int n, const L1Weights& weights, double tau) {
  check_target_args(problem, space, n, tau);
  if (static_cast<int>(weights.a.size()) < n)
    throw std::invalid_argument("weight array covers fewer steps than the time index");
  if (weights.alpha.value() != problem.alpha.value())
    throw std::invalid_argument("weights were built for a different fractional order");
  return l1_target_core<double>(
      problem, space, n, weights, tau, [&](int k) { return evaluator.value(space, k * tau); },
      [&] { return evaluator.operator_term(space, n * tau); });
}

double l1_target(const FractionalIVP& problem, const NetworkParams& params,
                 std::span<const double> space, int n, const L1Weights& weights, double tau) {
  const NetworkEvaluator ev(params, problem.operator_L);
  return l1_target(problem, ev, space, n, weights, tau);
}

double l2sigma_target(const FractionalIVP& problem, const PointEvaluator& evaluator,
                      std::span<const double> space, int n, const L2SigmaWeightRow& row,
                      double tau) {
  check_target_args(problem, space, n, tau);
  if (row.n != n) throw std::invalid_argument("weight row does not match the time index");
  if (row.alpha.value() != problem.alpha.value())
    throw std::invalid_argument("weights were built for a different fractional order");
  return l2sigma_target_core<double>(
      problem, space, n, row, tau, [&](int k) { return evaluator.value(space, k * tau); },
      [&] { return evaluator.operator_term(space, (n - 1 + row.sigma) * tau); });
}

double l2sigma_target(const FractionalIVP& problem, const NetworkParams& params,
                      std::span<const double> space, int n, const L2SigmaWeightRow& row,
                      double tau) {
  const NetworkEvaluator ev(params, problem.operator_L);
  return l2sigma_target(problem, ev, space, n, row, tau);
}

CollocationSet build_collocation(const FractionalIVP& p, const TimeGrid& grid, int n_x) {
  p.validate();
  CollocationSet c;
  const int N = grid.N;
  if (p.spatial_dim == 0) {
    for (int n = 1; n <= N; ++n) c.interior.push_back({{}, n});
    c.initial_pts.push_back({});
    return c;
  }
  if (n_x < 3) throw std::invalid_argument("n_x must be at least 3 for spatial problems");
  const auto node = [&](int axis, int i) {
    const double lo = p.spatial_domain[axis][0], hi = p.spatial_domain[axis][1];
    return i == n_x - 1 ? hi : lo + i * (hi - lo) / (n_x - 1);
  };
  if (p.spatial_dim == 1) {
    for (int i = 0; i < n_x; ++i) {
      const double x = node(0, i);
      c.initial_pts.push_back({x});
      if (i == 0 || i == n_x - 1) {
        for (int j = 0; j <= N; ++j) c.boundary_pts.push_back({{x}, j * grid.tau});
      } else {
        for (int n = 1; n <= N; ++n) c.interior.push_back({{x}, n});
      }
    }
    return c;
  }
  for (int i = 0; i < n_x; ++i) {
    const double x = node(0, i);
    for (int j = 0; j < n_x; ++j) {
      const double y = node(1, j);
      c.initial_pts.push_back({x, y});
      const bool edge = i == 0 || i == n_x - 1 || j == 0 || j == n_x - 1;
      if (edge) {
        for (int k = 0; k <= N; ++k) c.boundary_pts.push_back({{x, y}, k * grid.tau});
      } else {
        for (int n = 1; n <= N; ++n) c.interior.push_back({{x, y}, n});
      }
    }
  }
  return c;
}

namespace detail {

SchemeWeights make_scheme_weights(Scheme scheme, FractionalOrder alpha, int n_steps) {
  SchemeWeights w{scheme, L1Weights{alpha, {}}, {}};
  if (scheme == Scheme::L1)
    w.l1 = l1_weights(alpha, n_steps);
  else
    w.rows = l2sigma_weight_table(alpha, n_steps);
  return w;
}

namespace {

struct Column {
  std::vector<double> space;
  std::vector<int> interior_ns;
  int ic_count = 0;
  std::vector<double> bc_times;
};

// Canonical grouping: columns in lexicographic space order, times ascending.
// This fixes the reduction order independently of the input ordering.
std::vector<Column> group_columns(const CollocationSet& c) {
  std::map<std::vector<double>, Column> by_space;
  for (const auto& [sp, n] : c.interior) by_space[sp].interior_ns.push_back(n);
  for (const auto& sp : c.initial_pts) by_space[sp].ic_count++;
  for (const auto& [sp, t] : c.boundary_pts) by_space[sp].bc_times.push_back(t);
  std::vector<Column> cols;
  cols.reserve(by_space.size());
  for (auto& [sp, col] : by_space) {
    col.space = sp;
    std::sort(col.interior_ns.begin(), col.interior_ns.end());
    std::sort(col.bc_times.begin(), col.bc_times.end());
    cols.push_back(std::move(col));
  }
  return cols;
}

// Network evaluations for one spatial column, shared across residuals. Grid
// values are keyed by time index; the value component of a jet is reused as
// the grid value at the same node.
struct ColumnMemo {
  Tape& tape;
  int N;
  double tau;
  std::span<const double> space;
  std::vector<std::optional<Var>> vals;
  std::map<int, Tape::JetVars> jets;
  std::map<double, Var> offgrid;
  std::vector<double> input;

  ColumnMemo(Tape& t, int n_steps, double tau_, std::span<const double> sp)
      : tape(t), N(n_steps), tau(tau_), space(sp), vals(n_steps + 1), input(sp.size() + 1) {
    std::copy(sp.begin(), sp.end(), input.begin());
  }

  std::span<const double> point(double t) {
    input.back() = t;
    return input;
  }

  Var val_idx(int k) {
    if (!vals[k]) vals[k] = tape.eval(point(k * tau));
    return *vals[k];
  }

  Tape::JetVars jet_idx(int k, std::span<const int> tr) {
    auto it = jets.find(k);
    if (it == jets.end()) {
      const Tape::JetVars j = tape.eval_jet(point(k * tau), tr);
      it = jets.emplace(k, j).first;
      if (!vals[k]) vals[k] = j.value;
    }
    return it->second;
  }

  Var val_time(double t) {
    const long long k = std::llround(t / tau);
    if (k >= 0 && k <= N && std::abs(double(k) * tau - t) <= 1e-12 * std::max(1.0, std::abs(t)))
      return val_idx(int(k));
    auto it = offgrid.find(t);
    if (it == offgrid.end()) it = offgrid.emplace(t, tape.eval(point(t))).first;
    return it->second;
  }

  Var op_grid(OperatorKind kind, int n) {
    switch (kind) {
      case OperatorKind::None: return tape.constant(0.0);
      case OperatorKind::NegIdentity: return -val_idx(n);
      case OperatorKind::SecondDerivX: {
        static constexpr int tr[] = {0};
        return jet_idx(n, tr).d2[0];
      }
      case OperatorKind::LaplacianXY: {
        static constexpr int tr[] = {0, 1};
        const Tape::JetVars j = jet_idx(n, tr);
        return j.d2[0] + j.d2[1];
      }
    }
    throw std::logic_error("unhandled operator kind");
  }

  // Operator term for the off-grid time of the L2-1sigma scheme. Exactly one
  // network evaluation at t, none at the surrounding grid nodes.
  Var op_offgrid(OperatorKind kind, double t) {
    switch (kind) {
      case OperatorKind::None: return tape.constant(0.0);
      case OperatorKind::NegIdentity: return -val_time(t);
      case OperatorKind::SecondDerivX: {
        static constexpr int tr[] = {0};
        return tape.eval_jet(point(t), tr).d2[0];
      }
      case OperatorKind::LaplacianXY: {
        static constexpr int tr[] = {0, 1};
        const Tape::JetVars j = tape.eval_jet(point(t), tr);
        return j.d2[0] + j.d2[1];
      }
    }
    throw std::logic_error("unhandled operator kind");
  }
};

}  // namespace

RecordedLoss record_loss(Tape& tape, const FractionalIVP& p, const CollocationSet& colloc,
                         double tau, int n_steps, const SchemeWeights& w) {
  if (colloc.interior.empty()) throw std::invalid_argument("empty interior collocation set");
  for (const auto& [sp, n] : colloc.interior)
    if (n < 1 || n > n_steps) throw std::invalid_argument("interior time index out of range");
  if (w.scheme == Scheme::L1 && static_cast<int>(w.l1.a.size()) < n_steps)
    throw std::invalid_argument("weight array shorter than the grid");
  if (w.scheme == Scheme::L2Sigma && static_cast<int>(w.rows.size()) < n_steps)
    throw std::invalid_argument("weight table shorter than the grid");

  std::vector<Var> rf, ric, rbc;
  rf.reserve(colloc.n_f());
  ric.reserve(colloc.n_ic());
  rbc.reserve(colloc.n_bc());
  for (const Column& col : group_columns(colloc)) {
    ColumnMemo memo(tape, n_steps, tau, col.space);
    for (const int n : col.interior_ns) {
      const Var U =
          w.scheme == Scheme::L1
              ? l1_target_core<Var>(
                    p, col.space, n, w.l1, tau, [&](int k) { return memo.val_idx(k); },
                    [&] { return memo.op_grid(p.operator_L, n); })
              : l2sigma_target_core<Var>(
                    p, col.space, n, w.rows[n - 1], tau, [&](int k) { return memo.val_idx(k); },
                    [&] {
                      return memo.op_offgrid(p.operator_L, (n - 1 + w.rows[n - 1].sigma) * tau);
                    });
      rf.push_back(memo.val_idx(n) - U);
    }
    if (col.ic_count > 0) {
      const double phi = p.initial(col.space);
      for (int i = 0; i < col.ic_count; ++i) ric.push_back(memo.val_idx(0) - phi);
    }
    for (const double t : col.bc_times) rbc.push_back(memo.val_time(t) - p.boundary(col.space, t));
  }

  RecordedLoss out{};
  out.f = mean_square(rf);
  out.ic = ric.empty() ? tape.constant(0.0) : mean_square(ric);
  out.bc = rbc.empty() ? tape.constant(0.0) : mean_square(rbc);
  out.total = out.f + out.ic + out.bc;
  return out;
}

}  // namespace detail

LossBreakdown assemble_loss(const FractionalIVP& p, const NetworkParams& params, Scheme scheme,
                            const CollocationSet& colloc, const TimeGrid& grid) {
  p.validate();
  if (params.spec.input_dim != p.spatial_dim + 1)
    throw std::invalid_argument("network input dimension must be spatial_dim + 1");
  const detail::SchemeWeights w = detail::make_scheme_weights(scheme, p.alpha, grid.N);
  Tape tape(params);
  const detail::RecordedLoss rec = detail::record_loss(tape, p, colloc, grid.tau, grid.N, w);
  return {tape.val(rec.f), tape.val(rec.ic), tape.val(rec.bc), tape.val(rec.total)};
}

std::pair<NetworkParams, SolveReport> train(const FractionalIVP& p, Scheme scheme,
                                            const TrainOptions& opt) {
  p.validate();
  if (opt.n_t < 2) throw std::invalid_argument("n_t must be at least 2 time nodes");
  const auto t0 = std::chrono::steady_clock::now();
  const TimeGrid grid(p.horizon, opt.n_t - 1);
  const detail::SchemeWeights w = detail::make_scheme_weights(scheme, p.alpha, grid.N);
  const CollocationSet colloc = build_collocation(p, grid, opt.n_x);

  NetworkSpec spec = opt.net;
  spec.input_dim = p.spatial_dim + 1;
  NetworkParams params = init_params(spec, opt.seed);
  Tape tape(params);
  const ObjectiveWithGradient objective = [&](std::span<const double> x, std::span<double> g) {
    std::copy(x.begin(), x.end(), params.flat.begin());
    tape.reset(params);
    const detail::RecordedLoss rec = detail::record_loss(tape, p, colloc, grid.tau, grid.N, w);
    const std::vector<double> grad = tape.gradient(rec.total);
    std::copy(grad.begin(), grad.end(), g.begin());
    return tape.val(rec.total);
  };
  const LbfgsResult res = lbfgs_minimize(objective, params.flat, opt.opt);
  params.flat = res.x;

  SolveReport rep;
  rep.scheme = scheme;
  rep.alpha = p.alpha.value();
  rep.nt = opt.n_t;
  rep.nx = p.spatial_dim > 0 ? opt.n_x : 0;
  rep.seed = opt.seed;
  rep.iterations = res.iterations;
  rep.status = res.status;
  rep.loss_history = res.history;
  rep.final_losses = assemble_loss(p, params, scheme, colloc, grid);
  if (p.exact_solution) rep.l2_relative_error = l2_relative_error(params, p);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(params), rep};
}

double l2_relative_error(const std::function<double(std::span<const double>, double)>& approx,
                         const FractionalIVP& p) {
  p.validate();
  if (!p.exact_solution) throw std::invalid_argument("problem provides no exact solution");
  if (!approx) throw std::invalid_argument("empty approximation callable");
  double num = 0.0, den = 0.0;
  const auto add = [&](std::span<const double> sp, double t) {
    const double u = p.exact_solution(sp, t);
    const double d = approx(sp, t) - u;
    num += d * d;
    den += u * u;
  };
  const auto axis = [&](int a, int i, int count) {
    const double lo = p.spatial_domain[a][0], hi = p.spatial_domain[a][1];
    return i == count - 1 ? hi : lo + i * (hi - lo) / (count - 1);
  };
  if (p.spatial_dim == 0) {
    const int nt = 500;
    for (int i = 0; i < nt; ++i) add({}, p.horizon * i / (nt - 1.0));
  } else if (p.spatial_dim == 1) {
    const int n = 100;
    for (int ix = 0; ix < n; ++ix) {
      const double sp[] = {axis(0, ix, n)};
      for (int it = 0; it < n; ++it) add(sp, p.horizon * it / (n - 1.0));
    }
  } else {
    const int n = 100;
    for (int ix = 0; ix < n; ++ix)
      for (int iy = 0; iy < n; ++iy) {
        const double sp[] = {axis(0, ix, n), axis(1, iy, n)};
        for (int it = 0; it < n; ++it) add(sp, p.horizon * it / (n - 1.0));
      }
  }
  if (den == 0.0) throw std::domain_error("exact solution vanishes on the whole test grid");
  return std::sqrt(num) / std::sqrt(den);
}

double l2_relative_error(const NetworkParams& params, const FractionalIVP& p) {
  std::vector<double> in(p.spatial_dim + 1);
  return l2_relative_error(
      [&](std::span<const double> sp, double t) {
        std::copy(sp.begin(), sp.end(), in.begin());
        in.back() = t;
        return forward(params, in);
      },
      p);
}

}  // namespace pmnn
