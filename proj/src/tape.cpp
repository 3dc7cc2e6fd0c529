#include "pmnn/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "pmnn/errors.hpp"

namespace pmnn {

namespace {

// leaf markers stored in Node::p0
constexpr std::int32_t kConst = -1;
constexpr std::int32_t kParam = -2;
constexpr std::int32_t kEval = -3;  // p1 = eval_index * 8 + component

Tape* common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument("operands recorded on different tapes");
  return a.tape;
}

}  // namespace

Var make_node(Tape& t, double val, std::int32_t p0, std::int32_t p1, double w0, double w1,
              const char* tag);

Tape::Tape(const NetworkParams& params) : params_(&params) {
  nodes_.reserve(1024);
}

void Tape::reset(const NetworkParams& params) {
  params_ = &params;
  nodes_.clear();
  evals_.clear();
  cache_.clear();
}

double Var::val() const {
  if (!tape) throw std::invalid_argument("value of an unbound Var");
  return tape->val(*this);
}

double Tape::val(Var v) const {
  if (v.tape != this || v.id < 0 || std::size_t(v.id) >= nodes_.size())
    throw std::invalid_argument("Var does not belong to this tape");
  return nodes_[v.id].val;
}

Var make_node(Tape& t, double val, std::int32_t p0, std::int32_t p1, double w0, double w1,
              const char* tag) {
  if (!std::isfinite(val)) throw NumericalError("non-finite value in recorded computation", tag);
  t.nodes_.push_back({val, p0, p1, w0, w1});
  return Var{&t, static_cast<std::int32_t>(t.nodes_.size() - 1)};
}

Var Tape::constant(double v) { return make_node(*this, v, kConst, -1, 0.0, 0.0, "const"); }

Var Tape::param(int index) {
  if (index < 0 || std::size_t(index) >= params_->flat.size())
    throw std::invalid_argument("parameter index out of range");
  return make_node(*this, params_->flat[index], kParam, index, 0.0, 0.0, "param");
}

Var Tape::record_eval(std::span<const double> input, std::span<const int> tracked, JetVars* jet) {
  const auto& spec = params_->spec;
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw std::invalid_argument("input length does not match the network input dimension");
  const int m = static_cast<int>(tracked.size());
  if (m > 2) throw std::invalid_argument("at most 2 input coordinates may be tracked");
  for (int i = 0; i < m; ++i)
    if (tracked[i] < 0 || tracked[i] >= spec.input_dim)
      throw std::invalid_argument("tracked index out of range");

  EvalRec rec;
  rec.in_dim = spec.input_dim;
  for (int i = 0; i < spec.input_dim; ++i) rec.input[i] = input[i];
  rec.m = m;
  for (int i = 0; i < m; ++i) rec.tracked[i] = tracked[i];
  rec.cache_off = cache_.size();
  cache_.resize(cache_.size() + detail::cache_size(spec, m));

  double out[5];
  detail::eval_jet(spec, detail::ActKind::Tanh, params_->flat.data(), rec.input.data(),
                   rec.tracked.data(), m, out, cache_.data() + rec.cache_off);
  const std::int32_t ei = static_cast<std::int32_t>(evals_.size());
  evals_.push_back(rec);

  const Var value = make_node(*this, out[0], kEval, ei * 8 + 0, 0.0, 0.0, "eval");
  if (jet) {
    jet->value = value;
    jet->tracked = m;
    for (int i = 0; i < m; ++i) {
      jet->d1[i] = make_node(*this, out[1 + i], kEval, ei * 8 + 1 + i, 0.0, 0.0, "eval");
      jet->d2[i] = make_node(*this, out[1 + m + i], kEval, ei * 8 + 3 + i, 0.0, 0.0, "eval");
    }
  }
  return value;
}

Var Tape::eval(std::span<const double> input) { return record_eval(input, {}, nullptr); }

Tape::JetVars Tape::eval_jet(std::span<const double> input, std::span<const int> tracked) {
  JetVars jet;
  record_eval(input, tracked, &jet);
  return jet;
}

std::vector<Tape::EvalInfo> Tape::eval_log() const {
  std::vector<EvalInfo> log;
  log.reserve(evals_.size());
  for (const auto& e : evals_) log.push_back({e.input, e.in_dim, e.tracked, e.m});
  return log;
}

std::vector<double> Tape::gradient(Var loss) {
  if (loss.tape != this || loss.id < 0 || std::size_t(loss.id) >= nodes_.size())
    throw std::invalid_argument("loss Var does not belong to this tape");
  std::vector<double> grad(params_->flat.size(), 0.0);
  std::vector<double> adj(std::size_t(loss.id) + 1, 0.0);
  for (auto& e : evals_) {
    e.adj.fill(0.0);
    e.touched = false;
  }
  adj[loss.id] = 1.0;
  for (std::int32_t id = loss.id; id >= 0; --id) {
    const double a = adj[id];
    if (a == 0.0) continue;
    const Node& n = nodes_[id];
    if (n.p0 >= 0) {
      adj[n.p0] += n.w0 * a;
      if (n.p1 >= 0) adj[n.p1] += n.w1 * a;
    } else if (n.p0 == kParam) {
      grad[n.p1] += a;
    } else if (n.p0 == kEval) {
      EvalRec& e = evals_[n.p1 >> 3];
      e.adj[n.p1 & 7] += a;
      e.touched = true;
    }
  }
  for (const auto& e : evals_) {
    if (!e.touched) continue;
    double seeds[5];
    seeds[0] = e.adj[0];
    for (int i = 0; i < e.m; ++i) {
      seeds[1 + i] = e.adj[1 + i];
      seeds[1 + e.m + i] = e.adj[3 + i];
    }
    detail::backward_jet(params_->spec, detail::ActKind::Tanh, params_->flat.data(),
                         e.input.data(), e.tracked.data(), e.m, cache_.data() + e.cache_off,
                         seeds, grad.data(), scratch_);
  }
  return grad;
}

Var operator+(Var a, Var b) {
  Tape& t = *common_tape(a, b);
  return make_node(t, t.val(a) + t.val(b), a.id, b.id, 1.0, 1.0, "add");
}

Var operator-(Var a, Var b) {
  Tape& t = *common_tape(a, b);
  return make_node(t, t.val(a) - t.val(b), a.id, b.id, 1.0, -1.0, "sub");
}

Var operator*(Var a, Var b) {
  Tape& t = *common_tape(a, b);
  const double av = t.val(a), bv = t.val(b);
  return make_node(t, av * bv, a.id, b.id, bv, av, "mul");
}

Var operator/(Var a, Var b) {
  Tape& t = *common_tape(a, b);
  const double av = t.val(a), bv = t.val(b);
  return make_node(t, av / bv, a.id, b.id, 1.0 / bv, -av / (bv * bv), "div");
}

Var operator+(Var a, double c) {
  return make_node(*a.tape, a.val() + c, a.id, -1, 1.0, 0.0, "add");
}
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) {
  return make_node(*a.tape, a.val() - c, a.id, -1, 1.0, 0.0, "sub");
}
Var operator-(double c, Var a) {
  return make_node(*a.tape, c - a.val(), a.id, -1, -1.0, 0.0, "sub");
}
Var operator*(Var a, double c) {
  return make_node(*a.tape, a.val() * c, a.id, -1, c, 0.0, "mul");
}
Var operator*(double c, Var a) { return a * c; }
Var operator/(Var a, double c) {
  return make_node(*a.tape, a.val() / c, a.id, -1, 1.0 / c, 0.0, "div");
}
Var operator-(Var a) { return make_node(*a.tape, -a.val(), a.id, -1, -1.0, 0.0, "neg"); }

Var square(Var a) {
  const double v = a.val();
  return make_node(*a.tape, v * v, a.id, -1, 2.0 * v, 0.0, "square");
}

Var mean_square(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty set");
  Var acc = square(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = acc + square(xs[i]);
  return acc / double(xs.size());
}

std::pair<double, std::vector<double>> loss_gradient(const RecordedObjective& objective,
                                                     const NetworkParams& params) {
  Tape tape(params);
  const Var loss = objective(tape);
  const double value = tape.val(loss);
  return {value, tape.gradient(loss)};
}

}  // namespace pmnn
