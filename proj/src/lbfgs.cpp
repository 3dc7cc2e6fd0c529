#include "pmnn/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmnn/errors.hpp"

namespace pmnn {

std::string to_string(LbfgsStatus status) {
  switch (status) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

double one_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kLineSearchBudget = 40;

struct Trial {
  double a = 0.0;
  double f = kInf;
  double dphi = 0.0;
};

// Minimizer of the cubic fitting (f, f') at two points; bisection fallback
// when the interpolant is degenerate or lands too close to the ends.
double cubic_step(const Trial& lo, const Trial& hi) {
  const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
  const double disc = d1 * d1 - lo.dphi * hi.dphi;
  double a = 0.5 * (lo.a + hi.a);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
    const double cand =
        hi.a - (hi.a - lo.a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
    const double lo_end = std::min(lo.a, hi.a), hi_end = std::max(lo.a, hi.a);
    const double margin = 0.1 * (hi_end - lo_end);
    if (std::isfinite(cand) && cand > lo_end + margin && cand < hi_end - margin) a = cand;
  }
  return a;
}

struct LineSearchEnv {
  const ObjectiveWithGradient& objective;
  std::span<const double> x;
  std::span<const double> d;
  std::vector<double>& xt;  // trial point buffer
  std::vector<double>& gt;  // trial gradient buffer
  int evals = 0;

  // best improving trial seen, adopted if the search fails
  double best_f = kInf;
  std::vector<double> best_x, best_g;

  Trial probe(double a) {
    ++evals;
    for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + a * d[i];
    double f;
    try {
      f = objective(xt, gt);
    } catch (const NumericalError&) {
      return {a, kInf, 0.0};
    }
    if (!std::isfinite(f)) return {a, kInf, 0.0};
    if (f < best_f) {
      best_f = f;
      best_x.assign(xt.begin(), xt.end());
      best_g.assign(gt.begin(), gt.end());
    }
    return {a, f, dot(gt, d)};
  }
};

// Strong-Wolfe line search, bracketing then zooming (cubic interpolation).
// Returns true with the accepted trial, or false when the evaluation budget
// is exhausted without a Wolfe point.
bool strong_wolfe(LineSearchEnv& env, double f0, double dphi0, double a_init, double c1, double c2,
                  Trial& accepted) {
  const auto armijo = [&](const Trial& t) { return t.f <= f0 + c1 * t.a * dphi0; };
  const auto curvature = [&](const Trial& t) { return std::abs(t.dphi) <= -c2 * dphi0; };

  auto zoom = [&](Trial lo, Trial hi) -> bool {
    while (env.evals < kLineSearchBudget) {
      if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) return false;
      Trial t = env.probe(cubic_step(lo, hi));
      if (t.f > f0 + c1 * t.a * dphi0 || t.f >= lo.f) {
        hi = t;
      } else {
        if (curvature(t)) {
          accepted = t;
          return true;
        }
        if (t.dphi * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = t;
      }
    }
    return false;
  };

  Trial prev{0.0, f0, dphi0};
  double a = a_init;
  bool first = true;
  while (env.evals < kLineSearchBudget) {
    Trial t = env.probe(a);
    if (!armijo(t) || (!first && t.f >= prev.f)) return zoom(prev, t);
    if (curvature(t)) {
      accepted = t;
      return true;
    }
    if (t.dphi >= 0.0) return zoom(t, prev);
    prev = t;
    a = std::min(2.0 * a, 1e15);
    first = false;
  }
  return false;
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveWithGradient& objective, std::vector<double> initial,
                           const LbfgsConfig& config) {
  const std::size_t n = initial.size();
  if (n == 0) throw std::invalid_argument("empty initial point");
  if (config.memory < 1 || config.max_iterations < 0)
    throw std::invalid_argument("invalid optimizer configuration");

  LbfgsResult res;
  res.x = std::move(initial);
  std::vector<double> g(n), xt(n), gt(n);
  double f = objective(res.x, g);
  if (!std::isfinite(f)) throw std::invalid_argument("objective is not finite at the start");
  res.history.push_back(f);
  if (inf_norm(g) < config.grad_tolerance) return res;  // already optimal

  std::vector<std::vector<double>> S, Y;
  std::vector<double> rho;
  std::vector<double> d(n), q(n), alpha_buf;
  int flat_streak = 0;
  res.status = LbfgsStatus::MaxIterations;

  for (int it = 1; it <= config.max_iterations; ++it) {
    // two-loop recursion for d = -H g
    q.assign(g.begin(), g.end());
    alpha_buf.assign(S.size(), 0.0);
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha_buf[i] = rho[i] * dot(S[i], q);
      for (std::size_t k = 0; k < n; ++k) q[k] -= alpha_buf[i] * Y[i][k];
    }
    if (!S.empty()) {
      const double gamma = 1.0 / (rho.back() * dot(Y.back(), Y.back()));
      for (double& v : q) v *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * dot(Y[i], q);
      for (std::size_t k = 0; k < n; ++k) q[k] += (alpha_buf[i] - beta) * S[i][k];
    }
    for (std::size_t k = 0; k < n; ++k) d[k] = -q[k];

    double dphi0 = dot(g, d);
    if (dphi0 >= 0.0) {  // not a descent direction: restart from steepest descent
      S.clear();
      Y.clear();
      rho.clear();
      for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
      dphi0 = dot(g, d);
    }

    LineSearchEnv env{objective, res.x, d, xt, gt, 0, kInf, {}, {}};
    const double a0 = it == 1 ? std::min(1.0, 1.0 / one_norm(g)) : 1.0;
    Trial acc;
    if (!strong_wolfe(env, f, dphi0, a0, config.wolfe_c1, config.wolfe_c2, acc)) {
      if (env.best_f < f) {  // adopt the best improving trial before stopping
        res.x = env.best_x;
        res.history.push_back(env.best_f);
      }
      res.status = LbfgsStatus::LineSearchFailure;
      return res;
    }

    res.steps.push_back({acc.a, f, dphi0, acc.f, acc.dphi});
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double xn = res.x[k] + acc.a * d[k];
      s[k] = xn - res.x[k];
      y[k] = env.gt[k] - g[k];
      res.x[k] = xn;
    }
    const double sy = dot(s, y);
    if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      if (static_cast<int>(S.size()) == config.memory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
        rho.erase(rho.begin());
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    }

    const double f_prev = f;
    f = acc.f;
    g.assign(env.gt.begin(), env.gt.end());
    res.history.push_back(f);
    res.iterations = it;

    if (inf_norm(g) < config.grad_tolerance) {
      res.status = LbfgsStatus::Converged;
      return res;
    }
    const double scale = std::max({std::abs(f_prev), std::abs(f), 1e-30});
    flat_streak = std::abs(f_prev - f) < config.loss_rel_tolerance * scale ? flat_streak + 1 : 0;
    if (flat_streak >= 5) {
      res.status = LbfgsStatus::Converged;
      return res;
    }
  }
  return res;
}

}  // namespace pmnn
