#include "pmnn/caputo.hpp"

#include <cmath>
#include <stdexcept>

#include "pmnn/errors.hpp"

namespace pmnn {

FractionalOrder::FractionalOrder(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("fractional order must lie strictly inside (0,1)");
}

TimeGrid::TimeGrid(double horizon, int steps) : T(horizon), N(steps), tau(horizon / steps) {
  if (!(horizon > 0.0)) throw std::invalid_argument("time horizon must be positive");
  if (steps < 1) throw std::invalid_argument("time grid needs at least one step");
  nodes.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) nodes[k] = k * tau;
  nodes[steps] = horizon;
}

double gamma_fn(double x) {
  if (!(x > 0.0)) throw std::domain_error("gamma_fn requires a positive argument");
  return std::tgamma(x);
}

namespace {

// (l+1)^beta - l^beta without cancellation for large l.
double power_difference(double l, double beta) {
  if (l > 1e4) return std::pow(l, beta) * std::expm1(beta * std::log1p(1.0 / l));
  return std::pow(l + 1.0, beta) - std::pow(l, beta);
}

}  // namespace

L1Weights l1_weights(FractionalOrder alpha, int count) {
  if (count < 1) throw std::invalid_argument("l1_weights needs count >= 1");
  const double beta = 1.0 - alpha.value();
  L1Weights w{alpha, std::vector<double>(count)};
  for (int l = 0; l < count; ++l) w.a[l] = power_difference(l, beta);
  w.a[0] = 1.0;
  return w;
}

namespace {

// Shared pieces of the L2-1sigma rows. With g_q(x) = x^(q), the row entries
// are built from divided differences of x^(2-alpha) and x^(1-alpha) shifted
// by sigma.
struct L2SigmaBasis {
  double alpha, sigma, b1, b2;  // b1 = 1-alpha, b2 = 2-alpha

  double head() const {
    // c_0 for every n >= 2
    return (std::pow(1.0 + sigma, b2) - std::pow(sigma, b2)) / b2 -
           (std::pow(1.0 + sigma, b1) - std::pow(sigma, b1)) / 2.0;
  }
  double middle(int k) const {
    // c_k for 1 <= k <= n-2
    const double lo = k - 1 + sigma, mi = k + sigma, hi = k + 1 + sigma;
    return (std::pow(hi, b2) - 2.0 * std::pow(mi, b2) + std::pow(lo, b2)) / b2 -
           (std::pow(hi, b1) - 2.0 * std::pow(mi, b1) + std::pow(lo, b1)) / 2.0;
  }
  double tail(int n) const {
    // c_{n-1} for n >= 2
    const double lo = n - 2 + sigma, hi = n - 1 + sigma;
    return 0.5 * (3.0 * std::pow(hi, b1) - std::pow(lo, b1)) -
           (std::pow(hi, b2) - std::pow(lo, b2)) / b2;
  }
};

L2SigmaBasis basis_for(FractionalOrder alpha) {
  const double a = alpha.value();
  return {a, 1.0 - a / 2.0, 1.0 - a, 2.0 - a};
}

}  // namespace

L2SigmaWeightRow l2sigma_weight_row(FractionalOrder alpha, int n) {
  if (n < 1) throw std::invalid_argument("l2sigma_weight_row needs n >= 1");
  const L2SigmaBasis b = basis_for(alpha);
  L2SigmaWeightRow row{alpha, b.sigma, n, std::vector<double>(n)};
  if (n == 1) {
    row.c[0] = std::pow(b.sigma, b.b1);
    return row;
  }
  row.c[0] = b.head();
  for (int k = 1; k <= n - 2; ++k) row.c[k] = b.middle(k);
  row.c[n - 1] = b.tail(n);
  return row;
}

std::vector<L2SigmaWeightRow> l2sigma_weight_table(FractionalOrder alpha, int n_max) {
  if (n_max < 1) throw std::invalid_argument("l2sigma_weight_table needs n_max >= 1");
  const L2SigmaBasis b = basis_for(alpha);
  std::vector<double> middle(n_max > 2 ? n_max - 1 : 0);
  for (int k = 1; k <= n_max - 2; ++k) middle[k] = b.middle(k);

  std::vector<L2SigmaWeightRow> table;
  table.reserve(n_max);
  for (int n = 1; n <= n_max; ++n) {
    L2SigmaWeightRow row{alpha, b.sigma, n, std::vector<double>(n)};
    if (n == 1) {
      row.c[0] = std::pow(b.sigma, b.b1);
    } else {
      row.c[0] = b.head();
      for (int k = 1; k <= n - 2; ++k) row.c[k] = middle[k];
      row.c[n - 1] = b.tail(n);
    }
    table.push_back(std::move(row));
  }
  return table;
}

double caputo_l1(std::span<const double> samples, FractionalOrder alpha, double tau) {
  if (samples.size() < 2) throw std::invalid_argument("caputo_l1 needs at least 2 samples");
  if (!(tau > 0.0)) throw std::invalid_argument("caputo_l1 needs tau > 0");
  const int n = static_cast<int>(samples.size()) - 1;
  const L1Weights w = l1_weights(alpha, n);
  // Difference form of the same sum; cancels exactly on constant samples.
  double acc = 0.0;
  for (int l = 0; l <= n - 1; ++l) acc += w.a[l] * (samples[n - l] - samples[n - l - 1]);
  return acc * std::pow(tau, -alpha.value()) / gamma_fn(2.0 - alpha.value());
}

double caputo_l2sigma(std::span<const double> samples, FractionalOrder alpha, double tau) {
  if (samples.size() < 2) throw std::invalid_argument("caputo_l2sigma needs at least 2 samples");
  if (!(tau > 0.0)) throw std::invalid_argument("caputo_l2sigma needs tau > 0");
  const int n = static_cast<int>(samples.size()) - 1;
  const L2SigmaWeightRow row = l2sigma_weight_row(alpha, n);
  double acc = 0.0;
  for (int k = 0; k <= n - 1; ++k) acc += row.c[k] * (samples[n - k] - samples[n - k - 1]);
  return acc * std::pow(tau, -alpha.value()) / gamma_fn(2.0 - alpha.value());
}

double caputo_power_oracle(double p, FractionalOrder alpha, double t) {
  if (!(p > 0.0)) throw std::invalid_argument("caputo_power_oracle needs p > 0");
  if (t < 0.0) throw std::domain_error("caputo_power_oracle needs t >= 0");
  const double a = alpha.value();
  if (t == 0.0) {
    if (p > a) return 0.0;
    if (p == a) return gamma_fn(p + 1.0);
    throw std::domain_error("caputo_power_oracle diverges at t = 0 for p < alpha");
  }
  return gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - a) * std::pow(t, p - a);
}

namespace {

struct AdaptiveSimpson {
  const std::function<double(double)>& g;
  double tol;
  long budget;

  double segment(double a, double fa, double fm, double b, double fb) const {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  double refine(double a, double fa, double m, double fm, double b, double fb, double whole,
                double eps, int depth, double& best) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    if (budget < 2) throw ConvergenceError("quadrature subdivision budget exhausted", best);
    budget -= 2;
    const double flm = g(lm), frm = g(rm);
    const double left = segment(a, fa, flm, m, fm);
    const double right = segment(m, fm, frm, b, fb);
    const double delta = left + right - whole;
    best += delta;  // keep the running estimate current for error reporting
    if (depth > 48 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    best -= delta;
    const double lv = refine(a, fa, lm, flm, m, fm, left, 0.5 * eps, depth + 1, best);
    best += lv - left;
    const double rv = refine(m, fm, rm, frm, b, fb, right, 0.5 * eps, depth + 1, best);
    best += rv - right;
    return lv + rv;
  }
};

}  // namespace

double caputo_quadrature_oracle(const std::function<double(double)>& fprime,
                                FractionalOrder alpha, double t, double tol) {
  if (!(t > 0.0)) throw std::invalid_argument("caputo_quadrature_oracle needs t > 0");
  if (!(tol > 0.0)) throw std::invalid_argument("caputo_quadrature_oracle needs tol > 0");
  const double a = alpha.value();
  const double scale = 1.0 / (gamma_fn(1.0 - a) * (1.0 - a));
  const double p = 1.0 / (1.0 - a);
  auto g = std::function<double(double)>([&](double v) {
    double s = t - std::pow(v, p);
    if (s < 0.0) s = 0.0;  // roundoff at the upper endpoint
    if (s > t) s = t;
    return fprime(s);
  });

  const double hi = std::pow(t, 1.0 - a);
  AdaptiveSimpson quad{g, tol, 4'000'000};
  const double fa = g(0.0), fb = g(hi), fm = g(0.5 * hi);
  const double whole = quad.segment(0.0, fa, fm, hi, fb);
  double best = whole;
  double value;
  try {
    value = quad.refine(0.0, fa, 0.5 * hi, fm, hi, fb, whole, tol / scale, 0, best);
  } catch (const ConvergenceError&) {
    throw ConvergenceError("caputo_quadrature_oracle failed to converge", best * scale);
  }
  return value * scale;
}

}  // namespace pmnn
