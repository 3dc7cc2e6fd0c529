#pragma once

#include <functional>
#include <span>
#include <vector>

namespace pmnn {

/// Fractional differentiation order restricted to the open interval (0,1),
/// the subdiffusive range of the Caputo derivative.
class FractionalOrder {
 public:
  explicit FractionalOrder(double alpha);

  double value() const noexcept { return alpha_; }

 private:
  double alpha_;
};

/// Uniform time grid t_k = k*tau for k = 0..N with tau = T/N.
struct TimeGrid {
  TimeGrid(double horizon, int steps);

  double T;
  int N;
  double tau;
  std::vector<double> nodes;
};

/// L1 quadrature weights a_l = (l+1)^(1-alpha) - l^(1-alpha).
///
/// a[0] = 1 exactly, the sequence is positive and strictly decreasing,
/// and a[l] < (1-alpha) * l^(-alpha) for l >= 1.
struct L1Weights {
  FractionalOrder alpha;
  std::vector<double> a;
};

/// Row n of the L2-1sigma coefficient table, sigma = 1 - alpha/2.
///
/// The quadrature built from this row approximates the Caputo derivative at
/// the off-grid point t_{n-1+sigma}, not at the node t_n.
struct L2SigmaWeightRow {
  FractionalOrder alpha;
  double sigma;
  int n;
  std::vector<double> c;
};

/// Euler gamma function for x > 0, accurate to at least 14 significant digits.
double gamma_fn(double x);

L1Weights l1_weights(FractionalOrder alpha, int count);

L2SigmaWeightRow l2sigma_weight_row(FractionalOrder alpha, int n);

/// All rows 1..n_max, sharing the interior coefficients that rows have in
/// common. Row n lives at index n-1. Intended to be computed once per
/// (alpha, grid) and reused across training iterations.
std::vector<L2SigmaWeightRow> l2sigma_weight_table(FractionalOrder alpha, int n_max);

/// Discrete Caputo derivative of the sampled function at t_n (L1 formula):
///
///   tau^(-alpha)/Gamma(2-alpha) * [ a_0 f(t_n)
///       - sum_{k=1}^{n-1} (a_{n-k-1} - a_{n-k}) f(t_k) - a_{n-1} f(t_0) ]
///
/// `samples` holds f(t_0)..f(t_n) on a uniform grid of spacing tau.
/// Exact for affine f; order 2-alpha for smooth f.
double caputo_l1(std::span<const double> samples, FractionalOrder alpha, double tau);

/// Discrete Caputo derivative at the superconvergent point t_{n-1+sigma}
/// (L2-1sigma formula):
///
///   tau^(-alpha)/Gamma(2-alpha) * sum_{k=0}^{n-1} c_k^{(n)} [f(t_{n-k}) - f(t_{n-k-1})]
///
/// Exact for quadratic f; order 3-alpha for smooth f.
double caputo_l2sigma(std::span<const double> samples, FractionalOrder alpha, double tau);

/// Closed-form Caputo derivative of t^p:  Gamma(p+1)/Gamma(p+1-alpha) * t^(p-alpha).
double caputo_power_oracle(double p, FractionalOrder alpha, double t);

/// Caputo derivative by adaptive quadrature of
///
///   1/Gamma(1-alpha) * integral_0^t (t-s)^(-alpha) f'(s) ds.
///
/// The substitution s = t - v^(1/(1-alpha)) removes the endpoint singularity
/// exactly, so the integrand seen by the quadrature is smooth whenever f' is.
/// Absolute error of the result is at most `tol`; exhausting the subdivision
/// budget raises ConvergenceError carrying the best estimate.
double caputo_quadrature_oracle(const std::function<double(double)>& fprime,
                                FractionalOrder alpha, double t, double tol);

}  // namespace pmnn
