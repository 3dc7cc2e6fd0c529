#include "pmnn/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace pmnn {

FractionalIVP example1(double alpha) {
  FractionalIVP p{FractionalOrder(alpha)};
  p.horizon = 1.0;
  p.spatial_dim = 0;
  p.operator_L = OperatorKind::NegIdentity;
  const double fc = gamma_fn(6.0 + alpha) / 120.0;
  p.forcing = [fc, alpha](std::span<const double>, double t) {
    return fc * std::pow(t, 5.0) + std::pow(t, 5.0 + alpha);
  };
  p.initial = [](std::span<const double>) { return 0.0; };
  p.exact_solution = [alpha](std::span<const double>, double t) {
    return std::pow(t, 5.0 + alpha);
  };
  return p;
}

FractionalIVP example2(double alpha) {
  FractionalIVP p{FractionalOrder(alpha)};
  p.horizon = 1.0;
  p.spatial_dim = 1;
  p.spatial_domain[0] = {0.0, 1.0};
  p.operator_L = OperatorKind::SecondDerivX;
  p.forcing = [](std::span<const double>, double) { return 0.0; };
  const double g1 = gamma_fn(1.0 + alpha);
  const auto exact = [alpha, g1](std::span<const double> x, double t) {
    return x[0] * x[0] + 2.0 * std::pow(t, alpha) / g1;
  };
  p.exact_solution = exact;
  p.boundary = exact;
  p.initial = [](std::span<const double> x) { return x[0] * x[0]; };
  return p;
}

FractionalIVP example3(double alpha) {
  FractionalIVP p{FractionalOrder(alpha)};
  p.horizon = 1.0;
  p.spatial_dim = 2;
  p.spatial_domain = {{{0.0, 1.0}, {0.0, 1.0}}};
  p.operator_L = OperatorKind::LaplacianXY;
  const double g3 = gamma_fn(3.0 - alpha);
  p.forcing = [alpha, g3](std::span<const double> x, double t) {
    return (2.0 * std::pow(t, 2.0 - alpha) / g3 - 2.0 * t * t) * std::exp(x[0] + x[1]);
  };
  const auto exact = [](std::span<const double> x, double t) {
    return t * t * std::exp(x[0] + x[1]);
  };
  p.exact_solution = exact;
  p.boundary = exact;
  p.initial = [](std::span<const double>) { return 0.0; };
  return p;
}

FractionalIVP example_by_id(int id, double alpha) {
  switch (id) {
    case 1: return example1(alpha);
    case 2: return example2(alpha);
    case 3: return example3(alpha);
  }
  throw std::invalid_argument("unknown example id (expected 1, 2 or 3)");
}

}  // namespace pmnn
