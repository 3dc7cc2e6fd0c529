#pragma once

#include "pmnn/problem.hpp"

namespace pmnn {

/// Scalar equation D^alpha u = -u + f on (0,1] with
/// f(t) = Gamma(6+alpha)/120 t^5 + t^{5+alpha}, u(0) = 0,
/// exact solution u(t) = t^{5+alpha}.
FractionalIVP example1(double alpha);

/// Subdiffusion in 1D: D^alpha u = u_xx on [0,1]x(0,1], zero forcing,
/// u(x,0) = x^2, Dirichlet data from the exact solution
/// u(x,t) = x^2 + 2 t^alpha / Gamma(1+alpha).
FractionalIVP example2(double alpha);

/// Subdiffusion in 2D: D^alpha u = Laplacian u + f on [0,1]^2 x (0,1] with
/// f(x,y,t) = (2 t^{2-alpha}/Gamma(3-alpha) - 2 t^2) e^{x+y}, u(x,y,0) = 0,
/// exact solution u(x,y,t) = t^2 e^{x+y}.
FractionalIVP example3(double alpha);

/// id in {1,2,3}; anything else is an invalid-argument error.
FractionalIVP example_by_id(int id, double alpha);

}  // namespace pmnn
