#pragma once

#include "uspde/stepping.hpp"

namespace uspde {

// Named model problems shared by the runner and the experiment suite. Each
// preset pairs a ProblemSpec with its conventional initial profile.
struct Preset {
  ProblemSpec problem;
  std::function<double(double)> initial;
};

// u_t = u_x, u(1, t) = 0, pulse exp(-200 x^2).
Preset preset_transport();

// u_t = kappa u_xx, u(-1, t) = u(1, t) = 0, profile sin(2 pi x).
Preset preset_heat(double kappa = 1.0);

// u_t = c(x) u_x with c(x) = 3/5 + 3 sin^2((x-1)^2), u(1, t) = 0,
// pulse exp(-400 (x - 0.75)^2). The speed varies with x, so the pulse deforms
// as it travels left and the resolution it needs changes over time.
Preset preset_variable_transport();

// Fisher: u_t = kappa u_xx + u - u^2, u(-1, t) = u(1, t) = 0,
// front (1 - tanh(40 x / sqrt(6))) / 4.
Preset preset_fisher(double kappa = 1e-3);

// Interpolation coefficients of f at cheb_points(n): exactly n coefficients,
// no plateau detection. Use resolve_function for adaptive resolution.
Eigen::VectorXd initial_coeffs(const std::function<double(double)>& f,
                               Eigen::Index n);

// Periodic transport u_t = u_x on [-1, 1]: the Fourier discretization is the
// diagonal (i pi k) in the ordering 0, +1, -1, ... (odd n).
Eigen::VectorXcd periodic_transport_diag(Eigen::Index n);

// Smooth periodic profile exp(sin(pi x)).
double periodic_initial(double x);

// Fourier interpolation coefficients of f on the equispaced grid
// x_j = -1 + 2j/n (odd n), same ordering as the diagonal.
Eigen::VectorXcd periodic_initial_coeffs(const std::function<double(double)>& f,
                                         Eigen::Index n);

}  // namespace uspde
