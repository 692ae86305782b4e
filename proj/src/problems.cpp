#include "uspde/problems.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "uspde/errors.hpp"
#include "uspde/series.hpp"

namespace uspde {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

Preset preset_transport() {
  Preset ps;
  ps.problem.linear = OperatorSpec::constant({0.0, 1.0});
  ps.problem.boundary = {BoundaryCondition::dirichlet_right()};
  ps.initial = [](double x) { return std::exp(-200.0 * x * x); };
  return ps;
}

Preset preset_heat(double kappa) {
  Preset ps;
  ps.problem.linear = OperatorSpec::constant({0.0, 0.0, kappa});
  ps.problem.boundary = {BoundaryCondition::dirichlet_left(),
                         BoundaryCondition::dirichlet_right()};
  ps.initial = [](double x) { return std::sin(2.0 * kPi * x); };
  return ps;
}

Preset preset_variable_transport() {
  Preset ps;
  auto speed = [](double x) {
    double s = std::sin((x - 1.0) * (x - 1.0));
    return 0.6 + 3.0 * s * s;
  };
  ps.problem.linear = OperatorSpec::from_callables({nullptr, speed});
  ps.problem.boundary = {BoundaryCondition::dirichlet_right()};
  ps.initial = [](double x) {
    return std::exp(-400.0 * (x - 0.75) * (x - 0.75));
  };
  return ps;
}

Preset preset_fisher(double kappa) {
  Preset ps;
  ps.problem.linear = OperatorSpec::constant({0.0, 0.0, kappa});
  ps.problem.boundary = {BoundaryCondition::dirichlet_left(),
                         BoundaryCondition::dirichlet_right()};
  ps.problem.nonlinear = [](double, double, double u) { return u - u * u; };
  ps.initial = [](double x) {
    return 0.25 * (1.0 - std::tanh(40.0 * x / std::sqrt(6.0)));
  };
  return ps;
}

Eigen::VectorXd initial_coeffs(const std::function<double(double)>& f,
                               Eigen::Index n) {
  Eigen::VectorXd xs = cheb_points(n);
  Eigen::VectorXd vals(n);
  for (Eigen::Index i = 0; i < n; ++i) vals[i] = f(xs[i]);
  return vals_to_coeffs(vals);
}

Eigen::VectorXcd periodic_transport_diag(Eigen::Index n) {
  return fourier_diff_diag(1, n, kPi);
}

double periodic_initial(double x) { return std::exp(std::sin(kPi * x)); }

Eigen::VectorXcd periodic_initial_coeffs(const std::function<double(double)>& f,
                                         Eigen::Index n) {
  if (n < 1 || n % 2 == 0)
    throw InvalidArgument("periodic_initial_coeffs: n must be odd");
  // Direct DFT of samples on x_j = -1 + 2j/n. n stays small enough here that
  // the O(n^2) sum is immaterial.
  Eigen::VectorXcd c(n);
  const std::complex<double> im(0.0, 1.0);
  for (Eigen::Index s = 0; s < n; ++s) {
    Eigen::Index k = (s + 1) / 2;             // wavenumber magnitude
    double sign = (s == 0 || s % 2 == 1) ? 1.0 : -1.0;
    double kk = sign * static_cast<double>(k);
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      double x = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(n);
      acc += f(x) * std::exp(-im * (kPi * kk * x));
    }
    c[s] = acc / static_cast<double>(n);
  }
  return c;
}

}  // namespace uspde
