#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>

#include "uspde/errors.hpp"

namespace uspde {

// Expansion basis. Chebyshev means first-kind T_k; Ultraspherical(lambda) means
// the Gegenbauer family C_k^(lambda) with lambda >= 1; Fourier means complex
// exponentials exp(i k pi x) on [-1, 1] ordered 0, +1, -1, +2, -2, ...
struct Basis {
  enum class Kind { Chebyshev, Ultraspherical, Fourier };
  Kind kind = Kind::Chebyshev;
  int lambda = 0;

  static Basis chebyshev() { return {Kind::Chebyshev, 0}; }
  static Basis ultraspherical(int lambda) {
    if (lambda < 1) throw InvalidArgument("Basis: ultraspherical requires lambda >= 1");
    return {Kind::Ultraspherical, lambda};
  }
  static Basis fourier() { return {Kind::Fourier, 0}; }

  bool operator==(const Basis& o) const { return kind == o.kind && lambda == o.lambda; }
  bool operator!=(const Basis& o) const { return !(*this == o); }
};

// A finite coefficient vector tagged with its basis. Polynomial bases store
// real coefficients; the Fourier basis stores complex ones.
struct CoeffSeries {
  Basis basis = Basis::chebyshev();
  Eigen::VectorXd coeffs;
  Eigen::VectorXcd fourier_coeffs;

  CoeffSeries() = default;
  CoeffSeries(Basis b, Eigen::VectorXd c) : basis(b), coeffs(std::move(c)) {
    if (b.kind == Basis::Kind::Fourier)
      throw InvalidArgument("CoeffSeries: Fourier basis takes complex coefficients");
  }
  CoeffSeries(Basis b, Eigen::VectorXcd c) : basis(b), fourier_coeffs(std::move(c)) {
    if (b.kind != Basis::Kind::Fourier)
      throw InvalidArgument("CoeffSeries: complex coefficients require Fourier basis");
  }

  Eigen::Index length() const {
    return basis.kind == Basis::Kind::Fourier ? fourier_coeffs.size() : coeffs.size();
  }
};

// Chebyshev points of the second kind, x_k = cos(k pi / (n-1)), strictly
// decreasing from 1 to -1. Requires n >= 2.
Eigen::VectorXd cheb_points(Eigen::Index n);

// Chebyshev interpolation coefficients from values on cheb_points(n) and back.
// The pair round-trips to a few ulps; power-of-two-plus-one sizes take an FFT
// path, other sizes a direct cosine sum.
Eigen::VectorXd vals_to_coeffs(const Eigen::VectorXd& vals);
Eigen::VectorXd coeffs_to_vals(const Eigen::VectorXd& coeffs);

// Pointwise evaluation by Clenshaw recurrence (polynomial bases) or by the
// complex exponential sum (Fourier; the real part is returned).
double evaluate(const CoeffSeries& s, double x);

// Plateau scan over a coefficient vector. Indices are 1-based: when found,
// 2 <= j <= j2 <= n. Vectors shorter than 17 never report a plateau.
struct PlateauResult {
  bool found = false;
  Eigen::Index j = 0;
  Eigen::Index j2 = 0;
};
PlateauResult plateau(const Eigen::VectorXd& u, double tol = 1e-14);

// Length adjustments. pad appends zeros (m >= length); chop keeps the first m
// coefficients (m <= length). Anything else throws.
Eigen::VectorXd pad(const Eigen::VectorXd& u, Eigen::Index m);
Eigen::VectorXd chop(const Eigen::VectorXd& u, Eigen::Index m);

// Samples f on doubling Chebyshev grids (sizes 2^k + 1, starting at or above
// max(n_start, 17)) until the transform shows a plateau, then chops to it.
// Throws ResolutionFailure when n_max is exceeded.
Eigen::VectorXd resolve_function(const std::function<double(double)>& f,
                                 double tol = 1e-14, Eigen::Index n_start = 17,
                                 Eigen::Index n_max = 1 << 16);

// Evaluation of a Gegenbauer basis polynomial C_k^(lambda) at x (three-term
// recurrence); shared by boundary functionals and tests.
double gegenbauer(int lambda, Eigen::Index k, double x);

}  // namespace uspde
