#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "uspde/banded.hpp"
#include "uspde/series.hpp"

namespace uspde {

// Sparse spectral calculus for Chebyshev/ultraspherical coefficient spaces.
// Conventions: D_lambda maps Chebyshev T coefficients to C^(lambda)
// coefficients (D_0 = identity); S_0 maps T to C^(1) and S_lambda maps
// C^(lambda) to C^(lambda+1); M_lambda[a] multiplies by a(x) within C^(lambda)
// (lambda = 0 meaning the T basis itself).

// Differentiation: single diagonal at offset lambda with entries
// 2^(lambda-1) (lambda-1)! (lambda, lambda+1, ...). Shape rows x cols; the
// canonical exact truncation is (n - lambda) x n.
BandedMatrix<double> diff_op(int lambda, Eigen::Index rows, Eigen::Index cols);
BandedMatrix<double> diff_op(int lambda, Eigen::Index n);

// Conversion: two diagonals. S_0 has diag {1, 1/2, 1/2, ...} and offset-2
// {-1/2, ...}; S_lambda has diag lambda/(lambda+k) and offset-2
// -lambda/(lambda+k+2).
BandedMatrix<double> conv_op(int lambda, Eigen::Index rows, Eigen::Index cols);
BandedMatrix<double> conv_op(int lambda, Eigen::Index n);

// Applies S_lambda^{-1} by back substitution on the square truncation; never
// forms a dense inverse.
void conv_inv_apply(int lambda, Eigen::VectorXd& v);
Eigen::VectorXd conv_inv(int lambda, const Eigen::VectorXd& v);

// The product S_{order-1} ... S_0 truncated to rows x cols. Intermediate
// heights grow by 2 per factor but never beyond cols, which keeps the
// truncated product equal to the truncation of the product.
BandedMatrix<double> conv_chain(int order, Eigen::Index rows, Eigen::Index cols);

// Multiplication by a(x) given by coefficients a in the C^(lambda) basis
// (lambda = 0: T basis, classical product rule; lambda >= 1: the c_s^lambda
// entry formula). Bandwidth equals deg(a).
BandedMatrix<double> mult_op(int lambda, const Eigen::VectorXd& a,
                             Eigen::Index rows, Eigen::Index cols);
BandedMatrix<double> mult_op(int lambda, const Eigen::VectorXd& a, Eigen::Index n);

// A linear differential operator sum_lambda a^lambda(x) d^lambda/dx^lambda.
// coeff[lambda] holds the expansion of a^lambda in C^(lambda) (C^(0) = T).
struct OperatorSpec {
  int order = 0;
  std::vector<Eigen::VectorXd> coeff;

  // Constant-coefficient operator: c[lambda] scales d^lambda/dx^lambda.
  static OperatorSpec constant(const std::vector<double>& c);
  // Variable coefficients as callables; each is resolved to a Chebyshev
  // series and converted up to its C^(lambda) basis. A null entry means zero.
  static OperatorSpec from_callables(
      const std::vector<std::function<double(double)>>& c, double tol = 1e-14);

  void validate() const;
};

// Exact truncation of the assembled operator: maps n Chebyshev coefficients
// to C^(order) coefficients. square selects n x n (time-stepping form)
// instead of the canonical (n - order) x n.
BandedMatrix<double> assemble_op(const OperatorSpec& spec, Eigen::Index n,
                                 bool square = false);

// Boundary functionals as dense rows of T_k functional values.
enum class BoundaryKind {
  DirichletLeft,
  DirichletRight,
  NeumannLeft,
  NeumannRight,
  Custom  // derivative of order deriv evaluated at x0
};

struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::DirichletRight;
  double value = 0;  // right-hand side of the condition
  int deriv = 0;     // Custom only
  double x0 = 0;     // Custom only

  static BoundaryCondition dirichlet_left(double v = 0) {
    return {BoundaryKind::DirichletLeft, v, 0, -1};
  }
  static BoundaryCondition dirichlet_right(double v = 0) {
    return {BoundaryKind::DirichletRight, v, 0, 1};
  }
  static BoundaryCondition neumann_left(double v = 0) {
    return {BoundaryKind::NeumannLeft, v, 1, -1};
  }
  static BoundaryCondition neumann_right(double v = 0) {
    return {BoundaryKind::NeumannRight, v, 1, 1};
  }
  static BoundaryCondition custom(int deriv, double x0, double v = 0) {
    return {BoundaryKind::Custom, v, deriv, x0};
  }
};

Eigen::RowVectorXd boundary_row(const BoundaryCondition& bc, Eigen::Index n);

// Stacked boundary rows and their right-hand sides.
Eigen::MatrixXd boundary_rows(const std::vector<BoundaryCondition>& bcs,
                              Eigen::Index n);
Eigen::VectorXd boundary_values(const std::vector<BoundaryCondition>& bcs);

// Fourier differentiation diagonal for odd n in the ordering 0, +1, -1, ...:
// entry for wavenumber k is (i k scale)^lambda. scale = pi differentiates
// period-2 series on [-1, 1].
Eigen::VectorXcd fourier_diff_diag(int lambda, Eigen::Index n, double scale = 1.0);

}  // namespace uspde
