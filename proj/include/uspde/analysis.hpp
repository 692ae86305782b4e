#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "uspde/stepping.hpp"

namespace uspde {

// Dense stability-analysis matrices for the semi-discrete system u_t = K u.
// K's leading rows are (S_{N-1}...S_0)^{-1} L on the square truncation; its
// last N rows are replaced through the boundary-bordered identity V (identity
// on the first n - N coefficients, boundary functionals below), i.e.
// K = V^{-1} [top-rows; 0]. TransportQ and HeatG are the classical transport
// and heat instances; GeneralSL is the pure d^N/dx^N operator closed with
// Dirichlet-type conditions (values at both walls, then first derivatives).
struct AnalysisKind {
  enum class Tag { TransportQ, HeatG, GeneralSL };
  Tag tag = Tag::TransportQ;
  int order = 1;

  static AnalysisKind transport_q() { return {Tag::TransportQ, 1}; }
  static AnalysisKind heat_g() { return {Tag::HeatG, 2}; }
  static AnalysisKind general_sl(int order);

  std::string name() const;
};

struct AnalysisMatrix {
  AnalysisKind kind;
  Eigen::Index n = 0;
  Eigen::MatrixXd data;
};

AnalysisMatrix build_analysis_matrix(AnalysisKind kind, Eigen::Index n);

// Closed-form spectral radius bound where one is known: TransportQ admits
// (n-1)^2 sqrt(1/3 + 2/(3(n-1)^2)), HeatG (2/3) n (n-2) (n-1)^2. GeneralSL
// only has rho <= C n^{2N} with unfitted C; n^{2N} is returned so ratios
// against it read as the normalized radius.
double rho_bound(const AnalysisKind& kind, Eigen::Index n);

// Full dense eigensolve, capped at n = 2048.
double spectral_radius(const Eigen::MatrixXd& a);
double spectral_radius(const AnalysisMatrix& a);

// Spectral radii of the order-N matrices normalized by n^{-2N}; the sequence
// flattens to a constant as n grows.
struct RhoRow {
  Eigen::Index n = 0;
  double rho = 0;
  double normalized = 0;
};
std::vector<RhoRow> check_thm_rho(int order, const std::vector<Eigen::Index>& ns);

// Time steppers by name: forward-euler, backward-euler, trapezoid, ab2, ab4,
// bdf3 (multistep) and rk3, rk4 (Runge-Kutta), each through approach 1
// (bordered solve) or 2 (square solve plus boundary re-determination).
struct StepperChoice {
  std::string name = "rk3";
  int approach = 2;

  bool is_rk() const;
  LmmScheme lmm() const;  // multistep names only
  RkScheme rk() const;    // Runge-Kutta names only
  int history() const;    // vectors required before the first step
  void validate() const;
};

Eigen::VectorXd take_step(const ProblemSpec& p, const StepperChoice& s,
                          const StepState& st, double h);

// Largest stable / smallest unstable step size found on a sorted grid of
// candidate h, assuming stability is monotone in h (bisection over grid
// indices). A trial runs `steps` steps from u0 (multistep history built by
// Runge-Kutta substeps) and flags growth of the sup norm past growth_flag
// times its initial value; non-finite values flag immediately.
struct ThresholdResult {
  double h_stable = 0;    // 0 when even the smallest candidate grew
  double h_unstable = 0;  // +infinity when no candidate grew
  int trials = 0;
};
ThresholdResult stability_threshold_scan(const ProblemSpec& p,
                                         const StepperChoice& s,
                                         const Eigen::VectorXd& u0,
                                         std::vector<double> h_grid,
                                         int steps = 5000,
                                         double growth_flag = 1e3);

// Error against the exact solution recorded at every step, with a linear fit
// err ~ slope * k + intercept over the whole series. exact(t) supplies the
// exact coefficient vector; the multistep history is seeded from it so the
// series starts free of bootstrap error. Meaningful only when n and h suppress
// the discretization error below rounding.
struct GrowthResult {
  Eigen::VectorXd errors;  // sup-norm error at steps 0..K
  double slope = 0;
  double r2 = 0;
  double max_error = 0;
};
GrowthResult rounding_growth_experiment(
    const ProblemSpec& p, const StepperChoice& s, Eigen::Index n, double h,
    int steps, const std::function<Eigen::VectorXd(double)>& exact);

// Chebyshev collocation differentiation matrix on cheb_points(n) (order N = 1
// or 2, the square of the first-order matrix), negative-sum-trick diagonal.
// Cross-check oracle for coefficient-space differentiation; no boundary rows.
Eigen::MatrixXd collocation_oracle(int order, Eigen::Index n);

// Dense inf-norm of S_lambda^{-1} on the square truncation (norm-bound
// checks: <= n for lambda = 0, <= C_lambda n^2 above).
double conv_inv_inf_norm(int lambda, Eigen::Index n);

// Dense inf-norm of (S_{N-1}...S_0)^{-1} L, bounded by C n^{2N}.
double sl_inf_norm(const OperatorSpec& spec, Eigen::Index n);

// CSV reports. Rho rows: kind,n,rho,bound,ratio. Growth rows: stepper,k,error.
void write_rho_csv(std::ostream& out, const std::vector<AnalysisKind>& kinds,
                   const std::vector<Eigen::Index>& ns);
void write_growth_csv(std::ostream& out, const std::string& stepper,
                      const GrowthResult& g);

}  // namespace uspde
