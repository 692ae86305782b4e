#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uspde/factor_cache.hpp"
#include "uspde/operators.hpp"

namespace uspde {

// Linear multistep scheme sum_j alpha_j u^{k+j} = h sum_j beta_j f^{k+j},
// normalized so alpha[r] = 1. Explicit iff beta[r] = 0.
struct LmmScheme {
  std::string name;
  int r = 1;
  Eigen::VectorXd alpha, beta;  // length r + 1

  bool is_explicit() const { return beta[r] == 0.0; }
  void validate() const;

  static LmmScheme forward_euler();
  static LmmScheme ab2();
  static LmmScheme ab4();
  static LmmScheme bdf3();
  static LmmScheme backward_euler();
  static LmmScheme trapezoid();
};

// Chained explicit Runge-Kutta scheme: stage j sees only the previous stage,
// y_j = h f(t + theta_j h, v + mu_j y_{j-1}), v+ = v + sum_j gamma_j y_j.
struct RkScheme {
  std::string name;
  int s = 1;
  Eigen::VectorXd theta, mu, gamma;  // length s; theta[0] = mu[0] = 0

  void validate() const;

  static RkScheme forward_euler();
  static RkScheme rk3();  // Heun's third-order method
  static RkScheme rk4();  // classical fourth-order method in chained form
};

// Pointwise semilinear term N(t, x, u). Null means a linear problem.
using Nonlinearity = std::function<double(double, double, double)>;

// A time-dependent problem u_t = L u + N(t, x, u) with boundary rows, posed on
// Chebyshev coefficients ([-1, 1], non-periodic).
struct ProblemSpec {
  OperatorSpec linear;
  std::vector<BoundaryCondition> boundary;
  Nonlinearity nonlinear;  // optional

  // Identity for factorization caching; fresh per constructed problem.
  std::uint64_t cache_tag = next_cache_id();

  void validate() const;
};

// Rolling stepper state: the last vectors (oldest first, all the same length)
// and the time of the newest one.
struct StepState {
  std::vector<Eigen::VectorXd> history;
  double t = 0;

  Eigen::Index n() const { return history.empty() ? 0 : history.back().size(); }
};

// Samples the nonlinearity on doubling Chebyshev grids (sizes 2^k + 1,
// starting at or above max(u.size(), 17)) until the transform plateaus, chops,
// and converts to C^(order) coefficients (order = 0 keeps the T basis).
Eigen::VectorXd eval_nonlinear(const Nonlinearity& f, double t,
                               const Eigen::VectorXd& u, int order,
                               double tol = 1e-14, Eigen::Index n_max = 1 << 16);

// One step of the bordered formulation: boundary rows stacked on the
// rectangular main equation, solved as one almost-banded system.
Eigen::VectorXd step_a1_lmm(const ProblemSpec& p, const LmmScheme& sch,
                            const StepState& st, double h);
Eigen::VectorXd step_a1_rk(const ProblemSpec& p, const RkScheme& sch,
                           const StepState& st, double h);

// One step of the square formulation: boundary rows ignored during the solve,
// then the trailing coefficients are re-determined (bc_correct).
Eigen::VectorXd step_a2_lmm(const ProblemSpec& p, const LmmScheme& sch,
                            const StepState& st, double h);
Eigen::VectorXd step_a2_rk(const ProblemSpec& p, const RkScheme& sch,
                           const StepState& st, double h);

// Replaces the last N entries of u so the boundary rows hold exactly; the
// leading entries are untouched.
Eigen::VectorXd bc_correct(Eigen::VectorXd u, const ProblemSpec& p);

// Steady solve L u = g with the boundary rows stacked on top. g holds C^(N)
// coefficients of the right-hand side (padded/chopped to fit).
Eigen::VectorXd solve_bvp(const OperatorSpec& spec,
                          const std::vector<BoundaryCondition>& bcs,
                          const Eigen::VectorXd& g, Eigen::Index n);

// Builds LMM startup history from a single initial vector by RK3 substeps of
// the same h and approach; returns a state ready for an r-step scheme.
StepState bootstrap_history(const ProblemSpec& p, int r, int approach,
                            const Eigen::VectorXd& u0, double t0, double h);

// Periodic problems: the Fourier basis diagonalizes constant-coefficient
// operators, so steppers act elementwise on the diagonal ldiag.
Eigen::VectorXcd step_periodic_lmm(const LmmScheme& sch,
                                   const std::vector<Eigen::VectorXcd>& history,
                                   const Eigen::VectorXcd& ldiag, double h);

// Drops cached assembled operators. Factorizations live in FactorCache and are
// cleared separately; call both when resetting the cache counters.
void clear_step_plans();

}  // namespace uspde
