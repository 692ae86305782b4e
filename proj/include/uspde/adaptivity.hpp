#pragma once

#include "uspde/stepping.hpp"

namespace uspde {

// Controls for adaptive truncation selection.
struct AdaptConfig {
  double tol = 1e-14;
  Eigen::Index n_min = 17;
  Eigen::Index n_max = 1 << 16;
  // Step results keep all coefficients through the end of the detected
  // plateau (j2); switch off to chop at its start (j) instead.
  bool keep_plateau = true;

  void validate() const;
};

struct AdaptResult {
  Eigen::VectorXd u;          // accepted step, chopped per config
  Eigen::Index n_used = 0;    // truncation at which the step was accepted
  int doublings = 0;          // re-steps at doubled size before acceptance
  Eigen::Index j = 0, j2 = 0; // plateau indices at acceptance
  // Set when, after a doubling, h exceeds a rough explicit-stability bound
  // for the new size; the step still proceeds.
  bool stability_warning = false;
};

// Pads every history vector with zeros to n_target (never truncates).
std::vector<Eigen::VectorXd> history_align(
    const std::vector<Eigen::VectorXd>& history, Eigen::Index n_target);

// One adaptive step: advance at the current length, accept on plateau, else
// zero-pad the history to twice the length and re-step.
AdaptResult adapt_step(const ProblemSpec& p, const LmmScheme& sch,
                       const StepState& st, double h, const AdaptConfig& cfg,
                       int approach = 1);
AdaptResult adapt_step(const ProblemSpec& p, const RkScheme& sch,
                       const StepState& st, double h, const AdaptConfig& cfg,
                       int approach = 1);

// Fixed-count adaptive run; records the accepted length at every step.
struct AdaptRunResult {
  StepState state;
  std::vector<Eigen::Index> sizes;
  // Distinct truncations at which a solve ran (ascending), including rejected
  // attempts; with a warm cache each contributes exactly one factorization.
  std::vector<Eigen::Index> attempted;
  int warnings = 0;
};

AdaptRunResult run_adaptive(const ProblemSpec& p, const LmmScheme& sch,
                            const Eigen::VectorXd& u0, double t0, double h,
                            int steps, const AdaptConfig& cfg, int approach = 1);

}  // namespace uspde
