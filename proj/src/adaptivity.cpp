#include "uspde/adaptivity.hpp"

#include <cmath>
#include <set>

#include "uspde/errors.hpp"
#include "uspde/series.hpp"

namespace uspde {

void AdaptConfig::validate() const {
  if (n_min < 17) throw InvalidArgument("AdaptConfig: n_min >= 17 required");
  if (n_max > (1 << 16) || n_max < n_min)
    throw InvalidArgument("AdaptConfig: need n_min <= n_max <= 65536");
  if (!(tol > 0.0 && tol < 1.0))
    throw InvalidArgument("AdaptConfig: tol must lie in (0, 1)");
}

std::vector<Eigen::VectorXd> history_align(
    const std::vector<Eigen::VectorXd>& history, Eigen::Index n_target) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(history.size());
  for (const auto& v : history) out.push_back(pad(v, n_target));
  return out;
}

namespace {

// Rough explicit-stability ceiling on h at size n, from the spectral-radius
// bounds for first- and second-order operators scaled by the magnitude of the
// leading coefficient. Heuristic: only used to flag, never to reject.
bool h_beyond_heuristic(const ProblemSpec& p, double h, Eigen::Index n) {
  const int N = p.linear.order;
  double amp = p.linear.coeff[N].lpNorm<Eigen::Infinity>();
  if (amp == 0.0) return false;
  double rho;
  double m = static_cast<double>(n);
  if (N == 1)
    rho = (m - 1) * (m - 1) * std::sqrt(1.0 / 3 + 2.0 / (3 * (m - 1) * (m - 1)));
  else if (N == 2)
    rho = (2.0 / 3) * m * (m - 2) * (m - 1) * (m - 1);
  else
    return false;  // no bound available beyond second order
  return h * rho * amp > 2.5;
}

template <typename StepFn>
AdaptResult adapt_impl(const ProblemSpec& p, bool explicit_scheme,
                       const StepState& st, double h, const AdaptConfig& cfg,
                       StepFn&& step_at) {
  cfg.validate();
  if (st.history.empty())
    throw InvalidArgument("adapt_step: empty history");
  Eigen::Index len = cfg.n_min;
  for (const auto& v : st.history) len = std::max(len, v.size());

  AdaptResult out;
  for (;;) {
    StepState local;
    local.t = st.t;
    local.history = history_align(st.history, len);
    Eigen::VectorXd u = step_at(local, h);
    PlateauResult pr = plateau(u, cfg.tol);
    if (pr.found) {
      out.u = chop(u, cfg.keep_plateau ? pr.j2 : pr.j);
      out.n_used = len;
      out.j = pr.j;
      out.j2 = pr.j2;
      return out;
    }
    if (2 * len > cfg.n_max)
      throw ResolutionFailure("adapt_step: no plateau within the size cap");
    len *= 2;
    ++out.doublings;
    if (explicit_scheme && h_beyond_heuristic(p, h, len))
      out.stability_warning = true;
  }
}

}  // namespace

AdaptResult adapt_step(const ProblemSpec& p, const LmmScheme& sch,
                       const StepState& st, double h, const AdaptConfig& cfg,
                       int approach) {
  if (approach != 1 && approach != 2)
    throw InvalidArgument("adapt_step: approach must be 1 or 2");
  return adapt_impl(p, sch.is_explicit(), st, h, cfg,
                    [&](const StepState& s, double hh) {
                      return approach == 1 ? step_a1_lmm(p, sch, s, hh)
                                           : step_a2_lmm(p, sch, s, hh);
                    });
}

AdaptResult adapt_step(const ProblemSpec& p, const RkScheme& sch,
                       const StepState& st, double h, const AdaptConfig& cfg,
                       int approach) {
  if (approach != 1 && approach != 2)
    throw InvalidArgument("adapt_step: approach must be 1 or 2");
  return adapt_impl(p, true, st, h, cfg, [&](const StepState& s, double hh) {
    return approach == 1 ? step_a1_rk(p, sch, s, hh)
                         : step_a2_rk(p, sch, s, hh);
  });
}

AdaptRunResult run_adaptive(const ProblemSpec& p, const LmmScheme& sch,
                            const Eigen::VectorXd& u0, double t0, double h,
                            int steps, const AdaptConfig& cfg, int approach) {
  AdaptRunResult run;
  // Multistep startup is generated at the initial length; adaptation begins
  // with the first full step.
  run.state = bootstrap_history(p, sch.r, approach, u0, t0, h);
  run.sizes.reserve(steps);
  std::set<Eigen::Index> tried;
  if (sch.r > 1) tried.insert(run.state.n());  // bootstrap solves
  for (int k = 0; k < steps; ++k) {
    Eigen::Index base = cfg.n_min;
    for (const auto& v : run.state.history) base = std::max(base, v.size());
    AdaptResult res = adapt_step(p, sch, run.state, h, cfg, approach);
    for (int d = 0; d <= res.doublings; ++d) tried.insert(base << d);
    if (res.stability_warning) ++run.warnings;
    run.state.history.push_back(std::move(res.u));
    if (run.state.history.size() > static_cast<size_t>(sch.r))
      run.state.history.erase(run.state.history.begin());
    run.state.t += h;
    run.sizes.push_back(run.state.history.back().size());
  }
  run.attempted.assign(tried.begin(), tried.end());
  return run;
}

}  // namespace uspde
