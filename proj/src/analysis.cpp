#include "uspde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "uspde/errors.hpp"
#include "uspde/series.hpp"

namespace uspde {

namespace {

// Boundary functionals closing a pure d^N/dx^N operator: wall values first,
// then wall derivatives, alternating right/left so N = 1 is the transport
// closure and N = 2 the heat closure.
std::vector<BoundaryCondition> closure_conditions(int order) {
  std::vector<BoundaryCondition> bcs = {BoundaryCondition::dirichlet_right(),
                                        BoundaryCondition::dirichlet_left(),
                                        BoundaryCondition::neumann_right(),
                                        BoundaryCondition::neumann_left()};
  bcs.resize(order);
  return bcs;
}

}  // namespace

AnalysisKind AnalysisKind::general_sl(int order) {
  if (order < 1 || order > 4)
    throw InvalidArgument("AnalysisKind: differentiation order must be 1..4");
  return {Tag::GeneralSL, order};
}

std::string AnalysisKind::name() const {
  switch (tag) {
    case Tag::TransportQ: return "transport-q";
    case Tag::HeatG: return "heat-g";
    default: return "sl" + std::to_string(order);
  }
}

AnalysisMatrix build_analysis_matrix(AnalysisKind kind, Eigen::Index n) {
  const int N = kind.order;
  if (n < 4 || n <= N + 1)
    throw InvalidArgument("build_analysis_matrix: n too small");

  // Leading block: (S_{N-1}...S_0)^{-1} D_N on the square truncation. The
  // conversion chain is upper triangular, so a band-aware back substitution
  // would do; dense solves keep this desk-scale code simple.
  Eigen::MatrixXd l = diff_op(N, n, n).to_dense();
  Eigen::MatrixXd chain = conv_chain(N, n, n).to_dense();
  Eigen::MatrixXd m = chain.triangularView<Eigen::Upper>().solve(l);

  // Bordered identity V = [I 0; B]: the inverse carries -Br^{-1}Bl into the
  // last N rows; the rows they replace vanish for a pure derivative.
  Eigen::MatrixXd b = boundary_rows(closure_conditions(N), n);
  Eigen::MatrixXd k(n, n);
  k.topRows(n - N) = m.topRows(n - N);
  k.bottomRows(N) = b.rightCols(N).partialPivLu().solve(
      -b.leftCols(n - N) * m.topRows(n - N));
  return {kind, n, std::move(k)};
}

double rho_bound(const AnalysisKind& kind, Eigen::Index n) {
  double nn = static_cast<double>(n);
  switch (kind.tag) {
    case AnalysisKind::Tag::TransportQ:
      return (nn - 1) * (nn - 1) *
             std::sqrt(1.0 / 3 + 2.0 / (3 * (nn - 1) * (nn - 1)));
    case AnalysisKind::Tag::HeatG:
      return 2.0 / 3 * nn * (nn - 2) * (nn - 1) * (nn - 1);
    default:
      return std::pow(nn, 2.0 * kind.order);
  }
}

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw InvalidArgument("spectral_radius: square nonempty matrix required");
  if (a.rows() > 2048)
    throw InvalidArgument("spectral_radius: dense eigensolve capped at n = 2048");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("spectral_radius: eigensolver did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const AnalysisMatrix& a) { return spectral_radius(a.data); }

std::vector<RhoRow> check_thm_rho(int order, const std::vector<Eigen::Index>& ns) {
  AnalysisKind kind = AnalysisKind::general_sl(order);
  std::vector<RhoRow> rows;
  rows.reserve(ns.size());
  for (Eigen::Index n : ns) {
    double rho = spectral_radius(build_analysis_matrix(kind, n));
    rows.push_back({n, rho, rho / std::pow(static_cast<double>(n), 2.0 * order)});
  }
  return rows;
}

bool StepperChoice::is_rk() const { return name == "rk3" || name == "rk4"; }

LmmScheme StepperChoice::lmm() const {
  if (name == "forward-euler") return LmmScheme::forward_euler();
  if (name == "backward-euler") return LmmScheme::backward_euler();
  if (name == "trapezoid") return LmmScheme::trapezoid();
  if (name == "ab2") return LmmScheme::ab2();
  if (name == "ab4") return LmmScheme::ab4();
  if (name == "bdf3") return LmmScheme::bdf3();
  throw InvalidArgument("StepperChoice: unknown multistep scheme '" + name + "'");
}

RkScheme StepperChoice::rk() const {
  if (name == "rk3") return RkScheme::rk3();
  if (name == "rk4") return RkScheme::rk4();
  throw InvalidArgument("StepperChoice: unknown Runge-Kutta scheme '" + name + "'");
}

int StepperChoice::history() const { return is_rk() ? 1 : lmm().r; }

void StepperChoice::validate() const {
  if (approach != 1 && approach != 2)
    throw InvalidArgument("StepperChoice: approach must be 1 or 2");
  if (!is_rk()) lmm();  // throws on unknown names
}

Eigen::VectorXd take_step(const ProblemSpec& p, const StepperChoice& s,
                          const StepState& st, double h) {
  s.validate();
  if (s.is_rk()) {
    RkScheme sch = s.rk();
    return s.approach == 1 ? step_a1_rk(p, sch, st, h) : step_a2_rk(p, sch, st, h);
  }
  LmmScheme sch = s.lmm();
  return s.approach == 1 ? step_a1_lmm(p, sch, st, h) : step_a2_lmm(p, sch, st, h);
}

namespace {

// Runs one stability trial; true means the sup norm left the growth band or
// stopped being finite (thrown solver errors count as growth: a blown-up
// iterate can surface as a singular correction block).
bool trial_grows(const ProblemSpec& p, const StepperChoice& s,
                 const Eigen::VectorXd& u0, double h, int steps, double flag) {
  const double base = u0.lpNorm<Eigen::Infinity>();
  const int r = s.history();
  StepState st;
  try {
    st = r > 1 ? bootstrap_history(p, r, s.approach, u0, 0.0, h)
               : StepState{{u0}, 0.0};
    for (const Eigen::VectorXd& v : st.history)
      if (!v.allFinite() || v.lpNorm<Eigen::Infinity>() > flag * base) return true;
    for (int k = 0; k < steps; ++k) {
      Eigen::VectorXd next = take_step(p, s, st, h);
      if (!next.allFinite() || next.lpNorm<Eigen::Infinity>() > flag * base)
        return true;
      st.history.push_back(std::move(next));
      if (static_cast<int>(st.history.size()) > r)
        st.history.erase(st.history.begin());
      st.t += h;
    }
  } catch (const Error&) {
    return true;
  }
  return false;
}

}  // namespace

ThresholdResult stability_threshold_scan(const ProblemSpec& p,
                                         const StepperChoice& s,
                                         const Eigen::VectorXd& u0,
                                         std::vector<double> h_grid, int steps,
                                         double growth_flag) {
  if (h_grid.empty()) throw InvalidArgument("threshold scan: empty step grid");
  std::sort(h_grid.begin(), h_grid.end());
  if (h_grid.front() <= 0)
    throw InvalidArgument("threshold scan: step sizes must be positive");
  if (u0.lpNorm<Eigen::Infinity>() == 0.0)
    throw InvalidArgument("threshold scan: zero initial state cannot grow");

  ThresholdResult res;
  res.h_unstable = std::numeric_limits<double>::infinity();
  auto grows = [&](std::size_t i) {
    ++res.trials;
    return trial_grows(p, s, u0, h_grid[i], steps, growth_flag);
  };

  std::size_t lo = 0, hi = h_grid.size() - 1;
  if (grows(lo)) {
    res.h_stable = 0;
    res.h_unstable = h_grid[lo];
    return res;
  }
  if (hi == lo || !grows(hi)) {
    res.h_stable = h_grid[hi];
    return res;
  }
  while (hi - lo > 1) {
    std::size_t mid = lo + (hi - lo) / 2;
    (grows(mid) ? hi : lo) = mid;
  }
  res.h_stable = h_grid[lo];
  res.h_unstable = h_grid[hi];
  return res;
}

GrowthResult rounding_growth_experiment(
    const ProblemSpec& p, const StepperChoice& s, Eigen::Index n, double h,
    int steps, const std::function<Eigen::VectorXd(double)>& exact) {
  if (!exact) throw InvalidArgument("growth experiment: exact solution required");
  const int r = s.history();
  if (steps < r + 1) throw InvalidArgument("growth experiment: too few steps");

  StepState st;
  for (int j = 0; j < r; ++j) {
    Eigen::VectorXd v = exact(j * h);
    if (v.size() != n)
      throw InvalidArgument("growth experiment: exact(t) has the wrong length");
    st.history.push_back(std::move(v));
  }
  st.t = (r - 1) * h;

  GrowthResult g;
  g.errors = Eigen::VectorXd::Zero(steps + 1);
  for (int k = r; k <= steps; ++k) {
    Eigen::VectorXd next = take_step(p, s, st, h);
    g.errors[k] = (next - exact(k * h)).lpNorm<Eigen::Infinity>();
    st.history.push_back(std::move(next));
    if (static_cast<int>(st.history.size()) > r)
      st.history.erase(st.history.begin());
    st.t = k * h;
  }
  g.max_error = g.errors.maxCoeff();

  // Least-squares line err ~ slope * k + c; r2 = 1 for a flat perfect fit.
  Eigen::VectorXd k = Eigen::VectorXd::LinSpaced(steps + 1, 0, steps);
  double kc = k.mean(), ec = g.errors.mean();
  double skk = (k.array() - kc).square().sum();
  double see = (g.errors.array() - ec).square().sum();
  double ske = ((k.array() - kc) * (g.errors.array() - ec)).sum();
  g.slope = ske / skk;
  g.r2 = see == 0.0 ? 1.0 : ske * ske / (skk * see);
  return g;
}

Eigen::MatrixXd collocation_oracle(int order, Eigen::Index n) {
  if (order < 1 || order > 2)
    throw InvalidArgument("collocation_oracle: order must be 1 or 2");
  if (n < 2) throw InvalidArgument("collocation_oracle: n >= 2 required");

  Eigen::VectorXd x = cheb_points(n);
  Eigen::VectorXd c = Eigen::VectorXd::Ones(n);
  c[0] = c[n - 1] = 2.0;
  for (Eigen::Index i = 1; i < n; i += 2) c[i] = -c[i];

  // Derivative-order recursion with the negative sum trick at every order
  // (squaring the first-order matrix loses two extra digits).
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= order; ++k) {
    Eigen::MatrixXd dk(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        dk(i, j) = k * (c[i] / c[j] * d(i, i) - d(i, j)) / (x[i] - x[j]);
        row += dk(i, j);
      }
      dk(i, i) = -row;
    }
    d = std::move(dk);
  }
  return d;
}

double conv_inv_inf_norm(int lambda, Eigen::Index n) {
  Eigen::MatrixXd s = conv_op(lambda, n, n).to_dense();
  Eigen::MatrixXd inv = s.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(n, n));
  return inv.cwiseAbs().rowwise().sum().maxCoeff();
}

double sl_inf_norm(const OperatorSpec& spec, Eigen::Index n) {
  spec.validate();
  if (spec.order < 1)
    throw InvalidArgument("sl_inf_norm: differential order >= 1 required");
  Eigen::MatrixXd l = assemble_op(spec, n, /*square=*/true).to_dense();
  Eigen::MatrixXd chain = conv_chain(spec.order, n, n).to_dense();
  Eigen::MatrixXd m = chain.triangularView<Eigen::Upper>().solve(l);
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

void write_rho_csv(std::ostream& out, const std::vector<AnalysisKind>& kinds,
                   const std::vector<Eigen::Index>& ns) {
  out << "kind,n,rho,bound,ratio\n";
  out.precision(12);
  for (const AnalysisKind& kind : kinds)
    for (Eigen::Index n : ns) {
      double rho = spectral_radius(build_analysis_matrix(kind, n));
      double bound = rho_bound(kind, n);
      out << kind.name() << ',' << n << ',' << rho << ',' << bound << ','
          << rho / bound << '\n';
    }
}

void write_growth_csv(std::ostream& out, const std::string& stepper,
                      const GrowthResult& g) {
  out << "stepper,k,error\n";
  out.precision(12);
  for (Eigen::Index k = 0; k < g.errors.size(); ++k)
    out << stepper << ',' << k << ',' << g.errors[k] << '\n';
}

}  // namespace uspde
