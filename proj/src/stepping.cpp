#include "uspde/stepping.hpp"

#include <Eigen/LU>
#include <cmath>
#include <map>
#include <mutex>

#include "uspde/errors.hpp"
#include "uspde/series.hpp"

namespace uspde {

void LmmScheme::validate() const {
  if (r < 1 || alpha.size() != r + 1 || beta.size() != r + 1)
    throw InvalidArgument("LmmScheme: need r >= 1 and r + 1 coefficients");
  if (alpha[r] != 1.0) throw InvalidArgument("LmmScheme: alpha_r must be 1");
  if (std::abs(alpha.sum()) > 1e-12)
    throw InvalidArgument("LmmScheme: alpha must sum to zero");
  double lhs = 0;
  for (int j = 0; j <= r; ++j) lhs += j * alpha[j];
  if (std::abs(beta.sum() - lhs) > 1e-12)
    throw InvalidArgument("LmmScheme: first-order consistency violated");
}

LmmScheme LmmScheme::forward_euler() {
  LmmScheme s{"forward-euler", 1, Eigen::VectorXd(2), Eigen::VectorXd(2)};
  s.alpha << -1, 1;
  s.beta << 1, 0;
  s.validate();
  return s;
}

LmmScheme LmmScheme::ab2() {
  LmmScheme s{"ab2", 2, Eigen::VectorXd(3), Eigen::VectorXd(3)};
  s.alpha << 0, -1, 1;
  s.beta << -1.0 / 2, 3.0 / 2, 0;
  s.validate();
  return s;
}

LmmScheme LmmScheme::ab4() {
  LmmScheme s{"ab4", 4, Eigen::VectorXd(5), Eigen::VectorXd(5)};
  s.alpha << 0, 0, 0, -1, 1;
  s.beta << -9.0 / 24, 37.0 / 24, -59.0 / 24, 55.0 / 24, 0;
  s.validate();
  return s;
}

LmmScheme LmmScheme::bdf3() {
  LmmScheme s{"bdf3", 3, Eigen::VectorXd(4), Eigen::VectorXd(4)};
  s.alpha << -2.0 / 11, 9.0 / 11, -18.0 / 11, 1;
  s.beta << 0, 0, 0, 6.0 / 11;
  s.validate();
  return s;
}

LmmScheme LmmScheme::backward_euler() {
  LmmScheme s{"backward-euler", 1, Eigen::VectorXd(2), Eigen::VectorXd(2)};
  s.alpha << -1, 1;
  s.beta << 0, 1;
  s.validate();
  return s;
}

LmmScheme LmmScheme::trapezoid() {
  LmmScheme s{"trapezoid", 1, Eigen::VectorXd(2), Eigen::VectorXd(2)};
  s.alpha << -1, 1;
  s.beta << 1.0 / 2, 1.0 / 2;
  s.validate();
  return s;
}

void RkScheme::validate() const {
  if (s < 1 || theta.size() != s || mu.size() != s || gamma.size() != s)
    throw InvalidArgument("RkScheme: need s >= 1 stage coefficients");
  if (theta[0] != 0.0 || mu[0] != 0.0)
    throw InvalidArgument("RkScheme: first stage must start at the step point");
  if (std::abs(gamma.sum() - 1.0) > 1e-12)
    throw InvalidArgument("RkScheme: stage weights must sum to one");
}

RkScheme RkScheme::forward_euler() {
  RkScheme s{"rk-euler", 1, Eigen::VectorXd(1), Eigen::VectorXd(1), Eigen::VectorXd(1)};
  s.theta << 0;
  s.mu << 0;
  s.gamma << 1;
  s.validate();
  return s;
}

RkScheme RkScheme::rk3() {
  RkScheme s{"rk3", 3, Eigen::VectorXd(3), Eigen::VectorXd(3), Eigen::VectorXd(3)};
  s.theta << 0, 1.0 / 3, 2.0 / 3;
  s.mu << 0, 1.0 / 3, 2.0 / 3;
  s.gamma << 1.0 / 4, 0, 3.0 / 4;
  s.validate();
  return s;
}

RkScheme RkScheme::rk4() {
  RkScheme s{"rk4", 4, Eigen::VectorXd(4), Eigen::VectorXd(4), Eigen::VectorXd(4)};
  s.theta << 0, 1.0 / 2, 1.0 / 2, 1;
  s.mu << 0, 1.0 / 2, 1.0 / 2, 1;
  s.gamma << 1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6;
  s.validate();
  return s;
}

void ProblemSpec::validate() const {
  linear.validate();
  if (boundary.size() != static_cast<size_t>(linear.order))
    throw InvalidArgument(
        "ProblemSpec: boundary condition count must equal the operator order");
}

namespace {

// Pad or chop to an exact length.
Eigen::VectorXd fit(const Eigen::VectorXd& v, Eigen::Index len) {
  if (v.size() == len) return v;
  return v.size() < len ? pad(v, len) : chop(v, len);
}

// Samples g(x, u(x)) on doubling Chebyshev grids until the Chebyshev
// transform plateaus; returns the chopped T coefficients.
Eigen::VectorXd sample_to_coeffs(const std::function<double(double, double)>& g,
                                 const Eigen::VectorXd& u, double tol,
                                 Eigen::Index n_max) {
  Eigen::Index m = 17;
  while (m < u.size()) m = 2 * (m - 1) + 1;
  for (;;) {
    Eigen::VectorXd uv = coeffs_to_vals(pad(u, m));
    Eigen::VectorXd x = cheb_points(m);
    Eigen::VectorXd gv(m);
    for (Eigen::Index i = 0; i < m; ++i) gv[i] = g(x[i], uv[i]);
    Eigen::VectorXd c = vals_to_coeffs(gv);
    PlateauResult pr = plateau(c, tol);
    if (pr.found) return chop(c, pr.j2);
    if (m - 1 >= n_max)
      throw ResolutionFailure("sample_to_coeffs: no plateau up to the size cap");
    m = 2 * (m - 1) + 1;
  }
}

// Assembled operators for one problem at one truncation; immutable, shared.
struct LinearParts {
  int N;
  Eigen::Index n, R;
  BandedMatrix<double> L;  // R x n main operator
  BandedMatrix<double> S;  // R x n conversion chain (identity block for N = 0)
  Eigen::MatrixXd B;       // N x n boundary rows
  Eigen::VectorXd c;       // N boundary values

  LinearParts(const ProblemSpec& p, Eigen::Index n_, bool square)
      : N(p.linear.order),
        n(n_),
        R(square ? n_ : n_ - p.linear.order),
        L(assemble_op(p.linear, n_, square)),
        S(conv_chain(p.linear.order, R, n_)),
        B(boundary_rows(p.boundary, n_)),
        c(boundary_values(p.boundary)) {}
};

using PartsPtr = std::shared_ptr<const LinearParts>;

class PartsStore {
 public:
  static PartsStore& instance() {
    static PartsStore s;
    return s;
  }

  PartsPtr get(const ProblemSpec& p, Eigen::Index n, bool square) {
    FactorKey key{p.cache_tag, static_cast<std::uint64_t>(n), 0, 0,
                  square ? 11u : 10u, 0};
    std::lock_guard<std::mutex> g(mu_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    auto parts = std::make_shared<const LinearParts>(p, n, square);
    map_.emplace(key, parts);
    return parts;
  }

  void clear() {
    std::lock_guard<std::mutex> g(mu_);
    map_.clear();
  }

 private:
  std::mutex mu_;
  std::map<FactorKey, PartsPtr> map_;
};

// Bordered factorization [B; S - theta L] shared across schemes with the same
// implicit weight theta = h beta_r (theta = 0 for explicit and RK stages).
FactorCache<double>::Ptr bordered_qr(const ProblemSpec& p, const LinearParts& lp,
                                     double theta) {
  FactorKey key{p.cache_tag, static_cast<std::uint64_t>(lp.n),
                double_bits(theta), 0, 1, 0};
  return FactorCache<double>::instance().get_or_factor(key, [&] {
    AlmostBandedSystem<double> sys{
        lp.B, BandedMatrix<double>::combine(1.0, lp.S, -theta, lp.L)};
    return AlmostBandedQR<double>(sys);
  });
}

// Square implicit factorization S - theta L (no boundary rows).
FactorCache<double>::Ptr square_qr(const ProblemSpec& p, const LinearParts& lp,
                                   double theta) {
  FactorKey key{p.cache_tag, static_cast<std::uint64_t>(lp.n),
                double_bits(theta), 0, 2, 0};
  return FactorCache<double>::instance().get_or_factor(key, [&] {
    AlmostBandedSystem<double> sys{
        Eigen::MatrixXd(0, lp.n),
        BandedMatrix<double>::combine(1.0, lp.S, -theta, lp.L)};
    return AlmostBandedQR<double>(sys);
  });
}

void check_history(const StepState& st, int r) {
  if (static_cast<int>(st.history.size()) < r)
    throw InvalidArgument("step: history shorter than the scheme's step count");
  Eigen::Index n = st.history.back().size();
  for (int j = 0; j < r; ++j)
    if (st.history[st.history.size() - r + j].size() != n)
      throw InvalidArgument("step: history vectors must share one length");
}

// Shared rhs pieces for an r-step scheme: v = -sum alpha_j u_j and
// w = sum beta_j (L u_j + N_j), both over the known levels j < r.
struct LmmRhs {
  Eigen::VectorXd v;  // length n
  Eigen::VectorXd w;  // length R
};

LmmRhs lmm_rhs(const ProblemSpec& p, const LmmScheme& sch, const StepState& st,
               double h, const LinearParts& lp) {
  const int r = sch.r;
  LmmRhs out{Eigen::VectorXd::Zero(lp.n), Eigen::VectorXd::Zero(lp.R)};
  for (int j = 0; j < r; ++j) {
    const Eigen::VectorXd& uj = st.history[st.history.size() - r + j];
    double tj = st.t - (r - 1 - j) * h;
    if (sch.alpha[j] != 0.0) out.v -= sch.alpha[j] * uj;
    if (sch.beta[j] != 0.0) {
      out.w += sch.beta[j] * (lp.L * uj);
      if (p.nonlinear)
        out.w += sch.beta[j] *
                 fit(eval_nonlinear(p.nonlinear, tj, uj, lp.N), lp.R);
    }
  }
  return out;
}

// Newton solve of the bordered implicit system
//   B u = c,  (S - theta L) u - theta N(t, u) = body,
// with the Jacobian of the nonlinear term approximated by a multiplication
// operator built from a finite-difference derivative of N at the iterate.
Eigen::VectorXd newton_bordered(const ProblemSpec& p, const LinearParts& lp,
                                double theta, double t,
                                const Eigen::VectorXd& body,
                                const Eigen::VectorXd& guess) {
  BandedMatrix<double> A = BandedMatrix<double>::combine(1.0, lp.S, -theta, lp.L);
  Eigen::VectorXd u = guess;
  for (int it = 0; it < 25; ++it) {
    Eigen::VectorXd nu_c =
        fit(eval_nonlinear(p.nonlinear, t, u, lp.N), lp.R);
    Eigen::VectorXd resid(lp.n);
    resid.head(lp.N) = lp.B * u - lp.c;
    resid.tail(lp.R) = A * u - theta * nu_c - body;

    auto dfun = [&](double x, double uval) {
      double d = 1e-7 * std::max(1.0, std::abs(uval));
      return (p.nonlinear(t, x, uval + d) - p.nonlinear(t, x, uval - d)) /
             (2.0 * d);
    };
    Eigen::VectorXd nu = sample_to_coeffs(dfun, u, 1e-12, 1 << 16);
    nu = fit(nu, std::min<Eigen::Index>(nu.size(), lp.n));
    BandedMatrix<double> W =
        conv_chain(lp.N, lp.R, lp.n) * mult_op(0, nu, lp.n, lp.n);
    AlmostBandedSystem<double> sys{
        lp.B, BandedMatrix<double>::combine(1.0, A, -theta, W)};
    AlmostBandedQR<double> qr(sys);
    Eigen::VectorXd delta = qr.solve(resid);
    u -= delta;
    if (delta.lpNorm<Eigen::Infinity>() <=
        1e-12 * std::max(1.0, u.lpNorm<Eigen::Infinity>()))
      return u;
  }
  throw StepperFailure("newton_bordered: no convergence in 25 iterations");
}

}  // namespace

Eigen::VectorXd eval_nonlinear(const Nonlinearity& f, double t,
                               const Eigen::VectorXd& u, int order, double tol,
                               Eigen::Index n_max) {
  if (!f) throw InvalidArgument("eval_nonlinear: empty nonlinearity");
  auto g = [&](double x, double uval) { return f(t, x, uval); };
  Eigen::VectorXd c = sample_to_coeffs(g, u, tol, n_max);
  if (order == 0) return c;
  return conv_chain(order, c.size(), c.size()) * c;
}

Eigen::VectorXd bc_correct(Eigen::VectorXd u, const ProblemSpec& p) {
  p.validate();
  const int N = p.linear.order;
  if (N == 0) return u;
  const Eigen::Index n = u.size();
  Eigen::MatrixXd B = boundary_rows(p.boundary, n);
  Eigen::VectorXd rhs =
      boundary_values(p.boundary) - B.leftCols(n - N) * u.head(n - N);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B.rightCols(N));
  if (!lu.isInvertible())
    throw BoundaryCorrectionFailure(
        "bc_correct: trailing boundary block is singular");
  u.tail(N) = lu.solve(rhs);
  return u;
}

Eigen::VectorXd step_a1_lmm(const ProblemSpec& p, const LmmScheme& sch,
                            const StepState& st, double h) {
  p.validate();
  sch.validate();
  check_history(st, sch.r);
  PartsPtr lp = PartsStore::instance().get(p, st.n(), false);
  LmmRhs parts = lmm_rhs(p, sch, st, h, *lp);
  Eigen::VectorXd body = lp->S * parts.v + h * parts.w;
  const double theta = h * sch.beta[sch.r];
  if (p.nonlinear && !sch.is_explicit())
    return newton_bordered(p, *lp, theta, st.t + h, body, st.history.back());
  Eigen::VectorXd rhs(lp->n);
  rhs.head(lp->N) = lp->c;
  rhs.tail(lp->R) = body;
  return bordered_qr(p, *lp, theta)->solve(rhs);
}

Eigen::VectorXd step_a1_rk(const ProblemSpec& p, const RkScheme& sch,
                           const StepState& st, double h) {
  p.validate();
  sch.validate();
  check_history(st, 1);
  PartsPtr lp = PartsStore::instance().get(p, st.n(), false);
  auto qr = bordered_qr(p, *lp, 0.0);
  const Eigen::VectorXd& v = st.history.back();
  Eigen::VectorXd acc = v;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(lp->n);
  Eigen::VectorXd rhs(lp->n);
  rhs.head(lp->N).setZero();  // stages carry homogeneous boundary data
  for (int j = 0; j < sch.s; ++j) {
    Eigen::VectorXd w = sch.mu[j] == 0.0 ? v : (v + sch.mu[j] * y).eval();
    rhs.tail(lp->R) = h * (lp->L * w);
    if (p.nonlinear)
      rhs.tail(lp->R) +=
          h * fit(eval_nonlinear(p.nonlinear, st.t + sch.theta[j] * h, w, lp->N),
                  lp->R);
    y = qr->solve(rhs);
    if (sch.gamma[j] != 0.0) acc += sch.gamma[j] * y;
  }
  return acc;
}

Eigen::VectorXd step_a2_lmm(const ProblemSpec& p, const LmmScheme& sch,
                            const StepState& st, double h) {
  p.validate();
  sch.validate();
  check_history(st, sch.r);
  PartsPtr lp = PartsStore::instance().get(p, st.n(), true);
  LmmRhs parts = lmm_rhs(p, sch, st, h, *lp);
  const double theta = h * sch.beta[sch.r];
  if (sch.is_explicit()) {
    // Increment form: u = v + S^{-1} (h w) avoids a round trip through S and
    // keeps the per-step rounding at the size of the increment.
    Eigen::VectorXd y = h * parts.w;
    banded_upper_solve(lp->S, y);
    return bc_correct(parts.v + y, p);
  }
  Eigen::VectorXd body = lp->S * parts.v + h * parts.w;
  if (p.nonlinear) {
    // Square Newton solve, then boundary re-determination.
    BandedMatrix<double> A =
        BandedMatrix<double>::combine(1.0, lp->S, -theta, lp->L);
    Eigen::VectorXd u = st.history.back();
    const double t1 = st.t + h;
    for (int it = 0;; ++it) {
      if (it == 25)
        throw StepperFailure("step_a2_lmm: Newton stalled at 25 iterations");
      Eigen::VectorXd nu_c = fit(eval_nonlinear(p.nonlinear, t1, u, lp->N), lp->n);
      Eigen::VectorXd resid = A * u - theta * nu_c - body;
      auto dfun = [&](double x, double uval) {
        double d = 1e-7 * std::max(1.0, std::abs(uval));
        return (p.nonlinear(t1, x, uval + d) - p.nonlinear(t1, x, uval - d)) /
               (2.0 * d);
      };
      Eigen::VectorXd nu = sample_to_coeffs(dfun, u, 1e-12, 1 << 16);
      nu = fit(nu, std::min<Eigen::Index>(nu.size(), lp->n));
      BandedMatrix<double> W =
          conv_chain(lp->N, lp->n, lp->n) * mult_op(0, nu, lp->n, lp->n);
      AlmostBandedSystem<double> sys{
          Eigen::MatrixXd(0, lp->n),
          BandedMatrix<double>::combine(1.0, A, -theta, W)};
      AlmostBandedQR<double> qr(sys);
      Eigen::VectorXd delta = qr.solve(resid);
      u -= delta;
      if (delta.lpNorm<Eigen::Infinity>() <=
          1e-12 * std::max(1.0, u.lpNorm<Eigen::Infinity>()))
        break;
    }
    return bc_correct(u, p);
  }
  return bc_correct(square_qr(p, *lp, theta)->solve(body), p);
}

Eigen::VectorXd step_a2_rk(const ProblemSpec& p, const RkScheme& sch,
                           const StepState& st, double h) {
  p.validate();
  sch.validate();
  check_history(st, 1);
  PartsPtr lp = PartsStore::instance().get(p, st.n(), true);
  const Eigen::VectorXd& v = st.history.back();
  Eigen::VectorXd acc = v;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(lp->n);
  for (int j = 0; j < sch.s; ++j) {
    Eigen::VectorXd w = sch.mu[j] == 0.0 ? v : (v + sch.mu[j] * y).eval();
    Eigen::VectorXd z = h * (lp->L * w);
    if (p.nonlinear)
      z += h * fit(eval_nonlinear(p.nonlinear, st.t + sch.theta[j] * h, w, lp->N),
                   lp->n);
    banded_upper_solve(lp->S, z);
    y.swap(z);
    if (sch.gamma[j] != 0.0) acc += sch.gamma[j] * y;
  }
  return bc_correct(acc, p);
}

Eigen::VectorXd solve_bvp(const OperatorSpec& spec,
                          const std::vector<BoundaryCondition>& bcs,
                          const Eigen::VectorXd& g, Eigen::Index n) {
  spec.validate();
  const int N = spec.order;
  if (bcs.size() != static_cast<size_t>(N))
    throw InvalidArgument("solve_bvp: boundary condition count must equal order");
  AlmostBandedSystem<double> sys{boundary_rows(bcs, n), assemble_op(spec, n)};
  AlmostBandedQR<double> qr(sys);
  Eigen::VectorXd rhs(n);
  rhs.head(N) = boundary_values(bcs);
  rhs.tail(n - N) = fit(g, n - N);
  return qr.solve(rhs);
}

StepState bootstrap_history(const ProblemSpec& p, int r, int approach,
                            const Eigen::VectorXd& u0, double t0, double h) {
  if (r < 1) throw InvalidArgument("bootstrap_history: r >= 1 required");
  if (approach != 1 && approach != 2)
    throw InvalidArgument("bootstrap_history: approach must be 1 or 2");
  RkScheme rk = RkScheme::rk3();
  StepState st;
  st.history.push_back(u0);
  st.t = t0;
  for (int k = 1; k < r; ++k) {
    Eigen::VectorXd next =
        approach == 1 ? step_a1_rk(p, rk, st, h) : step_a2_rk(p, rk, st, h);
    st.history.push_back(std::move(next));
    st.t += h;
  }
  return st;
}

Eigen::VectorXcd step_periodic_lmm(const LmmScheme& sch,
                                   const std::vector<Eigen::VectorXcd>& history,
                                   const Eigen::VectorXcd& ldiag, double h) {
  sch.validate();
  const int r = sch.r;
  if (static_cast<int>(history.size()) < r)
    throw InvalidArgument("step_periodic_lmm: history shorter than step count");
  const Eigen::Index n = ldiag.size();
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
  for (int j = 0; j < r; ++j) {
    const Eigen::VectorXcd& uj = history[history.size() - r + j];
    if (uj.size() != n)
      throw InvalidArgument("step_periodic_lmm: history size mismatch");
    std::complex<double> a(sch.alpha[j], 0.0);
    acc.array() += (h * sch.beta[j] * ldiag.array() - a) * uj.array();
  }
  if (sch.is_explicit()) return acc;
  Eigen::ArrayXcd denom =
      std::complex<double>(1.0, 0.0) - h * sch.beta[r] * ldiag.array();
  if ((denom.abs() == 0.0).any())
    throw SingularMatrix("step_periodic_lmm: implicit step hits an eigenvalue");
  return (acc.array() / denom).matrix();
}

void clear_step_plans() { PartsStore::instance().clear(); }

}  // namespace uspde
