#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "uspde/errors.hpp"
#include "uspde/expint.hpp"
#include "uspde/problems.hpp"
#include "uspde/series.hpp"

using namespace uspde;
using Complex = std::complex<double>;

namespace {

void reset_complex_cache() {
  FactorCache<Complex>::instance().clear();
  FactorCache<Complex>::instance().reset_counters();
}

// Max error of the pole-sum approximation of phi_j over a log grid [lo, hi]
// of the negative real axis (lo < hi < 0).
double grid_error(const PoleSet& ps, int j, double lo, double hi, int pts) {
  double worst = 0;
  for (int i = 0; i < pts; ++i) {
    double x = -std::exp(std::log(-lo) +
                         (std::log(-hi) - std::log(-lo)) * i / (pts - 1.0));
    worst = std::max(worst, std::abs(ps.evaluate(j, x) - phi_scalar(j, x)));
  }
  return worst;
}

// Scalar test problem u' = c u + g(t) posed as an order-0 operator on n = 1.
ProblemSpec scalar_ode(double c, std::function<double(double)> g) {
  ProblemSpec p;
  p.linear = OperatorSpec::constant({c});
  if (g) p.nonlinear = [g](double t, double, double) { return g(t); };
  return p;
}

}  // namespace

TEST_CASE("phi functions agree with series, closed forms, and an integral oracle") {
  CHECK(std::abs(phi_scalar(0, 0.0) - 1.0) == 0.0);
  CHECK(std::abs(phi_scalar(1, 0.0) - 1.0) == 0.0);
  CHECK(std::abs(phi_scalar(2, 0.0) - 0.5) == 0.0);
  CHECK(std::abs(phi_scalar(3, 0.0) - 1.0 / 6) == 0.0);

  CHECK(std::abs(phi_scalar(1, 1.0) - (std::exp(1.0) - 1.0)) < 1e-15);
  // phi_3(1) = e - 5/2 from unrolling the recurrence at z = 1.
  CHECK(std::abs(phi_scalar(3, 1.0) - 2.18281828459045091e-01) < 1e-15);

  // Integral representation phi_2(z) = int_0^1 e^{z(1-s)} s ds at z = -10,
  // evaluated by adaptive quadrature offline.
  CHECK(std::abs(phi_scalar(2, -10.0) - 9.00004539992976110e-02) < 1e-13);

  // Complex argument away from the series disc.
  Complex v = phi_scalar(1, Complex(0.0, 2.0));
  CHECK(std::abs(v - Complex(4.54648713412840855e-01, 7.08073418273571176e-01)) <
        1e-15);

  // Both evaluation branches agree where they meet (the gap itself moves the
  // value by about 2e-10 |phi'|, so the bound is dominated by that).
  for (double s : {-1.0, 1.0}) {
    for (int j = 1; j <= 4; ++j) {
      Complex inside = phi_scalar(j, Complex(0.9999999999 * s, 0.0));
      Complex outside = phi_scalar(j, Complex(1.0000000001 * s, 0.0));
      CHECK(std::abs(inside - outside) < 1e-9 * std::abs(inside));
    }
  }

  CHECK_THROWS_AS(phi_scalar(-1, 1.0), InvalidArgument);
}

TEST_CASE("zeta weights expand in phi functions with unit row sums") {
  // First rows of the coefficient table in the phi basis.
  Eigen::MatrixXd c = zeta_phi_coeffs(4);
  CHECK(c.rows() == 4);
  CHECK(c.cols() == 5);
  CHECK(c.row(0).isApprox(Eigen::RowVectorXd{{0, 1, 0, 0, 0}}, 0));
  CHECK(c.row(1).isApprox(Eigen::RowVectorXd{{0, 0, 1, 0, 0}}, 0));
  CHECK(c(2, 2) == 0.5);
  CHECK(c(2, 3) == 1.0);
  CHECK(c(3, 2) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(c(3, 3) == 1.0);
  CHECK(c(3, 4) == 1.0);

  // The constant terms of the recurrence force sum_m c(j, m)/(m-1)! = 1.
  Eigen::MatrixXd big = zeta_phi_coeffs(8);
  for (int j = 0; j < 8; ++j) {
    double s = 0, fact = 1;
    for (int m = 1; m <= 8; ++m) {
      s += big(j, m) / fact;
      fact *= m;
    }
    CHECK(std::abs(s - 1.0) < 1e-14);
  }

  // zeta_0 is phi_1 exactly, including at complex arguments.
  for (Complex z : {Complex(0.3, 0), Complex(-7, 0), Complex(1, 2)})
    CHECK(zeta_weights(3, z)[0] == phi_scalar(1, z));

  // z = 0 limit reproduces the classical Adams coefficients 1, 1/2, 5/12, 3/8.
  Eigen::VectorXcd at0 = zeta_weights(4, 0.0);
  CHECK(std::abs(at0[0] - 1.0) < 1e-15);
  CHECK(std::abs(at0[1] - 0.5) < 1e-15);
  CHECK(std::abs(at0[2] - 5.0 / 12) < 1e-15);
  CHECK(std::abs(at0[3] - 3.0 / 8) < 1e-15);

  // Independent oracle: zeta_j(z) = int_0^1 e^{(1-th)z} th(th+1)..(th+j-1)/j! dth,
  // quadrature values frozen at z = -3.
  Eigen::VectorXcd at3 = zeta_weights(4, -3.0);
  CHECK(std::abs(at3[0] - 3.16737643877378683e-01) < 1e-14);
  CHECK(std::abs(at3[1] - 2.27754118707540448e-01) < 1e-14);
  CHECK(std::abs(at3[2] - 2.04625686451256783e-01) < 1e-14);
  CHECK(std::abs(at3[3] - 1.91972679856393408e-01) < 1e-14);

  // Small-z continuity of the guarded evaluation.
  Eigen::VectorXcd near0 = zeta_weights(4, 1e-8);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(near0[j] - at0[j]) < 1e-7);

  CHECK_THROWS_AS(zeta_weights(0, 1.0), InvalidArgument);
}

TEST_CASE("talbot pole sums track phi along the negative axis") {
  CHECK_THROWS_AS(talbot_poles(14, 3), InvalidArgument);  // too few
  CHECK_THROWS_AS(talbot_poles(17, 3), InvalidArgument);  // odd

  PoleSet ps = talbot_poles(32, 3);
  CHECK(ps.q == 32);
  CHECK(ps.kind == PoleKind::TalbotContour);
  CHECK_NOTHROW(ps.validate());
  for (int m = 0; m < 16; ++m) {
    CHECK(ps.poles[2 * m].imag() > 0.0);
    CHECK(ps.poles[2 * m + 1] == std::conj(ps.poles[2 * m]));
  }

  CHECK(std::abs(ps.evaluate(1, -1.0) - phi_scalar(1, -1.0)) < 1e-10);

  // Geometric improvement with q until the rounding floor: the far-right
  // contour nodes carry weights of size e^{0.17 q} that must cancel, so the
  // floor itself grows slowly with q (q = 48 is at the floor, far below q = 16).
  for (int j = 0; j <= 3; ++j) {
    double e16 = grid_error(talbot_poles(16, 3), j, -100.0, -0.1, 120);
    double e32 = grid_error(talbot_poles(32, 3), j, -100.0, -0.1, 120);
    double e48 = grid_error(talbot_poles(48, 3), j, -100.0, -0.1, 120);
    CHECK(e32 < 1e-3 * e16);
    CHECK(e48 < 0.1 * e16);
    CHECK(e32 < 1e-12);
    CHECK(e48 < 1e-10);
  }

  // Uniform on the rest of the negative axis: errors only shrink to the left.
  PoleSet far = talbot_poles(32, 1);
  for (double x : {-1e3, -6.15e3, -1e5, -1e6}) {
    CHECK(std::abs(far.evaluate(0, x) - phi_scalar(0, x)) < 1e-13);
    CHECK(std::abs(far.evaluate(1, x) - phi_scalar(1, x)) < 1e-13);
  }
  CHECK(std::abs(far.evaluate(0, 0.0) - 1.0) < 1e-12);
}

TEST_CASE("cf pole table reproduces phi to near machine accuracy") {
  PoleSet ps = cf_poles();
  CHECK(ps.q == 14);
  CHECK(ps.j_max == 3);
  CHECK(ps.kind == PoleKind::CaratheodoryFejer);
  CHECK_NOTHROW(ps.validate());

  CHECK(std::abs(ps.evaluate(0, -1.0) - std::exp(-1.0)) < 1e-11);

  // Probe points: phi_0 in absolute terms (e^-100 is far below the absolute
  // floor of any double-precision rational approximation), phi_1..3 relative.
  for (double x : {-0.1, -1.0, -10.0, -100.0}) {
    CHECK(std::abs(ps.evaluate(0, x) - phi_scalar(0, x)) < 1e-12);
    for (int j = 1; j <= 3; ++j) {
      double ref = std::abs(phi_scalar(j, x).real());
      CHECK(std::abs(ps.evaluate(j, x) - phi_scalar(j, x)) < 1e-10 * ref);
    }
  }

  // Shipped-table accuracy over the documented region [-1e6, 0].
  for (int j = 0; j <= 3; ++j) {
    CHECK(grid_error(ps, j, -1e6, -1e-8, 250) < 1e-9);
    CHECK(std::abs(ps.evaluate(j, 0.0) - phi_scalar(j, 0.0)) < 1e-9);
  }

  // Requesting fewer weight columns chops; more than shipped is an error.
  CHECK(cf_poles(14, 1).j_max == 1);
  CHECK_THROWS_AS(cf_poles(14, 9), ConfigError);
  CHECK_THROWS_AS(cf_poles(16, 3), ConfigError);  // no such table
}

TEST_CASE("pole table parsing and lookup reject malformed inputs") {
  auto write_file = [](const char* name, const char* body) {
    std::ofstream out(name);
    out << body;
  };

  write_file("tbl_kind.txt", "2 0 mystery\n1 1 1 0\n1 -1 1 0\n");
  CHECK_THROWS_AS(load_pole_table("tbl_kind.txt"), ConfigError);

  write_file("tbl_short.txt", "2 1 cf\n1 1 1 0 0 0\n");
  CHECK_THROWS_AS(load_pole_table("tbl_short.txt"), ConfigError);

  // Nonreal poles must come as adjacent conjugate pairs.
  write_file("tbl_pair.txt", "2 0 cf\n1 1 1 0\n2 -2 1 0\n");
  CHECK_THROWS_AS(load_pole_table("tbl_pair.txt"), ConfigError);

  write_file("tbl_ok.txt", "2 0 cf\n1 1 0.5 0.25\n1 -1 0.5 -0.25\n");
  PoleSet ok = load_pole_table("tbl_ok.txt");
  CHECK(ok.q == 2);
  CHECK(ok.weights(1, 0) == Complex(0.5, -0.25));

  CHECK_THROWS_AS(load_pole_table("no_such_file.txt"), ConfigError);

  // The data directory override is honored (and its absence reported).
  setenv("USPDE_DATA", "/nonexistent_pole_dir", 1);
  CHECK_THROWS_AS(cf_poles(), ConfigError);
  unsetenv("USPDE_DATA");
  CHECK_NOTHROW(cf_poles());

  for (const char* f : {"tbl_kind.txt", "tbl_short.txt", "tbl_pair.txt", "tbl_ok.txt"})
    std::remove(f);
}

TEST_CASE("phi operator actions reduce to scalars and enforce boundary conditions") {
  // h = 0 makes every pole system (0 - z S) x = S xi, so phi_0 acts as the
  // identity regardless of the operator.
  {
    ProblemSpec p = scalar_ode(1.0, nullptr);
    PhiOperator op(p, 8, 0.0, cf_poles());
    Eigen::VectorXd xi = Eigen::VectorXd::LinSpaced(8, -1.0, 2.5);
    CHECK((phi_apply(op, 0, xi) - xi).lpNorm<Eigen::Infinity>() < 1e-10);
  }

  // n = 1: the operator action IS the scalar phi.
  {
    ProblemSpec p = scalar_ode(-5.0, nullptr);
    Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    for (const PoleSet& ps : {talbot_poles(32, 3), cf_poles()}) {
      PhiOperator op(p, 1, 0.3, ps);
      for (int j = 0; j <= 3; ++j)
        CHECK(std::abs(op.apply(j, one)[0] - phi_scalar(j, -1.5).real()) < 1e-11);
    }
  }

  // Inhomogeneous boundary values have no pole-sum representation.
  {
    ProblemSpec p = preset_heat(0.1).problem;
    p.boundary[0] = BoundaryCondition::dirichlet_left(1.0);
    CHECK_THROWS_AS(PhiOperator(p, 16, 0.1, cf_poles()), InvalidArgument);
  }

  // Mixing pole data from different sets is caught at construction.
  {
    PoleSet frankenstein = cf_poles();
    PoleSet other = talbot_poles(16, 3);
    frankenstein.poles = other.poles;
    frankenstein.weights = other.weights;
    ProblemSpec p = scalar_ode(1.0, nullptr);
    CHECK_THROWS_AS(PhiOperator(p, 8, 0.1, frankenstein), InvalidArgument);
  }

  // Heat flow by repeated phi_0 application: u_t = 0.1 u_xx with Dirichlet
  // walls, u0 = sin(pi x), exact decay e^{-0.1 pi^2 t}. h rho ~ 6e3, yet one
  // application per step of size 0.1 holds to ~1e-14.
  const double kappa = 0.1, h = 0.1;
  ProblemSpec heat;
  heat.linear = OperatorSpec::constant({0.0, 0.0, kappa});
  heat.boundary = {BoundaryCondition::dirichlet_left(0.0),
                   BoundaryCondition::dirichlet_right(0.0)};
  Eigen::VectorXd u0 =
      initial_coeffs([](double x) { return std::sin(M_PI * x); }, 32);

  for (const PoleSet& ps : {cf_poles(), talbot_poles(32, 0)}) {
    reset_complex_cache();
    PhiOperator op(heat, 32, h, ps);
    Eigen::VectorXd u = u0;
    for (int k = 0; k < 100; ++k) u = phi_apply(op, 0, u);
    Eigen::VectorXd exact = std::exp(-kappa * M_PI * M_PI * 10.0) * u0;
    CHECK((u - exact).lpNorm<Eigen::Infinity>() < 1e-12);
    // One factorization per conjugate pair, reused across all 100 steps.
    CHECK(FactorCache<Complex>::instance().factorizations() ==
          static_cast<size_t>(ps.q / 2));
    CHECK(FactorCache<Complex>::instance().hits() ==
          static_cast<size_t>(99 * (ps.q / 2)));
    // Determinism: a repeated application is bitwise identical.
    Eigen::VectorXd again = phi_apply(op, 0, exact);
    CHECK((phi_apply(op, 0, exact) - again).lpNorm<Eigen::Infinity>() == 0.0);
  }

  // Independent dense-solver oracle for one application, summing over all
  // poles without the conjugate reduction: checks the almost-banded complex
  // path and that the discarded imaginary residue is at rounding level.
  {
    PoleSet ps = cf_poles();
    PhiOperator op(heat, 32, h, ps);
    Eigen::VectorXd out = phi_apply(op, 1, u0);

    Eigen::MatrixXd B = boundary_rows(heat.boundary, 32);
    Eigen::MatrixXd L = assemble_op(heat.linear, 32).to_dense();
    Eigen::MatrixXd S = conv_chain(2, 30, 32).to_dense();
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(32);
    for (int l = 0; l < ps.q; ++l) {
      Eigen::MatrixXcd A(32, 32);
      A.topRows(2) = B.cast<Complex>();
      A.bottomRows(30) = h * L.cast<Complex>() - ps.poles[l] * S.cast<Complex>();
      Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(32);
      rhs.tail(30) = (S * u0).cast<Complex>();
      acc += ps.weights(l, 1) * A.colPivHouseholderQr().solve(rhs);
    }
    CHECK((acc.real() - out).lpNorm<Eigen::Infinity>() <
          1e-11 * out.lpNorm<Eigen::Infinity>());
    CHECK(acc.imag().lpNorm<Eigen::Infinity>() <
          1e-13 * out.lpNorm<Eigen::Infinity>());
  }

  // Argument validation.
  {
    ProblemSpec p = scalar_ode(1.0, nullptr);
    PhiOperator op(p, 4, 0.1, cf_poles(14, 1));
    Eigen::VectorXd v = Eigen::VectorXd::Ones(4);
    CHECK_THROWS_AS(op.apply(2, v), InvalidArgument);
    CHECK_THROWS_AS(op.apply(0, Eigen::VectorXd::Ones(5)), InvalidArgument);
  }
}

TEST_CASE("krogstad stepping matches the linear flow and shows design order") {
  // Without a nonlinearity the step collapses to phi_0.
  {
    ProblemSpec heat = preset_heat(0.5).problem;
    Eigen::VectorXd u0 = initial_coeffs(preset_heat(0.5).initial, 24);
    PhiOperator op(heat, 24, 0.05, cf_poles());
    Eigen::VectorXd a = etd_krogstad_step(op, u0, 0.0);
    Eigen::VectorXd b = bc_correct(phi_apply(op, 0, u0), heat);
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  // Scalar ODE u' = -5u + cos t, u(0) = 0.2; exact solution
  // (u0 - 5/26) e^{-5t} + (5 cos t + sin t)/26. Fourth-order convergence.
  {
    auto exact = [](double t) {
      return (0.2 - 5.0 / 26) * std::exp(-5 * t) +
             (5 * std::cos(t) + std::sin(t)) / 26;
    };
    ProblemSpec p = scalar_ode(-5.0, [](double t) { return std::cos(t); });
    std::vector<double> errs;
    for (int k = 0; k < 4; ++k) {
      int steps = 10 << k;
      double h = 1.0 / steps;
      PhiOperator op(p, 1, h, talbot_poles(32, 3));
      Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.2);
      for (int s = 0; s < steps; ++s) u = etd_krogstad_step(op, u, s * h);
      errs.push_back(std::abs(u[0] - exact(1.0)));
    }
    for (size_t k = 0; k + 1 < errs.size(); ++k) {
      double order = std::log2(errs[k] / errs[k + 1]);
      CHECK(order > 3.8);
      CHECK(order < 4.6);
    }
  }

  // Pole-set requirements are enforced.
  {
    ProblemSpec p = scalar_ode(-1.0, [](double t) { return t; });
    PhiOperator op(p, 1, 0.1, cf_poles(14, 2));
    CHECK_THROWS_AS(etd_krogstad_step(op, Eigen::VectorXd::Ones(1), 0.0),
                    InvalidArgument);
  }
}

TEST_CASE("exponential multistep reduces to phi and hits its design order") {
  // Linear problem, p = 1: exactly the phi_0 path.
  {
    ProblemSpec heat = preset_heat(1.0).problem;
    Eigen::VectorXd u0 = initial_coeffs(preset_heat(1.0).initial, 20);
    PhiOperator op(heat, 20, 0.02, cf_poles());
    StepState st{{u0}, 0.0};
    Eigen::VectorXd a = exp_multistep_step(op, st, 1);
    Eigen::VectorXd b = bc_correct(phi_apply(op, 0, u0), heat);
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-14);
  }

  // Constant forcing: u' = -2u + 1 is reproduced to the pole-sum floor at any
  // step size because every backward difference beyond order zero vanishes.
  {
    ProblemSpec p = scalar_ode(-2.0, [](double) { return 1.0; });
    auto exact = [](double t) { return 0.5 * (1.0 - std::exp(-2 * t)); };
    const double h = 0.1;
    PhiOperator op(p, 1, h, talbot_poles(32, 3));
    StepState st;
    st.history = {Eigen::VectorXd::Constant(1, exact(0.0)),
                  Eigen::VectorXd::Constant(1, exact(h))};
    st.t = h;
    for (int s = 1; s < 10; ++s) {
      Eigen::VectorXd next = exp_multistep_step(op, st, 2);
      st.history.erase(st.history.begin());
      st.history.push_back(next);
      st.t += h;
    }
    CHECK(std::abs(st.history.back()[0] - exact(1.0)) < 1e-12);
  }

  // Time-dependent forcing: u' = -2u + cos t, u(0) = 0.3, exact
  // (u0 - 2/5) e^{-2t} + (2 cos t + sin t)/5; p = 2 gives second order.
  {
    auto exact = [](double t) {
      return (0.3 - 0.4) * std::exp(-2 * t) + (2 * std::cos(t) + std::sin(t)) / 5;
    };
    ProblemSpec p = scalar_ode(-2.0, [](double t) { return std::cos(t); });
    std::vector<double> errs;
    for (int k = 0; k < 3; ++k) {
      int steps = 20 << k;
      double h = 1.0 / steps;
      PhiOperator op(p, 1, h, talbot_poles(32, 3));
      StepState st;
      st.history = {Eigen::VectorXd::Constant(1, exact(0.0)),
                    Eigen::VectorXd::Constant(1, exact(h))};
      st.t = h;
      for (int s = 1; s < steps; ++s) {
        Eigen::VectorXd next = exp_multistep_step(op, st, 2);
        st.history.erase(st.history.begin());
        st.history.push_back(next);
        st.t += h;
      }
      errs.push_back(std::abs(st.history.back()[0] - exact(1.0)));
    }
    for (size_t k = 0; k + 1 < errs.size(); ++k) {
      double order = std::log2(errs[k] / errs[k + 1]);
      CHECK(order > 1.8);
      CHECK(order < 2.4);
    }
  }

  // Insufficient history is an error.
  {
    ProblemSpec p = scalar_ode(-1.0, [](double t) { return t; });
    PhiOperator op(p, 1, 0.1, cf_poles());
    StepState st{{Eigen::VectorXd::Ones(1)}, 0.0};
    CHECK_THROWS_AS(exp_multistep_step(op, st, 2), InvalidArgument);
    CHECK_THROWS_AS(exp_multistep_step(op, st, 0), InvalidArgument);
  }
}

TEST_CASE("krogstad and multistep agree on a reaction-diffusion front") {
  // Fisher front at desk scale: the two integrators follow the same
  // trajectory, and halving the Krogstad step barely moves the answer.
  Preset fisher = preset_fisher(1e-3);
  const Eigen::Index n = 96;
  Eigen::VectorXd u0 = initial_coeffs(fisher.initial, n);

  const double h = 2e-3;
  const int steps = 100;  // t = 0.2
  PhiOperator op(fisher.problem, n, h, cf_poles());

  Eigen::VectorXd uk = u0;
  for (int s = 0; s < steps; ++s) uk = etd_krogstad_step(op, uk, s * h);

  // Half-step reference.
  PhiOperator oph(fisher.problem, n, h / 2, cf_poles());
  Eigen::VectorXd ur = u0;
  for (int s = 0; s < 2 * steps; ++s) ur = etd_krogstad_step(oph, ur, s * h / 2);
  CHECK((uk - ur).lpNorm<Eigen::Infinity>() < 1e-8);

  // Multistep (p = 3) bootstrapped by two Krogstad steps.
  StepState st;
  st.history = {u0};
  st.t = 0.0;
  for (int s = 0; s < 2; ++s) {
    st.history.push_back(etd_krogstad_step(op, st.history.back(), s * h));
    st.t += h;
  }
  while (st.t < steps * h - 1e-12) {
    Eigen::VectorXd next = exp_multistep_step(op, st, 3);
    st.history.push_back(next);
    if (st.history.size() > 3) st.history.erase(st.history.begin());
    st.t += h;
  }
  CHECK((st.history.back() - uk).lpNorm<Eigen::Infinity>() < 1e-6);

  // The front stays inside the invariant band and respects the walls.
  Eigen::VectorXd vals = coeffs_to_vals(pad(uk, 257));
  CHECK(vals.minCoeff() > -0.01);
  CHECK(vals.maxCoeff() < 1.01);
  CoeffSeries s{Basis::chebyshev(), uk};
  CHECK(std::abs(evaluate(s, -1.0)) < 1e-13);
  CHECK(std::abs(evaluate(s, 1.0)) < 1e-13);
}
