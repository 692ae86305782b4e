#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "uspde/series.hpp"

using namespace uspde;

namespace {

// Term-by-term reference summation, independent of the Clenshaw path.
double naive_cheb_eval(const Eigen::VectorXd& c, double x) {
  double acc = 0, tkm1 = 1, tk = x;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    double t;
    if (k == 0)
      t = 1;
    else if (k == 1)
      t = x;
    else {
      t = 2 * x * tk - tkm1;
      tkm1 = tk;
      tk = t;
    }
    acc += c[k] * t;
  }
  return acc;
}

}  // namespace

TEST_CASE("cheb_points endpoints and small grids") {
  CHECK_THROWS_AS(cheb_points(1), InvalidArgument);

  auto x2 = cheb_points(2);
  CHECK(x2[0] == doctest::Approx(1.0));
  CHECK(x2[1] == doctest::Approx(-1.0));

  auto x3 = cheb_points(3);
  CHECK(x3[1] == doctest::Approx(0.0));

  auto x5 = cheb_points(5);
  CHECK(x5[1] == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(x5[3] == doctest::Approx(-std::sqrt(2.0) / 2));
  for (int i = 0; i + 1 < 5; ++i) CHECK(x5[i] > x5[i + 1]);
}

TEST_CASE("transform of basis samples") {
  // Constant function: only the T_0 coefficient survives.
  Eigen::VectorXd v = Eigen::VectorXd::Constant(9, 3.0);
  Eigen::VectorXd c = vals_to_coeffs(v);
  CHECK(c[0] == doctest::Approx(3.0));
  CHECK(c.tail(8).cwiseAbs().maxCoeff() < 1e-14);

  // Samples of T_2 on a 5-point grid.
  Eigen::VectorXd x = cheb_points(5);
  Eigen::VectorXd t2(5);
  for (int i = 0; i < 5; ++i) t2[i] = 2 * x[i] * x[i] - 1;
  Eigen::VectorXd c2 = vals_to_coeffs(t2);
  for (int k = 0; k < 5; ++k)
    CHECK(c2[k] == doctest::Approx(k == 2 ? 1.0 : 0.0).epsilon(1e-14));
}

TEST_CASE("inverse transform basics") {
  Eigen::VectorXd c(3);
  c << 1, 0, 0;
  Eigen::VectorXd v = coeffs_to_vals(c);
  for (int i = 0; i < 3; ++i) CHECK(v[i] == doctest::Approx(1.0));

  c << 0, 1, 0;
  v = coeffs_to_vals(c);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(v[2] == doctest::Approx(-1.0));
}

TEST_CASE("transform round trip over both code paths") {
  std::mt19937 rng(42);
  std::normal_distribution<double> dist;
  // 2(n-1) a power of two exercises the FFT path, other sizes the direct sum.
  for (Eigen::Index n : {2, 3, 5, 9, 17, 33, 100, 257, 1025, 2048}) {
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s[i] = dist(rng);
    Eigen::VectorXd back = vals_to_coeffs(coeffs_to_vals(s));
    double tol = 10.0 * static_cast<double>(n) *
                 std::numeric_limits<double>::epsilon() * s.cwiseAbs().maxCoeff();
    CHECK((back - s).cwiseAbs().maxCoeff() <= tol);
  }
}

TEST_CASE("transforms are deterministic") {
  std::mt19937 rng(7);
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(65);
  for (Eigen::Index i = 0; i < 65; ++i) v[i] = dist(rng);
  Eigen::VectorXd a = vals_to_coeffs(v);
  Eigen::VectorXd b = vals_to_coeffs(v);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("smooth narrow pulse resolves well before n = 300") {
  Eigen::VectorXd x = cheb_points(300);
  Eigen::VectorXd v(300);
  for (int i = 0; i < 300; ++i) v[i] = std::exp(-200.0 * x[i] * x[i]);
  Eigen::VectorXd c = vals_to_coeffs(v);
  CHECK(c.tail(20).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("evaluate: pinned values") {
  Eigen::VectorXd c(4);
  c << 0, 0, 0, 1;
  CHECK(evaluate({Basis::chebyshev(), c}, 0.5) == doctest::Approx(-1.0));

  Eigen::VectorXd c2(2);
  c2 << 1, 1;
  CHECK(evaluate({Basis::chebyshev(), c2}, 1.0) == doctest::Approx(2.0));

  Eigen::VectorXd c3(2);
  c3 << 0, 1;
  CHECK(evaluate({Basis::ultraspherical(1), c3}, 0.3) == doctest::Approx(0.6));
}

TEST_CASE("evaluate matches naive summation") {
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  for (Eigen::Index n : {1, 2, 7, 64, 256}) {
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) c[i] = dist(rng);
    CoeffSeries st{Basis::chebyshev(), c};
    for (int trial = 0; trial < 8; ++trial) {
      double x = ux(rng);
      double ref = naive_cheb_eval(c, x);
      CHECK(evaluate(st, x) ==
            doctest::Approx(ref).epsilon(1e-12).scale(c.cwiseAbs().maxCoeff()));
    }
  }
  // Ultraspherical against the direct basis recurrence.
  for (int lambda : {1, 2, 3}) {
    Eigen::VectorXd c(40);
    for (Eigen::Index i = 0; i < 40; ++i) c[i] = dist(rng);
    CoeffSeries s{Basis::ultraspherical(lambda), c};
    for (int trial = 0; trial < 8; ++trial) {
      double x = ux(rng);
      double ref = 0;
      for (Eigen::Index k = 0; k < 40; ++k) ref += c[k] * gegenbauer(lambda, k, x);
      CHECK(evaluate(s, x) == doctest::Approx(ref).epsilon(1e-11));
    }
  }
}

TEST_CASE("gegenbauer pinned values") {
  // C_k^(1) is the second-kind Chebyshev polynomial.
  CHECK(gegenbauer(1, 3, 0.4) == doctest::Approx(8 * 0.4 * 0.4 * 0.4 - 4 * 0.4));
  // C_2^(lambda)(x) = 2 lambda (lambda + 1) x^2 - lambda.
  CHECK(gegenbauer(2, 2, 0.3) == doctest::Approx(12 * 0.09 - 2));
  CHECK(gegenbauer(3, 0, -0.7) == doctest::Approx(1.0));
  CHECK_THROWS_AS(gegenbauer(0, 2, 0.1), InvalidArgument);
}

TEST_CASE("evaluate: fourier sum") {
  // Real signal 1 + 2 cos(pi x) - 3 sin(2 pi x) in the interleaved ordering
  // 0, +1, -1, +2, -2.
  Eigen::VectorXcd c(5);
  c[0] = 1.0;
  c[1] = 1.0;                            // +1
  c[2] = 1.0;                            // -1
  c[3] = std::complex<double>(0, 1.5);   // +2
  c[4] = std::complex<double>(0, -1.5);  // -2
  CoeffSeries s{Basis::fourier(), c};
  for (double x : {-0.9, -0.3, 0.0, 0.4, 0.77}) {
    double ref = 1 + 2 * std::cos(M_PI * x) - 3 * std::sin(2 * M_PI * x);
    CHECK(evaluate(s, x) == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("plateau: frozen reference traces") {
  // Geometric decay to a 1e-16 floor; trace fixed by an independent
  // line-by-line execution of the detection algorithm.
  Eigen::VectorXd u(40);
  for (int k = 0; k < 20; ++k) u[k] = std::pow(10.0, -k);
  for (int k = 20; k < 40; ++k) u[k] = 1e-16;
  PlateauResult p = plateau(u, 1e-14);
  CHECK(p.found);
  CHECK(p.j == 15);
  CHECK(p.j2 == 24);

  // All-zero vector triggers the e1 == 0 branch immediately.
  PlateauResult pz = plateau(Eigen::VectorXd::Zero(40), 1e-14);
  CHECK(pz.found);
  CHECK(pz.j == 2);
  CHECK(pz.j2 == 8);

  // Flat envelope never satisfies the ratio test.
  CHECK_FALSE(plateau(Eigen::VectorXd::Ones(40), 1e-14).found);

  // Slower decay to a higher floor.
  Eigen::VectorXd w(60);
  for (int k = 0; k < 40; ++k) w[k] = std::pow(2.0, -k);
  for (int k = 40; k < 60; ++k) w[k] = 1e-15;
  PlateauResult pw = plateau(w, 1e-14);
  CHECK(pw.found);
  CHECK(pw.j == 41);
  CHECK(pw.j2 == 56);
}

TEST_CASE("plateau: properties") {
  Eigen::VectorXd u(40);
  for (int k = 0; k < 20; ++k) u[k] = std::pow(10.0, -k);
  for (int k = 20; k < 40; ++k) u[k] = 1e-16;

  // Invariance under positive scaling.
  PlateauResult a = plateau(u, 1e-14);
  PlateauResult b = plateau(Eigen::VectorXd(7.3e5 * u), 1e-14);
  CHECK(a.j == b.j);
  CHECK(a.j2 == b.j2);

  // Appending zeros beyond a detected plateau does not move it.
  PlateauResult c = plateau(pad(u, 60), 1e-14);
  CHECK(c.j == a.j);

  // Short vectors never report one.
  CHECK_FALSE(plateau(Eigen::VectorXd::Zero(16), 1e-14).found);

  CHECK_THROWS_AS(plateau(u, 0.0), InvalidArgument);
  CHECK_THROWS_AS(plateau(u, 1.5), InvalidArgument);
}

TEST_CASE("pad and chop") {
  Eigen::VectorXd u(2);
  u << 1, 2;
  Eigen::VectorXd p = pad(u, 4);
  CHECK(p.size() == 4);
  CHECK(p[0] == 1);
  CHECK(p[1] == 2);
  CHECK(p[2] == 0);
  CHECK(p[3] == 0);
  Eigen::VectorXd c = chop(p, 2);
  CHECK(c.size() == 2);
  CHECK(c[1] == 2);
  CHECK_THROWS_AS(pad(p, 2), InvalidArgument);
  CHECK_THROWS_AS(chop(u, 3), InvalidArgument);

  // Zero coefficients contribute nothing.
  Eigen::VectorXd r(5);
  r << 0.3, -1.2, 0.7, 0.05, -0.4;
  CoeffSeries s{Basis::chebyshev(), r};
  CoeffSeries sp{Basis::chebyshev(), pad(r, 10)};
  for (double x : {-0.8, 0.1, 0.9})
    CHECK(evaluate(s, x) == doctest::Approx(evaluate(sp, x)).epsilon(1e-15));
}

TEST_CASE("resolve_function") {
  Eigen::VectorXd c = resolve_function([](double x) { return std::exp(-200 * x * x); });
  CHECK(c.size() >= 100);
  CHECK(c.size() <= 400);
  CoeffSeries s{Basis::chebyshev(), c};
  for (double x : {-0.5, -0.1, 0.0, 0.33, 0.8})
    CHECK(evaluate(s, x) == doctest::Approx(std::exp(-200 * x * x)).epsilon(1e-12));

  // A polynomial resolves at the first grid.
  Eigen::VectorXd q = resolve_function([](double x) { return 4 * x * x * x - 3 * x; });
  CHECK(q.size() <= 17);

  // Non-smooth input never plateaus.
  CHECK_THROWS_AS(
      resolve_function([](double x) { return x > 0.123 ? 1.0 : 0.0; }, 1e-14, 17, 1 << 10),
      ResolutionFailure);
}
