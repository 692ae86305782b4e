#include "uspde/series.hpp"

#include <cmath>
#include <vector>

#include "fft.hpp"

namespace uspde {

Eigen::VectorXd cheb_points(Eigen::Index n) {
  if (n < 2) throw InvalidArgument("cheb_points: need n >= 2");
  Eigen::VectorXd x(n);
  for (Eigen::Index k = 0; k < n; ++k)
    x[k] = std::cos(M_PI * static_cast<double>(k) / static_cast<double>(n - 1));
  return x;
}

namespace {

// DCT-I pair through the even extension of length 2(n-1). The FFT path is used
// when that length is a power of two, otherwise a direct cosine sum.
Eigen::VectorXd dct_forward(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  const Eigen::Index m = n - 1;
  Eigen::VectorXd c(n);
  if (detail::is_pow2(static_cast<std::size_t>(2 * m))) {
    std::vector<std::complex<double>> e(static_cast<std::size_t>(2 * m));
    for (Eigen::Index j = 0; j <= m; ++j) e[j] = v[j];
    for (Eigen::Index j = 1; j < m; ++j) e[2 * m - j] = v[j];
    detail::fft_pow2(e);
    for (Eigen::Index k = 0; k < n; ++k) {
      double w = (k == 0 || k == m) ? 0.5 : 1.0;
      c[k] = w * e[k].real() / static_cast<double>(m);
    }
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      double acc = 0.5 * (v[0] + (k % 2 == 0 ? v[m] : -v[m]));
      for (Eigen::Index j = 1; j < m; ++j)
        acc += v[j] * std::cos(M_PI * static_cast<double>(j * k) / static_cast<double>(m));
      double w = (k == 0 || k == m) ? 0.5 : 1.0;
      c[k] = 2.0 * w * acc / static_cast<double>(m);
    }
  }
  return c;
}

Eigen::VectorXd dct_inverse(const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = n - 1;
  Eigen::VectorXd v(n);
  if (detail::is_pow2(static_cast<std::size_t>(2 * m))) {
    std::vector<std::complex<double>> e(static_cast<std::size_t>(2 * m));
    for (Eigen::Index k = 0; k <= m; ++k) e[k] = c[k];
    for (Eigen::Index k = 1; k < m; ++k) e[2 * m - k] = c[k];
    detail::fft_pow2(e);
    for (Eigen::Index j = 0; j < n; ++j)
      v[j] = 0.5 * (e[j].real() + c[0] + (j % 2 == 0 ? c[m] : -c[m]));
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = c[0] + (j % 2 == 0 ? c[m] : -c[m]);
      for (Eigen::Index k = 1; k < m; ++k)
        acc += 2.0 * c[k] * std::cos(M_PI * static_cast<double>(j * k) / static_cast<double>(m));
      v[j] = 0.5 * (acc + c[0] + (j % 2 == 0 ? c[m] : -c[m]));
    }
  }
  return v;
}

}  // namespace

Eigen::VectorXd vals_to_coeffs(const Eigen::VectorXd& vals) {
  if (vals.size() < 2) throw InvalidArgument("vals_to_coeffs: need at least 2 values");
  return dct_forward(vals);
}

Eigen::VectorXd coeffs_to_vals(const Eigen::VectorXd& coeffs) {
  if (coeffs.size() < 2) throw InvalidArgument("coeffs_to_vals: need at least 2 coefficients");
  return dct_inverse(coeffs);
}

double gegenbauer(int lambda, Eigen::Index k, double x) {
  if (lambda < 1) throw InvalidArgument("gegenbauer: lambda >= 1 required");
  if (k == 0) return 1.0;
  double pm1 = 1.0;
  double p = 2.0 * lambda * x;
  for (Eigen::Index i = 2; i <= k; ++i) {
    double next = (2.0 * (static_cast<double>(i) + lambda - 1.0) * x * p -
                   (static_cast<double>(i) + 2.0 * lambda - 2.0) * pm1) /
                  static_cast<double>(i);
    pm1 = p;
    p = next;
  }
  return p;
}

double evaluate(const CoeffSeries& s, double x) {
  switch (s.basis.kind) {
    case Basis::Kind::Chebyshev: {
      const Eigen::VectorXd& c = s.coeffs;
      const Eigen::Index m = c.size() - 1;
      if (m < 0) return 0.0;
      if (m == 0) return c[0];
      double b1 = 0, b2 = 0;
      for (Eigen::Index k = m; k >= 1; --k) {
        double b = c[k] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b;
      }
      return c[0] + x * b1 - b2;
    }
    case Basis::Kind::Ultraspherical: {
      // Clenshaw for p_{k+1} = A_k p_k + B_k p_{k-1} with
      // A_k = 2x(k+lambda)/(k+1), B_k = -(k+2lambda-1)/(k+1).
      const Eigen::VectorXd& c = s.coeffs;
      const double lam = s.basis.lambda;
      const Eigen::Index m = c.size() - 1;
      if (m < 0) return 0.0;
      if (m == 0) return c[0];
      double b1 = 0, b2 = 0;
      for (Eigen::Index k = m; k >= 1; --k) {
        double kk = static_cast<double>(k);
        double a_k = 2.0 * x * (kk + lam) / (kk + 1.0);
        double b_k1 = -(kk + 2.0 * lam) / (kk + 2.0);  // B_{k+1}
        double b = c[k] + a_k * b1 + b_k1 * b2;
        b2 = b1;
        b1 = b;
      }
      double b_1 = -lam;  // B_1 = -(1 + 2 lambda - 1) / 2
      return (c[0] + b_1 * b2) + b1 * 2.0 * lam * x;
    }
    case Basis::Kind::Fourier: {
      const Eigen::VectorXcd& c = s.fourier_coeffs;
      std::complex<double> acc(0, 0);
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        Eigen::Index k = (i + 1) / 2;
        double sign = (i != 0 && i % 2 == 0) ? -1.0 : 1.0;
        double angle = sign * static_cast<double>(k) * M_PI * x;
        acc += c[i] * std::complex<double>(std::cos(angle), std::sin(angle));
      }
      return acc.real();
    }
  }
  throw InvalidArgument("evaluate: unknown basis");
}

namespace {
Eigen::Index round_half_away(double x) {
  return static_cast<Eigen::Index>(std::floor(x + 0.5));
}
}  // namespace

PlateauResult plateau(const Eigen::VectorXd& u, double tol) {
  if (!(tol > 0.0 && tol < 1.0)) throw InvalidArgument("plateau: tol must be in (0, 1)");
  const Eigen::Index n = u.size();
  PlateauResult res;
  if (n < 17) return res;

  // envelope[j] = max_{j <= k <= n} |u_k| with 1-based j, normalized so the
  // full-vector maximum is 1 (unless the vector is identically zero).
  Eigen::VectorXd env(n + 1);
  double running = 0;
  for (Eigen::Index k = n; k >= 1; --k) {
    running = std::max(running, std::abs(u[k - 1]));
    env[k] = running;
  }
  if (env[1] != 0.0) env /= env[1];

  const double log_tol = std::log(tol);
  for (Eigen::Index j = 2; j <= n; ++j) {
    Eigen::Index j2 = round_half_away(1.25 * static_cast<double>(j) + 5.0);
    if (j2 > n) j2 = n;
    double e1 = env[j];
    if (e1 == 0.0) {
      res.found = true;
      res.j = j;
      res.j2 = j2;
      return res;
    }
    double e2 = env[j2];
    double r = 3.0 * (1.0 - std::log(e1) / log_tol);
    if (e2 / e1 > r) {
      res.found = true;
      res.j = j;
      res.j2 = j2;
      return res;
    }
  }
  return res;
}

Eigen::VectorXd pad(const Eigen::VectorXd& u, Eigen::Index m) {
  if (m < u.size()) throw InvalidArgument("pad: target shorter than input");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  out.head(u.size()) = u;
  return out;
}

Eigen::VectorXd chop(const Eigen::VectorXd& u, Eigen::Index m) {
  if (m > u.size() || m < 0) throw InvalidArgument("chop: target longer than input");
  return u.head(m);
}

Eigen::VectorXd resolve_function(const std::function<double(double)>& f, double tol,
                                 Eigen::Index n_start, Eigen::Index n_max) {
  Eigen::Index lower = std::max<Eigen::Index>(n_start, 17);
  Eigen::Index m = 17;
  while (m < lower) m = 2 * (m - 1) + 1;
  for (;;) {
    Eigen::VectorXd x = cheb_points(m);
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = f(x[i]);
    Eigen::VectorXd c = vals_to_coeffs(v);
    PlateauResult p = plateau(c, tol);
    if (p.found) return chop(c, std::min(p.j2, m));
    if (m - 1 >= n_max)
      throw ResolutionFailure("resolve_function: no plateau up to n_max = " +
                              std::to_string(n_max));
    m = 2 * (m - 1) + 1;
  }
}

}  // namespace uspde
