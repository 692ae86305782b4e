#include "uspde/expint.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <utility>

#include "uspde/series.hpp"

// Default location of the shipped pole tables; the build points this at the
// source tree's data directory. USPDE_DATA in the environment wins.
#ifndef USPDE_DATA_DIR
#define USPDE_DATA_DIR "data"
#endif

namespace uspde {

namespace {

using Complex = std::complex<double>;

double inv_factorial(int j) {
  double f = 1.0;
  for (int i = 2; i <= j; ++i) f *= i;
  return 1.0 / f;
}

BandedMatrix<Complex> to_complex(const BandedMatrix<double>& a) {
  BandedMatrix<Complex> out(a.rows(), a.cols(), a.lower_bw(), a.upper_bw());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::Index jlo = std::max<Eigen::Index>(0, i - a.lower_bw());
    Eigen::Index jhi = std::min<Eigen::Index>(a.cols() - 1, i + a.upper_bw());
    for (Eigen::Index j = jlo; j <= jhi; ++j) out.set(i, j, Complex(a.coeff(i, j)));
  }
  return out;
}

// T coefficients of the nonlinear term, padded or chopped to length n.
Eigen::VectorXd nl_fit(const ProblemSpec& p, double t, const Eigen::VectorXd& u,
                       Eigen::Index n) {
  Eigen::VectorXd v = eval_nonlinear(p.nonlinear, t, u, 0);
  if (v.size() == n) return v;
  return v.size() < n ? pad(v, n) : chop(v, n);
}

Eigen::VectorXd unit_coeff(int j) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(j + 1);
  e[j] = 1.0;
  return e;
}

}  // namespace

std::complex<double> phi_scalar(int j, std::complex<double> z) {
  if (j < 0) throw InvalidArgument("phi_scalar: negative index");
  if (j == 0) return std::exp(z);
  if (std::abs(z) <= 1.0) {
    // phi_j(z) = sum_k z^k/(k + j)!. The division recurrence loses a factor
    // 1/|z| of precision per level, so small arguments take the series, which
    // converges to full precision well within 30 terms on this disc.
    Complex term(inv_factorial(j));
    Complex sum = term;
    for (int k = 1; k <= 30; ++k) {
      term *= z / static_cast<double>(k + j);
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  Complex phi = std::exp(z);
  double fact = 1.0;  // i!
  for (int i = 0; i < j; ++i) {
    phi = (phi - 1.0 / fact) / z;
    fact *= i + 1;
  }
  return phi;
}

Eigen::MatrixXd zeta_phi_coeffs(int p) {
  if (p < 1) throw InvalidArgument("zeta_phi_coeffs: p must be positive");
  // Row j holds zeta_j in the phi basis. Matching phi coefficients in
  // z zeta_j + 1 = sum_{i<j} zeta_i/(j-i) under z phi_{m+1} = phi_m - 1/m!
  // gives c(j, m+1) = sum_{i<j} c(i, m)/(j-i) with no phi_0 component; the
  // constant terms reduce to the identity sum_m c(j, m)/(m-1)! = 1.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p + 1);
  c(0, 1) = 1.0;
  for (int j = 1; j < p; ++j)
    for (int m = 1; m < p; ++m) {
      double s = 0;
      for (int i = 0; i < j; ++i) s += c(i, m) / static_cast<double>(j - i);
      c(j, m + 1) = s;
    }
  return c;
}

Eigen::VectorXcd zeta_weights(int p, std::complex<double> z) {
  Eigen::MatrixXd c = zeta_phi_coeffs(p);
  Eigen::VectorXcd phis(p + 1);
  for (int m = 0; m <= p; ++m) phis[m] = phi_scalar(m, z);
  Eigen::VectorXcd out(p);
  for (int j = 0; j < p; ++j) {
    Complex acc(0);
    for (int m = 1; m <= p; ++m) acc += c(j, m) * phis[m];
    out[j] = acc;
  }
  return out;
}

void PoleSet::validate() const {
  if (q < 1 || j_max < 0)
    throw InvalidArgument("PoleSet: q >= 1 and j_max >= 0 required");
  if (poles.size() != q || weights.rows() != q || weights.cols() != j_max + 1)
    throw InvalidArgument("PoleSet: pole/weight shapes disagree with q and j_max");
  if (!poles.allFinite() || !weights.allFinite())
    throw InvalidArgument("PoleSet: non-finite pole data");
  // Any nonreal pole is immediately followed by its mirror with conjugate
  // weights; real inputs then symmetrize to real outputs.
  for (Eigen::Index l = 0; l < q;) {
    if (poles[l].imag() == 0.0) {
      ++l;
      continue;
    }
    bool ok = poles[l].imag() > 0.0 && l + 1 < q &&
              poles[l + 1] == std::conj(poles[l]) &&
              !(weights.row(l + 1).array() != weights.row(l).array().conjugate())
                   .any();
    if (!ok)
      throw InvalidArgument("PoleSet: poles must form adjacent conjugate pairs");
    l += 2;
  }
}

std::complex<double> PoleSet::evaluate(int j, std::complex<double> z) const {
  if (j < 0 || j > j_max) throw InvalidArgument("PoleSet::evaluate: j out of range");
  Complex acc(0);
  for (Eigen::Index l = 0; l < q; ++l) acc += weights(l, j) / (z - poles[l]);
  return acc;
}

PoleSet talbot_poles(int q, int j_max) {
  if (q < 16 || q % 2 != 0)
    throw InvalidArgument("talbot_poles: q must be even and at least 16");
  if (j_max < 0) throw InvalidArgument("talbot_poles: j_max must be nonnegative");
  PoleSet ps;
  ps.kind = PoleKind::TalbotContour;
  ps.q = q;
  ps.j_max = j_max;
  ps.poles.resize(q);
  ps.weights.resize(q, j_max + 1);
  // Midpoint nodes theta = pi(2m+1)/q, m = 0..q/2-1, plus mirrors. q even
  // keeps every node off the real axis.
  for (int m = 0; m < q / 2; ++m) {
    const double theta = M_PI * (2 * m + 1) / q;
    const double a = 0.6407 * theta;
    const double cot = std::cos(a) / std::sin(a);
    const double csc2 = 1.0 / (std::sin(a) * std::sin(a));
    const Complex z =
        static_cast<double>(q) * Complex(0.5017 * theta * cot - 0.6122, 0.2645 * theta);
    const Complex dz =
        static_cast<double>(q) * Complex(0.5017 * (cot - a * csc2), 0.2645);
    // Residue weights i q^{-1} e^z dz / z^j for the contour sum over
    // 1/(z - z_l); dividing by z steps j.
    Complex w = Complex(0.0, 1.0 / q) * std::exp(z) * dz;
    ps.poles[2 * m] = z;
    ps.poles[2 * m + 1] = std::conj(z);
    for (int j = 0; j <= j_max; ++j) {
      ps.weights(2 * m, j) = w;
      ps.weights(2 * m + 1, j) = std::conj(w);
      w /= z;
    }
  }
  ps.validate();
  return ps;
}

PoleSet load_pole_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("pole table not found: " + path);
  int q = 0, j_max = -1;
  std::string kind_token;
  if (!(in >> q >> j_max >> kind_token))
    throw ConfigError("pole table header must read 'q j_max kind': " + path);
  PoleSet ps;
  if (kind_token == "cf")
    ps.kind = PoleKind::CaratheodoryFejer;
  else if (kind_token == "talbot")
    ps.kind = PoleKind::TalbotContour;
  else
    throw ConfigError("pole table kind must be 'cf' or 'talbot': " + path);
  if (q < 1 || j_max < 0)
    throw ConfigError("pole table header out of range: " + path);
  ps.q = q;
  ps.j_max = j_max;
  ps.poles.resize(q);
  ps.weights.resize(q, j_max + 1);
  for (int l = 0; l < q; ++l) {
    double re, im;
    if (!(in >> re >> im)) throw ConfigError("pole table truncated: " + path);
    ps.poles[l] = Complex(re, im);
    for (int j = 0; j <= j_max; ++j) {
      if (!(in >> re >> im)) throw ConfigError("pole table truncated: " + path);
      ps.weights(l, j) = Complex(re, im);
    }
  }
  try {
    ps.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("pole table invalid: ") + e.what());
  }
  return ps;
}

PoleSet cf_poles(int q, int j_max) {
  const char* env = std::getenv("USPDE_DATA");
  std::string dir = env ? env : USPDE_DATA_DIR;
  std::string path = dir + "/cf" + std::to_string(q) + ".txt";
  PoleSet ps = load_pole_table(path);
  if (ps.kind != PoleKind::CaratheodoryFejer)
    throw ConfigError("cf_poles: table is not tagged 'cf': " + path);
  if (ps.q != q) throw ConfigError("cf_poles: table q mismatch: " + path);
  if (ps.j_max < j_max)
    throw ConfigError("cf_poles: table lacks weights up to the requested j_max: " +
                      path);
  if (ps.j_max > j_max) {
    ps.weights = ps.weights.leftCols(j_max + 1).eval();
    ps.j_max = j_max;
  }
  return ps;
}

PhiOperator::PhiOperator(const ProblemSpec& p, Eigen::Index n, double h, PoleSet ps)
    : p_(p), n_(n), h_(h), ps_(std::move(ps)) {
  p_.validate();
  ps_.validate();
  const int N = p_.linear.order;
  if (n_ <= N) throw InvalidArgument("PhiOperator: need n > operator order");
  if (!std::isfinite(h_)) throw InvalidArgument("PhiOperator: nonfinite h");
  // The shifted solves border homogeneous boundary rows; inhomogeneous values
  // have no representation in the pole sum.
  for (const BoundaryCondition& bc : p_.boundary)
    if (bc.value != 0.0)
      throw InvalidArgument("PhiOperator: boundary values must be homogeneous");
  lrect_ = assemble_op(p_.linear, n_);
  srect_ = conv_chain(N, n_ - N, n_);
  lc_ = to_complex(lrect_);
  sc_ = to_complex(srect_);
  brows_ = boundary_rows(p_.boundary, n_);
  for (Eigen::Index l = 0; l < ps_.q; ++l) {
    if (ps_.poles[l].imag() < 0.0) continue;  // second of a validated pair
    rep_.push_back(static_cast<int>(l));
    mult_.push_back(ps_.poles[l].imag() > 0.0 ? 2.0 : 1.0);
  }
}

PhiOperator::Sweep PhiOperator::sweep(double scale, const Eigen::VectorXd& xi) const {
  if (xi.size() != n_) throw InvalidArgument("PhiOperator: vector length mismatch");
  Sweep sw;
  sw.op = this;
  if (xi.isZero(0.0)) return sw;  // exact zero input: every phi-action vanishes
  const int N = p_.linear.order;
  Eigen::VectorXcd rhs(n_);
  rhs.head(N).setZero();
  {
    Eigen::VectorXd sx(n_ - N);
    srect_.apply(xi, sx);
    rhs.tail(n_ - N) = sx.cast<Complex>();
  }
  sw.x.reserve(rep_.size());
  auto& cache = FactorCache<Complex>::instance();
  Eigen::VectorXcd x(n_), work(n_ + N);
  for (int l : rep_) {
    const Complex zl = ps_.poles[l];
    // One factorization per (problem, n, h*scale, pole); the pole identity is
    // (kind, q, l), which pins the shift value for a given table.
    FactorKey key{p_.cache_tag, static_cast<std::uint64_t>(n_),
                  double_bits(h_ * scale), static_cast<std::uint64_t>(l), 3,
                  (static_cast<std::uint64_t>(ps_.kind) << 32) |
                      static_cast<std::uint64_t>(ps_.q)};
    try {
      auto f = cache.get_or_factor(key, [&] {
        AlmostBandedSystem<Complex> sys{
            brows_.cast<Complex>(),
            BandedMatrix<Complex>::combine(Complex(h_ * scale), lc_, -zl, sc_)};
        return AlmostBandedQR<Complex>(sys);
      });
      f->solve(rhs, x, work);
    } catch (const SingularMatrix& e) {
      throw PoleCollision(std::string("phi sweep: shifted system is singular: ") +
                          e.what());
    }
    sw.x.push_back(x);
  }
  return sw;
}

Eigen::VectorXd PhiOperator::Sweep::combine(const Eigen::VectorXd& coeff) const {
  if (!op) throw InvalidArgument("Sweep::combine: sweep not attached");
  const PoleSet& ps = op->ps_;
  if (coeff.size() < 1 || coeff.size() > ps.j_max + 1)
    throw InvalidArgument("Sweep::combine: need 1..j_max+1 coefficients");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(op->n_);
  for (size_t r = 0; r < x.size(); ++r) {
    Complex wmix(0);
    for (Eigen::Index j = 0; j < coeff.size(); ++j)
      wmix += coeff[j] * ps.weights(op->rep_[r], j);
    out.noalias() += op->mult_[r] * (wmix * x[r]).real();
  }
  return out;
}

Eigen::VectorXd PhiOperator::apply(int j, const Eigen::VectorXd& xi,
                                   double scale) const {
  if (j < 0 || j > ps_.j_max)
    throw InvalidArgument("PhiOperator::apply: j out of range for the pole set");
  return sweep(scale, xi).combine(unit_coeff(j));
}

Eigen::VectorXd phi_apply(const PhiOperator& op, int j, const Eigen::VectorXd& xi) {
  return op.apply(j, xi);
}

Eigen::VectorXd etd_krogstad_step(const PhiOperator& op, const Eigen::VectorXd& u,
                                  double t) {
  if (op.poles().j_max < 3)
    throw InvalidArgument("etd_krogstad_step: pole set must carry weights up to j=3");
  const ProblemSpec& p = op.problem();
  if (!p.nonlinear) return bc_correct(op.apply(0, u), p);
  const double h = op.h();
  const Eigen::Index n = op.n();
  const Eigen::Vector4d e0(1, 0, 0, 0), e1(0, 1, 0, 0), e2(0, 0, 1, 0);

  // Stages at c = (0, 1/2, 1/2, 1); each distinct (scale, vector) pair is one
  // sweep, and the u and h*v1 sweeps at scale 1 serve both stage 4 and the
  // final combination.
  Eigen::VectorXd hv1 = h * nl_fit(p, t, u, n);
  PhiOperator::Sweep shalf_u = op.sweep(0.5, u);
  PhiOperator::Sweep shalf_v1 = op.sweep(0.5, hv1);
  Eigen::VectorXd u2 = shalf_u.combine(e0) + 0.5 * shalf_v1.combine(e1);

  Eigen::VectorXd hv2 = h * nl_fit(p, t + 0.5 * h, u2, n);
  Eigen::VectorXd u3 = u2 + op.sweep(0.5, hv2 - hv1).combine(e2);

  Eigen::VectorXd hv3 = h * nl_fit(p, t + 0.5 * h, u3, n);
  PhiOperator::Sweep sfull_u = op.sweep(1.0, u);
  PhiOperator::Sweep sfull_v1 = op.sweep(1.0, hv1);
  Eigen::VectorXd u4 = sfull_u.combine(e0) + sfull_v1.combine(e1) +
                       2.0 * op.sweep(1.0, hv3 - hv1).combine(e2);

  Eigen::VectorXd hv4 = h * nl_fit(p, t + h, u4, n);
  const Eigen::Vector4d b1(0, 1, -3, 4), b23(0, 0, 2, -4), b4(0, 0, -1, 4);
  Eigen::VectorXd out = sfull_u.combine(e0) + sfull_v1.combine(b1) +
                        op.sweep(1.0, hv2 + hv3).combine(b23) +
                        op.sweep(1.0, hv4).combine(b4);
  return bc_correct(std::move(out), p);
}

Eigen::VectorXd exp_multistep_step(const PhiOperator& op, const StepState& st,
                                   int p_order) {
  if (p_order < 1) throw InvalidArgument("exp_multistep_step: p_order must be >= 1");
  if (op.poles().j_max < p_order)
    throw InvalidArgument(
        "exp_multistep_step: pole set must carry weights up to j = p_order");
  if (static_cast<int>(st.history.size()) < p_order)
    throw InvalidArgument("exp_multistep_step: history shorter than p_order");
  const ProblemSpec& p = op.problem();
  const double h = op.h();
  const Eigen::Index n = op.n();
  for (int i = 0; i < p_order; ++i)
    if (st.history[st.history.size() - 1 - i].size() != n)
      throw InvalidArgument("exp_multistep_step: history length mismatch");

  Eigen::VectorXd out = op.sweep(1.0, st.history.back()).combine(unit_coeff(0));
  if (p.nonlinear) {
    // d[i] starts as v^{k-i}; after the level-j pass it holds the j-th
    // backward difference at k-i, so d[0] walks through nabla^j v^k.
    std::vector<Eigen::VectorXd> d(p_order);
    for (int i = 0; i < p_order; ++i)
      d[i] = nl_fit(p, st.t - i * h, st.history[st.history.size() - 1 - i], n);
    const Eigen::MatrixXd c = zeta_phi_coeffs(p_order);
    out += op.sweep(1.0, h * d[0]).combine(c.row(0).transpose());
    for (int j = 1; j < p_order; ++j) {
      for (int i = 0; i + j < p_order; ++i) d[i] -= d[i + 1];
      out += op.sweep(1.0, h * d[0]).combine(c.row(j).transpose());
    }
  }
  return bc_correct(std::move(out), p);
}

}  // namespace uspde
