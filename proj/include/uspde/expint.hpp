#pragma once

#include <complex>
#include <string>

#include "uspde/stepping.hpp"

namespace uspde {

// phi_0(z) = e^z, phi_{j+1}(z) = (phi_j(z) - 1/j!)/z. The recurrence loses
// roughly a factor 1/|z| of precision per level, so small arguments switch to
// the Taylor series sum_k z^k/(k+j)!.
std::complex<double> phi_scalar(int j, std::complex<double> z);

// zeta_0..zeta_{p-1}: the exponential-multistep interpolation weights,
// zeta_0 = phi_1, z zeta_j(z) + 1 = sum_{i<j} zeta_i(z)/(j-i).
Eigen::VectorXcd zeta_weights(int p, std::complex<double> z);

// Each zeta_j is a fixed combination of phi-functions: row j holds the
// coefficients of phi_0..phi_p in zeta_j (column 0 is always zero;
// zeta_0 = phi_1, zeta_1 = phi_2, zeta_2 = phi_2/2 + phi_3, ...).
Eigen::MatrixXd zeta_phi_coeffs(int p);

enum class PoleKind { TalbotContour, CaratheodoryFejer };

// Common poles z_l with per-function weights: sum_l weights(l, j)/(z - z_l)
// approximates phi_j(z) for z near the negative real axis. Poles are stored
// conjugate-pair adjacent (positive imaginary part first) so that real inputs
// produce real outputs after pairwise symmetrization.
struct PoleSet {
  PoleKind kind = PoleKind::TalbotContour;
  int q = 0;
  int j_max = 0;
  Eigen::VectorXcd poles;    // length q
  Eigen::MatrixXcd weights;  // q x (j_max + 1)

  void validate() const;

  // The rational approximation r_(j)(z) this set induces.
  std::complex<double> evaluate(int j, std::complex<double> z) const;
};

// Midpoint discretization of the optimized cotangent contour
// phi(theta) = q (0.5017 theta cot(0.6407 theta) - 0.6122 + 0.2645 i theta),
// theta_l = pi (2l - q - 1)/q. Accurate uniformly on the negative real axis;
// q must be even and at least 16.
PoleSet talbot_poles(int q, int j_max);

// Caratheodory-Fejer pole table from a shipped plain-text file. Format:
// header "q j_max kind", then one line per pole with re/im of the pole
// followed by re/im of each weight.
PoleSet load_pole_table(const std::string& path);

// Shipped common-pole tables (data/cf<q>.txt, q = 14 provided); honors the
// USPDE_DATA environment variable as an override for the data directory.
// Requesting a smaller j_max than the table carries chops the weight columns.
PoleSet cf_poles(int q = 14, int j_max = 3);

// Action of phi_j(scale * G) on length-n Chebyshev coefficient vectors, where
// G = h S_{N-1}...S_0^{-1} L restricted to the problem's homogeneous boundary
// conditions. Every pole shift is one almost-banded bordered solve
//   [B; scale h L - z_l S] x_l = [0; S xi],
// factored once per (scale, pole) and cached.
class PhiOperator {
public:
  PhiOperator(const ProblemSpec& p, Eigen::Index n, double h, PoleSet ps);

  Eigen::Index n() const { return n_; }
  double h() const { return h_; }
  const PoleSet& poles() const { return ps_; }
  const ProblemSpec& problem() const { return p_; }

  // Pole solutions for one input vector; all phi_j of that input combine from
  // the same solves. coeff has size j_max + 1.
  struct Sweep {
    const PhiOperator* op = nullptr;
    std::vector<Eigen::VectorXcd> x;  // one per stored pole representative
    Eigen::VectorXd combine(const Eigen::VectorXd& coeff) const;
  };
  Sweep sweep(double scale, const Eigen::VectorXd& xi) const;

  // phi_j(scale * G) xi in one sweep.
  Eigen::VectorXd apply(int j, const Eigen::VectorXd& xi, double scale = 1.0) const;

private:
  ProblemSpec p_;
  Eigen::Index n_ = 0;
  double h_ = 0;
  PoleSet ps_;
  BandedMatrix<double> lrect_, srect_;              // (n - N) x n
  BandedMatrix<std::complex<double>> lc_, sc_;      // complex copies for shifts
  Eigen::MatrixXd brows_;                           // N x n
  std::vector<int> rep_;                            // pole indices actually solved
  std::vector<double> mult_;                        // 2 for a conjugate pair, 1 real
};

Eigen::VectorXd phi_apply(const PhiOperator& op, int j, const Eigen::VectorXd& xi);

// One step of Krogstad's four-stage exponential Runge-Kutta method, advancing
// by the operator's own h (the pole systems are factored for that h, so the
// step size is not a free parameter here). The pole set needs j_max >= 3.
Eigen::VectorXd etd_krogstad_step(const PhiOperator& op, const Eigen::VectorXd& u,
                                  double t);

// One exponential-multistep step of order p_order (backward differences of
// the nonlinear term). Needs p_order history vectors and j_max >= p_order.
Eigen::VectorXd exp_multistep_step(const PhiOperator& op, const StepState& st,
                                   int p_order);

}  // namespace uspde
