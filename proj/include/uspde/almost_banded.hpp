#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "uspde/banded.hpp"
#include "uspde/errors.hpp"

namespace uspde {

// Square system consisting of nb dense rows on top of a banded body:
//
//   [ dense  ]   nb x n
//   [ band   ]   (n - nb) x n, band row i occupies columns [i - lower, i + upper]
//
// Boundary-bordered spectral systems have exactly this shape.
template <typename Scalar>
struct AlmostBandedSystem {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense;  // nb x n
  BandedMatrix<Scalar> band;                                    // (n - nb) x n

  Eigen::Index size() const { return dense.cols(); }
  Eigen::Index dense_rows() const { return dense.rows(); }

  void validate() const {
    if (dense.rows() + band.rows() != dense.cols() || band.cols() != dense.cols())
      throw InvalidArgument("AlmostBandedSystem: block shapes do not form a square");
  }

  double inf_norm() const {
    double best = band.inf_norm();
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
      best = std::max(best, dense.row(i).template lpNorm<1>());
    return best;
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_dense() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(size(), size());
    out.topRows(dense.rows()) = dense;
    out.bottomRows(band.rows()) = band.to_dense();
    return out;
  }
};

template <typename T>
T conj_value(const T& x) {
  if constexpr (std::is_same_v<T, std::complex<double>>) {
    return std::conj(x);
  } else {
    return x;
  }
}

// Givens QR of an almost-banded system.
//
// Every working row is kept in a closed form: zeros left of `lead`, an explicit
// window of width W = lower + upper + 1 starting at `lead`, and a tail that is a
// fixed linear combination (kappa) of the original dense rows. Rotating two rows
// with equal lead preserves the form, so R never fills in beyond the window plus
// the rank-nb tail. Factorization is O(n (lower + upper + nb)^2), each solve is
// O(n (lower + upper + nb)) and bitwise deterministic.
template <typename Scalar>
class AlmostBandedQR {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit AlmostBandedQR(const AlmostBandedSystem<Scalar>& a) { factor(a); }

  Eigen::Index size() const { return n_; }

  // Solves A x = b. b is ordered like the system rows: dense block first.
  Vector solve(const Vector& b) const {
    Vector x(n_), work(n_ + nb_);
    solve(b, x, work);
    return x;
  }

  // Allocation-free variant; work must have size n + nb.
  void solve(const Vector& b, Vector& x, Vector& work) const {
    if (b.size() != n_ || x.size() != n_ || work.size() != n_ + nb_)
      throw InvalidArgument("AlmostBandedQR::solve: size mismatch");
    work.head(n_) = b;
    for (const Rotation& g : rotations_) {
      Scalar v1 = work[g.id1], v2 = work[g.id2];
      work[g.id1] = g.c * v1 + g.s * v2;
      work[g.id2] = -conj_value(g.s) * v1 + conj_value(g.c) * v2;
    }
    work.tail(nb_).setZero();
    Scalar* tail = work.data() + n_;
    for (Eigen::Index j = n_ - 1; j >= 0; --j) {
      Scalar acc = work[perm_[j]];
      Eigen::Index chi = std::min<Eigen::Index>(n_ - 1, j + w_ - 1);
      for (Eigen::Index c = j + 1; c <= chi; ++c) acc -= rband_(j, c - j) * x[c];
      for (Eigen::Index m = 0; m < nb_; ++m) acc -= rkappa_(j, m) * tail[m];
      x[j] = acc / rband_(j, 0);
      // Next row needs the tail sum starting one column earlier.
      Eigen::Index enter = j + w_ - 1;
      if (enter <= n_ - 1 && j > 0)
        for (Eigen::Index m = 0; m < nb_; ++m) tail[m] += brows_(m, enter) * x[enter];
    }
  }

private:
  struct Rotation {
    Eigen::Index id1, id2;
    Scalar c, s;
  };

  // One working row during elimination.
  struct WorkRow {
    Eigen::Index id;    // original row index (dense rows first)
    Eigen::Index lead;  // first possibly nonzero column
    Eigen::Index wbase; // offset into win_ storage
  };

  void factor(const AlmostBandedSystem<Scalar>& a) {
    a.validate();
    n_ = a.size();
    nb_ = a.dense_rows();
    const int bl = a.band.lower_bw();
    const int bu = a.band.upper_bw();
    w_ = bl + bu + 1;
    const double threshold = static_cast<double>(n_) *
                             std::numeric_limits<double>::epsilon() * a.inf_norm();

    brows_ = a.dense;
    rband_ = Dense::Zero(n_, w_);
    rkappa_ = Dense::Zero(n_, nb_);
    perm_.assign(static_cast<size_t>(n_), 0);
    rotations_.clear();
    rotations_.reserve(static_cast<size_t>(n_) * static_cast<size_t>(nb_ + bl + 1));

    // Row pool. Windows live in a shared arena, kappa per row.
    std::vector<WorkRow> pool;
    Dense win = Dense::Zero(nb_ + bl + 2, w_);
    Dense kap = Dense::Zero(nb_ + bl + 2, nb_);
    std::vector<Eigen::Index> free_slots;
    for (Eigen::Index s = 0; s < win.rows(); ++s) free_slots.push_back(s);

    auto take_slot = [&]() {
      if (free_slots.empty()) {
        Eigen::Index old = win.rows();
        win.conservativeResize(old + 4, w_);
        kap.conservativeResize(old + 4, nb_);
        for (Eigen::Index s = old; s < old + 4; ++s) free_slots.push_back(s);
      }
      Eigen::Index s = free_slots.back();
      free_slots.pop_back();
      return s;
    };

    auto add_dense_row = [&](Eigen::Index m) {
      Eigen::Index s = take_slot();
      for (Eigen::Index c = 0; c < w_; ++c)
        win(s, c) = (c < n_) ? a.dense(m, c) : Scalar(0);
      kap.row(s).setZero();
      kap(s, m) = Scalar(1);
      pool.push_back({m, 0, s});
    };

    auto add_band_row = [&](Eigen::Index i) {
      Eigen::Index s = take_slot();
      Eigen::Index lead = std::max<Eigen::Index>(0, i - bl);
      for (Eigen::Index c = 0; c < w_; ++c) win(s, c) = a.band.coeff(i, lead + c);
      kap.row(s).setZero();
      pool.push_back({nb_ + i, lead, s});
    };

    for (Eigen::Index m = 0; m < nb_; ++m) add_dense_row(m);
    Eigen::Index next_band = 0;
    const Eigen::Index nbody = n_ - nb_;
    while (next_band < nbody && std::max<Eigen::Index>(0, next_band - bl) == 0)
      add_band_row(next_band++);

    for (Eigen::Index j = 0; j < n_; ++j) {
      // Locate rows whose lead is j; they are kept compacted at the pool front.
      if (pool.empty() || pool.front().lead != j) {
        throw SingularMatrix("AlmostBandedQR: structurally zero pivot column " +
                             std::to_string(j));
      }
      size_t count = 0;
      while (count < pool.size() && pool[count].lead == j) ++count;

      // Pivot: largest magnitude entry in column j for a mild stability win.
      size_t piv = 0;
      double best = -1;
      for (size_t r = 0; r < count; ++r) {
        double v = abs_value(win(pool[r].wbase, 0));
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (piv != 0) std::swap(pool[0], pool[piv]);

      // Rotate every other lead-j row into the pivot.
      for (size_t r = 1; r < count; ++r) {
        Eigen::Index sp = pool[0].wbase, sr = pool[r].wbase;
        Scalar p = win(sp, 0), q = win(sr, 0);
        if (q != Scalar(0)) {
          double rho = std::hypot(abs_value(p), abs_value(q));
          Scalar c = conj_value(p) / Scalar(rho);
          Scalar s = conj_value(q) / Scalar(rho);
          rotations_.push_back({pool[0].id, pool[r].id, c, s});
          for (Eigen::Index cc = 0; cc < w_; ++cc) {
            Scalar v1 = win(sp, cc), v2 = win(sr, cc);
            win(sp, cc) = c * v1 + s * v2;
            win(sr, cc) = -conj_value(s) * v1 + conj_value(c) * v2;
          }
          for (Eigen::Index m = 0; m < nb_; ++m) {
            Scalar v1 = kap(sp, m), v2 = kap(sr, m);
            kap(sp, m) = c * v1 + s * v2;
            kap(sr, m) = -conj_value(s) * v1 + conj_value(c) * v2;
          }
        }
        // Bump the zeroed row to lead j+1: shift its window and pull one
        // tail column into explicit storage.
        for (Eigen::Index cc = 0; cc + 1 < w_; ++cc) win(sr, cc) = win(sr, cc + 1);
        Eigen::Index enter = j + w_;
        Scalar v(0);
        if (enter < n_)
          for (Eigen::Index m = 0; m < nb_; ++m) v += kap(sr, m) * brows_(m, enter);
        win(sr, w_ - 1) = v;
        pool[r].lead = j + 1;
      }

      // Pivot row becomes R row j.
      {
        Eigen::Index sp = pool[0].wbase;
        if (abs_value(win(sp, 0)) <= threshold)
          throw SingularMatrix("AlmostBandedQR: pivot below threshold at row " +
                               std::to_string(j));
        for (Eigen::Index cc = 0; cc < w_; ++cc) rband_(j, cc) = win(sp, cc);
        rkappa_.row(j) = kap.row(sp);
        perm_[j] = pool[0].id;
        free_slots.push_back(sp);
        pool.erase(pool.begin());
      }

      if (next_band < nbody && next_band - bl == j + 1) add_band_row(next_band++);
      // Keep the pool sorted by lead (bumped rows all have lead j+1, the
      // entering row too, so order is already correct).
    }
  }

  Eigen::Index n_ = 0, nb_ = 0, w_ = 0;
  Dense brows_;   // copy of the original dense rows, used for R's tail
  Dense rband_;   // R row j, columns j .. j+w-1
  Dense rkappa_;  // R row j tail coefficients w.r.t. brows_
  std::vector<Eigen::Index> perm_;
  std::vector<Rotation> rotations_;
};

}  // namespace uspde
