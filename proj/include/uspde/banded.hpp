#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "uspde/errors.hpp"

namespace uspde {

template <typename T>
double abs_value(const T& x) {
  if constexpr (std::is_same_v<T, std::complex<double>>) {
    return std::abs(x);
  } else {
    return std::abs(static_cast<double>(x));
  }
}

// Rectangular banded matrix. Entry (i, j) may be nonzero only when
// -lower <= j - i <= upper. Storage is one dense block of size
// (lower + upper + 1) x cols laid out by diagonals: band(u + i - j, j) = A(i, j).
template <typename Scalar>
class BandedMatrix {
public:
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BandedMatrix() : rows_(0), cols_(0), lower_(0), upper_(0) {}

  BandedMatrix(Eigen::Index rows, Eigen::Index cols, int lower, int upper)
      : rows_(rows), cols_(cols), lower_(lower), upper_(upper) {
    if (rows < 0 || cols < 0 || lower < 0 || upper < 0)
      throw InvalidArgument("BandedMatrix: negative dimension or bandwidth");
    band_ = Dense::Zero(lower_ + upper_ + 1, cols_);
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  int lower_bw() const { return lower_; }
  int upper_bw() const { return upper_; }

  bool in_band(Eigen::Index i, Eigen::Index j) const {
    return i >= 0 && i < rows_ && j >= 0 && j < cols_ && j - i <= upper_ &&
           i - j <= lower_;
  }

  Scalar coeff(Eigen::Index i, Eigen::Index j) const {
    return in_band(i, j) ? band_(upper_ + i - j, j) : Scalar(0);
  }

  // Mutable access; the entry must lie inside the band.
  Scalar& ref(Eigen::Index i, Eigen::Index j) {
    if (!in_band(i, j)) throw InvalidArgument("BandedMatrix: entry outside band");
    return band_(upper_ + i - j, j);
  }

  void set(Eigen::Index i, Eigen::Index j, Scalar v) { ref(i, j) = v; }

  Dense to_dense() const {
    Dense out = Dense::Zero(rows_, cols_);
    for (Eigen::Index j = 0; j < cols_; ++j) {
      Eigen::Index ilo = std::max<Eigen::Index>(0, j - upper_);
      Eigen::Index ihi = std::min<Eigen::Index>(rows_ - 1, j + lower_);
      for (Eigen::Index i = ilo; i <= ihi; ++i) out(i, j) = band_(upper_ + i - j, j);
    }
    return out;
  }

  // y = A * x, no allocation. y must have size rows().
  template <typename VecIn, typename VecOut>
  void apply(const VecIn& x, VecOut& y) const {
    if (x.size() != cols_ || y.size() != rows_)
      throw InvalidArgument("BandedMatrix::apply: size mismatch");
    for (Eigen::Index i = 0; i < rows_; ++i) {
      Eigen::Index jlo = std::max<Eigen::Index>(0, i - lower_);
      Eigen::Index jhi = std::min<Eigen::Index>(cols_ - 1, i + upper_);
      Scalar acc(0);
      for (Eigen::Index j = jlo; j <= jhi; ++j) acc += band_(upper_ + i - j, j) * x[j];
      y[i] = acc;
    }
  }

  Vector operator*(const Vector& x) const {
    Vector y(rows_);
    apply(x, y);
    return y;
  }

  BandedMatrix& operator*=(Scalar a) {
    band_ *= a;
    return *this;
  }

  friend BandedMatrix operator*(Scalar a, BandedMatrix m) {
    m *= a;
    return m;
  }

  // C = A * B with exact band bookkeeping: bandwidths add.
  friend BandedMatrix operator*(const BandedMatrix& a, const BandedMatrix& b) {
    if (a.cols_ != b.rows_)
      throw InvalidArgument("BandedMatrix: product dimension mismatch");
    BandedMatrix c(a.rows_, b.cols_, a.lower_ + b.lower_, a.upper_ + b.upper_);
    for (Eigen::Index i = 0; i < c.rows_; ++i) {
      Eigen::Index klo = std::max<Eigen::Index>(0, i - a.lower_);
      Eigen::Index khi = std::min<Eigen::Index>(a.cols_ - 1, i + a.upper_);
      for (Eigen::Index k = klo; k <= khi; ++k) {
        Scalar aik = a.band_(a.upper_ + i - k, k);
        if (aik == Scalar(0)) continue;
        Eigen::Index jlo = std::max<Eigen::Index>(0, k - b.lower_);
        Eigen::Index jhi = std::min<Eigen::Index>(b.cols_ - 1, k + b.upper_);
        for (Eigen::Index j = jlo; j <= jhi; ++j)
          c.band_(c.upper_ + i - j, j) += aik * b.band_(b.upper_ + k - j, j);
      }
    }
    return c;
  }

  // C = alpha*A + beta*B over the union band.
  static BandedMatrix combine(Scalar alpha, const BandedMatrix& a, Scalar beta,
                              const BandedMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw InvalidArgument("BandedMatrix::combine: shape mismatch");
    BandedMatrix c(a.rows_, a.cols_, std::max(a.lower_, b.lower_),
                   std::max(a.upper_, b.upper_));
    for (Eigen::Index j = 0; j < c.cols_; ++j) {
      Eigen::Index ilo = std::max<Eigen::Index>(0, j - c.upper_);
      Eigen::Index ihi = std::min<Eigen::Index>(c.rows_ - 1, j + c.lower_);
      for (Eigen::Index i = ilo; i <= ihi; ++i)
        c.band_(c.upper_ + i - j, j) = alpha * a.coeff(i, j) + beta * b.coeff(i, j);
    }
    return c;
  }

  double inf_norm() const {
    double best = 0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      Eigen::Index jlo = std::max<Eigen::Index>(0, i - lower_);
      Eigen::Index jhi = std::min<Eigen::Index>(cols_ - 1, i + upper_);
      double s = 0;
      for (Eigen::Index j = jlo; j <= jhi; ++j) s += abs_value(band_(upper_ + i - j, j));
      best = std::max(best, s);
    }
    return best;
  }

private:
  Eigen::Index rows_, cols_;
  int lower_, upper_;
  Dense band_;
};

// Solves U x = b in place for square upper-triangular banded U (lower_bw == 0).
// Two consecutive solves with the same inputs are bitwise identical.
template <typename Scalar, typename Vec>
void banded_upper_solve(const BandedMatrix<Scalar>& u, Vec& x) {
  if (u.rows() != u.cols() || u.lower_bw() != 0)
    throw InvalidArgument("banded_upper_solve: matrix must be square upper banded");
  if (x.size() != u.cols()) throw InvalidArgument("banded_upper_solve: size mismatch");
  const Eigen::Index n = u.rows();
  const double tol = static_cast<double>(n) *
                     std::numeric_limits<double>::epsilon() * u.inf_norm();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    Scalar acc = x[i];
    Eigen::Index jhi = std::min<Eigen::Index>(n - 1, i + u.upper_bw());
    for (Eigen::Index j = i + 1; j <= jhi; ++j) acc -= u.coeff(i, j) * x[j];
    Scalar d = u.coeff(i, i);
    if (abs_value(d) <= tol)
      throw SingularMatrix("banded_upper_solve: zero pivot at row " + std::to_string(i));
    x[i] = acc / d;
  }
}

}  // namespace uspde
