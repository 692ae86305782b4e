#include "uspde/operators.hpp"

#include <cmath>

namespace uspde {

BandedMatrix<double> diff_op(int lambda, Eigen::Index rows, Eigen::Index cols) {
  if (lambda < 1) throw InvalidArgument("diff_op: lambda >= 1 required");
  if (lambda >= cols) throw InvalidArgument("diff_op: lambda must be < column count");
  double pre = 1;
  for (int i = 1; i < lambda; ++i) pre *= 2.0 * i;  // 2^(lambda-1) (lambda-1)!
  BandedMatrix<double> d(rows, cols, 0, lambda);
  for (Eigen::Index i = 0; i < rows && i + lambda < cols; ++i)
    d.set(i, i + lambda, pre * static_cast<double>(lambda + i));
  return d;
}

BandedMatrix<double> diff_op(int lambda, Eigen::Index n) {
  return diff_op(lambda, n - lambda, n);
}

BandedMatrix<double> conv_op(int lambda, Eigen::Index rows, Eigen::Index cols) {
  if (lambda < 0) throw InvalidArgument("conv_op: lambda >= 0 required");
  BandedMatrix<double> s(rows, cols, 0, 2);
  for (Eigen::Index k = 0; k < rows; ++k) {
    double diag, off;
    if (lambda == 0) {
      diag = k == 0 ? 1.0 : 0.5;
      off = -0.5;
    } else {
      diag = static_cast<double>(lambda) / static_cast<double>(lambda + k);
      off = -static_cast<double>(lambda) / static_cast<double>(lambda + k + 2);
    }
    if (k < cols) s.set(k, k, diag);
    if (k + 2 < cols) s.set(k, k + 2, off);
  }
  return s;
}

BandedMatrix<double> conv_op(int lambda, Eigen::Index n) {
  return conv_op(lambda, n, n);
}

void conv_inv_apply(int lambda, Eigen::VectorXd& v) {
  banded_upper_solve(conv_op(lambda, v.size()), v);
}

Eigen::VectorXd conv_inv(int lambda, const Eigen::VectorXd& v) {
  Eigen::VectorXd x = v;
  conv_inv_apply(lambda, x);
  return x;
}

BandedMatrix<double> conv_chain(int order, Eigen::Index rows, Eigen::Index cols) {
  if (order < 0) throw InvalidArgument("conv_chain: order >= 0 required");
  if (order == 0) {
    BandedMatrix<double> id(rows, cols, 0, 0);
    for (Eigen::Index i = 0; i < std::min(rows, cols); ++i) id.set(i, i, 1.0);
    return id;
  }
  Eigen::Index m = std::min(rows + 2, cols);
  BandedMatrix<double> chain = conv_op(order - 1, rows, m);
  for (int mu = order - 2; mu >= 0; --mu) {
    Eigen::Index next = std::min(m + 2, cols);
    chain = chain * conv_op(mu, m, next);
    m = next;
  }
  if (m != cols)
    throw InvalidArgument("conv_chain: cols too small for the requested chain");
  return chain;
}

namespace {

// Linearization coefficient c_s^lambda(j, k) evaluated as grouped ratio
// products; every partial stays within a polynomial range of j + k.
double cs_lambda(int lambda, Eigen::Index s, Eigen::Index j, Eigen::Index k) {
  const double lam = lambda;
  double pre = (static_cast<double>(j + k) + lam - 2.0 * s) /
               (static_cast<double>(j + k) + lam - static_cast<double>(s));
  double a = 1;
  for (Eigen::Index i = 0; i < s; ++i) a *= (lam + i) / (1.0 + i);
  double c = 1;
  for (Eigen::Index i = 0; i < k - s; ++i) c *= (lam + i) / (1.0 + i);
  double d = 1;
  for (Eigen::Index i = j + k - 2 * s; i < j + k - s; ++i) d *= (2 * lam + i) / (lam + i);
  // Fused product of two mutually cancelling ratio chains; overlapping factors
  // drop out exactly, so multiplication by one stays the exact identity.
  double be = 1;
  Eigen::Index blen = j - s, elen = j + k - 2 * s;
  for (Eigen::Index i = std::min(blen, elen); i < blen; ++i) be *= (lam + i) / (1.0 + i);
  for (Eigen::Index i = std::min(blen, elen); i < elen; ++i) be *= (1.0 + i) / (lam + i);
  return pre * (be * c) * d * a;
}

}  // namespace

BandedMatrix<double> mult_op(int lambda, const Eigen::VectorXd& a,
                             Eigen::Index rows, Eigen::Index cols) {
  if (a.size() == 0) throw InvalidArgument("mult_op: empty coefficient vector");
  if (lambda < 0) throw InvalidArgument("mult_op: lambda >= 0 required");
  const Eigen::Index deg = a.size() - 1;
  BandedMatrix<double> m(rows, cols, static_cast<int>(deg), static_cast<int>(deg));

  if (lambda == 0) {
    // T_p T_k = (T_{p+k} + T_{|p-k|}) / 2; accumulate both images of each
    // coefficient, which handles every index coincidence at once.
    for (Eigen::Index k = 0; k < cols; ++k)
      for (Eigen::Index p = 0; p <= deg; ++p) {
        double half = 0.5 * a[p];
        if (half == 0.0) continue;
        if (p + k < rows) m.ref(p + k, k) += half;
        Eigen::Index q = std::abs(p - k);
        if (q < rows) m.ref(q, k) += half;
      }
    return m;
  }

  for (Eigen::Index k = 0; k < cols; ++k) {
    Eigen::Index jlo = std::max<Eigen::Index>(0, k - deg);
    Eigen::Index jhi = std::min<Eigen::Index>(rows - 1, k + deg);
    for (Eigen::Index j = jlo; j <= jhi; ++j) {
      double acc = 0;
      for (Eigen::Index s = std::max<Eigen::Index>(0, k - j); s <= k; ++s) {
        Eigen::Index idx = 2 * s + j - k;
        if (idx > deg) break;  // a-index grows with s
        if (a[idx] != 0.0) acc += a[idx] * cs_lambda(lambda, s, k, idx);
      }
      if (acc != 0.0) m.ref(j, k) = acc;
    }
  }
  return m;
}

BandedMatrix<double> mult_op(int lambda, const Eigen::VectorXd& a, Eigen::Index n) {
  return mult_op(lambda, a, n, n);
}

OperatorSpec OperatorSpec::constant(const std::vector<double>& c) {
  OperatorSpec spec;
  spec.order = static_cast<int>(c.size()) - 1;
  for (double v : c) {
    Eigen::VectorXd one(1);
    one << v;
    spec.coeff.push_back(one);
  }
  spec.validate();
  return spec;
}

OperatorSpec OperatorSpec::from_callables(
    const std::vector<std::function<double(double)>>& c, double tol) {
  OperatorSpec spec;
  spec.order = static_cast<int>(c.size()) - 1;
  for (int lambda = 0; lambda <= spec.order; ++lambda) {
    if (!c[lambda]) {
      spec.coeff.push_back(Eigen::VectorXd::Zero(1));
      continue;
    }
    Eigen::VectorXd t = resolve_function(c[lambda], tol);
    // Convert T coefficients up to the C^(lambda) basis; conversion is upper
    // triangular, so the square truncation at the resolved length is exact.
    Eigen::VectorXd v = conv_chain(lambda, t.size(), t.size()) * t;
    spec.coeff.push_back(v);
  }
  spec.validate();
  return spec;
}

void OperatorSpec::validate() const {
  if (order < 0 || coeff.size() != static_cast<size_t>(order) + 1)
    throw InvalidArgument("OperatorSpec: need exactly order + 1 coefficients");
  for (const auto& c : coeff)
    if (c.size() == 0) throw InvalidArgument("OperatorSpec: empty coefficient");
  if (coeff[order].cwiseAbs().maxCoeff() == 0.0)
    throw InvalidArgument("OperatorSpec: leading coefficient is identically zero");
}

BandedMatrix<double> assemble_op(const OperatorSpec& spec, Eigen::Index n,
                                 bool square) {
  spec.validate();
  const int N = spec.order;
  if (n <= N) throw InvalidArgument("assemble_op: need n > operator order");
  const Eigen::Index R = square ? n : n - N;

  // Leading term M_N[a^N] D_N. For N = 0 this is the whole operator.
  BandedMatrix<double> L =
      N == 0 ? mult_op(0, spec.coeff[0], R, n)
             : mult_op(N, spec.coeff[N], R, n - N) * diff_op(N, n - N, n);

  // Lower-order terms climb through the conversion chain S_{N-1} ... S_lambda.
  // Heights grow by 2 per conversion factor so every product is an exact
  // truncation of the corresponding infinite operator.
  for (int lambda = N - 1; lambda >= 0; --lambda) {
    const Eigen::VectorXd& a = spec.coeff[lambda];
    if (a.cwiseAbs().maxCoeff() == 0.0) continue;
    Eigen::Index mrows = R + 2 * static_cast<Eigen::Index>(N - lambda);
    BandedMatrix<double> term = mult_op(lambda, a, mrows, n - lambda);
    if (lambda > 0) term = term * diff_op(lambda, n - lambda, n);
    Eigen::Index h = R;
    BandedMatrix<double> chain = conv_op(N - 1, h, h + 2);
    for (int mu = N - 2; mu >= lambda; --mu) {
      chain = chain * conv_op(mu, h + 2, h + 4);
      h += 2;
    }
    L = BandedMatrix<double>::combine(1.0, L, 1.0, chain * term);
  }
  return L;
}

Eigen::RowVectorXd boundary_row(const BoundaryCondition& bc, Eigen::Index n) {
  Eigen::RowVectorXd row(n);
  switch (bc.kind) {
    case BoundaryKind::DirichletRight:
      row.setOnes();
      return row;
    case BoundaryKind::DirichletLeft:
      for (Eigen::Index k = 0; k < n; ++k) row[k] = (k % 2 == 0) ? 1.0 : -1.0;
      return row;
    case BoundaryKind::NeumannRight:
      for (Eigen::Index k = 0; k < n; ++k) row[k] = static_cast<double>(k * k);
      return row;
    case BoundaryKind::NeumannLeft:
      for (Eigen::Index k = 0; k < n; ++k)
        row[k] = (k % 2 == 0 ? -1.0 : 1.0) * static_cast<double>(k * k);
      return row;
    case BoundaryKind::Custom:
      break;
  }
  if (std::abs(bc.x0) > 1.0)
    throw InvalidArgument("boundary_row: evaluation point outside [-1, 1]");
  if (bc.deriv < 0) throw InvalidArgument("boundary_row: negative derivative order");
  const int d = bc.deriv;
  if (d == 0) {
    // T_k(x0) by the cosine recurrence.
    double tm1 = 1.0, t = bc.x0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == 0)
        row[k] = 1.0;
      else if (k == 1)
        row[k] = bc.x0;
      else {
        double next = 2.0 * bc.x0 * t - tm1;
        tm1 = t;
        t = next;
        row[k] = t;
      }
    }
    return row;
  }
  // d-th derivative row: T_k^(d)(x0) = 2^(d-1) (d-1)! k C_{k-d}^(d)(x0).
  double pre = 1;
  for (int i = 1; i < d; ++i) pre *= 2.0 * i;
  row.setZero();
  for (Eigen::Index k = d; k < n; ++k)
    row[k] = pre * static_cast<double>(k) * gegenbauer(d, k - d, bc.x0);
  return row;
}

Eigen::MatrixXd boundary_rows(const std::vector<BoundaryCondition>& bcs,
                              Eigen::Index n) {
  Eigen::MatrixXd b(static_cast<Eigen::Index>(bcs.size()), n);
  for (size_t i = 0; i < bcs.size(); ++i)
    b.row(static_cast<Eigen::Index>(i)) = boundary_row(bcs[i], n);
  return b;
}

Eigen::VectorXd boundary_values(const std::vector<BoundaryCondition>& bcs) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(bcs.size()));
  for (size_t i = 0; i < bcs.size(); ++i) c[static_cast<Eigen::Index>(i)] = bcs[i].value;
  return c;
}

Eigen::VectorXcd fourier_diff_diag(int lambda, Eigen::Index n, double scale) {
  if (lambda < 1) throw InvalidArgument("fourier_diff_diag: lambda >= 1 required");
  if (n % 2 == 0)
    throw InvalidArgument("fourier_diff_diag: n must be odd (paired wavenumbers)");
  Eigen::VectorXcd d(n);
  d[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    double k = static_cast<double>((i + 1) / 2);
    double sign = (i % 2 == 1) ? 1.0 : -1.0;
    d[i] = std::pow(std::complex<double>(0.0, sign * k * scale), lambda);
  }
  return d;
}

}  // namespace uspde
