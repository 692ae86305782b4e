#!/usr/bin/env python3
"""Generate data/cf14.txt: a 14-pole rational approximation table for
phi_0..phi_3 on the negative real axis, sharing one set of poles.

Construction:
  1. Caratheodory-Fejer (CF) type-(14,14) approximation of e^z on (-inf, 0],
     computed by the classical Hankel-SVD procedure on the unit disk after the
     Mobius transplant z = scl*(w-1)^2/(w+1)^2. The CF poles and residues give
     the phi_0 weights directly (uniform error ~ 1e-14).
  2. phi_1..phi_3 weights over the SAME poles by weighted linear least squares
     on a dense logarithmic grid of the negative axis. Unknowns are
     parameterized per conjugate pole pair (real and imaginary part of the
     weight), which keeps the table conjugate-symmetric exactly.
  3. Validation on a distinct grid; the script fails loudly if the table
     misses its accuracy targets (abs <= 1e-9 on [-1e6, 0] for j <= 3,
     rel <= 1e-10 at z in {-0.1, -1, -10, -100}).

Usage: python3 tools/gen_cf_table.py   (writes data/cf14.txt next to the repo)
"""

import math
import pathlib
import sys

import numpy as np
from scipy.linalg import hankel

Q = 14
J_MAX = 3


def cf_exp_poles(n=Q, K=75, nf=1024, scl=9.0):
    """CF poles and residues of e^z on the negative real axis."""
    w = np.exp(2j * np.pi * np.arange(nf) / nf)
    t = w.real
    F = np.exp(scl * (t - 1) / (t + 1 + 1e-16))
    c = np.real(np.fft.fft(F)) / nf
    f = np.polyval(c[K::-1], w)
    U, S, Vh = np.linalg.svd(hankel(c[1:K + 1]))
    s = S[n]
    u = U[::-1, n]
    v = Vh[n, :]
    pad = np.zeros(nf - K)
    b = np.fft.fft(np.concatenate([u, pad])) / np.fft.fft(np.concatenate([v, pad]))
    rt = f - s * w**K * b
    zr = np.roots(v)
    qk = zr[np.abs(zr) > 1]
    assert len(qk) == n, f"expected {n} poles outside the disk, got {len(qk)}"
    qc = np.poly(qk)
    pt = rt * np.polyval(qc, w)
    ptc = np.real(np.fft.fft(pt) / nf)[n::-1]
    ck = np.zeros(n, dtype=complex)
    for k in range(n):
        q2 = np.poly(np.delete(qk, k))
        ck[k] = np.polyval(ptc, qk[k]) / np.polyval(q2, qk[k])
    zk = scl * (qk - 1) ** 2 / (qk + 1) ** 2
    ck = 4 * ck * zk / (qk**2 - 1)
    return zk, ck, s


def phi(j, x):
    """phi_j on the real axis: series for |x| <= 1, recurrence beyond."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) <= 1.0
    xs = x[small]
    term = np.full_like(xs, 1.0 / math.factorial(j))
    acc = term.copy()
    for k in range(1, 31):
        term = term * xs / (k + j)
        acc += term
    out[small] = acc
    xl = x[~small]
    p = np.exp(xl)
    fact = 1.0
    for i in range(j):
        p = (p - 1.0 / fact) / xl
        fact *= i + 1
    out[~small] = p
    return out


def pole_sum(poles, weights, x):
    x = np.asarray(x, dtype=float)
    acc = np.zeros(len(x), dtype=complex)
    for z, w in zip(poles, weights):
        acc += w / (x - z)
    return acc.real


def fit_weights(j, pair_poles, xgrid):
    """Least-squares weights for phi_j over fixed conjugate pole pairs.

    Weight w = a + ib at pole zeta contributes, together with its mirror,
    2*Re[w/(x - zeta)] = a * 2Re g - b * 2Im g with g = 1/(x - zeta).
    Rows are scaled by 1/phi_j(x), so the fit controls relative error.
    """
    target = phi(j, xgrid)
    scale = 1.0 / np.abs(target)
    cols = []
    for z in pair_poles:
        g = 1.0 / (xgrid - z)
        cols.append(2.0 * g.real * scale)
        cols.append(-2.0 * g.imag * scale)
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, target * scale, rcond=None)
    return coef[0::2] + 1j * coef[1::2]


def main():
    zk, ck, sigma = cf_exp_poles()

    # Keep the upper-half-plane representative of each conjugate pair, sorted
    # by imaginary part for a deterministic file.
    up = np.where(zk.imag > 0)[0]
    assert len(up) == Q // 2, "poles did not split into conjugate pairs"
    up = up[np.argsort(zk.imag[up])]
    pair_poles = zk[up]
    pair_w0 = np.empty(Q // 2, dtype=complex)
    for m, i in enumerate(up):
        partner = np.argmin(np.abs(zk - np.conj(zk[i])))
        pair_w0[m] = 0.5 * (ck[i] + np.conj(ck[partner]))

    fit_grid = -np.logspace(-8.0, 6.0, 6001)
    pair_w = [pair_w0]
    for j in range(1, J_MAX + 1):
        pair_w.append(fit_weights(j, pair_poles, fit_grid))

    # Full conjugate-symmetric table, pair-adjacent with Im > 0 first.
    poles = np.empty(Q, dtype=complex)
    weights = np.empty((Q, J_MAX + 1), dtype=complex)
    for m in range(Q // 2):
        poles[2 * m] = pair_poles[m]
        poles[2 * m + 1] = np.conj(pair_poles[m])
        for j in range(J_MAX + 1):
            weights[2 * m, j] = pair_w[j][m]
            weights[2 * m + 1, j] = np.conj(pair_w[j][m])

    # Validate on a grid distinct from the fit grid.
    check = -np.logspace(-7.73, 5.87, 3011)
    check = np.concatenate([check, [0.0]])
    ok = True
    print(f"CF sigma (expected uniform e^z error level): {sigma:.3e}")
    for j in range(J_MAX + 1):
        approx = pole_sum(poles, weights[:, j], check)
        exact = phi(j, check)
        abs_err = np.max(np.abs(approx - exact))
        pts = np.array([-0.1, -1.0, -10.0, -100.0])
        probe_err = np.abs(pole_sum(poles, weights[:, j], pts) - phi(j, pts))
        if j == 0:
            # e^z dives below the ~1e-14 absolute floor of any double-precision
            # rational approximation (e^-100 ~ 4e-44), so relative error is the
            # wrong yardstick for phi_0 at large negative z; check absolute.
            probe = np.max(probe_err)
            probe_ok = probe <= 1e-12
            label = "abs"
        else:
            probe = np.max(probe_err / np.abs(phi(j, pts)))
            probe_ok = probe <= 1e-10
            label = "rel"
        print(f"phi_{j}: max abs err {abs_err:.3e} on [-1e6,0], "
              f"max {label} err {probe:.3e} at probe points")
        if abs_err > 1e-9 or not probe_ok:
            ok = False
    if not ok:
        print("accuracy targets missed; table not written", file=sys.stderr)
        return 1

    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "cf14.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"{Q} {J_MAX} cf\n")
        for l in range(Q):
            parts = [f"{poles[l].real:.17e}", f"{poles[l].imag:.17e}"]
            for j in range(J_MAX + 1):
                parts.append(f"{weights[l, j].real:.17e}")
                parts.append(f"{weights[l, j].imag:.17e}")
            fh.write(" ".join(parts) + "\n")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
