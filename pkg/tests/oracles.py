"""Independent reference computations used by the tests."""
from __future__ import annotations

from fractions import Fraction

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def mp_basis(term, omega, x, der):
    """Built-in basis term and derivatives in multiprecision."""
    fam, k = term
    if fam == "poly":
        if der == 0:
            return x ** k
        if der == 1:
            return k * x ** (k - 1)
        return k * (k - 1) * x ** (k - 2)
    w = k * mp.mpf(omega)
    if fam == "cos":
        return [mp.cos(w * x), -w * mp.sin(w * x), -w * w * mp.cos(w * x)][der]
    return [mp.sin(w * x), w * mp.cos(w * x), -w * w * mp.sin(w * x)][der]


def _relres(M, x, r):
    num = mp.norm(M * x - r)
    den = mp.mnorm(M, "f") * mp.norm(x) + mp.norm(r)
    return float(num / den) if den else float(num)


def mp_tableau_residuals(basis, tab):
    """Relative residuals of the three defining systems, evaluated at 50 digits.

    The literal systems are badly conditioned for trigonometric bases at
    small h, so double-precision residuals mostly measure cancellation in
    the right-hand side rather than the quality of the coefficients.
    """
    terms, om = basis.terms, basis.omega
    t, h = mp.mpf(tab.t), mp.mpf(tab.h)
    c = [mp.mpf(float(v)) for v in tab.c]
    s = len(c)
    FT = mp.matrix([[mp_basis(tm, om, t + ci * h, 2) for ci in c] for tm in terms])
    u = lambda x, d: mp.matrix([mp_basis(tm, om, x, d) for tm in terms])  # noqa: E731
    b = mp.matrix([mp.mpf(float(v)) for v in tab.b])
    d = mp.matrix([mp.mpf(float(v)) for v in tab.d])
    out = {
        "b": _relres(h * h * FT, b, u(t + h, 0) - u(t, 0) - h * u(t, 1)),
        "d": _relres(h * FT, d, u(t + h, 1) - u(t, 1)),
    }
    ra = 0.0
    for k in range(s):
        a = mp.matrix([mp.mpf(float(v)) for v in tab.A[k]])
        V = u(t + h + c[k] * h, 0) - u(t + h, 0) - c[k] * h * u(t + h, 1)
        ra = max(ra, _relres(h * h * FT, a, V))
    out["A"] = ra
    return out


def mp_tableau(basis, c, t, h):
    """Reference b, d, A by 50-digit elimination on the literal systems."""
    terms, om = basis.terms, basis.omega
    t, h = mp.mpf(t), mp.mpf(h)
    c = [mp.mpf(float(v)) for v in c]
    FT = mp.matrix([[mp_basis(tm, om, t + ci * h, 2) for ci in c] for tm in terms])
    u = lambda x, d: mp.matrix([mp_basis(tm, om, x, d) for tm in terms])  # noqa: E731
    b = mp.lu_solve(h * h * FT, u(t + h, 0) - u(t, 0) - h * u(t, 1))
    d = mp.lu_solve(h * FT, u(t + h, 1) - u(t, 1))
    A = [mp.lu_solve(h * h * FT, u(t + h + ck * h, 0) - u(t + h, 0) - ck * h * u(t + h, 1)) for ck in c]
    f = lambda v: np.array([float(x) for x in v])  # noqa: E731
    return f(b), f(d), np.array([f(a) for a in A])


def rational_monomial_tableau(c, s):
    """Exact monomial tableau with h = 1, t = 0 for rational nodes ``c``."""
    c = [Fraction(v) for v in c]
    powers = range(2, s + 2)
    FT = [[Fraction(k * (k - 1)) * ci ** (k - 2) for ci in c] for k in powers]

    def solve(rhs):
        n = len(rhs)
        M = [row[:] + [r] for row, r in zip(FT, rhs)]
        for j in range(n):
            p = next(i for i in range(j, n) if M[i][j] != 0)
            M[j], M[p] = M[p], M[j]
            for i in range(n):
                if i != j and M[i][j] != 0:
                    f = M[i][j] / M[j][j]
                    M[i] = [a - f * b for a, b in zip(M[i], M[j])]
        return [M[i][n] / M[i][i] for i in range(n)]

    b = solve([Fraction(1) for _ in powers])                  # (1)^k - 0 - 0
    d = solve([Fraction(k) for k in powers])                  # k * 1^(k-1)
    A = [solve([(1 + ck) ** k - 1 - ck * k for k in powers]) for ck in c]
    return b, d, A


def bisect_kepler(t, e, lo=None, hi=None, iters=200):
    """u - e sin u = t by bisection in multiprecision."""
    t = mp.mpf(t)
    lo = t - 1 if lo is None else mp.mpf(lo)
    hi = t + 1 if hi is None else mp.mpf(hi)
    g = lambda u: u - e * mp.sin(u) - t  # noqa: E731
    for _ in range(iters):
        mid = (lo + hi) / 2
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def simpson(f, a, b, n=1_000_000):
    """Composite Simpson rule with n (even) panels."""
    x = np.linspace(a, b, n + 1)
    y = f(x)
    return (b - a) / (3 * n) * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def faddeev_leverrier(M):
    """Characteristic polynomial coefficients (descending, monic) of M."""
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    ck = 1.0
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ (Mk + ck * I)
        ck = -np.trace(Mk) / k
        coeffs.append(ck)
    return np.array(coeffs)


def durand_kerner(coeffs, iters=500):
    """All roots of a monic polynomial (descending coefficients)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(coeffs) - 1
    r = (0.4 + 0.9j) ** np.arange(n) * (1 + np.abs(coeffs).max())
    for _ in range(iters):
        prev = r.copy()
        for i in range(n):
            num = np.polyval(coeffs, r[i])
            den = np.prod([r[i] - r[j] for j in range(n) if j != i])
            r[i] = r[i] - num / den
        if np.max(np.abs(r - prev)) < 1e-15 * max(1.0, np.max(np.abs(r))):
            break
    return r


def mp_system_residual(terms, omega, c, t, h, scale, x, rhs):
    """Relative residual of scale * F(t, h)^T x = rhs(u) at 50 digits.

    ``rhs`` maps a callable u(point, derivative) -> mp.matrix to the
    right-hand side vector, so any of the defining systems can be checked.
    """
    t, h = mp.mpf(t), mp.mpf(h)
    c = [mp.mpf(float(v)) for v in c]
    FT = mp.matrix([[mp_basis(tm, omega, t + ci * h, 2) for ci in c] for tm in terms])
    u = lambda p, d: mp.matrix([mp_basis(tm, omega, p, d) for tm in terms])  # noqa: E731
    xv = mp.matrix([mp.mpf(float(v)) for v in x])
    return _relres(mp.mpf(scale) * FT, xv, rhs(u, t, h))


def _bett_mp(t):
    ct, st, k = mp.cos(t), mp.sin(t), mp.mpf("0.0005")
    y = [ct + k * t * st, st - k * t * ct]
    yp = [-st + k * (st + t * ct), ct - k * (ct - t * st)]
    return y, yp


def _bett_f_mp(t, y):
    return [-y[0] + mp.mpf("0.001") * mp.cos(t), -y[1] + mp.mpf("0.001") * mp.sin(t)]


def bett_dense_errors_mp(b_xi, d_xi, c, t_n, h, xi):
    """Interpolation error of given dense weights on exact oscillator data.

    Step data and stage derivatives come from the exact solution and the
    formula is evaluated at 40 digits, so only the weights carry
    double-precision rounding. Returns (position error, derivative error)
    plus the magnitudes h_x^2 sum|b_i F_i| and h_x sum|d_i F_i| of the
    weighted terms.
    """
    with mp.workdps(40):
        T, H, X = mp.mpf(t_n), mp.mpf(h), mp.mpf(xi)
        y, yp = _bett_mp(T)
        F = [_bett_f_mp(T + mp.mpf(float(ci)) * H, _bett_mp(T + mp.mpf(float(ci)) * H)[0]) for ci in c]
        ye, ype = _bett_mp(T + X * H)
        hx = X * H
        ey = ep = sb = sd = mp.mpf(0)
        for j in range(2):
            tb = [mp.mpf(float(b)) * F[i][j] for i, b in enumerate(b_xi)]
            td = [mp.mpf(float(d)) * F[i][j] for i, d in enumerate(d_xi)]
            ey = max(ey, abs(y[j] + hx * yp[j] + hx * hx * mp.fsum(tb) - ye[j]))
            ep = max(ep, abs(yp[j] + hx * mp.fsum(td) - ype[j]))
            sb = max(sb, hx * hx * mp.fsum(abs(v) for v in tb))
            sd = max(sd, hx * mp.fsum(abs(v) for v in td))
        return float(ey), float(ep), float(sb), float(sd)
