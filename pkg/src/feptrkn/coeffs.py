"""Method coefficients from the fitting basis.

For a basis {u_j} and nodes c, the coefficients at (t, h) are fixed by
requiring every u_j to be reproduced exactly::

    h^2 b^T F = u(t+h) - u(t) - h u'(t)
    h   d^T F = u'(t+h) - u'(t)
    h^2 A   F = V,   V_k = u(t+h+c_k h) - u(t+h) - c_k h u'(t+h)

with F[i, j] = u_j''(t + c_i h).

Two solution paths exist.

``direct``
    Assembles F literally and solves. Works for any basis, but for
    trigonometric bases F becomes nearly singular as omega*h -> 0 (its
    columns approach linear dependence), and the coefficients lose digits.

``stable``
    Used for built-in bases. All the systems above only depend on the span
    of {1, t, u_1, ..., u_s}, so they may be rewritten in the local variable
    xi = (x - t)/h with any other basis of that span. We use divided
    differences of exponentials, g_m(xi) = exp(xi *)[mu_0, ..., mu_m] with
    mu = i*omega*h*lambda, which tend smoothly to xi^m/m! as h -> 0. The
    resulting systems are well conditioned for every h and contain no
    explicit powers of h.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from ._linalg import lu_factor
from .basis import BasisSet, eval_basis, newton_poly_coefficients
from .errors import (CollocationError, ConfigurationError, EmbeddedConfigurationError,
                     SingularMatrixError)
from .nodes import NodeVector

RCOND_MIN = 1e-12
MU_POLY = 1e-9
METHODS = ("auto", "stable", "direct")


@dataclass(frozen=True)
class CollocationMatrix:
    F: np.ndarray
    t: float
    h: float
    rcond: float


@dataclass(frozen=True)
class CoefficientTableau:
    A: np.ndarray
    b: np.ndarray
    d: np.ndarray
    c: np.ndarray
    t: float
    h: float
    h_next: float | None = None
    rcond: float = float("nan")

    @property
    def s(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class DenseCoefficients:
    xi: float
    b_xi: np.ndarray
    d_xi: np.ndarray


@dataclass(frozen=True)
class EmbeddedTableau:
    c_tilde: np.ndarray
    index_map: np.ndarray
    b_tilde: np.ndarray
    d_tilde: np.ndarray
    t: float = 0.0
    h: float = 0.0


def _nodes_array(c) -> np.ndarray:
    arr = np.asarray(c.c if isinstance(c, NodeVector) else c, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigurationError("nodes must be a non-empty finite vector")
    if len(np.unique(arr)) != arr.size:
        raise ConfigurationError(f"nodes must be distinct, got {arr.tolist()}")
    return arr


def _check_step(h, name="h"):
    if not (np.isfinite(h) and h > 0):
        raise ConfigurationError(f"{name} must be positive and finite, got {h!r}")


def build_F(basis: BasisSet, c, t: float, h: float) -> CollocationMatrix:
    """Literal collocation matrix F[i, j] = u_j''(t + c_i h).

    The reciprocal condition number is recorded (0 when the LU breaks down).
    """
    c = _nodes_array(c)
    _, _, u2 = eval_basis(basis, t + c * h)
    F = np.atleast_2d(u2)
    if F.shape[0] == F.shape[1]:
        try:
            rcond = lu_factor(F).rcond()
        except SingularMatrixError:
            rcond = 0.0
    else:
        rcond = 0.0
    return CollocationMatrix(F, float(t), float(h), rcond)


# ---------------------------------------------------------------- stable path

def newton_basis(mu: np.ndarray, xi):
    """Divided-difference exponentials g_m(xi) and their first two xi-derivatives.

    g_m is entry (0, m) of expm(xi Z) with Z = diag(mu) + superdiagonal ones.
    Returns three arrays of shape ``(len(xi), len(mu))``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = len(mu)
    if not np.any(mu):
        m = np.arange(n)
        fact = np.array([factorial(k) for k in range(n)], dtype=float)
        g = xi[:, None] ** m / fact
        g1 = np.zeros_like(g)
        g2 = np.zeros_like(g)
        g1[:, 1:] = g[:, :-1]
        g2[:, 2:] = g[:, :-2]
        return g.astype(complex), g1.astype(complex), g2.astype(complex)
    Z = np.diag(mu.astype(complex)) + np.diag(np.ones(n - 1), 1)
    E = expm(xi[:, None, None] * Z)
    g = E[:, 0, :]
    g1 = mu[0] * E[:, 0, :] + E[:, 1, :]
    g2 = mu[0] ** 2 * E[:, 0, :] + (mu[0] + mu[1]) * E[:, 1, :] + E[:, 2, :]
    return g, g1, g2


def _row_echelon(C: np.ndarray) -> np.ndarray:
    """Reduced row echelon form; entries below 64 eps of the column scale are noise."""
    R = np.array(C, dtype=complex, copy=True)
    colmax = np.abs(C).max(axis=0) if C.size else np.zeros(0)
    rows, cols = R.shape
    r = 0
    for j in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, j])))
        if abs(R[p, j]) <= 64 * np.finfo(float).eps * colmax[j]:
            R[r:, j] = 0.0
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, j]
        for i in range(rows):
            if i != r:
                R[i] -= R[i, j] * R[r]
                R[i, j] = 0.0
        R[r, j] = 1.0
        r += 1
    if r < rows:
        raise SingularMatrixError("basis functions are linearly dependent modulo affine terms", 0.0)
    return R


class LocalSpace:
    """Well-conditioned local basis phi_k(xi) of span{u_j} modulo affine terms.

    u_j(t + xi h) equals a fixed linear combination of phi_k(xi) plus an
    affine function of xi, so every defining system may use phi instead.
    """

    def __init__(self, basis: BasisSet, t: float, h: float):
        if basis.terms is None:
            raise ConfigurationError("the stable path needs a built-in basis")
        lam = basis.spectrum()
        omega = basis.omega or 0.0
        self.mu = 1j * omega * h * lam
        if basis.separable and np.max(np.abs(self.mu)) < MU_POLY:
            # the span differs from its polynomial limit by O((omega h)^2), below
            # rounding here; for tiny omega h the expansion below would underflow
            self.mu = np.zeros(len(lam), dtype=complex)
            self.R = np.eye(len(lam) - 2)
            return
        t_eff = 0.0 if basis.separable else t
        C = np.array([newton_poly_coefficients(term, lam, omega, t_eff, h) for term in basis.terms])
        self.R = _row_echelon(C[:, 2:])

    def __call__(self, xi):
        g, g1, g2 = newton_basis(self.mu, xi)
        RT = self.R.T
        return g[:, 2:] @ RT, g1[:, 2:] @ RT, g2[:, 2:] @ RT


def _factor(Fhat, t, h, cls=CollocationError):
    try:
        fac = lu_factor(Fhat.T)
    except SingularMatrixError as exc:
        raise cls(t, h, 0.0, str(exc)) from None
    rc = fac.rcond()
    if rc < RCOND_MIN:
        raise cls(t, h, rc)
    return fac


def _real(x):
    return np.real(x).astype(float) if np.iscomplexobj(x) else np.asarray(x, dtype=float)


def _resolve(method: str, basis: BasisSet) -> str:
    if method not in METHODS:
        raise ConfigurationError(f"unknown coefficient method {method!r}; use one of {METHODS}")
    if method == "auto":
        return "direct" if basis.terms is None else "stable"
    if method == "stable" and basis.terms is None:
        raise ConfigurationError("custom bases only support the direct coefficient path")
    return method


def _stable_tableau(basis, c, t, h):
    space = LocalSpace(basis, t, h)
    s = len(c)
    xi = np.concatenate([c, [0.0, 1.0], 1.0 + c])
    p, p1, p2 = space(xi)
    Fhat = p2[:s]
    fac = _factor(Fhat, t, h)
    p0, p10 = p[s], p1[s]
    pone, p1one = p[s + 1], p1[s + 1]
    rb = pone - p0 - p10
    rd = p1one - p10
    RA = p[s + 2:] - pone - c[:, None] * p1one
    x = fac.solve(np.column_stack([rb, rd, RA.T]))
    return _real(x[:, 2:].T), _real(x[:, 0]), _real(x[:, 1]), fac.rcond()


def _direct_parts(basis, c, t, h):
    coll = build_F(basis, c, t, h)
    fac = _factor(coll.F, t, h)
    return coll, fac


def _direct_tableau(basis, c, t, h):
    _, fac = _direct_parts(basis, c, t, h)
    u0, u10, _ = eval_basis(basis, t)
    u1, u11, _ = eval_basis(basis, t + h)
    uA, _, _ = eval_basis(basis, t + h + c * h)
    rb = (u1 - u0 - h * u10) / h ** 2
    rd = (u11 - u10) / h
    RA = (uA - u1 - h * c[:, None] * u11) / h ** 2
    x = fac.solve(np.column_stack([rb, rd, RA.T]))
    return x[:, 2:].T, x[:, 0], x[:, 1], fac.rcond()


def solve_tableau(basis: BasisSet, c, t: float, h: float, method: str = "auto") -> CoefficientTableau:
    """Coefficients A, b, d at (t, h).

    Parameters
    ----------
    basis : BasisSet
    c : array_like or NodeVector
        Distinct nodes, one per basis function.
    t, h : float
        Left end of the step and the step size.
    method : {"auto", "stable", "direct"}
        ``auto`` uses the stable local formulation for built-in bases.

    Raises
    ------
    CollocationError
        If the collocation matrix is numerically singular at (t, h).
    """
    c = _nodes_array(c)
    _check_step(h)
    if len(c) != basis.s:
        raise ConfigurationError(f"{len(c)} nodes for a basis of {basis.s} functions")
    if _resolve(method, basis) == "stable":
        A, b, d, rc = _stable_tableau(basis, c, t, h)
    else:
        A, b, d, rc = _direct_tableau(basis, c, t, h)
    return CoefficientTableau(A, b, d, c, float(t), float(h), None, rc)


def solve_variable_A(basis: BasisSet, c, t_n: float, h_n: float, h_next: float,
                     method: str = "auto") -> np.ndarray:
    """Stage matrix for a step-size change from ``h_n`` to ``h_next``.

    Solves h_next^2 A F(t_n, h_n) = V with
    V_k = u(t_{n+1} + c_k h_next) - u(t_{n+1}) - c_k h_next u'(t_{n+1}).
    """
    c = _nodes_array(c)
    _check_step(h_n, "h_n")
    _check_step(h_next, "h_next")
    s = len(c)
    if _resolve(method, basis) == "stable":
        theta = h_next / h_n
        space = LocalSpace(basis, t_n, h_n)
        p, p1, p2 = space(np.concatenate([c, [1.0], 1.0 + theta * c]))
        fac = _factor(p2[:s], t_n, h_n)
        RA = (p[s + 1:] - p[s] - theta * c[:, None] * p1[s]) / theta ** 2
        return _real(fac.solve(RA.T).T)
    _, fac = _direct_parts(basis, c, t_n, h_n)
    t1 = t_n + h_n
    u1, u11, _ = eval_basis(basis, t1)
    uA, _, _ = eval_basis(basis, t1 + c * h_next)
    RA = (uA - u1 - h_next * c[:, None] * u11) / h_next ** 2
    return fac.solve(RA.T).T


def solve_dense(basis: BasisSet, c, t_n: float, h_n: float, xi: float,
                method: str = "auto") -> DenseCoefficients:
    """Continuous-extension weights at t_n + xi h_n.

    ``xi = 0`` returns zero vectors: the output there is (y_n, y'_n).
    """
    c = _nodes_array(c)
    _check_step(h_n, "h_n")
    if not (0.0 <= xi <= 1.0):
        raise ConfigurationError(f"xi must lie in [0, 1], got {xi!r}")
    s = len(c)
    if xi == 0.0:
        return DenseCoefficients(0.0, np.zeros(s), np.zeros(s))
    if _resolve(method, basis) == "stable":
        space = LocalSpace(basis, t_n, h_n)
        p, p1, p2 = space(np.concatenate([c, [0.0, xi]]))
        fac = _factor(p2[:s], t_n, h_n)
        rb = (p[s + 1] - p[s] - xi * p1[s]) / xi ** 2
        rd = (p1[s + 1] - p1[s]) / xi
        x = fac.solve(np.column_stack([rb, rd]))
        return DenseCoefficients(float(xi), _real(x[:, 0]), _real(x[:, 1]))
    _, fac = _direct_parts(basis, c, t_n, h_n)
    hx = xi * h_n
    u0, u10, _ = eval_basis(basis, t_n)
    ux, u1x, _ = eval_basis(basis, t_n + hx)
    rb = (ux - u0 - hx * u10) / hx ** 2
    rd = (u1x - u10) / hx
    x = fac.solve(np.column_stack([rb, rd]))
    return DenseCoefficients(float(xi), x[:, 0], x[:, 1])


def default_subset(s: int) -> tuple[int, ...]:
    """Embedded node subset used by the registered methods: the first s-1 nodes."""
    return tuple(range(s - 1))


def solve_embedded(basis: BasisSet, c, subset: Sequence[int], t: float, h: float,
                   method: str = "auto") -> EmbeddedTableau:
    """Lower-order weights b~, d~ on a node subset.

    The embedded method is the one generated by the first ``len(subset)``
    basis functions and the nodes ``c[subset]`` (0-based indices).
    """
    c = _nodes_array(c)
    _check_step(h)
    idx = np.asarray(sorted(int(i) for i in subset), dtype=int)
    if idx.size == 0 or idx.size >= len(c) or len(set(idx.tolist())) != idx.size:
        raise ConfigurationError(f"embedded subset must be a strict non-empty subset of 0..{len(c) - 1}")
    if idx.min() < 0 or idx.max() >= len(c):
        raise ConfigurationError(f"embedded subset {idx.tolist()} out of range 0..{len(c) - 1}")
    sub = basis.subset(idx.size)
    ct = c[idx]
    k = idx.size
    if _resolve(method, sub) == "stable":
        try:
            space = LocalSpace(sub, t, h)
        except SingularMatrixError as exc:
            raise EmbeddedConfigurationError(t, h, 0.0, str(exc)) from None
        p, p1, p2 = space(np.concatenate([ct, [0.0, 1.0]]))
        fac = _factor(p2[:k], t, h, EmbeddedConfigurationError)
        rb = p[k + 1] - p[k] - p1[k]
        rd = p1[k + 1] - p1[k]
        x = fac.solve(np.column_stack([rb, rd]))
        bt, dt = _real(x[:, 0]), _real(x[:, 1])
    else:
        coll = build_F(sub, ct, t, h)
        fac = _factor(coll.F, t, h, EmbeddedConfigurationError)
        u0, u10, _ = eval_basis(sub, t)
        u1, u11, _ = eval_basis(sub, t + h)
        x = fac.solve(np.column_stack([(u1 - u0 - h * u10) / h ** 2, (u11 - u10) / h]))
        bt, dt = x[:, 0], x[:, 1]
    return EmbeddedTableau(ct, idx, bt, dt, float(t), float(h))


# ------------------------------------------------------------------ residuals

def _relres(Mt, x, r) -> float:
    num = np.linalg.norm(Mt @ x - r)
    den = np.linalg.norm(Mt) * np.linalg.norm(x) + np.linalg.norm(r)
    return float(num / den) if den > 0 else float(num)


def tableau_residuals(basis: BasisSet, tab: CoefficientTableau) -> dict[str, float]:
    """Relative residuals ||F^T x - r|| / (||F|| ||x|| + ||r||) of the literal defining systems."""
    t, h, c = tab.t, tab.h, tab.c
    F = build_F(basis, c, t, h).F
    u0, u10, _ = eval_basis(basis, t)
    u1, u11, _ = eval_basis(basis, t + h)
    out = {
        "b": _relres(h * h * F.T, tab.b, u1 - u0 - h * u10),
        "d": _relres(h * F.T, tab.d, u11 - u10),
    }
    hn = tab.h_next if tab.h_next is not None else h
    uA, _, _ = eval_basis(basis, t + h + c * hn)
    V = uA - u1 - hn * c[:, None] * u11
    out["A"] = max(_relres(hn * hn * F.T, tab.A[k], V[k]) for k in range(len(c)))
    return out


def dense_residuals(basis: BasisSet, c, t: float, h: float, dense: DenseCoefficients) -> dict[str, float]:
    c = _nodes_array(c)
    F = build_F(basis, c, t, h).F
    hx = dense.xi * h
    u0, u10, _ = eval_basis(basis, t)
    ux, u1x, _ = eval_basis(basis, t + hx)
    return {
        "b_xi": _relres(hx * hx * F.T, dense.b_xi, ux - u0 - hx * u10),
        "d_xi": _relres(hx * F.T, dense.d_xi, u1x - u10),
    }


def embedded_residuals(basis: BasisSet, emb: EmbeddedTableau) -> dict[str, float]:
    sub = basis.subset(len(emb.c_tilde))
    t, h = emb.t, emb.h
    F = build_F(sub, emb.c_tilde, t, h).F
    u0, u10, _ = eval_basis(sub, t)
    u1, u11, _ = eval_basis(sub, t + h)
    return {
        "b_tilde": _relres(h * h * F.T, emb.b_tilde, u1 - u0 - h * u10),
        "d_tilde": _relres(h * F.T, emb.d_tilde, u11 - u10),
    }


# ---------------------------------------------------------------------- cache

@dataclass
class TableauCache:
    """Per-run memo of coefficient solves.

    For separable bases the key ignores ``t`` (coefficients depend on h
    only); steps are matched on the exact float value of h.
    """

    basis: BasisSet
    c: np.ndarray
    subset: tuple[int, ...] | None = None
    method: str = "auto"
    _store: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _get(self, key, build):
        with self._lock:
            hit = self._store.get(key)
        if hit is None:
            hit = build()
            with self._lock:
                self._store[key] = hit
        return hit

    def _t(self, t):
        return None if self.basis.separable else float(t)

    def tableau(self, t, h) -> CoefficientTableau:
        return self._get(("tab", self._t(t), h),
                         lambda: solve_tableau(self.basis, self.c, t, h, self.method))

    def variable_A(self, t_n, h_n, h_next) -> np.ndarray:
        if h_next == h_n:
            return self.tableau(t_n, h_n).A
        return self._get(("varA", self._t(t_n), h_n, h_next),
                         lambda: solve_variable_A(self.basis, self.c, t_n, h_n, h_next, self.method))

    def embedded(self, t, h) -> EmbeddedTableau:
        if self.subset is None:
            raise ConfigurationError("no embedded subset configured")
        sub_sep = self.basis.subset(len(self.subset)).separable
        key_t = None if sub_sep else float(t)
        return self._get(("emb", key_t, h),
                         lambda: solve_embedded(self.basis, self.c, self.subset, t, h, self.method))

    def dense(self, t, h, xi) -> DenseCoefficients:
        return self._get(("dense", self._t(t), h, xi),
                         lambda: solve_dense(self.basis, self.c, t, h, xi, self.method))

    def __len__(self):
        return len(self._store)
