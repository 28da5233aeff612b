"""Linear stability on the test equation y'' = lambda y, z = lambda h^2.

With F_n = lambda Y_n, one step propagates (Y_n, y_n, h y'_n) by the
matrix (``direct`` form)::

    [ z (A + e b^T + c d^T)   e   e + c ]
    [ z b^T                   1   1     ]
    [ z d^T                   0   1     ]

The ``legacy`` form acts on (h^2 F_n, y_{n+1}, h y'_{n+1}) instead and is
similar to it whenever z A is invertible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import make_basis
from .coeffs import CoefficientTableau, solve_tableau
from .errors import ConfigurationError, EigenvalueError
from .methods import MethodSpec

FORMS = ("direct", "legacy")
RHO_TOL = 1e-8


@dataclass(frozen=True)
class AmplificationMatrix:
    M: np.ndarray
    z: float
    form: str


@dataclass(frozen=True)
class StabilityScan:
    omega_h: float
    z: np.ndarray
    rho: np.ndarray
    boundary: float


def amplification(tableau: CoefficientTableau, z: float, form: str = "direct") -> AmplificationMatrix:
    """Assemble the (s+2)x(s+2) amplification matrix at ``z``."""
    if not np.isfinite(z):
        raise ConfigurationError(f"z must be finite, got {z!r}")
    A, b, d, c = tableau.A, tableau.b, tableau.d, tableau.c
    s = len(c)
    e = np.ones(s)
    M = np.zeros((s + 2, s + 2))
    if form == "direct":
        M[:s, :s] = z * (A + np.outer(e, b) + np.outer(c, d))
        M[:s, s] = e
        M[:s, s + 1] = e + c
        M[s, :s] = z * b
        M[s, s:] = (1.0, 1.0)
        M[s + 1, :s] = z * d
        M[s + 1, s:] = (0.0, 1.0)
    elif form == "legacy":
        M[:s, :s] = z * A
        M[:s, s] = e
        M[:s, s + 1] = c
        M[s, :s] = z * z * (b @ A)
        M[s, s] = 1.0 + z * (b @ e)
        M[s, s + 1] = 1.0 + z * (b @ c)
        M[s + 1, :s] = z * z * (d @ A)
        M[s + 1, s] = z * (d @ e)
        M[s + 1, s + 1] = 1.0 + z * (d @ c)
    else:
        raise ConfigurationError(f"unknown form {form!r}; use one of {FORMS}")
    return AmplificationMatrix(M, float(z), form)


def eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a small dense matrix (balanced Hessenberg QR via LAPACK)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] > 16:
        raise ConfigurationError(f"need a square matrix of size <= 16, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise EigenvalueError(M)
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError:
        raise EigenvalueError(M) from None


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus."""
    if isinstance(M, AmplificationMatrix):
        M = M.M
    return float(np.max(np.abs(eigenvalues(M))))


def similarity_transform(tableau: CoefficientTableau, z: float) -> np.ndarray:
    """T with M_direct = T M_legacy T^{-1}."""
    s = len(tableau.c)
    T = np.eye(s + 2)
    T[:s, :s] = z * tableau.A
    T[:s, s] = 1.0
    T[:s, s + 1] = tableau.c
    return T


def radius_gap(tableau: CoefficientTableau, z: float) -> float:
    """|rho(direct) - rho(legacy)| at ``z``, whether or not the transform is invertible."""
    r1 = spectral_radius(amplification(tableau, z, "direct"))
    r2 = spectral_radius(amplification(tableau, z, "legacy"))
    return abs(r1 - r2)


def similarity_check(tableau: CoefficientTableau, z: float, cond_max: float = 1e10):
    """|rho(direct) - rho(legacy)| at ``z``, or None when the transform is singular there.

    Node sets containing 0 give A a zero row, so the transform is singular
    for every z; use :func:`radius_gap` to compare the radii directly.
    """
    T = similarity_transform(tableau, z)
    if z == 0.0 or np.linalg.cond(T) > cond_max:
        return None
    return radius_gap(tableau, z)


def method_tableau(method: MethodSpec, omega_h: float) -> CoefficientTableau:
    """Tableau of a method at the scaled step omega*h (omega taken as 1).

    At ``omega_h == 0`` the fitted bases reduce to monomials, whose
    tableau is returned.
    """
    if omega_h < 0 or not np.isfinite(omega_h):
        raise ConfigurationError(f"omega*h must be finite and >= 0, got {omega_h!r}")
    basis = method.basis
    if basis.kind == "monomial" or omega_h == 0.0:
        return solve_tableau(make_basis("monomial", method.s), method.c, 0.0, 1.0)
    if basis.terms is None:
        raise ConfigurationError("stability scans need a built-in basis")
    return solve_tableau(make_basis(basis.kind, basis.s, 1.0), method.c, 0.0, float(omega_h))


def _rho(tableau, z):
    return spectral_radius(amplification(tableau, z))


def scan_region(method: MethodSpec, omega_h: float = 0.0, z_min: float = -20.0, n_grid: int = 4000,
                rho_tol: float = RHO_TOL, refine_tol: float = 1e-6) -> StabilityScan:
    """Spectral radius on a uniform grid from 0 down to ``z_min``.

    ``boundary`` is the left end of the stable run that starts at z = 0,
    refined by bisection to ``refine_tol``. A grid point counts as stable
    when rho <= 1 + rho_tol.
    """
    if not z_min < 0:
        raise ConfigurationError(f"z_min must be negative, got {z_min!r}")
    if n_grid < 2:
        raise ConfigurationError(f"n_grid must be at least 2, got {n_grid!r}")
    tab = method_tableau(method, omega_h)
    z = np.linspace(0.0, z_min, int(n_grid))
    rho = np.array([_rho(tab, zi) for zi in z])
    stable = rho <= 1.0 + rho_tol
    if stable.all():
        return StabilityScan(float(omega_h), z, rho, float(z_min))
    k = int(np.argmin(stable))  # first unstable index
    if k == 0:
        return StabilityScan(float(omega_h), z, rho, 0.0)
    lo, hi = z[k], z[k - 1]  # lo unstable, hi stable
    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        if _rho(tab, mid) <= 1.0 + rho_tol:
            hi = mid
        else:
            lo = mid
    return StabilityScan(float(omega_h), z, rho, float(hi))
