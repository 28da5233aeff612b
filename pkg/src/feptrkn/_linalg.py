"""Small dense linear algebra: pivoted LU with a singularity threshold, exact rational solve."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .errors import SingularMatrixError

PIVOT_TOL = 1e-14
MAX_DIM = 16


@dataclass(frozen=True)
class LUFactors:
    lu: np.ndarray
    piv: np.ndarray
    scale: np.ndarray
    norm1: float

    def solve(self, rhs):
        """Solve ``M x = rhs`` for a vector or an n-by-k right-hand side."""
        rhs = np.asarray(rhs)
        return sla.lu_solve((self.lu, self.piv), rhs * (self.scale if rhs.ndim == 1 else self.scale[:, None]),
                            check_finite=False)

    def rcond(self) -> float:
        """Reciprocal 1-norm condition number, 1 / (||M||_1 ||M^-1||_1)."""
        n = self.lu.shape[0]
        inv = self.solve(np.eye(n, dtype=self.lu.dtype))
        ninv = np.abs(inv).sum(axis=0).max()
        if not np.isfinite(ninv) or ninv == 0.0:
            return 0.0
        return float(1.0 / (self.norm1 * ninv))


def lu_factor(M) -> LUFactors:
    """Row-equilibrated LU factorization with partial pivoting (LAPACK getrf).

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``1e-14`` times the 1-norm of the row-scaled matrix.
    """
    M = np.asarray(M)
    M = np.array(M, dtype=np.result_type(M.dtype, float), copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"square matrix required, got shape {M.shape}")
    n = M.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"matrix dimension {n} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise SingularMatrixError("matrix has non-finite entries", 0.0)
    norm1 = float(np.abs(M).sum(axis=0).max()) if n else 0.0
    rowmax = np.abs(M).max(axis=1) if n else np.zeros(0)
    if np.any(rowmax == 0):
        raise SingularMatrixError("matrix has a zero row", 0.0)
    scale = 1.0 / rowmax
    Ms = M * scale[:, None]
    anorm = float(np.abs(Ms).sum(axis=0).max())
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(Ms, check_finite=False)
    pivots = np.abs(np.diag(lu))
    k = int(np.argmin(pivots))
    if pivots[k] < PIVOT_TOL * anorm:
        raise SingularMatrixError(f"pivot {pivots[k]:.3e} below threshold at column {k}", 0.0)
    return LUFactors(lu, piv, scale, norm1)


def lu_solve(M, rhs, return_rcond: bool = False):
    """Solve ``M X = rhs`` with pivoted LU.

    Parameters
    ----------
    M : (n, n) array_like
        Real or complex, ``n <= 16``.
    rhs : (n,) or (n, k) array_like
    return_rcond : bool
        Also return the reciprocal condition estimate.
    """
    fac = lu_factor(M)
    x = fac.solve(rhs)
    if return_rcond:
        return x, fac.rcond()
    return x


def solve_rational(M, rhs):
    """Exact Gauss-Jordan elimination over :class:`fractions.Fraction`."""
    n = len(M)
    aug = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(M, rhs)]
    for k in range(n):
        p = next((i for i in range(k, n) if aug[i][k] != 0), None)
        if p is None:
            raise SingularMatrixError("rational system is singular", 0.0)
        aug[k], aug[p] = aug[p], aug[k]
        piv = aug[k][k]
        aug[k] = [v / piv for v in aug[k]]
        for i in range(n):
            if i != k and aug[i][k] != 0:
                f = aug[i][k]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[k])]
    return [row[n] for row in aug]
