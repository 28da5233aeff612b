"""Test problems y'' = f(t, y) with exact solutions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NumericError, SingularityError


@dataclass(frozen=True)
class Problem:
    """Second-order initial value problem on [t0, t_end].

    ``f`` maps (t, y) with y of shape (m,) to y''. ``f_batch``, when given,
    maps t of shape (k,) and Y of shape (k, m) to an array of shape (k, m);
    it is used for stage evaluations. ``exact`` returns (y(t), y'(t)).
    """

    name: str
    t0: float
    t_end: float
    y0: np.ndarray
    yp0: np.ndarray
    f: Callable[[float, np.ndarray], np.ndarray]
    exact: Optional[Callable[[float], tuple[np.ndarray, np.ndarray]]] = None
    f_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    natural_omega: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.y0)

    def rhs_batch(self, t, Y):
        """Evaluate f at each row of ``Y``."""
        if self.f_batch is not None:
            return self.f_batch(np.asarray(t, dtype=float), Y)
        return np.array([self.f(ti, yi) for ti, yi in zip(t, Y)], dtype=float).reshape(Y.shape)


def bett() -> Problem:
    """Linear oscillator with a small resonant forcing on [0, 40]."""

    def f(t, y):
        return np.array([-y[0] + 0.001 * np.cos(t), -y[1] + 0.001 * np.sin(t)])

    def f_batch(t, Y):
        return np.column_stack([-Y[:, 0] + 0.001 * np.cos(t), -Y[:, 1] + 0.001 * np.sin(t)])

    def exact(t):
        ct, st = np.cos(t), np.sin(t)
        y = np.array([ct + 0.0005 * t * st, st - 0.0005 * t * ct])
        yp = np.array([-st + 0.0005 * (st + t * ct), ct - 0.0005 * (ct - t * st)])
        return y, yp

    return Problem("bett", 0.0, 40.0, np.array([1.0, 0.0]), np.array([0.0, 0.9995]),
                   f, exact, f_batch)


def solve_kepler(t, e: float, tol: float = 1e-14, maxiter: int = 100):
    """Solve u - e sin u = t by Newton's method started at u = t.

    Works elementwise on arrays. Iteration stops once
    ``|u - e sin u - t| <= tol * max(1, |t|)``; one more Newton step is
    then taken, which brings the residual down to rounding level.
    """
    if not (0.0 <= e < 1.0):
        raise ConfigurationError(f"eccentricity must satisfy 0 <= e < 1, got {e!r}")
    t = np.asarray(t, dtype=float)
    u = t.copy()
    bound = tol * np.maximum(1.0, np.abs(t))
    for _ in range(maxiter):
        g = u - e * np.sin(u) - t
        if np.all(np.abs(g) <= bound):
            u = u - g / (1.0 - e * np.cos(u))
            return u if u.ndim else float(u)
        u = u - g / (1.0 - e * np.cos(u))
    raise NumericError(f"Kepler iteration did not converge in {maxiter} steps (e={e})")


def newt(e: float = 0.01) -> Problem:
    """Two-body problem with eccentricity ``e`` on [0, 20]."""
    if not (0.0 <= e < 1.0):
        raise ConfigurationError(f"eccentricity must satisfy 0 <= e < 1, got {e!r}")
    q = np.sqrt(1.0 - e * e)

    def f(t, y):
        r2 = y[0] * y[0] + y[1] * y[1]
        if r2 == 0.0:
            raise SingularityError(f"two-body force evaluated at the origin (t={t!r})")
        return -y / r2 ** 1.5

    def f_batch(t, Y):
        r2 = np.sum(Y * Y, axis=1)
        if np.any(r2 == 0.0):
            raise SingularityError("two-body force evaluated at the origin")
        return -Y / (r2 ** 1.5)[:, None]

    def exact(t):
        u = solve_kepler(t, e)
        cu, su = np.cos(u), np.sin(u)
        du = 1.0 / (1.0 - e * cu)
        return np.array([cu - e, q * su]), np.array([-su * du, q * cu * du])

    return Problem(f"newt:e={e:g}", 0.0, 20.0, np.array([1.0 - e, 0.0]),
                   np.array([0.0, np.sqrt((1.0 + e) / (1.0 - e))]), f, exact, f_batch)


def dahlquist(lam: float = -1.0, y0: float = 1.0, yp0: float = 0.0, t_end: float = 10.0) -> Problem:
    """Scalar linear test equation y'' = lam y."""
    lam = float(lam)

    def f(t, y):
        return lam * y

    def f_batch(t, Y):
        return lam * Y

    def exact(t):
        if lam < 0:
            w = np.sqrt(-lam)
            return (np.array([y0 * np.cos(w * t) + yp0 / w * np.sin(w * t)]),
                    np.array([-y0 * w * np.sin(w * t) + yp0 * np.cos(w * t)]))
        if lam == 0:
            return np.array([y0 + yp0 * t]), np.array([yp0])
        w = np.sqrt(lam)
        return (np.array([y0 * np.cosh(w * t) + yp0 / w * np.sinh(w * t)]),
                np.array([y0 * w * np.sinh(w * t) + yp0 * np.cosh(w * t)]))

    omega = np.sqrt(-lam) if lam < 0 else 1.0
    return Problem(f"dahlquist:lambda={lam:g}", 0.0, float(t_end), np.array([float(y0)]),
                   np.array([float(yp0)]), f, exact, f_batch, float(omega))


def _params(spec: str, allowed: set[str]):
    name, _, rest = spec.partition(":")
    out = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq or key.strip() not in allowed:
            raise ConfigurationError(f"bad parameter {item!r} in problem spec {spec!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigurationError(f"bad number {val!r} in problem spec {spec!r}") from None
    return name.strip(), out


def parse_problem(spec: str) -> Problem:
    """Build a problem from ``bett``, ``newt:e=0.01`` or ``dahlquist:lambda=-1``."""
    name = spec.partition(":")[0].strip()
    if name == "bett":
        _params(spec, set())
        return bett()
    if name == "newt":
        _, p = _params(spec, {"e"})
        return newt(p.get("e", 0.01))
    if name == "dahlquist":
        _, p = _params(spec, {"lambda", "y0", "yp0", "T"})
        return dahlquist(p.get("lambda", -1.0), p.get("y0", 1.0), p.get("yp0", 0.0), p.get("T", 10.0))
    raise ConfigurationError(f"unknown problem {spec!r}; known: bett, newt[:e=..], dahlquist[:lambda=..]")
