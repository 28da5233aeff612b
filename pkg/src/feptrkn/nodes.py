"""Collocation nodes from orthogonality conditions on the node polynomial.

The node polynomial p(x) = prod(x - c_i) = x^s + a_{s-1} x^{s-1} + ... + a_0
is fixed by s linear conditions on (a_0, ..., a_{s-1}):

==========  ==============================================================
boost >= 1  int_0^1 p = 0
boost >= 2  int_0^1 x p = 0
boost == 3  int_0^1 x^2 p = 0  and  int_1^2 (x - 2)^2 p = 0
``int02``   int_0^2 p = 0
``c0``      p(0) = 0
``c1``      p(1) = 0
==========  ==============================================================

All moments are exact rationals, so the coefficients are exact; only the
root extraction is done in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._linalg import solve_rational
from .errors import ConfigurationError, InfeasibleNodesError, SingularMatrixError

EXTRAS = ("int02", "c0", "c1")
_BOOST_COUNT = {0: 0, 1: 1, 2: 2, 3: 4}

# name -> (s, boost, extras)
NODE_SETS = {
    "eptrkn52": (3, 2, ("int02",)),
    "eptrkn73": (4, 3, ()),
    "eptrkn84": (5, 3, ("int02",)),
    "eptrkn95": (6, 3, ("c0", "c1")),
}


@dataclass(frozen=True)
class NodeVector:
    c: np.ndarray
    boost: int
    extras: tuple[str, ...] = ()
    coefficients: tuple[Fraction, ...] = ()

    @property
    def s(self) -> int:
        return len(self.c)

    def polynomial(self, x):
        """Evaluate the monic node polynomial in floating point."""
        x = np.asarray(x, dtype=float)
        if not self.coefficients:
            return np.prod(np.subtract.outer(x, self.c), axis=-1)
        out = np.ones_like(x)
        for a in reversed(self.coefficients):
            out = out * x + float(a)
        return out


def _moment(a: int, b: int, k: int) -> Fraction:
    return Fraction(b ** (k + 1) - a ** (k + 1), k + 1)


def _weighted_row(s: int, lo: int, hi: int, weight: dict[int, int]):
    # int_lo^hi w(x) (x^s + sum a_k x^k) dx = 0, w = sum weight[j] x^j
    row = [sum(cf * _moment(lo, hi, k + j) for j, cf in weight.items()) for k in range(s)]
    rhs = -sum(cf * _moment(lo, hi, s + j) for j, cf in weight.items())
    return row, rhs


def _point_row(s: int, x: int):
    return [Fraction(x) ** k for k in range(s)], -Fraction(x) ** s


def _condition_rows(s: int, boost: int, extras: Sequence[str]):
    rows = []
    if boost >= 1:
        rows.append(("int01*1", _weighted_row(s, 0, 1, {0: 1})))
    if boost >= 2:
        rows.append(("int01*x", _weighted_row(s, 0, 1, {1: 1})))
    if boost >= 3:
        rows.append(("int01*x^2", _weighted_row(s, 0, 1, {2: 1})))
        rows.append(("int12*(x-2)^2", _weighted_row(s, 1, 2, {2: 1, 1: -4, 0: 4})))
    for ex in extras:
        if ex == "int02":
            rows.append((ex, _weighted_row(s, 0, 2, {0: 1})))
        elif ex == "c0":
            rows.append((ex, _point_row(s, 0)))
        elif ex == "c1":
            rows.append((ex, _point_row(s, 1)))
    return rows


def _check_request(s, boost, extras):
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ConfigurationError(f"stage count must be a positive integer, got {s!r}")
    if boost not in _BOOST_COUNT:
        raise ConfigurationError(f"boost must be one of 0, 1, 2, 3, got {boost!r}")
    extras = tuple(extras)
    bad = [e for e in extras if e not in EXTRAS]
    if bad:
        raise ConfigurationError(f"unknown extra constraints {bad}; valid: {list(EXTRAS)}")
    if len(set(extras)) != len(extras):
        raise ConfigurationError(f"duplicate extra constraints {list(extras)}")
    count = _BOOST_COUNT[boost] + len(extras)
    if count != s:
        raise ConfigurationError(
            f"{count} conditions (boost {boost} gives {_BOOST_COUNT[boost]}, plus {len(extras)} extras) "
            f"for {s} unknown coefficients")
    return int(s), extras


def node_conditions(s: int, boost: int, extras: Iterable[str] = ()):
    """Linear system for the monic node-polynomial coefficients.

    Returns
    -------
    matrix : list of list of Fraction
        ``s`` rows over ``(a_0, ..., a_{s-1})``.
    rhs : list of Fraction
    labels : list of str
        Name of each condition, in row order.
    """
    s, extras = _check_request(s, boost, extras)
    rows = _condition_rows(s, boost, extras)
    return [r[1][0] for r in rows], [r[1][1] for r in rows], [r[0] for r in rows]


def orthogonality_residuals(nodes: NodeVector) -> dict[str, float]:
    """Each defining condition evaluated on the float nodes (exact moments of prod(x - c_i))."""
    poly = np.poly(nodes.c)[::-1]  # ascending coefficients of prod(x - c)
    out = {}
    for label, (row, rhs) in _condition_rows(nodes.s, nodes.boost, nodes.extras):
        # row . a - rhs equals the condition applied to the polynomial
        val = sum(float(r) * a for r, a in zip(row, poly[:-1])) - float(rhs) * poly[-1]
        out[label] = float(val)
    return out


def _polish(coeffs: np.ndarray, x: float, iters: int = 3) -> float:
    # Newton refinement on the ascending-coefficient polynomial
    dp = coeffs[1:] * np.arange(1, len(coeffs))
    for _ in range(iters):
        p = np.polynomial.polynomial.polyval(x, coeffs)
        d = np.polynomial.polynomial.polyval(x, dp)
        if d == 0:
            break
        step = p / d
        x -= step
        if abs(step) <= 1e-17 * max(1.0, abs(x)):
            break
    return x


def solve_nodes(s: int, boost: int, extras: Iterable[str] = ()) -> NodeVector:
    """Solve the orthogonality conditions and return the sorted real nodes.

    Roots 0 and 1 forced by ``c0``/``c1`` are deflated exactly; the rest come
    from companion-matrix eigenvalues followed by Newton polishing.

    Raises
    ------
    InfeasibleNodesError
        If the polynomial has complex or repeated roots.
    """
    s, extras = _check_request(s, boost, extras)
    M, rhs, _ = node_conditions(s, boost, extras)
    try:
        a = solve_rational(M, rhs)
    except SingularMatrixError:
        raise InfeasibleNodesError("orthogonality conditions are linearly dependent", []) from None
    poly = list(a) + [Fraction(1)]  # ascending, exact

    exact_roots = []
    for r in (0, 1):
        if sum(cf * r ** k for k, cf in enumerate(poly)) == 0 and len(poly) > 1:
            # synthetic division by (x - r)
            q = [Fraction(0)] * (len(poly) - 1)
            carry = Fraction(0)
            for k in range(len(poly) - 1, 0, -1):
                carry = poly[k] + carry * r
                q[k - 1] = carry
            poly = q
            exact_roots.append(float(r))
            if sum(cf * r ** k for k, cf in enumerate(poly)) == 0:
                raise InfeasibleNodesError(f"repeated root at {r}", a)

    fpoly = np.array([float(v) for v in poly])
    roots = np.roots(fpoly[::-1]) if len(fpoly) > 1 else np.array([])
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    if roots.size and np.max(np.abs(roots.imag)) > 1e-9 * scale:
        raise InfeasibleNodesError("node polynomial has complex roots", a)
    c = np.sort(np.concatenate([exact_roots, [_polish(fpoly, float(r)) for r in roots.real]]))
    if np.any(np.diff(c) <= 1e-9 * scale):
        raise InfeasibleNodesError("node polynomial has repeated roots", a)

    nodes = NodeVector(c, boost, extras, tuple(a))
    res = np.abs(nodes.polynomial(c))
    if np.any(res > 1e-12 * np.maximum(1.0, np.abs(c) ** s)):
        raise InfeasibleNodesError(f"root residual {res.max():.3e} too large", a)
    return nodes


def named_nodes(name: str) -> NodeVector:
    """Node set of a registered method (``eptrkn52`` ... ``eptrkn95``; the ``f`` prefix is accepted)."""
    key = name[1:] if name.startswith("feptrkn") else name
    if key not in NODE_SETS:
        raise ConfigurationError(f"unknown node set {name!r}; known: {sorted(NODE_SETS)}")
    return solve_nodes(*NODE_SETS[key])


def as_nodes(c) -> NodeVector:
    """Wrap an explicit node array (validated: finite, distinct; sorted on return)."""
    if isinstance(c, NodeVector):
        return c
    arr = np.sort(np.asarray(c, dtype=float).ravel())
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigurationError("nodes must be a non-empty finite vector")
    if np.any(np.diff(arr) == 0):
        raise ConfigurationError(f"nodes must be distinct, got {arr.tolist()}")
    return NodeVector(arr, 0, (), ())
