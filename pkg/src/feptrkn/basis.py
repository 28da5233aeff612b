"""Fitting bases {u_i} with exact first and second derivatives.

Built-in families
-----------------
``monomial``    {t^2, t^3, ..., t^(s+1)}
``trig-mixed``  {t^2, cos(k w t), sin(k w t) : k = 1..(s-1)/2}   (s odd)
``trig-pure``   {cos(k w t), sin(k w t) : k = 1..s/2}             (s even)
``custom``      user supplied (u, u', u'') callables

Built-in bases also carry a symbolic description (``terms``) of each
function. The coefficient solver uses it to build a well-conditioned local
representation of the fitted space; custom bases fall back to the literal
collocation matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError

KINDS = ("monomial", "trig-pure", "trig-mixed", "custom")

_ALIASES = {
    "monomial": "monomial",
    "mono": "monomial",
    "poly": "monomial",
    "trig": "trig-pure",
    "trig-pure": "trig-pure",
    "trigpure": "trig-pure",
    "trigmix": "trig-mixed",
    "trig-mixed": "trig-mixed",
    "trigmixed": "trig-mixed",
}


class Term(NamedTuple):
    """One built-in basis function: ``poly`` t^k, ``cos`` cos(k w t), ``sin`` sin(k w t)."""

    family: str
    k: int


Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BasisSet:
    s: int
    kind: str
    omega: float | None
    evaluators: tuple[tuple[Evaluator, Evaluator, Evaluator], ...] = field(repr=False)
    separable: bool
    terms: tuple[Term, ...] | None = None

    def __post_init__(self):
        if len(self.evaluators) != self.s:
            raise ConfigurationError(f"basis declares s={self.s} but has {len(self.evaluators)} functions")

    @property
    def label(self) -> str:
        if self.terms is None:
            return f"custom[s={self.s}]"
        names = []
        for fam, k in self.terms:
            if fam == "poly":
                names.append(f"t^{k}")
            else:
                names.append(f"{fam}({k if k > 1 else ''}wt)")
        return "{" + ", ".join(names) + "}"

    def spectrum(self) -> np.ndarray:
        """Exponents (in units of i*omega) spanning {1, t, u_1..u_s}, zeros first."""
        if self.terms is None:
            raise ConfigurationError("custom bases have no exponential spectrum")
        return _spectrum(self.terms)

    def subset(self, k: int) -> "BasisSet":
        """The basis made of the first ``k`` functions."""
        if not 1 <= k <= self.s:
            raise ConfigurationError(f"sub-basis size {k} outside 1..{self.s}")
        terms = None if self.terms is None else self.terms[:k]
        separable = _terms_separable(terms) if terms is not None else False
        return BasisSet(k, self.kind, self.omega, self.evaluators[:k], separable, terms)


def _spectrum(terms: Sequence[Term]) -> np.ndarray:
    powers = [k for fam, k in terms if fam == "poly"]
    nzero = max([2] + [p + 1 for p in powers])
    freqs = sorted({k for fam, k in terms if fam != "poly"})
    lam = [0.0] * nzero
    for k in freqs:
        lam += [float(k), -float(k)]
    return np.array(lam)


def _terms_separable(terms: Sequence[Term]) -> bool:
    # span{1, t, u_i} must be closed under translation
    powers = sorted(k for fam, k in terms if fam == "poly")
    if powers and powers != list(range(2, 2 + len(powers))):
        return False
    cos = {k for fam, k in terms if fam == "cos"}
    sin = {k for fam, k in terms if fam == "sin"}
    return cos == sin


def _term_evaluators(term: Term, omega: float | None):
    fam, k = term
    if fam == "poly":
        c1, c2 = k, k * (k - 1)
        return (
            lambda t, k=k: np.asarray(t, dtype=float) ** k,
            lambda t, k=k, c=c1: c * np.asarray(t, dtype=float) ** (k - 1),
            lambda t, k=k, c=c2: c * np.asarray(t, dtype=float) ** (k - 2) if k > 2 else np.full_like(np.asarray(t, dtype=float), 2.0),
        )
    w = k * omega
    if fam == "cos":
        return (
            lambda t, w=w: np.cos(w * np.asarray(t, dtype=float)),
            lambda t, w=w: -w * np.sin(w * np.asarray(t, dtype=float)),
            lambda t, w=w: -w * w * np.cos(w * np.asarray(t, dtype=float)),
        )
    if fam == "sin":
        return (
            lambda t, w=w: np.sin(w * np.asarray(t, dtype=float)),
            lambda t, w=w: w * np.cos(w * np.asarray(t, dtype=float)),
            lambda t, w=w: -w * w * np.sin(w * np.asarray(t, dtype=float)),
        )
    raise ConfigurationError(f"unknown term family {fam!r}")


def _valid_pairs() -> str:
    return ("monomial with any s>=1; trig-mixed with odd s>=3 (needs omega>0); "
            "trig-pure with even s>=2 (needs omega>0); custom with user functions")


def make_basis(kind: str, s: int, omega: float | None = None, functions=None,
               separable: bool = False) -> BasisSet:
    """Construct a fitting basis.

    Parameters
    ----------
    kind : str
        ``monomial``, ``trig-pure``, ``trig-mixed`` (aliases ``trig``,
        ``trigmix``) or ``custom``.
    s : int
        Number of basis functions (= number of stages).
    omega : float, optional
        Fitting frequency; required and positive for trigonometric kinds.
    functions : sequence of (u, du, d2u), optional
        Callables for ``custom`` bases. Each must accept numpy arrays.
    separable : bool
        Only meaningful for custom bases; declares the span translation
        invariant so coefficients may be reused across ``t``.
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigurationError(f"unknown basis kind {kind!r}; valid: {_valid_pairs()}")
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ConfigurationError(f"stage count must be a positive integer, got {s!r}")
    s = int(s)

    if kind == "custom":
        if functions is None or len(functions) != s:
            raise ConfigurationError(f"custom basis needs exactly {s} (u, du, d2u) triples")
        evals = tuple(tuple(fn) for fn in functions)
        if any(len(fn) != 3 for fn in evals):
            raise ConfigurationError("each custom basis function must be a (u, du, d2u) triple")
        return BasisSet(s, kind, omega, evals, bool(separable), None)

    if kind == "monomial":
        terms = tuple(Term("poly", i + 1) for i in range(1, s + 1))
        omega = None
    else:
        if omega is None or not np.isfinite(omega) or omega <= 0:
            raise ConfigurationError(f"{kind} basis needs omega > 0, got {omega!r}")
        if kind == "trig-mixed":
            if s < 3 or s % 2 == 0:
                raise ConfigurationError(f"unsupported (kind, s) = ({kind}, {s}); valid: {_valid_pairs()}")
            terms = (Term("poly", 2),)
            nfreq = (s - 1) // 2
        else:
            if s % 2:
                raise ConfigurationError(f"unsupported (kind, s) = ({kind}, {s}); valid: {_valid_pairs()}")
            terms = ()
            nfreq = s // 2
        for k in range(1, nfreq + 1):
            terms += (Term("cos", k), Term("sin", k))
        omega = float(omega)

    evals = tuple(_term_evaluators(term, omega) for term in terms)
    return BasisSet(s, kind, omega, evals, True, terms)


def eval_basis(basis: BasisSet, t):
    """Evaluate all basis functions and their first two derivatives.

    Returns ``(u, u1, u2)``; each has shape ``(s,)`` for scalar ``t`` and
    ``(len(t), s)`` for a 1-d array.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ConfigurationError("basis evaluated at a non-finite time")
    out = []
    for which in range(3):
        cols = [np.broadcast_to(np.asarray(fn[which](t), dtype=float), t.shape) for fn in basis.evaluators]
        out.append(np.stack(cols, axis=-1))
    return tuple(out)


def parse_basis(spec: str) -> BasisSet:
    """Parse ``monomial:s=3``, ``trigmix:s=3,omega=1.0`` or ``trig:s=4,omega=1``."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigurationError(f"malformed basis parameter {item!r} in {spec!r}")
        params[key.strip()] = val.strip()
    unknown = set(params) - {"s", "omega"}
    if unknown:
        raise ConfigurationError(f"unknown basis parameters {sorted(unknown)} in {spec!r}")
    try:
        s = int(params["s"])
        omega = float(params["omega"]) if "omega" in params else None
    except KeyError:
        raise ConfigurationError(f"basis spec {spec!r} needs s=<stages>") from None
    except ValueError as exc:
        raise ConfigurationError(f"bad number in basis spec {spec!r}: {exc}") from None
    if _ALIASES.get(name.strip()) is None:
        raise ConfigurationError(f"unknown basis kind {name!r}; use monomial, trigmix or trig")
    return make_basis(name.strip(), s, omega)


def newton_poly_coefficients(term: Term, spectrum: np.ndarray, omega: float | None, t: float, h: float):
    """Coefficients of u(t + xi*h) in the divided-difference basis of ``spectrum``.

    The basis functions are g_m(xi) = exp(. xi)[mu_1..mu_m] with
    mu_l = i*omega*h*lambda_l (see :func:`feptrkn.coeffs.newton_basis`).
    Returned as a complex vector of length ``len(spectrum)``.
    """
    n = len(spectrum)
    out = np.zeros(n, dtype=complex)
    fam, k = term
    if fam == "poly":
        nzero = int(np.sum(spectrum == 0))
        if k + 1 > nzero:
            raise ConfigurationError(f"t^{k} not representable with {nzero} zero exponents")
        # (t + xi h)^k = sum_m C(k, m) t^(k-m) h^m m! * xi^m/m!
        for m in range(k + 1):
            out[m] = factorial(k) / factorial(k - m) * t ** (k - m) * h ** m
        return out
    mu = 1j * (omega or 0.0) * h * spectrum
    for sign in (1, -1):
        pos = int(np.flatnonzero(spectrum == sign * k)[0])
        phase = np.exp(1j * sign * k * omega * t)
        # cos = (e+ + e-)/2, sin = (e+ - e-)/(2i)
        w = 0.5 * phase if fam == "cos" else (0.5 / 1j) * sign * phase
        prod = 1.0 + 0j
        for m in range(pos + 1):
            out[m] += w * prod
            prod *= mu[pos] - mu[m]
    return out
