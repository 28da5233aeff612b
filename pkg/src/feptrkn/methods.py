"""Registry of the named methods.

Names follow ``[f]eptrkn<p><s>``: order p, s stages. The ``eptrkn`` variants
use monomials (constant coefficients); the ``feptrkn`` variants share the
node set but fit trigonometric or mixed bases with frequency omega.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, make_basis
from .coeffs import default_subset
from .errors import ConfigurationError
from .nodes import NodeVector, named_nodes


@dataclass(frozen=True)
class MethodSpec:
    name: str
    basis: BasisSet
    nodes: NodeVector
    subset: tuple[int, ...]
    order: int
    p_tilde: int

    @property
    def s(self) -> int:
        return self.basis.s

    @property
    def c(self) -> np.ndarray:
        return self.nodes.c


# name -> (basis kind, s, node set, order)
REGISTRY = {
    "eptrkn52": ("monomial", 3, "eptrkn52", 5),
    "feptrkn52": ("trig-mixed", 3, "eptrkn52", 5),
    "eptrkn73": ("monomial", 4, "eptrkn73", 7),
    "feptrkn73": ("trig-pure", 4, "eptrkn73", 7),
    "eptrkn84": ("monomial", 5, "eptrkn84", 8),
    "feptrkn84": ("trig-mixed", 5, "eptrkn84", 8),
    "eptrkn95": ("monomial", 6, "eptrkn95", 9),
    "feptrkn95": ("trig-pure", 6, "eptrkn95", 9),
}


def get_method(name: str, omega: float = 1.0) -> MethodSpec:
    """Look up a registered method; ``omega`` is ignored for monomial bases."""
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown method {name!r}; registered: {', '.join(REGISTRY)}")
    kind, s, node_name, order = REGISTRY[name]
    basis = make_basis(kind, s, None if kind == "monomial" else omega)
    return MethodSpec(name, basis, named_nodes(node_name), default_subset(s), order, s - 1)


def custom_method(basis: BasisSet, nodes: NodeVector, order: int | None = None,
                  subset: tuple[int, ...] | None = None, name: str = "custom") -> MethodSpec:
    """Assemble a method from an arbitrary basis and node vector."""
    if len(nodes.c) != basis.s:
        raise ConfigurationError(f"{len(nodes.c)} nodes for a basis of {basis.s} functions")
    subset = default_subset(basis.s) if subset is None else tuple(subset)
    return MethodSpec(name, basis, nodes, subset, order or basis.s, len(subset))
