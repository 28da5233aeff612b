"""Command line front end.

Subcommands::

    feptrkn nodes     --stages 4 --boost 3 [--extra int02]
    feptrkn coeffs    --basis trigmix:s=3,omega=1 --nodes eptrkn52 --h 0.25 [--xi 0.5]
    feptrkn converge  --method eptrkn52 --problem bett --h0 0.5 --levels 9
    feptrkn wp        --method feptrkn52 --problem bett --tols 1e-4:1e-12
    feptrkn dense     --method eptrkn52 --problem bett --h0 0.25 --levels 6
    feptrkn stability --method feptrkn84 --omega-h 0:4:0.05 --zmin -20

Sweeps write CSV (header row, 17 significant digits) to ``--out`` or to
standard output with ``--out -``. Sweep rows run in a thread pool whose
size is capped by the environment variable FEPTRKN_THREADS; rows are
always written in input order.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .basis import parse_basis
from .coeffs import (solve_dense, solve_embedded, solve_tableau, tableau_residuals,
                     dense_residuals)
from .errors import ConfigurationError, NumericError
from .integrator import (STARTERS, LTE_MODES, StepController, compute_ncd, dense_local_errors,
                         endpoint_error, integrate_adaptive, integrate_fixed)
from .methods import REGISTRY, get_method
from .nodes import EXTRAS, NODE_SETS, as_nodes, named_nodes, orthogonality_residuals, solve_nodes
from .problems import parse_problem
from .stability import scan_region

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ------------------------------------------------------------------ helpers

def fmt(x) -> str:
    """17 significant digits; empty for None, plain for ints."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _threads() -> int:
    raw = os.environ.get("FEPTRKN_THREADS", "")
    if not raw:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"FEPTRKN_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"FEPTRKN_THREADS must be >= 1, got {n}")
    return n


def run_ordered(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Map ``fn`` over ``items`` in a thread pool, keeping input order."""
    threads = _threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


@contextmanager
def _output(path: str):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def parse_tols(spec: str) -> list[float]:
    """``a:b`` (one value per decade) or ``a:b:k`` (k per decade), log-spaced from a to b.

    An empty string gives an empty list.
    """
    spec = spec.strip()
    if not spec:
        return []
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) not in (2, 3):
            raise ValueError
        a, b = float(parts[0]), float(parts[1])
        per = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise ConfigurationError(f"bad tolerance range {spec!r}; use a:b or a:b:per_decade") from None
    if a <= 0 or b <= 0 or per < 1:
        raise ConfigurationError(f"tolerances must be positive, got {spec!r}")
    la, lb = math.log10(a), math.log10(b)
    n = int(round(abs(la - lb) * per)) + 1
    # snap to 15 digits so decade values are the same doubles as the literals 1e-5 etc.
    return [float(format(10.0 ** v, ".15g")) for v in np.linspace(la, lb, n)]


def parse_range(spec: str) -> list[float]:
    """``a:b:step`` inclusive grid, or a single value."""
    parts = spec.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigurationError(f"bad range {spec!r}; use a:b:step") from None
    if len(vals) == 1:
        return vals
    if len(vals) != 3 or vals[2] <= 0:
        raise ConfigurationError(f"bad range {spec!r}; use a:b:step with step > 0")
    a, b, step = vals
    n = int(math.floor((b - a) / step * (1 + 1e-12))) + 1
    return [a + k * step for k in range(max(n, 0))]


# ------------------------------------------------------------------- sweeps

def converge_rows(method: str, problem: str, h0: float = 0.5, levels: int = 9,
                  starter: str = "exact", omega: float = 1.0, threads: int | None = None):
    """Fixed-step convergence table rows (h, ncd, nfe, order_est)."""
    if levels < 1:
        raise ConfigurationError(f"levels must be >= 1, got {levels}")
    m = get_method(method, omega)
    prob = parse_problem(problem)
    if prob.exact is None:
        raise ConfigurationError(f"problem {prob.name} has no exact solution; NCD needs one")
    hs = [h0 / 2 ** k for k in range(levels)]

    def one(h):
        traj = integrate_fixed(prob, m, h, starter=starter)
        return compute_ncd(traj, prob), traj.nfe

    res = run_ordered(one, hs, threads)
    rows = []
    for k, (h, (ncd, nfe)) in enumerate(zip(hs, res)):
        est = (ncd - res[k + 1][0]) / 0.3 if k + 1 < len(res) else None
        rows.append((h, ncd, nfe, est))
    return rows


def wp_rows(method: str, problem: str, tols: Sequence[float], starter: str = "rk",
            omega: float = 1.0, lte_mode: str = "y", threads: int | None = None):
    """Adaptive work-precision rows (tol, error, nfe, nsteps, nrejects)."""
    m = get_method(method, omega)
    prob = parse_problem(problem)

    def one(tol):
        ctrl = StepController(tol, m.p_tilde, lte_mode=lte_mode)
        traj = integrate_adaptive(prob, m, ctrl, starter=starter)
        return tol, endpoint_error(traj, prob), traj.nfe, traj.nsteps, traj.nrejects

    return run_ordered(one, list(tols), threads)


def dense_rows(method: str, problem: str, h0: float = 0.25, levels: int = 6, xi: float = 0.5,
               omega: float = 1.0, threads: int | None = None):
    """Local interpolation errors (h, err_y, err_yp) at h = h0 / 2^k."""
    m = get_method(method, omega)
    prob = parse_problem(problem)
    hs = [h0 / 2 ** k for k in range(levels)]
    res = run_ordered(lambda h: dense_local_errors(prob, m, h, xi), hs, threads)
    return [(h, ey, ep) for h, (ey, ep) in zip(hs, res)]


def stability_rows(method: str, omega_h: Sequence[float], z_min: float = -20.0,
                   n_grid: int = 4000, threads: int | None = None):
    """Returns (rows of (omega_h, z, rho), list of (omega_h, boundary))."""
    m = get_method(method)
    scans = run_ordered(lambda w: scan_region(m, w, z_min, n_grid), list(omega_h), threads)
    rows = [(sc.omega_h, z, r) for sc in scans for z, r in zip(sc.z, sc.rho)]
    return rows, [(sc.omega_h, sc.boundary) for sc in scans]


# ----------------------------------------------------------------- commands

def _print_vec(name, v, digits=17):
    print(f"{name} = [" + ", ".join(format(float(x), f".{digits}g") for x in v) + "]")


def cmd_nodes(args) -> int:
    nv = solve_nodes(args.stages, args.boost, args.extra or ())
    _print_vec("c", nv.c, 14)
    for label, r in orthogonality_residuals(nv).items():
        print(f"residual {label}: {r:.3e}")
    return 0


def _nodes_arg(spec: str):
    if spec.removeprefix("f") in NODE_SETS:
        return named_nodes(spec)
    try:
        return as_nodes([float(x) for x in spec.split(",")])
    except ValueError:
        raise ConfigurationError(
            f"unknown node set {spec!r}; use one of {', '.join(NODE_SETS)} or a comma list") from None


def cmd_coeffs(args) -> int:
    basis = parse_basis(args.basis)
    nv = _nodes_arg(args.nodes)
    if args.xi is not None:
        dc = solve_dense(basis, nv.c, args.t, args.h, args.xi, args.coeff_method)
        _print_vec("b(xi)", dc.b_xi)
        _print_vec("d(xi)", dc.d_xi)
        if args.xi > 0:
            for k, r in dense_residuals(basis, nv.c, args.t, args.h, dc).items():
                print(f"residual {k}: {r:.3e}")
        return 0
    tab = solve_tableau(basis, nv.c, args.t, args.h, args.coeff_method)
    print(f"basis {basis.label}, t={args.t:g}, h={args.h:g}, rcond={tab.rcond:.3e}")
    _print_vec("c", tab.c)
    print("A =")
    for row in tab.A:
        print("  [" + ", ".join(format(float(x), ".17g") for x in row) + "]")
    _print_vec("b", tab.b)
    _print_vec("d", tab.d)
    for k, r in tableau_residuals(basis, tab).items():
        print(f"residual {k}: {r:.3e}")
    if args.embedded:
        emb = solve_embedded(basis, nv.c, tuple(range(basis.s - 1)), args.t, args.h, args.coeff_method)
        _print_vec("b~", emb.b_tilde)
        _print_vec("d~", emb.d_tilde)
    return 0


def cmd_converge(args) -> int:
    rows = converge_rows(args.method, args.problem, args.h0, args.levels, args.starter, args.omega)
    write_csv(args.out, ("h", "ncd", "nfe", "order_est"), rows)
    return 0


def cmd_wp(args) -> int:
    rows = wp_rows(args.method, args.problem, parse_tols(args.tols), args.starter, args.omega,
                   args.lte)
    write_csv(args.out, ("tol", "error", "nfe", "nsteps", "nrejects"), rows)
    return 0


def cmd_dense(args) -> int:
    rows = dense_rows(args.method, args.problem, args.h0, args.levels, args.xi, args.omega)
    write_csv(args.out, ("h", "err_y", "err_yp"), rows)
    return 0


def cmd_stability(args) -> int:
    rows, bounds = stability_rows(args.method, parse_range(args.omega_h), args.zmin, args.n_grid)
    write_csv(args.out, ("omega_h", "z", "rho"), rows)
    if args.boundary_out:
        write_csv(args.boundary_out, ("omega_h", "boundary"), bounds)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="feptrkn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("nodes", help="nodes from the orthogonality conditions")
    q.add_argument("--stages", type=int, required=True)
    q.add_argument("--boost", type=int, default=0)
    q.add_argument("--extra", action="append", choices=EXTRAS)
    q.set_defaults(func=cmd_nodes)

    q = sub.add_parser("coeffs", help="method coefficients for a basis and node set")
    q.add_argument("--basis", required=True, help="e.g. monomial:s=3 or trigmix:s=3,omega=1")
    q.add_argument("--nodes", required=True, help="named set or comma separated values")
    q.add_argument("--h", type=float, required=True)
    q.add_argument("--t", type=float, default=0.0)
    q.add_argument("--xi", type=float, default=None, help="print dense output coefficients")
    q.add_argument("--embedded", action="store_true", help="also print the embedded weights")
    q.add_argument("--coeff-method", default="auto", choices=("auto", "stable", "direct"))
    q.set_defaults(func=cmd_coeffs)

    def common(q, starter):
        q.add_argument("--method", required=True, help=f"one of {', '.join(REGISTRY)}")
        q.add_argument("--problem", default="bett")
        q.add_argument("--omega", type=float, default=1.0)
        q.add_argument("--out", default="-")
        if starter:
            q.add_argument("--starter", default=starter, choices=STARTERS)

    q = sub.add_parser("converge", help="fixed step NCD table")
    common(q, "exact")
    q.add_argument("--h0", type=float, default=0.5)
    q.add_argument("--levels", type=int, default=9)
    q.set_defaults(func=cmd_converge)

    q = sub.add_parser("wp", help="adaptive work-precision sweep")
    common(q, "rk")
    q.add_argument("--tols", default="1e-4:1e-12")
    q.add_argument("--lte", default="y", choices=LTE_MODES)
    q.set_defaults(func=cmd_wp)

    q = sub.add_parser("dense", help="local dense output errors")
    common(q, None)
    q.add_argument("--h0", type=float, default=0.25)
    q.add_argument("--levels", type=int, default=6)
    q.add_argument("--xi", type=float, default=0.5)
    q.set_defaults(func=cmd_dense)

    q = sub.add_parser("stability", help="spectral radius scan on the test equation")
    q.add_argument("--method", required=True, help=f"one of {', '.join(REGISTRY)}")
    q.add_argument("--omega-h", default="0")
    q.add_argument("--zmin", type=float, default=-20.0)
    q.add_argument("--n-grid", type=int, default=4000)
    q.add_argument("--out", default="-")
    q.add_argument("--boundary-out", default=None, help="also write omega_h,boundary")
    q.set_defaults(func=cmd_stability)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
