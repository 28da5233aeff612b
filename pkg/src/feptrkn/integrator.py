"""Fixed and variable step integration.

One step maps (y_n, y'_n, Y_n) to the next triple using the stage
derivatives F_n = f(t_n + c h, Y_n) of the current step only::

    y_{n+1}  = y_n + h y'_n + h^2 b^T F_n
    y'_{n+1} = y'_n + h d^T F_n
    Y_{n+1}  = e y_{n+1} + c h y'_{n+1} + h^2 A F_n

so the s evaluations of a step are independent of each other. The y and
y' updates use compensated summation; without it the accumulated rounding
over ~10^4 steps sits above the method error of the high-order schemes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .coeffs import CoefficientTableau, EmbeddedTableau, TableauCache
from .errors import (BlowUpError, CollocationError, ConfigurationError, StartupError,
                     StepSizeError, UnsupportedMetricError)
from .methods import MethodSpec
from .problems import Problem

LTE_MODES = ("y", "y+yp")
STARTERS = ("exact", "rk")


@dataclass(frozen=True)
class StepState:
    """Data carried from step n to step n+1.

    ``Fev[i] = f(t + c_i h, Y[i])``. ``y_comp`` and ``yp_comp`` hold the
    running compensation terms of the summation.
    """

    t: float
    h: float
    y: np.ndarray
    yp: np.ndarray
    Y: np.ndarray
    Fev: Optional[np.ndarray]
    y_comp: Optional[np.ndarray] = None
    yp_comp: Optional[np.ndarray] = None


@dataclass
class StepController:
    tol: float
    p_tilde: int
    safety: float = 0.8
    grow_max: float = 2.0
    shrink_min: float = 0.5
    lte_mode: str = "y"

    def __post_init__(self):
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigurationError(f"tolerance must be positive, got {self.tol!r}")
        if self.p_tilde < 1:
            raise ConfigurationError(f"embedded order must be >= 1, got {self.p_tilde!r}")
        if not (0 < self.shrink_min < 1 < self.grow_max):
            raise ConfigurationError("need 0 < shrink_min < 1 < grow_max")
        if self.lte_mode not in LTE_MODES:
            raise ConfigurationError(f"lte_mode must be one of {LTE_MODES}, got {self.lte_mode!r}")


@dataclass
class Trajectory:
    """Integration record.

    ``t, y, yp, h, lte`` hold accepted points only (the initial point first,
    with h and lte set to nan). Rejected attempts are kept in ``rejected`` as
    (t, h, lte) tuples; trial sizes skipped because the collocation matrix
    was singular are listed in ``singular`` and cost no f-calls. ``nfe``
    counts stage evaluations of the method, ``nfe_start`` those spent by
    the starting procedure.
    """

    method: str
    problem: str
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    yp: list = field(default_factory=list)
    h: list = field(default_factory=list)
    lte: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    singular: list = field(default_factory=list)
    nfe: int = 0
    nfe_start: int = 0
    states: Optional[list] = None

    def record(self, t, y, yp, h=float("nan"), lte=float("nan")):
        self.t.append(float(t))
        self.y.append(np.array(y, dtype=float))
        self.yp.append(np.array(yp, dtype=float))
        self.h.append(float(h))
        self.lte.append(float(lte))

    @property
    def nsteps(self) -> int:
        return len(self.t) - 1

    @property
    def nrejects(self) -> int:
        return len(self.rejected)

    @property
    def accepted(self) -> np.ndarray:
        return np.ones(len(self.t), dtype=bool)

    def arrays(self):
        """Accepted points as numpy arrays (t, y, yp, h)."""
        return (np.array(self.t), np.array(self.y), np.array(self.yp), np.array(self.h))

    @property
    def step_ratios(self) -> np.ndarray:
        h = np.array(self.h[1:])
        return h[1:] / h[:-1] if len(h) > 1 else np.zeros(0)


def _two_sum(a, b, comp):
    # compensated a + b; comp accumulates the low-order part
    y = b - comp
    s = a + y
    return s, (s - a) - y


def _check_finite(step, t, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise BlowUpError(step, t)


def _eval_stages(problem: Problem, t: float, c: np.ndarray, h: float, Y: np.ndarray) -> np.ndarray:
    F = np.asarray(problem.rhs_batch(t + c * h, Y), dtype=float)
    return F.reshape(Y.shape)


# ------------------------------------------------------------------- starting

def start_stages(problem: Problem, c, h: float, order_target: int, starter: str = "rk",
                 t0: float | None = None, y0=None, yp0=None):
    """Stage values Y_0[i] ~ y(t0 + c_i h) and their f-values.

    Parameters
    ----------
    order_target : int
        Local accuracy demanded of the starter; the one-step solver runs
        at tolerance ``h**(order_target + 1)``.
    starter : {"rk", "exact"}
        ``rk`` integrates the first-order system with an embedded 8(5,3)
        Runge-Kutta pair; ``exact`` samples the known solution.

    Returns
    -------
    Y, Fev, nfe : ndarray, ndarray, int
        ``nfe`` is the number of f calls spent by the one-step solver.
    """
    c = np.asarray(c, dtype=float)
    t0 = problem.t0 if t0 is None else t0
    y0 = problem.y0 if y0 is None else np.asarray(y0, dtype=float)
    yp0 = problem.yp0 if yp0 is None else np.asarray(yp0, dtype=float)
    m = len(y0)
    tc = t0 + c * h
    nfe = 0
    if starter == "exact":
        if problem.exact is None:
            raise UnsupportedMetricError(f"problem {problem.name} has no exact solution for an exact start")
        Y = np.array([problem.exact(ti)[0] for ti in tc], dtype=float).reshape(len(c), m)
    elif starter == "rk":
        tol = max(min(h ** (order_target + 1), 1e-12), 2.3e-14)
        Y = np.empty((len(c), m))
        z0 = np.concatenate([y0, yp0])

        def rhs(t, z):
            acc = np.asarray(problem.f(t, z[:m]), dtype=float)
            if not np.all(np.isfinite(acc)):
                # the one-step solver would keep shrinking its step instead
                raise BlowUpError(0, t)
            return np.concatenate([z[m:], acc])

        for sign in (1, -1):
            sel = np.flatnonzero(sign * c > 0)
            if sel.size == 0:
                continue
            t_end = tc[sel].max() if sign > 0 else tc[sel].min()
            sol = solve_ivp(rhs, (t0, t_end), z0, method="DOP853", rtol=tol, atol=tol,
                            t_eval=np.sort(tc[sel])[::sign])
            nfe += sol.nfev
            if sol.status != 0 or sol.y.shape[1] != sel.size:
                raise StartupError(f"starting procedure failed: {sol.message}")
            order = np.argsort(tc[sel])[::sign]
            Y[sel[order]] = sol.y[:m].T
        Y[c == 0] = y0
    else:
        raise ConfigurationError(f"unknown starter {starter!r}; use one of {STARTERS}")
    _check_finite(0, t0, Y)
    Fev = _eval_stages(problem, t0, c, h, Y)
    return Y, Fev, nfe


# ---------------------------------------------------------------- fixed steps

def step_fixed(state: StepState, tableau: CoefficientTableau, problem: Problem,
               h_next: float | None = None, A_next: np.ndarray | None = None,
               evaluate: bool = True, step_index: int = 0) -> StepState:
    """Advance one step of size ``state.h``.

    The next stage values use ``tableau.A`` (or ``A_next`` together with
    ``h_next`` after a change of step size). With ``evaluate=False`` the new
    stage values are not passed through f, which saves s calls at the end
    of an integration.
    """
    h = state.h
    c = tableau.c
    F = state.Fev
    inc_y = h * state.yp + (h * h) * (tableau.b @ F)
    inc_yp = h * (tableau.d @ F)
    yc = np.zeros_like(state.y) if state.y_comp is None else state.y_comp
    ypc = np.zeros_like(state.yp) if state.yp_comp is None else state.yp_comp
    y1, yc = _two_sum(state.y, inc_y, yc)
    yp1, ypc = _two_sum(state.yp, inc_yp, ypc)

    hn = h if h_next is None else h_next
    A = tableau.A if A_next is None else A_next
    t1 = state.t + h
    Y1 = y1[None, :] + np.outer(c * hn, yp1) + (hn * hn) * (A @ F)
    _check_finite(step_index, t1, y1, yp1, Y1)
    F1 = _eval_stages(problem, t1, c, hn, Y1) if evaluate else None
    if F1 is not None:
        _check_finite(step_index, t1, F1)
    return StepState(t1, hn, y1, yp1, Y1, F1, yc, ypc)


def _grid(t0: float, t_end: float, h: float) -> int:
    if not (h > 0 and math.isfinite(h)):
        raise ConfigurationError(f"step size must be positive, got {h!r}")
    span = t_end - t0
    n = round(span / h)
    if n < 1 or abs(n * h - span) > 4 * n * np.spacing(max(abs(t_end), abs(t0), h)):
        raise ConfigurationError(f"step {h!r} does not divide the window [{t0}, {t_end}]")
    return int(n)


def integrate_fixed(problem: Problem, method: MethodSpec, h: float, starter: str = "exact",
                    keep_states: bool = False, coeff_method: str = "auto") -> Trajectory:
    """Constant step integration over the problem window.

    ``starter="exact"`` takes the initial stage values from the exact
    solution (isolating the error of the method itself); ``"rk"`` uses the
    one-step starting procedure.
    """
    n = _grid(problem.t0, problem.t_end, h)
    cache = TableauCache(method.basis, method.c, method.subset, coeff_method)
    c = method.c
    traj = Trajectory(method.name, problem.name, states=[] if keep_states else None)
    traj.record(problem.t0, problem.y0, problem.yp0)
    Y, F, nfe0 = start_stages(problem, c, h, method.s + 2, starter)
    traj.nfe_start = nfe0
    traj.nfe += method.s
    state = StepState(problem.t0, h, problem.y0.astype(float), problem.yp0.astype(float), Y, F)
    for k in range(n):
        if keep_states:
            traj.states.append(state)
        tab = cache.tableau(state.t, h)
        last = k == n - 1
        state = step_fixed(state, tab, problem, evaluate=not last, step_index=k + 1)
        # land exactly on the grid point
        state = replace(state, t=problem.t0 + (k + 1) * h if not last else problem.t_end)
        if not last:
            traj.nfe += method.s
        traj.record(state.t, state.y, state.yp, h)
    if keep_states:
        traj.states.append(state)
    return traj


# ------------------------------------------------------------------- adaptive

def compute_lte(y, y_tilde, yp=None, yp_tilde=None, mode: str = "y") -> float:
    """Euclidean local error estimate from the embedded solution.

    ``mode="y"`` uses positions only; ``"y+yp"`` adds the derivative difference.
    """
    e = float(np.linalg.norm(np.asarray(y) - np.asarray(y_tilde)))
    if mode == "y":
        return e
    if mode == "y+yp":
        if yp is None or yp_tilde is None:
            raise ConfigurationError("derivative values needed for the y+yp error estimate")
        ep = float(np.linalg.norm(np.asarray(yp) - np.asarray(yp_tilde)))
        return math.hypot(e, ep)
    raise ConfigurationError(f"unknown LTE mode {mode!r}; use one of {LTE_MODES}")


def propose_stepsize(h: float, lte: float, controller: StepController) -> float:
    """h * min(grow, max(shrink, safety (tol/lte)^(1/(p~+1))))."""
    if lte <= 0.0:
        return h * controller.grow_max
    fac = controller.safety * (controller.tol / lte) ** (1.0 / (controller.p_tilde + 1))
    return h * min(controller.grow_max, max(controller.shrink_min, fac))


def _landing(h_prop: float, remaining: float, h_lo: float = 0.0) -> float:
    # spread the remainder evenly over the steps still needed at h_prop,
    # using one step fewer if the even split would fall below h_lo
    k = max(1, math.ceil(remaining / h_prop * (1 - 1e-12)))
    if k > 1 and remaining / k < h_lo:
        k -= 1
    return remaining / k


def _retry_size(h: float, h_acc: float | None, shrink: float) -> float:
    # halve the trial, but not below shrink * (last accepted size) unless
    # the trial already sits at that floor
    h_new = 0.5 * h
    if h_acc is not None:
        floor = shrink * h_acc
        if h_new < floor < h * (1 - 1e-12):
            return floor
    return h_new


def _embedded_pair(h, y, yp, yc, ypc, F, emb: EmbeddedTableau):
    # same compensated update as the main solution, so equal increments give equal results
    Fs = F[emb.index_map]
    yt, _ = _two_sum(y, h * yp + (h * h) * (emb.b_tilde @ Fs), yc)
    ypt, _ = _two_sum(yp, h * (emb.d_tilde @ Fs), ypc)
    return yt, ypt


def integrate_adaptive(problem: Problem, method: MethodSpec, controller: StepController,
                       starter: str = "rk", h0: float | None = None, keep_states: bool = False,
                       coeff_method: str = "auto", max_steps: int = 1_000_000) -> Trajectory:
    """Variable step integration with embedded error control.

    After an accepted step of size h_n the next stage values are built with
    the stage matrix for the size change h_n -> h_{n+1}. A rejected attempt
    halves the trial size and rebuilds only the stage values; y_{n+1} and
    y'_{n+1} stay as accepted. Trial sizes with a singular collocation
    matrix are halved before any f-call and are not counted as rejections,
    so ``nfe == s * (nsteps + nrejects)``. A retry is not cut below
    ``shrink_min`` times the last accepted size unless the trial already
    sits at that floor, so accepted size ratios stay in
    [shrink_min, grow_max] except after repeated failures there.
    """
    if method.subset is None or len(method.subset) == 0:
        raise ConfigurationError("adaptive stepping needs an embedded node subset")
    t0, T = problem.t0, problem.t_end
    span = T - t0
    h_min = 1e-12 * abs(T if T != 0 else span)
    c = method.c
    s = method.s
    cache = TableauCache(method.basis, c, tuple(method.subset), coeff_method)
    traj = Trajectory(method.name, problem.name, states=[] if keep_states else None)
    traj.record(t0, problem.y0, problem.yp0)

    h = h0 if h0 is not None else min(controller.tol ** (1.0 / (controller.p_tilde + 1)), span / 10)
    h = _landing(h, span)
    t = t0
    y = problem.y0.astype(float)
    yp = problem.yp0.astype(float)
    yc = np.zeros_like(y)
    ypc = np.zeros_like(yp)
    prev = None  # (t_prev, h_prev, F_prev)
    h_acc = None
    steps = 0
    while True:
        if h < h_min:
            raise StepSizeError(f"step size {h:.3e} below minimum {h_min:.3e} at t={t!r}")
        steps += 1
        if steps > max_steps:
            raise StepSizeError(f"more than {max_steps} attempted steps")
        try:
            tab = cache.tableau(t, h)
            emb = cache.embedded(t, h)
            A = None if prev is None else cache.variable_A(prev[0], prev[1], h)
        except CollocationError:
            # singular collocation matrix at this h: retry without spending f-calls
            traj.singular.append((t, h))
            h = _retry_size(h, h_acc, controller.shrink_min)
            continue
        if prev is None:
            Y, F, nst = start_stages(problem, c, h, s + 2, starter, t, y, yp)
            traj.nfe_start += nst
        else:
            Y = y[None, :] + np.outer(c * h, yp) + (h * h) * (A @ prev[2])
            _check_finite(traj.nsteps + 1, t, Y)
            F = _eval_stages(problem, t, c, h, Y)
        traj.nfe += s
        _check_finite(traj.nsteps + 1, t, F)

        inc_y = h * yp + (h * h) * (tab.b @ F)
        inc_yp = h * (tab.d @ F)
        y1, yc1 = _two_sum(y, inc_y, yc)
        yp1, ypc1 = _two_sum(yp, inc_yp, ypc)
        yt, ypt = _embedded_pair(h, y, yp, yc, ypc, F, emb)
        lte = compute_lte(y1, yt, yp1, ypt, controller.lte_mode)
        _check_finite(traj.nsteps + 1, t + h, y1, yp1)

        if lte > controller.tol:
            traj.rejected.append((t, h, lte))
            h = _retry_size(h, h_acc, controller.shrink_min)
            continue

        if keep_states:
            traj.states.append(StepState(t, h, y.copy(), yp.copy(), Y, F))
        remaining = T - (t + h)
        last = remaining <= 1e-12 * abs(span)
        t = T if last else t + h
        y, yp, yc, ypc = y1, yp1, yc1, ypc1
        traj.record(t, y, yp, h, lte)
        if last:
            break
        prev = (t - h, h, F)
        h_acc = h
        h = _landing(propose_stepsize(h, lte, controller), T - t, controller.shrink_min * h_acc)
    return traj


# --------------------------------------------------------------- dense output

def dense_eval(state: StepState, xi: float, method: MethodSpec, cache: TableauCache | None = None):
    """Solution and derivative at ``state.t + xi * state.h`` from the step's stage data."""
    if not (0.0 <= xi <= 1.0):
        raise ConfigurationError(f"xi must lie in [0, 1], got {xi!r}")
    if xi == 0.0:
        return state.y.copy(), state.yp.copy()
    cache = cache or TableauCache(method.basis, method.c)
    dc = cache.dense(state.t, state.h, xi)
    hx = xi * state.h
    y = state.y + hx * state.yp + hx * hx * (dc.b_xi @ state.Fev)
    yp = state.yp + hx * (dc.d_xi @ state.Fev)
    return y, yp


# -------------------------------------------------------------------- metrics

def _exact_fn(exact) -> Callable:
    if isinstance(exact, Problem):
        if exact.exact is None:
            raise UnsupportedMetricError(f"problem {exact.name} has no exact solution")
        return exact.exact
    if exact is None:
        raise UnsupportedMetricError("an exact solution is required for this metric")
    return exact


def _exact_positions(exact, t):
    t = np.asarray(t, dtype=float)
    y, _ = exact(t)
    y = np.asarray(y, dtype=float)
    return y.T if y.ndim == 2 else y.reshape(len(t), -1)


def compute_ncd(trajectory: Trajectory, exact) -> float:
    """log10 of the largest absolute position error over the accepted grid points.

    ``exact`` is a Problem or a callable t -> (y, y'). Returns ``-inf`` when
    the error vanishes.
    """
    ex = _exact_fn(exact)
    t = np.array(trajectory.t)
    err = np.abs(np.array(trajectory.y) - _exact_positions(ex, t)).max()
    return float(np.log10(err)) if err > 0 else float("-inf")


def endpoint_error(trajectory: Trajectory, exact) -> float:
    """Euclidean norm of the position error at the final time."""
    ex = _exact_fn(exact)
    y_ex, _ = ex(trajectory.t[-1])
    return float(np.linalg.norm(trajectory.y[-1] - np.asarray(y_ex, dtype=float)))


def dense_local_errors(problem: Problem, method: MethodSpec, h: float, xi: float = 0.5,
                       t_points=None) -> tuple[float, float]:
    """One-step interpolation error started from exact data.

    For each t_n in ``t_points`` the step data (y_n, y'_n, Y_n) are taken
    from the exact solution, the dense formula is evaluated at t_n + xi h
    and compared with the exact solution there. Returns the largest
    position and derivative errors (max norm).
    """
    ex = _exact_fn(problem)
    if t_points is None:
        t_points = np.linspace(problem.t0, problem.t0 + 0.75 * (problem.t_end - problem.t0), 7)
    cache = TableauCache(method.basis, method.c)
    ey = ep = 0.0
    for tn in np.atleast_1d(np.asarray(t_points, dtype=float)):
        y, yp = (np.asarray(v, dtype=float) for v in ex(tn))
        Y = np.array([np.asarray(ex(tn + ci * h)[0], dtype=float) for ci in method.c])
        F = _eval_stages(problem, tn, method.c, h, Y)
        yd, ypd = dense_eval(StepState(tn, h, y, yp, Y, F), xi, method, cache)
        ye, ype = ex(tn + xi * h)
        ey = max(ey, float(np.abs(yd - ye).max()))
        ep = max(ep, float(np.abs(ypd - ype).max()))
    return ey, ep
