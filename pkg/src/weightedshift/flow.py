"""Characteristic flow, exit times and path integrals.

Every quantity downstream (semigroup weights, growth constants, periods) is
read off a single augmented integration of

    X' = sign * F(X),   I_nu' = nu(X),   I_div' = div F(X),   I_sig' = Sigma_p(X)

so the integrals share the error control of the trajectory itself.  The
integrals accumulate over ``|t|``: for ``t < 0`` they hold
``int_0^|t| g(Phi(x, -s)) ds``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernel
from .field import DomainError, ProblemSpec

__all__ = [
    "FlowOptions",
    "FlowResult",
    "ExitTimeResult",
    "FlowExitError",
    "StepFailureError",
    "advance_flow",
    "flow_point",
    "sample_path",
    "exit_time",
    "radon_nikodym",
    "trajectory",
    "write_trajectory_csv",
]

_STATUS = {kernel.OK: "ok", kernel.LEFT_DOMAIN: "left_domain", kernel.STEP_FAILURE: "step_failure"}


class FlowExitError(RuntimeError):
    """The trajectory left the domain before the requested time."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


class StepFailureError(RuntimeError):
    """Adaptive step size underflow or step budget exhausted."""


@dataclass(frozen=True)
class FlowOptions:
    """Integrator tolerances.

    ``h_max`` caps the step to limit missed grazing exits; ``t_tol`` is the
    width to which boundary crossings are bisected.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    t_tol: float = 1e-9
    h_max: float = math.inf
    max_steps: int = 1_000_000
    backend: Optional[str] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.t_tol > 0 and self.h_max > 0):
            raise ValueError("tolerances and h_max must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


DEFAULT_OPTIONS = FlowOptions()


@dataclass(frozen=True)
class FlowResult:
    """Outcome of :func:`advance_flow`.

    ``t_reached`` is signed like the request.  When ``status`` is
    ``"left_domain"``, ``endpoint`` is the last state inside the domain and
    ``exit_time`` the (unsigned) bisected crossing time.
    """

    endpoint: np.ndarray
    int_nu: float
    int_div: float
    int_sigma_p: float
    steps: int
    status: str
    t_requested: float
    t_reached: float
    exit_time: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class ExitTimeResult:
    """Backward and forward stay times, each either finite or censored at ``horizon``.

    Censored entries are stored as ``inf`` with the matching flag set; a
    finite value is always below ``horizon``.
    """

    tau_minus: float
    tau_plus: float
    horizon: float
    minus_censored: bool
    plus_censored: bool
    step_failure: bool = False

    @property
    def tau(self) -> float:
        return self.tau_minus + self.tau_plus


def _run(prob: ProblemSpec, x: np.ndarray, t_abs: float, direction: float,
         t_out: Optional[np.ndarray], opts: FlowOptions) -> kernel.KernelResult:
    n = prob.dimension
    y0 = np.zeros(n + 3)
    y0[:n] = x
    t_out_arr = np.empty(0) if t_out is None else np.ascontiguousarray(t_out, dtype=float)
    prog = prob.program
    if prog is not None:
        A, b = prob.domain.halfspaces
        return kernel.integrate_program(
            prog.ops, prog.args, prog.consts, prog.starts, prog.stack_size,
            np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(b, dtype=float), n,
            y0, float(t_abs), float(direction), t_out_arr,
            opts.rtol, opts.atol, opts.h_max, opts.t_tol, opts.max_steps,
            backend=opts.backend,
        )
    return kernel.integrate_callable(
        prob.rhs, prob.contains, n, y0, float(t_abs), float(direction), t_out_arr,
        opts.rtol, opts.atol, opts.h_max, opts.t_tol, opts.max_steps,
    )


def _check_point(prob: ProblemSpec, x) -> np.ndarray:
    x = np.array(x, dtype=float)
    if x.shape != (prob.dimension,):
        raise ValueError(f"expected a point of dimension {prob.dimension}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    if not prob.contains(x):
        raise DomainError(f"point {x.tolist()} is not in the domain")
    return x


def advance_flow(prob: ProblemSpec, x, t: float, opts: FlowOptions = DEFAULT_OPTIONS) -> FlowResult:
    """Flow ``x`` for signed time ``t`` and accumulate the path integrals.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> r = advance_flow(builtin("rotation"), [1.0, 0.0], math.pi / 2)
    >>> np.round(r.endpoint, 8) + 0.0
    array([0., 1.])
    """
    x = _check_point(prob, x)
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("flow time must be finite")
    direction = 1.0 if t >= 0 else -1.0
    res = _run(prob, x, abs(t), direction, None, opts)
    n = prob.dimension
    y = res.y_end
    return FlowResult(
        endpoint=np.array(y[:n]),
        int_nu=float(y[n]),
        int_div=float(y[n + 1]),
        int_sigma_p=float(y[n + 2]),
        steps=int(res.steps),
        status=_STATUS[res.status],
        t_requested=t,
        t_reached=direction * float(res.t_reached),
        exit_time=float(res.exit_time),
    )


def flow_point(prob: ProblemSpec, x, t: float, opts: FlowOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """``Phi(x, t)``; raises if the trajectory leaves the domain or the integrator fails."""
    r = advance_flow(prob, x, t, opts)
    _raise_for(r)
    return r.endpoint


def _raise_for(r: FlowResult) -> None:
    if r.status == "left_domain":
        raise FlowExitError(f"trajectory leaves the domain at |t| = {r.exit_time:.12g}", r.exit_time)
    if r.status == "step_failure":
        raise StepFailureError(f"step size underflow at t = {r.t_reached:.12g}")


def sample_path(prob: ProblemSpec, x, times: Sequence[float], direction: float = 1.0,
                opts: FlowOptions = DEFAULT_OPTIONS):
    """Augmented states at the non-negative, non-decreasing ``times`` along ``direction``.

    Returns ``(states, n_reached, result)`` where ``states`` has one row per
    requested time (``nan`` past an exit) and ``result`` is the raw kernel
    outcome for the whole run.
    """
    x = _check_point(prob, x)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-D array")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    res = _run(prob, x, float(times[-1]), direction, times, opts)
    return res.y_out, int(res.n_out), res


def trajectory(prob: ProblemSpec, x, t_grid: Sequence[float], opts: FlowOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Rows ``(t, x_1..x_N, int nu, int div, int Sigma_p)`` on a signed, monotone grid starting at 0.

    Rows past a domain exit are omitted.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if len(t_grid) == 0:
        return np.empty((0, prob.dimension + 4))
    sign = -1.0 if np.any(t_grid < 0) else 1.0
    if np.any(sign * t_grid < 0):
        raise ValueError("t_grid must not change sign")
    states, n_reached, _ = sample_path(prob, x, sign * t_grid, sign, opts)
    return np.column_stack([t_grid[:n_reached], states[:n_reached]])


def write_trajectory_csv(path, rows: np.ndarray, dimension: int) -> None:
    header = ["t"] + [f"x{i}" for i in range(dimension)] + ["int_nu", "int_div", "int_sigma_p"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def exit_time(prob: ProblemSpec, x, horizon: float, opts: FlowOptions = DEFAULT_OPTIONS) -> ExitTimeResult:
    """Backward and forward stay times of ``x`` in the domain, censored at ``horizon``.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> e = exit_time(builtin("slab_constant", {"c": 0.0}), [0.3], 10.0)
    >>> round(e.tau_minus, 8), round(e.tau_plus, 8)
    (0.3, 0.7)
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    x = _check_point(prob, x)
    out = []
    failed = False
    for direction in (-1.0, 1.0):
        res = _run(prob, x, float(horizon), direction, None, opts)
        if res.status == kernel.LEFT_DOMAIN and res.exit_time < horizon:
            out.append((float(res.exit_time), False))
        elif res.status == kernel.STEP_FAILURE:
            failed = True
            out.append((math.inf, True))
        else:
            out.append((math.inf, True))
    (tm, cm), (tp, cp) = out
    return ExitTimeResult(tm, tp, float(horizon), cm, cp, failed)


def radon_nikodym(prob: ProblemSpec, x, t: float, opts: FlowOptions = DEFAULT_OPTIONS) -> float:
    """``exp(int_0^t div F(Phi(x, s)) ds)``, the volume distortion of ``Phi(., t)`` at ``x``."""
    r = advance_flow(prob, x, t, opts)
    _raise_for(r)
    sign = 1.0 if t >= 0 else -1.0
    return math.exp(sign * r.int_div)
