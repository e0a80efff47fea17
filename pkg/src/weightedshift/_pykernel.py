"""Pure-Python flow kernel.

Dormand-Prince 5(4) integration of the augmented characteristic system::

    dX/ds = sign * F(X),   dI_nu/ds = nu(X),   dI_div/ds = div F(X),   dI_sig/ds = Sigma_p(X)

with domain-exit detection by bisection.  The compiled kernel in
``_ckernel.pyx`` implements the same algorithm step for step; this module is
used when the extension is unavailable and for problems whose field or domain
is an arbitrary Python callable.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np

from .expr import EvaluationError

OK = 0
LEFT_DOMAIN = 1
STEP_FAILURE = 2

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
EPS = 2.220446049250313e-16


class KernelResult(NamedTuple):
    y_out: np.ndarray  # (len(t_out), n_dim + 3)
    n_out: int  # number of output rows actually reached
    y_end: np.ndarray  # augmented state at t_reached
    t_reached: float
    steps: int
    status: int
    exit_time: float  # crossing time when status == LEFT_DOMAIN, else nan


def integrate(
    rhs: Callable[[np.ndarray], np.ndarray],
    inside: Callable[[np.ndarray], bool],
    n_dim: int,
    y0: np.ndarray,
    t_end: float,
    direction: float,
    t_out: Optional[np.ndarray],
    rtol: float,
    atol: float,
    h_max: float,
    t_tol: float,
    max_steps: int,
) -> KernelResult:
    """Integrate the augmented system from 0 to ``t_end >= 0``.

    ``rhs(x)`` returns ``[F(x), nu(x), div(x), Sigma_p(x)]`` and raises
    :class:`EvaluationError` where undefined.  ``direction`` multiplies the
    field only, so integrals always accumulate over ``|t|``.
    """
    m = n_dim + 3
    y = np.array(y0, dtype=float)
    t_out = np.empty(0) if t_out is None else np.asarray(t_out, dtype=float)
    n_req = len(t_out)
    y_out = np.full((n_req, m), np.nan)
    n_out = 0
    steps = 0

    def f(state):
        d = np.array(rhs(state[:n_dim]), dtype=float)
        d[:n_dim] *= direction
        if not np.all(np.isfinite(d)):
            raise EvaluationError("non-finite field value")
        return d

    while n_out < n_req and t_out[n_out] <= 0.0:
        y_out[n_out] = y
        n_out += 1
    if t_end <= 0.0:
        return KernelResult(y_out, n_out, y, 0.0, 0, OK, math.nan)

    try:
        k1 = f(y)
    except EvaluationError:
        return KernelResult(y_out, n_out, y, 0.0, 0, STEP_FAILURE, math.nan)

    def stages(y, k1, h):
        k2 = f(y + h * (A21 * k1))
        k3 = f(y + h * (A31 * k1 + A32 * k2))
        k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        return y_new, k3, k4, k5, k6

    # initial step (Hairer, Norsett & Wanner, II.4)
    scale = atol + rtol * np.abs(y)
    d0 = math.sqrt(np.mean((y / scale) ** 2))
    d1 = math.sqrt(np.mean((k1 / scale) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, t_end, h_max)

    t = 0.0
    h_min_rel = 16.0 * EPS
    while t < t_end:
        target = t_end
        if n_out < n_req and t_out[n_out] < target:
            target = t_out[n_out]
        h = min(h, h_max)
        clipped = False
        h_saved = h
        if t + h >= target or target - (t + h) < h_min_rel * max(1.0, abs(target)):
            h = target - t
            clipped = True

        try:
            y_new, k3, k4, k5, k6 = stages(y, k1, h)
            k7 = f(y_new)
        except EvaluationError:
            err = math.inf
        else:
            e = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = math.sqrt(np.mean((e / sc) ** 2))
            if not math.isfinite(err):
                err = math.inf

        if err <= 1.0:
            if not inside(y_new[:n_dim]):
                # bisect the crossing with single steps from the accepted state
                lo, hi = 0.0, h
                y_lo = y
                bis_tol = t_tol / 16.0
                while hi - lo > bis_tol:
                    mid = 0.5 * (lo + hi)
                    try:
                        y_mid = stages(y, k1, mid)[0]
                        ok = inside(y_mid[:n_dim])
                    except EvaluationError:
                        ok = False
                    if ok:
                        lo, y_lo = mid, y_mid
                    else:
                        hi = mid
                exit_time = t + 0.5 * (lo + hi)
                return KernelResult(y_out, n_out, y_lo, t + lo, steps + 1, LEFT_DOMAIN, exit_time)

            steps += 1
            t = target if clipped else t + h
            y = y_new
            k1 = k7
            while n_out < n_req and t_out[n_out] <= t:
                y_out[n_out] = y
                n_out += 1
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
            h = h * factor
            if clipped:
                h = max(h, h_saved)
        else:
            factor = 0.25 if math.isinf(err) else max(MIN_FACTOR, SAFETY * err ** -0.2)
            h = h * factor
            if h < h_min_rel * max(1.0, abs(t)):
                return KernelResult(y_out, n_out, y, t, steps, STEP_FAILURE, math.nan)
        if steps >= max_steps:
            return KernelResult(y_out, n_out, y, t, steps, STEP_FAILURE, math.nan)

    return KernelResult(y_out, n_out, y, t, steps, OK, math.nan)


# --------------------------------------------------------------------------
# program interpreter, the pure-Python stand-in for the compiled evaluator

_UNARY = {2: "neg", 3: "sin", 4: "cos", 5: "exp", 6: "sqrt", 7: "abs", 8: "log", 9: "sign"}
_BINARY = {10: "+", 11: "-", 12: "*", 13: "/", 14: "^"}


def run_program(ops, args, consts, start, stop, x) -> float:
    from .expr import _apply_binary, _apply_unary

    stack = []
    for i in range(start, stop):
        op = int(ops[i])
        if op == 0:
            stack.append(float(consts[args[i]]))
        elif op == 1:
            stack.append(float(x[args[i]]))
        elif op in _UNARY:
            stack.append(_apply_unary(_UNARY[op], stack.pop()))
        else:
            b = stack.pop()
            a = stack.pop()
            stack.append(_apply_binary(_BINARY[op], a, b))
        if not math.isfinite(stack[-1]):
            raise EvaluationError("non-finite intermediate value")
    return stack[-1]


def eval_program(ops, args, consts, starts, x) -> np.ndarray:
    n = len(starts) - 1
    return np.array([run_program(ops, args, consts, starts[k], starts[k + 1], x) for k in range(n)])


def integrate_program(
    ops, args, consts, starts, stack_size, A, b, n_dim,
    y0, t_end, direction, t_out, rtol, atol, h_max, t_tol, max_steps,
) -> KernelResult:
    """Same contract as the compiled ``integrate_program``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)

    def rhs(x):
        return eval_program(ops, args, consts, starts, x)

    def inside(x):
        return bool(np.all(A @ x < b)) if len(b) else True

    return integrate(rhs, inside, n_dim, y0, t_end, direction, t_out, rtol, atol, h_max, t_tol, max_steps)
