"""Pointwise evaluation of the weighted-shift semigroup and its dual.

``U(t) f (x) = exp(-int_0^t nu(Phi(x, -s)) ds) f(Phi(x, -t))`` when the
backward trajectory of ``x`` stays in the domain for time ``t``, and ``0``
otherwise.  Everything is evaluated along characteristics; the only
discretization error is the interpolation of stored grid data.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .field import DomainError, ProblemSpec
from .flow import DEFAULT_OPTIONS, FlowOptions, StepFailureError, advance_flow

__all__ = [
    "GridFunction",
    "apply_U",
    "apply_U_dual",
    "apply_U_grid",
    "NormEstimate",
    "operator_norm_estimate",
    "CocycleReport",
    "verify_alpha_cocycle",
    "intertwining_residual",
    "write_grid_csv",
]


class GridFunction:
    """Sampled function on phase-space points with quadrature weights.

    Either callable-backed (``fn`` is evaluated exactly wherever needed) or
    value-backed (evaluation off the grid uses the nearest stored point, an
    O(mesh) interpolation error).

    Parameters
    ----------
    points : array_like, shape (M, N)
    values : array_like, shape (M,)
    weights : array_like, shape (M,)
        Positive quadrature weights, the discrete stand-in for the measure.
    p : float
        Exponent of the norm ``(sum w |f|^p)^(1/p)``.
    fn : callable, optional
    """

    def __init__(self, points, values, weights, p: float = 1.0, fn: Optional[Callable] = None):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.values = np.asarray(values, dtype=complex).reshape(-1)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.p = float(p)
        self.fn = fn
        m = len(self.points)
        if len(self.values) != m or len(self.weights) != m:
            raise ValueError("points, values and weights must have equal lengths")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        self._tree = None

    @classmethod
    def from_callable(cls, fn: Callable, points, weights=None, p: float = 1.0) -> "GridFunction":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if weights is None:
            weights = np.full(len(points), 1.0 / len(points))
        values = np.array([fn(x) for x in points], dtype=complex)
        return cls(points, values, weights, p, fn)

    def __len__(self) -> int:
        return len(self.points)

    def __call__(self, y) -> complex:
        y = np.asarray(y, dtype=float)
        if self.fn is not None:
            return complex(self.fn(y))
        if self._tree is None:
            self._tree = cKDTree(self.points)
        _, i = self._tree.query(y)
        return complex(self.values[i])

    def norm(self, mask: Optional[np.ndarray] = None) -> float:
        w, v = self.weights, np.abs(self.values)
        if mask is not None:
            w, v = w[mask], v[mask]
        return float(np.sum(w * v ** self.p) ** (1.0 / self.p))

    def inner(self, other: "GridFunction") -> complex:
        """``sum w f conj(g)`` on a shared grid."""
        return complex(np.sum(self.weights * self.values * np.conj(other.values)))


FunctionLike = Union[Callable, GridFunction]


def _weighted_value(prob, f, x, t, opts, backward: bool, which: str):
    x = np.asarray(x, dtype=float)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        if not prob.contains(x):
            raise DomainError(f"point {x.tolist()} is not in the domain")
        return complex(f(x))
    r = advance_flow(prob, x, -t if backward else t, opts)
    if r.status == "left_domain":
        return 0j
    if r.status == "step_failure":
        raise StepFailureError(f"integration failed at t = {r.t_reached:.12g}")
    exponent = r.int_nu if which == "nu" else r.int_nu - r.int_div
    return cmath.exp(-exponent) * complex(f(r.endpoint))


def apply_U(prob: ProblemSpec, f: FunctionLike, t: float, x, opts: FlowOptions = DEFAULT_OPTIONS) -> complex:
    """``(U(t) f)(x)``.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> apply_U(builtin("slab_constant", {"c": 0.0}), lambda y: 1.0, 2.0, [0.4])
    0j
    """
    return _weighted_value(prob, f, x, float(t), opts, True, "nu")


def apply_U_dual(prob: ProblemSpec, g: FunctionLike, t: float, x, opts: FlowOptions = DEFAULT_OPTIONS) -> complex:
    """``(U(t)* g)(x) = exp(-int_0^t h(Phi(x, s)) ds) g(Phi(x, t))``, zero once the forward path exits."""
    return _weighted_value(prob, g, x, float(t), opts, False, "h")


def apply_U_grid(prob: ProblemSpec, f: FunctionLike, t: float, points=None, weights=None,
                 opts: FlowOptions = DEFAULT_OPTIONS):
    """``U(t) f`` on a grid.

    Returns ``(Uf, ambiguous)``: a :class:`GridFunction` on ``points`` (default:
    the points of ``f``) and a mask of points whose backward exit time lies
    within ``2 t_tol`` of ``t``; those should be left out of norm statistics.
    """
    if points is None:
        if not isinstance(f, GridFunction):
            raise ValueError("points are required for callable f")
        points, weights, p = f.points, f.weights, f.p
    else:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        weights = np.full(len(points), 1.0 / len(points)) if weights is None else weights
        p = f.p if isinstance(f, GridFunction) else prob.p
    t = float(t)
    margin = 2.0 * opts.t_tol
    vals = np.empty(len(points), dtype=complex)
    ambiguous = np.zeros(len(points), dtype=bool)
    for i, x in enumerate(points):
        vals[i] = apply_U(prob, f, t, x, opts)
        if t > 0:
            probe = advance_flow(prob, x, -(t + margin), opts)
            if probe.status == "left_domain" and probe.exit_time > t - margin:
                ambiguous[i] = True
    return GridFunction(points, vals, weights, p), ambiguous


@dataclass(frozen=True)
class NormEstimate:
    """Sampled lower bound for ``||U(t)||``; ``empty`` when no sampled point is admissible."""

    t: float
    value: float
    admissible: int
    sampled: int

    @property
    def empty(self) -> bool:
        return self.admissible == 0


def operator_norm_estimate(prob: ProblemSpec, t: float, sample, classes: Optional[Sequence] = None,
                           restriction: Optional[Sequence[str]] = None,
                           opts: FlowOptions = DEFAULT_OPTIONS) -> NormEstimate:
    """``max exp(-int_0^t Sigma_p(Phi(y, r)) dr)`` over sampled ``y`` whose forward path stays in the domain on ``[0, t]``.

    ``restriction`` keeps only points whose phase class (from ``classes``) has
    one of the given tags.  An empty admissible set gives ``value = 0``,
    which is the exact norm in the nilpotent regime.
    """
    pts = np.atleast_2d(np.asarray(sample, dtype=float))
    if restriction is not None:
        if classes is None:
            raise ValueError("restriction needs the phase classes of the sample")
        keep = [i for i, c in enumerate(classes) if c.tag in restriction]
        pts = pts[keep]
    best = 0.0
    count = 0
    for y in pts:
        r = advance_flow(prob, y, float(t), opts)
        if r.status != "ok":
            continue
        count += 1
        best = max(best, math.exp(-r.int_sigma_p))
    return NormEstimate(float(t), best, count, len(pts))


@dataclass(frozen=True)
class CocycleReport:
    max_residual: float
    checked: int
    skipped: int


def verify_alpha_cocycle(prob: ProblemSpec, alpha: Callable, sample, t_list: Sequence[float],
                         opts: FlowOptions = DEFAULT_OPTIONS) -> CocycleReport:
    """Max of ``|alpha(Phi(x, -t)) - alpha(x) + t|`` over pairs with ``t < tau_-(x)``.

    ``alpha`` decreases by exactly ``t`` along a backward shift of length ``t``
    (e.g. ``-tau_+``, ``tau_-`` or ``<x, v> / |v|^2`` for free streaming).
    """
    worst = 0.0
    checked = skipped = 0
    for x in np.atleast_2d(np.asarray(sample, dtype=float)):
        a0 = alpha(x)
        for t in t_list:
            r = advance_flow(prob, x, -float(t), opts)
            if r.status != "ok":
                skipped += 1
                continue
            a1 = alpha(r.endpoint)
            if not (math.isfinite(a0) and math.isfinite(a1)):
                skipped += 1
                continue
            worst = max(worst, abs(a1 - a0 + float(t)))
            checked += 1
    return CocycleReport(worst, checked, skipped)


def intertwining_residual(prob: ProblemSpec, alpha: Callable, f: Callable, eta: float, t_list: Sequence[float],
                          sample, opts: FlowOptions = DEFAULT_OPTIONS) -> float:
    """Max of ``|M_eta^{-1} U(t) M_eta f - e^{i eta t} U(t) f|`` with ``M_eta f = e^{-i eta alpha} f``."""

    def m_eta_f(y):
        return cmath.exp(-1j * eta * alpha(y)) * f(y)

    worst = 0.0
    for x in np.atleast_2d(np.asarray(sample, dtype=float)):
        for t in t_list:
            lhs = cmath.exp(1j * eta * alpha(x)) * apply_U(prob, m_eta_f, t, x, opts)
            rhs = cmath.exp(1j * eta * t) * apply_U(prob, f, t, x, opts)
            worst = max(worst, abs(lhs - rhs))
    return worst


def write_grid_csv(path, g: GridFunction) -> None:
    dim = g.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dim)] + ["re", "im"])
        for x, v in zip(g.points, g.values):
            w.writerow([repr(float(c)) for c in x] + [repr(v.real), repr(v.imag)])
