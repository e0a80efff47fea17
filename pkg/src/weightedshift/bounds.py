"""Growth constants of the exit classes and the spectral sets they determine.

For the class of points leaving forward (``Omega1``) the growth constant is
the long-time infimum of backward averages of ``Sigma_p``; for the class
entering from the boundary (``Omega2``) it is the same with forward averages.
Both are restricted to times shorter than the backward stay time.  With
``gamma = min(gamma1, gamma2)`` and no invariant part, the generator spectrum
is the half-plane ``Re z <= -gamma`` and the semigroup spectrum the disk of
radius ``exp(-gamma t)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import kernel
from .field import ProblemSpec
from .flow import DEFAULT_OPTIONS, FlowOptions, sample_path
from .sets import SpectralSet

__all__ = [
    "GrowthEstimate",
    "EmptyClassError",
    "CompositionRequiredError",
    "InsufficientDataError",
    "gamma1_estimate",
    "gamma2_estimate",
    "assemble_spectrum",
    "type_estimate",
    "norm_table",
    "tau_weighted_sampler",
    "write_growth_csv",
]


class EmptyClassError(ValueError):
    """No sample points of the required phase class."""


class CompositionRequiredError(ValueError):
    """The invariant part carries mass; the spectrum must be composed per class."""


class InsufficientDataError(ValueError):
    """Too few usable points for a tail fit."""


@dataclass(frozen=True)
class GrowthEstimate:
    """Per-time infima of time-averaged ``Sigma_p`` and their tail value.

    ``inf_avg[j]`` is ``+inf`` when no sampled point is admissible at
    ``t_grid[j]``.  ``gamma_hat`` averages the finite entries of the last
    quartile; it is ``+inf`` with ``nilpotent`` set when the whole tail is
    empty.  ``starved`` marks a tail that is only partly populated.
    """

    t_grid: np.ndarray
    inf_avg: np.ndarray
    admissible_counts: np.ndarray
    gamma_hat: float
    nilpotent: bool
    starved: bool
    direction: str

    @property
    def censored(self) -> bool:
        return self.nilpotent

    def table(self) -> list:
        return [(float(t), float(a), int(c)) for t, a, c in zip(self.t_grid, self.inf_avg, self.admissible_counts)]


def _tail(n: int) -> slice:
    return slice(n - max(1, n // 4), n)


def _finish(t_grid, inf_avg, counts, direction) -> GrowthEstimate:
    tail = inf_avg[_tail(len(t_grid))]
    finite = tail[np.isfinite(tail)]
    if len(finite) == 0:
        gamma_hat, nilpotent = math.inf, True
    else:
        gamma_hat, nilpotent = float(np.mean(finite)), False
    starved = bool(0 < len(finite) < len(tail))
    return GrowthEstimate(t_grid, inf_avg, counts, gamma_hat, nilpotent, starved, direction)


def _check_grid(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be positive and strictly increasing")
    return t_grid


def gamma1_estimate(prob: ProblemSpec, sample, t_grid, opts: FlowOptions = DEFAULT_OPTIONS) -> GrowthEstimate:
    """``inf_x t^{-1} int_0^t Sigma_p(Phi(x, -s)) ds`` over sampled ``x`` with ``t < tau_-(x)``.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> slab = builtin("slab_constant", {"c": 0.5})
    >>> est = gamma1_estimate(slab, [[0.2], [0.9]], [0.1, 0.5, 2.0, 3.0])
    >>> est.inf_avg.round(9).tolist(), est.nilpotent
    ([0.5, 0.5, inf, inf], True)
    """
    return _gamma(prob, sample, t_grid, opts, backward=True)


def gamma2_estimate(prob: ProblemSpec, sample, t_grid, opts: FlowOptions = DEFAULT_OPTIONS) -> GrowthEstimate:
    """``inf_x t^{-1} int_0^t Sigma_p(Phi(x, s)) ds`` over sampled ``x`` with ``t < tau_-(x)``."""
    return _gamma(prob, sample, t_grid, opts, backward=False)


def _gamma(prob, sample, t_grid, opts, backward: bool) -> GrowthEstimate:
    t_grid = _check_grid(t_grid)
    pts = np.atleast_2d(np.asarray(sample, dtype=float)) if len(sample) else np.empty((0, prob.dimension))
    if len(pts) == 0:
        raise EmptyClassError("no sample points supplied for the growth estimate")
    n = prob.dimension
    best = np.full(len(t_grid), math.inf)
    counts = np.zeros(len(t_grid), dtype=int)
    for x in pts:
        # backward states at t_grid exist exactly while t < tau_-(x)
        back, n_back, _ = sample_path(prob, x, t_grid, -1.0, opts)
        if backward:
            vals, n_ok = back[:, n + 2], n_back
        else:
            if n_back == 0:
                continue
            fwd, n_fwd, _ = sample_path(prob, x, t_grid[:n_back], 1.0, opts)
            vals, n_ok = fwd[:, n + 2], n_fwd
        if n_ok == 0:
            continue
        avg = vals[:n_ok] / t_grid[:n_ok]
        best[:n_ok] = np.minimum(best[:n_ok], avg)
        counts[:n_ok] += 1
    return _finish(t_grid, best, counts, "backward" if backward else "forward")


def assemble_spectrum(gamma1: Optional[float], gamma2: Optional[float], classes_present: Mapping[str, float],
                      t: float):
    """Generator and semigroup spectra when the invariant part carries no mass.

    ``None`` marks an absent class; ``+inf`` a nilpotent one.

    Returns
    -------
    generator, semigroup : SpectralSet
        ``{Re z <= -gamma}`` and ``{|z| <= exp(-gamma t)}`` with
        ``gamma = min(gamma1, gamma2)``; the empty set and ``{0}`` when every
        supplied constant is infinite.
    """
    omega3 = sum(float(classes_present.get(k, 0.0)) for k in ("Omega3Rest", "Omega3Periodic", "Omega3Infinite"))
    if omega3 > 0:
        raise CompositionRequiredError(
            f"invariant part has sampled fraction {omega3:g}; compose with the periodic/rest spectra")
    if not t > 0:
        raise ValueError("t must be positive")
    gammas = [g for g in (gamma1, gamma2) if g is not None]
    if not gammas:
        raise EmptyClassError("no growth constant supplied")
    gamma = min(gammas)
    prov = "exit classes: gamma = min(gamma1, gamma2)"
    if gamma == math.inf:
        return (SpectralSet.empty(prov + "; nilpotent", "all supplied classes are nilpotent"),
                SpectralSet.discrete([0j], prov + "; nilpotent"))
    return (SpectralSet.half_plane(-gamma, prov),
            SpectralSet.disk(math.exp(-gamma * t), provenance=prov + f"; t = {t:g}"))


def type_estimate(t_grid, norm_estimates, tail_fraction: float = 0.5) -> float:
    """Least-squares slope of ``log ||U(t)||`` against ``t`` over the tail of ``t_grid``.

    ``norm_estimates`` are floats or :class:`~weightedshift.semigroup.NormEstimate`
    values; zero norms (empty admissible sets) are dropped.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    norms = np.array([getattr(v, "value", v) for v in norm_estimates], dtype=float)
    if len(norms) != len(t_grid):
        raise ValueError("t_grid and norm_estimates differ in length")
    start = int(len(t_grid) * (1.0 - tail_fraction))
    t_tail, n_tail = t_grid[start:], norms[start:]
    keep = n_tail > 0
    if keep.sum() < 3:
        raise InsufficientDataError("need at least 3 positive norm estimates in the tail")
    slope, _ = np.polyfit(t_tail[keep], np.log(n_tail[keep]), 1)
    return float(slope)


def norm_table(prob: ProblemSpec, t_grid, sample, opts: FlowOptions = DEFAULT_OPTIONS) -> list:
    """Operator-norm estimates at every ``t`` in ``t_grid`` from one forward pass per point."""
    t_grid = _check_grid(t_grid)
    from .semigroup import NormEstimate

    n = prob.dimension
    best = np.zeros(len(t_grid))
    counts = np.zeros(len(t_grid), dtype=int)
    pts = np.atleast_2d(np.asarray(sample, dtype=float))
    for y in pts:
        states, n_ok, _ = sample_path(prob, y, t_grid, 1.0, opts)
        if n_ok:
            best[:n_ok] = np.maximum(best[:n_ok], np.exp(-states[:n_ok, n + 2]))
            counts[:n_ok] += 1
    return [NormEstimate(float(t), float(b), int(c), len(pts)) for t, b, c in zip(t_grid, best, counts)]


def tau_weighted_sampler(prob: ProblemSpec, box=None, horizon: float = 50.0, oversample: int = 4,
                         opts: FlowOptions = DEFAULT_OPTIONS):
    """Sampler biased toward long backward stay times.

    Draws ``oversample * n`` uniform candidates and keeps ``n`` of them with
    probability proportional to ``min(tau_-, horizon)``, so deep-interior
    points that stay admissible at large ``t`` are not starved.
    """
    from .classify import uniform_sampler

    base = uniform_sampler(prob, box)

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        cand = base(rng, oversample * n)
        tau = np.empty(len(cand))
        for i, x in enumerate(cand):
            _, _, res = sample_path(prob, x, [horizon], -1.0, opts)
            tau[i] = res.exit_time if res.status == kernel.LEFT_DOMAIN else horizon
        w = np.maximum(tau, 1e-12)
        idx = rng.choice(len(cand), size=n, replace=False, p=w / w.sum())
        return cand[np.sort(idx)]

    return draw


def write_growth_csv(path, est: GrowthEstimate) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "inf_avg", "count"])
        for t, a, c in est.table():
            w.writerow([repr(t), repr(a), c])
