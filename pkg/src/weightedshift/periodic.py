"""Spectral objects of the invariant part: periodic orbits and rest points.

On a periodic orbit of prime period ``P`` the mean attenuation
``theta = -(1/P) int_0^P nu`` determines ``M_lambda = exp(-P (lambda - theta))``
and the candidate eigenvalue families ``F_k = theta + 2 pi i k / P``.  The
candidate generator spectrum is the union over ``k`` of the essential ranges
of ``F_k`` over sampled periodic points; on rest points the spectrum is the
essential range of ``-nu``.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .classify import ClassificationConfig, estimate_prime_period
from .field import ProblemSpec
from .flow import StepFailureError, advance_flow
from .sets import SpectralSet

__all__ = [
    "PeriodicPointData",
    "EssentialRangeApprox",
    "NotPeriodicError",
    "periodic_point_data",
    "m_lambda",
    "f_k",
    "essential_range",
    "candidate_spectrum_per",
    "covered_band",
    "rest_spectrum",
    "annular_hull",
    "smt_counterexample_report",
    "m_lambda_consistency",
    "write_periodic_csv",
]

CANDIDATE_NOTE = "candidate spectrum (inclusion-certified side only)"


class NotPeriodicError(ValueError):
    """No return to the starting point was found."""


@dataclass(frozen=True)
class PeriodicPointData:
    x: np.ndarray
    prime_period: float
    theta: float


def periodic_point_data(prob: ProblemSpec, x, cfg: ClassificationConfig = ClassificationConfig(),
                        period: Optional[float] = None) -> PeriodicPointData:
    """Prime period and mean attenuation ``theta`` of the orbit through ``x``.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> d = periodic_point_data(builtin("rotation", {"c": 0.5}), [1.0, 0.0])
    >>> round(d.prime_period, 6), round(d.theta, 9)
    (6.283185, -0.5)
    """
    x = np.asarray(x, dtype=float)
    if period is None:
        search = estimate_prime_period(prob, x, cfg)
        if search.period is None:
            raise NotPeriodicError(f"no return to {x.tolist()} within horizon {cfg.horizon:g}: {search.reason}")
        period = search.period
    r = advance_flow(prob, x, period, cfg.flow)
    if not r.ok:
        raise StepFailureError(f"orbit integration ended with status {r.status}")
    return PeriodicPointData(x, float(period), -r.int_nu / period)


def m_lambda(data: PeriodicPointData, lam: complex) -> complex:
    """``exp(-P (lambda - theta))``."""
    return cmath.exp(-data.prime_period * (complex(lam) - data.theta))


def f_k(data: PeriodicPointData, k: int) -> complex:
    """``theta + 2 pi i k / P``."""
    return complex(data.theta, 2.0 * math.pi * k / data.prime_period)


@dataclass(frozen=True)
class EssentialRangeApprox:
    """Clustered sample values; ``retained`` holds, per dense cluster, the member nearest its weighted mean."""

    values: np.ndarray
    weights: np.ndarray
    bandwidth: float
    density_threshold: float
    labels: np.ndarray
    cluster_weights: np.ndarray
    retained: np.ndarray

    def as_set(self, provenance: str = "", note: str = "") -> SpectralSet:
        return SpectralSet.discrete(self.retained, provenance, note)


def essential_range(values, weights=None, bandwidth: Optional[float] = None,
                    density_threshold: Optional[float] = None) -> EssentialRangeApprox:
    """Density-filtered value clusters of a sampled function.

    Values closer than ``bandwidth`` (single linkage) form a cluster; clusters
    carrying total weight at least ``density_threshold`` are retained.
    Defaults: ``bandwidth = 1e-4 (1 + max |v|)`` and
    ``density_threshold = min(2 / n, 1)`` for ``n`` samples, so an isolated
    sample is dropped unless it is the only one.

    Examples
    --------
    >>> essential_range([1.0] * 5 + [2.0] * 5 + [7.0]).retained.real.tolist()
    [1.0, 2.0]
    """
    vals = np.asarray(values, dtype=complex).reshape(-1)
    n = len(vals)
    if n == 0:
        raise ValueError("essential range of an empty sample")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if len(w) != n or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative, not all zero, one per value")
    w = w / w.sum()
    if bandwidth is None:
        bandwidth = 1e-4 * (1.0 + float(np.max(np.abs(vals))))
    if density_threshold is None:
        density_threshold = min(2.0 / n, 1.0)
    pts = np.column_stack([vals.real, vals.imag])
    pairs = cKDTree(pts).query_pairs(bandwidth, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel clusters in order of first appearance after sorting by value
    order = np.lexsort((vals.imag, vals.real))
    remap: dict = {}
    for i in order:
        remap.setdefault(labels[i], len(remap))
    labels = np.array([remap[l] for l in labels])
    n_clusters = len(remap)
    cw = np.bincount(labels, weights=w, minlength=n_clusters)
    # guard against round-off in the normalized weights
    keep = cw >= density_threshold * (1.0 - 1e-12)
    reps = []
    for c in range(n_clusters):
        if keep[c]:
            m = labels == c
            mean = np.sum(w[m] * vals[m]) / np.sum(w[m])
            # an attained value: exact for constant clusters
            members = vals[m]
            reps.append(members[np.argmin(np.abs(members - mean))])
    return EssentialRangeApprox(vals, w, float(bandwidth), float(density_threshold), labels, cw,
                                np.array(reps, dtype=complex))


def covered_band(data: Sequence[PeriodicPointData], K: int) -> float:
    """Imaginary half-width ``2 pi K / max P`` inside which the truncated union is complete."""
    return 2.0 * math.pi * K / max(d.prime_period for d in data)


def candidate_spectrum_per(data: Sequence[PeriodicPointData], K: int, bandwidth: Optional[float] = None,
                           density_threshold: Optional[float] = None) -> SpectralSet:
    """Union over ``|k| <= K`` of the essential ranges of ``F_k`` over the periodic sample.

    Examples
    --------
    >>> d = PeriodicPointData(np.zeros(2), 2 * math.pi, 0.0)
    >>> [complex(round(z.real, 12), round(z.imag, 12)) for z in candidate_spectrum_per([d], 1).points]
    [-1j, 0j, 1j]
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if not data:
        return SpectralSet.empty("periodic part", "no periodic points in the sample")
    pts = []
    for k in range(-K, K + 1):
        er = essential_range([f_k(d, k) for d in data], bandwidth=bandwidth, density_threshold=density_threshold)
        pts.extend(er.retained)
    note = f"{CANDIDATE_NOTE}; truncated at K = {K}; covered band |Im| <= {covered_band(data, K):.12g}"
    return SpectralSet.discrete(pts, "periodic part: union of F_k essential ranges", note)


def rest_spectrum(prob: ProblemSpec, rest_points, bandwidth: Optional[float] = None,
                  density_threshold: Optional[float] = None) -> SpectralSet:
    """Essential range of ``-nu`` over sampled rest points (a subset of the real line)."""
    pts = np.atleast_2d(np.asarray(rest_points, dtype=float)) if len(rest_points) else []
    if len(pts) == 0:
        return SpectralSet.empty("rest points", "no rest points in the sample")
    vals = [-(prob.h(x) + prob.field.divergence(x)) for x in pts]
    er = essential_range(vals, bandwidth=bandwidth, density_threshold=density_threshold)
    return er.as_set("rest points: essential range of -nu")


def annular_hull(real_points: Sequence[Union[float, tuple]], t: float) -> SpectralSet:
    """``T . exp(t A)`` for a set ``A`` of reals given as points and ``(lo, hi)`` intervals.

    Each real ``a`` gives the circle ``|z| = e^{a t}``; each interval gives the
    annulus between the images of its endpoints.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    pieces = []
    for a in real_points:
        if isinstance(a, (tuple, list)):
            lo, hi = sorted(float(v) for v in a)
            pieces.append(SpectralSet.annulus(math.exp(lo * t), math.exp(hi * t)))
        else:
            pieces.append(SpectralSet.circle(math.exp(float(a) * t)))
    # drop duplicates while keeping a deterministic order
    uniq = sorted({(p.params[0], p.params[1]): p for p in pieces}.values(), key=lambda p: p.params)
    if not uniq:
        return SpectralSet.empty("annular hull")
    if len(uniq) == 1:
        return SpectralSet(uniq[0].kind, uniq[0].params, provenance="annular hull")
    return SpectralSet.union(uniq, "annular hull")


def smt_counterexample_report(t: float, K: int, snap: float = 1e-9) -> dict:
    """Finite image ``{e^{ikt} : |k| <= K}`` of the rotation generator spectrum against the unit circle.

    The finite image never fills the circle, which is the full semigroup
    spectrum when ``t / 2 pi`` is irrational: the image of the generator
    spectrum under ``exp(t .)`` is a strict subset.

    Examples
    --------
    >>> r = smt_counterexample_report(math.pi, 5)
    >>> r["distinct_points"], round(r["max_gap"], 12)
    (2, 3.14159265359)
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if K < 0:
        raise ValueError("K must be non-negative")
    angles = []
    for k in range(-K, K + 1):
        a = math.remainder(k * t, 2.0 * math.pi)
        if abs(a) <= snap * (1.0 + abs(k * t)):
            a = 0.0
        elif math.pi - abs(a) <= snap * (1.0 + abs(k * t)):
            a = math.pi
        angles.append(a)
    uniq: list = []
    for a in sorted(angles):
        if not uniq or a - uniq[-1] > snap:
            uniq.append(a)
    if len(uniq) > 1 and uniq[0] + 2.0 * math.pi - uniq[-1] <= snap:
        uniq.pop()  # -pi and pi coincide
    if len(uniq) == 1:
        max_gap = 2.0 * math.pi
    else:
        gaps = np.diff(uniq).tolist() + [uniq[0] + 2.0 * math.pi - uniq[-1]]
        max_gap = float(max(gaps))
    points = [complex(math.cos(a), math.sin(a)) for a in uniq]
    if uniq == [0.0]:
        points = [1 + 0j]
    return {
        "t": float(t),
        "K": int(K),
        "distinct_points": len(uniq),
        "angles": uniq,
        "points": points,
        "max_gap": max_gap,
        "collapsed_to_one": uniq == [0.0],
        "semigroup_spectrum": "unit circle",
        "image_strictly_smaller": max_gap > 0.0,
    }


def m_lambda_consistency(data: Sequence[PeriodicPointData], candidate: SpectralSet, K: int,
                         re_range=(-1.0, 1.0), step: float = 0.1, min_dist: float = 0.05) -> dict:
    """Both directions of the link between ``M_lambda`` and the candidate set.

    ``on_candidate`` is the worst (largest) ``min_x |1 - M_lambda(x)|`` over
    candidate points; it should vanish.  ``off_candidate`` is the smallest
    such value over a ``step``-spaced grid of ``lambda`` at distance at least
    ``min_dist`` from the candidate set, within ``re_range`` and the covered
    band; it should stay away from zero.
    """
    if not data or candidate.is_empty:
        return {"on_candidate": None, "off_candidate": None, "grid_points": 0}

    def score(lam: complex) -> float:
        return min(abs(1.0 - m_lambda(d, lam)) for d in data)

    on = max(score(z) for z in candidate.points)
    band = covered_band(data, K)
    re_vals = np.arange(re_range[0], re_range[1] + 0.5 * step, step)
    im_vals = np.arange(-band, band + 0.5 * step, step)
    off, count = math.inf, 0
    for a in re_vals:
        for b in im_vals:
            lam = complex(round(a, 12), round(b, 12))
            if candidate.distance(lam) < min_dist:
                continue
            off = min(off, score(lam))
            count += 1
    return {"on_candidate": on, "off_candidate": off, "grid_points": count, "covered_band": band}


def write_periodic_csv(path, data: Sequence[PeriodicPointData]) -> None:
    if not data:
        return
    dim = len(data[0].x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dim)] + ["prime_period", "theta"])
        for d in data:
            w.writerow([repr(float(v)) for v in d.x] + [repr(d.prime_period), repr(d.theta)])
