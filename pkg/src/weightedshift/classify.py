"""Phase-space partition into the exit classes and the sub-classes of the invariant part.

Points whose forward trajectory leaves the domain form ``Omega1``; points
that stay forever forward but came in from the boundary form ``Omega2``; the
rest never meet the boundary and are split into rest points, periodic orbits
and infinite (aperiodic) orbits.  "Never" is horizon-relative: see
:class:`ClassificationConfig`.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .field import ProblemSpec
from .flow import DEFAULT_OPTIONS, ExitTimeResult, FlowOptions, exit_time, sample_path

__all__ = [
    "OMEGA1",
    "OMEGA2",
    "REST",
    "PERIODIC",
    "INFINITE",
    "CENSORED",
    "TAGS",
    "PhaseClass",
    "ClassificationConfig",
    "PeriodSearch",
    "PartitionStats",
    "classify_point",
    "estimate_prime_period",
    "classify_sample",
    "uniform_sampler",
    "write_classification_csv",
]

OMEGA1 = "Omega1"
OMEGA2 = "Omega2"
REST = "Omega3Rest"
PERIODIC = "Omega3Periodic"
INFINITE = "Omega3Infinite"
CENSORED = "Censored"
TAGS = (OMEGA1, OMEGA2, REST, PERIODIC, INFINITE, CENSORED)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PhaseClass:
    tag: str
    prime_period: Optional[float] = None
    reason: str = ""
    exits: Optional[ExitTimeResult] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown phase tag {self.tag!r}")
        if self.tag == PERIODIC and not (self.prime_period is not None and self.prime_period > 0):
            raise ValueError("periodic class needs a positive prime period")

    @property
    def in_omega3(self) -> bool:
        return self.tag in (REST, PERIODIC, INFINITE)


@dataclass(frozen=True)
class ClassificationConfig:
    """Tolerances for :func:`classify_point`.

    Parameters
    ----------
    horizon : float
        Time budget for exit and return searches, forward and backward.
    rest_tol, return_tol : float, optional
        Absolute thresholds for ``|F(x)|`` and ``|Phi(x, s) - x|``.  Defaults
        scale with the point: ``1e-10 (1 + kappa |x|)`` and ``1e-6 (1 + |x|)``.
    period_refine_tol : float
        Bracket width at which golden-section refinement of a return stops.
    period_tol : float
        Slack allowed below the lower bound ``2 pi / kappa`` on prime periods.
    confidence_horizon : float, optional
        Horizon from which unresolved returns are reported as infinite orbits
        rather than censored; defaults to ``4 pi / kappa``.
    """

    horizon: float = 50.0
    rest_tol: Optional[float] = None
    return_tol: Optional[float] = None
    period_refine_tol: float = 1e-8
    period_tol: float = 1e-6
    confidence_horizon: Optional[float] = None
    flow: FlowOptions = DEFAULT_OPTIONS
    workers: int = 4

    def __post_init__(self):
        for name in ("horizon", "period_refine_tol", "period_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("rest_tol", "return_tol", "confidence_horizon"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def rest_tol_at(self, prob: ProblemSpec, x: np.ndarray) -> float:
        return self.rest_tol if self.rest_tol is not None else 1e-10 * (1.0 + prob.kappa * np.linalg.norm(x))

    def return_tol_at(self, x: np.ndarray) -> float:
        return self.return_tol if self.return_tol is not None else 1e-6 * (1.0 + np.linalg.norm(x))

    def confidence_for(self, prob: ProblemSpec) -> float:
        return self.confidence_horizon if self.confidence_horizon is not None else 4.0 * math.pi / prob.kappa


@dataclass(frozen=True)
class PeriodSearch:
    """Result of a first-return search: ``period`` is ``None`` when censored."""

    period: Optional[float]
    residual: float
    reason: str = ""


def _golden_min(fn: Callable[[float], float], a: float, b: float, tol: float):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    s = 0.5 * (a + b)
    return s, fn(s)


def estimate_prime_period(prob: ProblemSpec, x, cfg: ClassificationConfig = ClassificationConfig(),
                          kappa: Optional[float] = None) -> PeriodSearch:
    """First return time of ``x`` to itself, searched forward up to ``cfg.horizon``.

    The distance ``|Phi(x, s) - x|`` is sampled every ``pi / (4 kappa)``;
    local minima at ``s >= 2 pi / kappa (1 - 1e-3)`` whose sampled value is
    compatible with a nearby return are refined by golden-section search, and
    the first refined minimum below ``return_tol`` is the prime period.
    ``kappa`` defaults to the problem's Lipschitz constant.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> round(estimate_prime_period(builtin("rotation"), [1.0, 0.0]).period, 6)
    6.283185
    """
    x = np.asarray(x, dtype=float)
    n = prob.dimension
    kappa = prob.kappa if kappa is None else float(kappa)
    spacing = math.pi / (4.0 * kappa)
    s_min = 2.0 * math.pi / kappa * (1.0 - 1e-3)
    if s_min >= cfg.horizon:
        return PeriodSearch(None, math.inf, "horizon below the minimal period")
    times = np.arange(0.0, cfg.horizon + 0.5 * spacing, spacing)
    states, n_reached, _ = sample_path(prob, x, times, 1.0, cfg.flow)
    pos = states[:n_reached, :n]
    if n_reached < 3:
        return PeriodSearch(None, math.inf, "trajectory too short")
    dist = np.linalg.norm(pos - x, axis=1)
    tol = cfg.return_tol_at(x)
    speed = float(np.linalg.norm(prob.field.eval(x)))
    # a return near s_i keeps the sampled distance within about |F(x)| * spacing
    coarse = 3.0 * spacing * speed + tol

    def dist_at(s: float, base: int) -> float:
        t0 = times[base]
        y = pos[base]
        if s <= t0:
            return float(np.linalg.norm(y - x))
        st, m, _ = sample_path(prob, y, [s - t0], 1.0, cfg.flow)
        if m < 1:
            return math.inf
        return float(np.linalg.norm(st[0, :n] - x))

    for i in range(1, n_reached - 1):
        if times[i + 1] < s_min:
            continue
        if not (dist[i] <= dist[i - 1] and dist[i] <= dist[i + 1]):
            continue
        if dist[i] > coarse:
            continue
        a = max(times[i - 1], s_min)
        b = times[i + 1]
        s, d = _golden_min(lambda s: dist_at(s, i - 1), a, b, cfg.period_refine_tol)
        if d <= tol:
            return PeriodSearch(float(s), d)
    return PeriodSearch(None, float(dist.min(initial=math.inf)), "no return within horizon")


def classify_point(prob: ProblemSpec, x, cfg: ClassificationConfig = ClassificationConfig()) -> PhaseClass:
    """Tag ``x`` with its phase class.

    Examples
    --------
    >>> from weightedshift.field import builtin
    >>> classify_point(builtin("slab_constant", {"c": 0.0}), [0.3]).tag
    'Omega1'
    >>> classify_point(builtin("rotation"), [0.0, 0.0]).tag
    'Omega3Rest'
    """
    x = np.asarray(x, dtype=float)
    ex = exit_time(prob, x, cfg.horizon, cfg.flow)
    if ex.step_failure:
        return PhaseClass(CENSORED, reason="step_failure", exits=ex)
    if not ex.plus_censored:
        return PhaseClass(OMEGA1, exits=ex)
    if not ex.minus_censored:
        return PhaseClass(OMEGA2, exits=ex)
    if np.linalg.norm(prob.field.eval(x)) <= cfg.rest_tol_at(prob, x):
        return PhaseClass(REST, exits=ex)
    search = estimate_prime_period(prob, x, cfg)
    if search.period is not None:
        return PhaseClass(PERIODIC, prime_period=search.period, exits=ex)
    if cfg.horizon >= cfg.confidence_for(prob):
        return PhaseClass(INFINITE, reason=search.reason, exits=ex)
    return PhaseClass(CENSORED, reason="horizon", exits=ex)


def uniform_sampler(prob: ProblemSpec, box=None) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Uniform points in ``box`` (default: the problem's sampling box) that lie in the domain."""
    box = prob.default_box() if box is None else np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        out = []
        attempts = 0
        while len(out) < n:
            cand = lo + (hi - lo) * rng.random((max(n - len(out), 16), len(lo)))
            out.extend(c for c in cand if prob.contains(c))
            attempts += 1
            if attempts > 1000:
                raise RuntimeError("sampling box barely intersects the domain")
        return np.array(out[:n])

    return draw


@dataclass
class PartitionStats:
    points: np.ndarray
    classes: list
    counts: dict = dc_field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.classes)

    @property
    def fractions(self) -> dict:
        return {k: v / self.n for k, v in self.counts.items()}

    def select(self, *tags: str) -> np.ndarray:
        idx = [i for i, c in enumerate(self.classes) if c.tag in tags]
        return self.points[idx] if idx else np.empty((0, self.points.shape[1]))

    @property
    def max_period(self) -> Optional[float]:
        periods = [c.prime_period for c in self.classes if c.tag == PERIODIC]
        return max(periods) if periods else None

    def summary(self) -> dict:
        """JSON-ready summary; the bounded-period hypothesis is never certified by sampling."""
        return {
            "n": self.n,
            "counts": {t: self.counts.get(t, 0) for t in TAGS},
            "fractions": {t: self.counts.get(t, 0) / self.n for t in TAGS},
            "max_prime_period": self.max_period,
            "bounded_period_hypothesis": "unverified",
        }


def classify_sample(prob: ProblemSpec, sampler: Union[Callable, Sequence, np.ndarray], n: int,
                    cfg: ClassificationConfig = ClassificationConfig(), seed: int = 0) -> PartitionStats:
    """Classify ``n`` points drawn from ``sampler`` (a ``(rng, n) -> points`` callable or an array).

    Points are classified concurrently; results keep the sample order.
    """
    if n < 1:
        raise ValueError("sample size must be at least 1")
    if callable(sampler):
        pts = np.asarray(sampler(np.random.default_rng(seed), n), dtype=float)
    else:
        pts = np.asarray(sampler, dtype=float)[:n]
    if len(pts) < n:
        raise ValueError(f"sampler produced {len(pts)} points, {n} requested")
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            classes = list(pool.map(lambda p: classify_point(prob, p, cfg), pts))
    else:
        classes = [classify_point(prob, p, cfg) for p in pts]
    counts = {t: 0 for t in TAGS}
    for c in classes:
        counts[c.tag] += 1
    return PartitionStats(pts, classes, counts)


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_classification_csv(path, stats: PartitionStats) -> None:
    dim = stats.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(dim)] + ["tag", "tau_minus", "tau_plus", "prime_period"])
        for x, c in zip(stats.points, stats.classes):
            ex = c.exits
            w.writerow([repr(float(v)) for v in x] + [
                c.tag,
                "" if ex is None else _fmt(ex.tau_minus),
                "" if ex is None else _fmt(ex.tau_plus),
                _fmt(c.prime_period),
            ])
