"""Invariant and closed-form checks, run by ``weightedshift verify`` and the test suite.

Each suite returns a :class:`SuiteResult` with the worst residual found,
its tolerance and the number of cases actually checked (cases whose
trajectories leave the domain are skipped, not counted as passes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import expr as ex
from .classify import ClassificationConfig, estimate_prime_period, uniform_sampler
from .field import ProblemSpec, builtin, estimate_lipschitz
from .flow import DEFAULT_OPTIONS, FlowOptions, advance_flow, exit_time
from .periodic import smt_counterexample_report

__all__ = [
    "SuiteResult",
    "rotation_closed_form",
    "vfp_closed_form",
    "lorentz_parallel_position",
    "suite_closed_form",
    "suite_lorentz_invariant",
    "suite_group_law",
    "suite_lipschitz",
    "suite_exit_shift",
    "suite_radon_nikodym",
    "suite_yorke",
    "suite_smt_demo",
    "run_problem_suites",
    "run_default_suites",
]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    residual: float
    tol: float
    checked: int
    problem: str = ""
    detail: str = ""
    vacuous: bool = False  # nothing to check, e.g. no periodic orbits

    @property
    def passed(self) -> bool:
        return (self.checked > 0 or self.vacuous) and self.residual <= self.tol

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "problem": self.problem,
            "residual": self.residual,
            "tol": self.tol,
            "checked": self.checked,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "detail": self.detail,
        }


# closed forms ---------------------------------------------------------------


def rotation_closed_form(x, s: float, omega: float = 1.0) -> np.ndarray:
    c, sn = math.cos(omega * s), math.sin(omega * s)
    return np.array([x[0] * c - x[1] * sn, x[0] * sn + x[1] * c])


def vfp_closed_form(x, t: float) -> np.ndarray:
    """Flow of ``xi' = eta, eta' = eta - xi`` componentwise on ``R^N x R^N``."""
    x = np.asarray(x, dtype=float)
    n = len(x) // 2
    xi0, eta0 = x[:n], x[n:]
    w = math.sqrt(3.0) / 2.0
    g, c, s = math.exp(t / 2.0), math.cos(w * t), math.sin(w * t)
    r3 = math.sqrt(3.0)
    xi = g * (xi0 * c + (2.0 * eta0 - xi0) / r3 * s)
    eta = g * (eta0 * c + (eta0 - 2.0 * xi0) / r3 * s)
    return np.concatenate([xi, eta])


def lorentz_parallel_position(x, t: float, E, B, q: float) -> float:
    """``<x(t), B> = (q/2) <E, B> t^2 + <v, B> t + <x, B>``."""
    x = np.asarray(x, dtype=float)
    E, B = np.asarray(E, dtype=float), np.asarray(B, dtype=float)
    return 0.5 * q * float(E @ B) * t * t + float(x[3:] @ B) * t + float(x[:3] @ B)


def _points(prob: ProblemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return uniform_sampler(prob)(rng, n)


def suite_closed_form(prob: ProblemSpec, n: int, rng: np.random.Generator, t_range=(-5.0, 5.0),
                      opts: FlowOptions = DEFAULT_OPTIONS, tol: float = 1e-6) -> SuiteResult:
    """Rotation and VFP flows against their explicit solutions (absolute error)."""
    if prob.name == "rotation":
        omega = float(prob.params.get("omega", 1.0))
        exact: Callable = lambda x, t: rotation_closed_form(x, t, omega)  # noqa: E731
    elif prob.name == "vfp_fourier":
        exact = vfp_closed_form
    else:
        raise ValueError(f"no closed form registered for {prob.name!r}")
    worst, count = 0.0, 0
    for x in _points(prob, n, rng):
        t = float(rng.uniform(*t_range))
        r = advance_flow(prob, x, t, opts)
        if not r.ok:
            continue
        worst = max(worst, float(np.max(np.abs(r.endpoint - exact(x, t)))))
        count += 1
    return SuiteResult("closed_form", worst, tol, count, prob.name)


def suite_lorentz_invariant(prob: ProblemSpec, n: int, rng: np.random.Generator, t_max: float = 10.0,
                            opts: FlowOptions = DEFAULT_OPTIONS, tol: float = 1e-8) -> SuiteResult:
    """Position along ``B`` against its quadratic law, relative to ``max(1, |exact|)``.

    Trajectories are followed on all of space (the slab is dropped) so the
    whole window ``[0, t_max]`` is covered.
    """
    params = dict(prob.params)
    params["slab_half_width"] = None
    free = builtin("lorentz", params)
    E, B, q = params["E"], params["B"], params["q"]
    worst, count = 0.0, 0
    for x in _points(prob, n, rng):
        for t in rng.uniform(0.0, t_max, size=3):
            r = advance_flow(free, x, float(t), opts)
            if not r.ok:
                continue
            exact = lorentz_parallel_position(x, float(t), E, B, q)
            got = float(r.endpoint[:3] @ np.asarray(B))
            worst = max(worst, abs(got - exact) / max(1.0, abs(exact)))
            count += 1
    return SuiteResult("lorentz_invariant", worst, tol, count, prob.name)


# flow properties ---------------------------------------------------------------


def suite_group_law(prob: ProblemSpec, n: int, rng: np.random.Generator, opts: FlowOptions = DEFAULT_OPTIONS,
                    tol: float = 1e-7) -> SuiteResult:
    """``|Phi(Phi(x, s1), s2) - Phi(x, s1 + s2)| / (1 + |x|)`` for ``s1, s2`` in ``[-2, 2]``."""
    worst, count = 0.0, 0
    for x in _points(prob, n, rng):
        s1, s2 = rng.uniform(-2.0, 2.0, size=2)
        a = advance_flow(prob, x, s1, opts)
        if not a.ok:
            continue
        b = advance_flow(prob, a.endpoint, s2, opts)
        c = advance_flow(prob, x, s1 + s2, opts)
        if not (b.ok and c.ok):
            continue
        worst = max(worst, float(np.linalg.norm(b.endpoint - c.endpoint)) / (1.0 + np.linalg.norm(x)))
        count += 1
    return SuiteResult("group_law", worst, tol, count, prob.name)


def suite_lipschitz(prob: ProblemSpec, n: int, rng: np.random.Generator, opts: FlowOptions = DEFAULT_OPTIONS,
                    tol: float = 1e-6) -> SuiteResult:
    """Excess of ``|Phi(x1, t) - Phi(x2, t)| / (e^{kappa |t|} |x1 - x2|)`` over 1."""
    box = prob.default_box()
    width = box[:, 1] - box[:, 0]
    pts = _points(prob, n, rng)
    worst, count = -math.inf, 0
    for i, x1 in enumerate(pts):
        if i % 2:
            x2 = x1 + 1e-2 * width * rng.standard_normal(len(x1))
        else:
            x2 = pts[(i + 1) % len(pts)]
        if not prob.contains(x2) or np.allclose(x1, x2):
            continue
        t = float(rng.uniform(-2.0, 2.0))
        a, b = advance_flow(prob, x1, t, opts), advance_flow(prob, x2, t, opts)
        if not (a.ok and b.ok):
            continue
        ratio = np.linalg.norm(a.endpoint - b.endpoint) / (math.exp(prob.kappa * abs(t)) * np.linalg.norm(x1 - x2))
        worst = max(worst, float(ratio) - 1.0)
        count += 1
    return SuiteResult("lipschitz_growth", max(worst, 0.0) if count else math.inf, tol, count, prob.name,
                       f"max ratio - 1 = {worst:.3g}" if count else "")


def suite_exit_shift(prob: ProblemSpec, n: int, rng: np.random.Generator, horizon: float = 50.0,
                     opts: FlowOptions = DEFAULT_OPTIONS) -> SuiteResult:
    """``tau_+(Phi(x, -t)) = t + tau_+(x)`` and ``tau_-(Phi(x, -t)) = tau_-(x) - t`` on finite cases."""
    tol = 2.0 * opts.t_tol
    worst, count = 0.0, 0
    for x in _points(prob, n, rng):
        e0 = exit_time(prob, x, horizon, opts)
        if e0.minus_censored and e0.plus_censored:
            continue
        t_cap = e0.tau_minus if not e0.minus_censored else 2.0
        t = float(rng.uniform(0.05, 0.95)) * t_cap
        r = advance_flow(prob, x, -t, opts)
        if not r.ok:
            continue
        e1 = exit_time(prob, r.endpoint, horizon + t, opts)
        if not e0.plus_censored:
            if e1.plus_censored:
                worst = math.inf
            else:
                worst = max(worst, abs(e1.tau_plus - (t + e0.tau_plus)))
            count += 1
        if not e0.minus_censored:
            if e1.minus_censored:
                worst = math.inf
            else:
                worst = max(worst, abs(e1.tau_minus - (e0.tau_minus - t)))
            count += 1
    if count == 0:
        return SuiteResult("exit_shift", 0.0, tol, 0, prob.name, "no finite exit times in the sample")
    return SuiteResult("exit_shift", worst, tol, count, prob.name)


def _rn_reference(prob: ProblemSpec, pts: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``J(t)`` from ``J' = div F(Phi) J`` integrated jointly for all points by scipy (time rescaled to [0, 1])."""
    n, m = prob.dimension, len(pts)
    comps = [ex.vectorize(c) for c in prob.field.exprs]
    div = ex.vectorize(prob.field.div_expr)

    def rhs(_u, y):
        X = y[: n * m].reshape(n, m)
        J = y[n * m:]
        dX = np.array([c(X) for c in comps]) * times
        dJ = div(X) * J * times
        return np.concatenate([dX.reshape(-1), dJ])

    y0 = np.concatenate([pts.T.reshape(-1), np.ones(m)])
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[n * m:, -1]


def suite_radon_nikodym(prob: ProblemSpec, n: int, rng: np.random.Generator, opts: FlowOptions = DEFAULT_OPTIONS,
                        tol: float = 1e-6) -> SuiteResult:
    """Accumulated divergence integral against an independent variational-equation solve.

    Relative error ``|exp(int div) - J| / max(1, J)``; needs an expression-backed field.
    """
    if prob.field.exprs is None:
        return SuiteResult("radon_nikodym", math.inf, tol, 0, prob.name, "field is not expression-backed")
    pts = _points(prob, n, rng)
    times = rng.uniform(-2.0, 2.0, size=len(pts))
    keep, got = [], []
    for i, (x, t) in enumerate(zip(pts, times)):
        r = advance_flow(prob, x, float(t), opts)
        if r.ok:
            keep.append(i)
            got.append(math.exp(math.copysign(1.0, t) * r.int_div))
    if not keep:
        return SuiteResult("radon_nikodym", math.inf, tol, 0, prob.name, "every trajectory left the domain")
    ref = _rn_reference(prob, pts[keep], times[keep])
    err = np.abs(np.array(got) - ref) / np.maximum(1.0, np.abs(ref))
    return SuiteResult("radon_nikodym", float(err.max()), tol, len(keep), prob.name)


def suite_yorke(prob: ProblemSpec, n: int, rng: np.random.Generator,
                cfg: ClassificationConfig = ClassificationConfig()) -> SuiteResult:
    """Every detected prime period is at least ``2 pi / kappa`` (declared kappa) minus ``period_tol``.

    The return search itself uses 1.1 times a sampled Lipschitz estimate, so a
    wrong declared constant cannot hide the periods it is checked against.
    """
    box = prob.default_box()
    kappa_search = 1.1 * estimate_lipschitz(prob, box, 500, seed=int(rng.integers(2**31)))
    if kappa_search <= 0:
        return SuiteResult("yorke_bound", 0.0, cfg.period_tol, 0, prob.name, "constant field: no periodic orbits",
                           vacuous=True)
    bound = 2.0 * math.pi / prob.kappa
    worst, count, tight = 0.0, 0, math.inf
    for x in _points(prob, n, rng):
        e = exit_time(prob, x, cfg.horizon, cfg.flow)
        if not (e.minus_censored and e.plus_censored) or e.step_failure:
            continue
        if np.linalg.norm(prob.field.eval(x)) <= cfg.rest_tol_at(prob, x):
            continue
        search = estimate_prime_period(prob, x, cfg, kappa=kappa_search)
        if search.period is None:
            continue
        worst = max(worst, bound - search.period)
        tight = min(tight, search.period - bound)
        count += 1
    detail = f"declared kappa = {prob.kappa:g}, bound = {bound:.9g}"
    if count:
        detail += f", min(period - bound) = {tight:.3g}"
    else:
        detail += ", no periodic points found"
    return SuiteResult("yorke_bound", max(worst, 0.0), cfg.period_tol, count, prob.name, detail,
                       vacuous=count == 0)


def suite_smt_demo() -> SuiteResult:
    r1 = smt_counterexample_report(1.0, 100)
    r2 = smt_counterexample_report(2.0 * math.pi, 100)
    ok = r1["max_gap"] < 0.63 and r1["image_strictly_smaller"] and r2["collapsed_to_one"]
    return SuiteResult("smt_demo", 0.0 if ok else 1.0, 0.0, 1, "rotation",
                       f"gap(t=1) = {r1['max_gap']:.6g}, collapsed(t=2pi) = {r2['collapsed_to_one']}")


def run_problem_suites(prob: ProblemSpec, n: int = 50, seed: int = 0, opts: FlowOptions = DEFAULT_OPTIONS,
                       cfg: Optional[ClassificationConfig] = None) -> list:
    rng = np.random.default_rng(seed)
    cfg = cfg or ClassificationConfig(flow=opts)
    out = [
        suite_group_law(prob, n, rng, opts),
        suite_lipschitz(prob, n, rng, opts),
        suite_exit_shift(prob, n, rng, cfg.horizon, opts),
        suite_radon_nikodym(prob, n, rng, opts),
        suite_yorke(prob, max(1, n // 5), rng, cfg),
    ]
    if prob.name in ("rotation", "vfp_fourier"):
        out.append(suite_closed_form(prob, n, rng, opts=opts))
    if prob.name == "lorentz":
        out.append(suite_lorentz_invariant(prob, n, rng, opts=opts))
    # exit shifts are vacuous on problems without boundary crossings
    return [r for r in out if not (r.name == "exit_shift" and r.checked == 0)]


DEFAULT_PROBLEMS = (
    ("rotation", {}),
    ("lorentz", {}),
    ("vfp_fourier", {}),
    ("free_streaming", {}),
    ("nordstrom", {}),
    ("gradient", {}),
    ("slab_constant", {"c": 1.0}),
)


def run_default_suites(n: int = 30, seed: int = 0, opts: FlowOptions = DEFAULT_OPTIONS) -> list:
    out = []
    for name, params in DEFAULT_PROBLEMS:
        out.extend(run_problem_suites(builtin(name, params), n, seed, opts))
    out.append(suite_smt_demo())
    return out
