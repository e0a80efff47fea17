"""Transport problems: vector field, absorption, domain and exponent.

A :class:`ProblemSpec` bundles everything the flow engine and the spectral
estimators need.  Problems built from expressions (all built-ins and JSON
``custom`` configs) carry an exact symbolic divergence and can run on the
compiled kernel; problems built from Python callables use the pure-Python
kernel and a finite-difference divergence unless one is supplied.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "VectorFieldSpec",
    "DomainSpec",
    "ProblemSpec",
    "ConfigError",
    "DomainError",
    "InvalidRegionError",
    "DataIntegrityWarning",
    "field_from_exprs",
    "field_from_callable",
    "fd_divergence",
    "sigma_p",
    "nu",
    "estimate_lipschitz",
    "builtin",
    "BUILTINS",
    "problem_from_config",
    "load_problem",
    "check_absorption_bound",
]


class ConfigError(ValueError):
    """Invalid problem or run configuration."""


class DomainError(ValueError):
    """A point that should lie in the domain does not."""


class InvalidRegionError(ValueError):
    """Sampling region with zero volume or inverted bounds."""


class DataIntegrityWarning(UserWarning):
    """Sampled data contradicts a declared property (e.g. the bound on h)."""


def fd_divergence(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> float:
    """Central-difference divergence with step ``1e-5 * (1 + |x|)``."""
    x = np.asarray(x, dtype=float)
    delta = 1e-5 * (1.0 + np.linalg.norm(x))
    total = 0.0
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = delta
        total += (fn(x + e)[i] - fn(x - e)[i]) / (2.0 * delta)
    return float(total)


@dataclass(frozen=True)
class VectorFieldSpec:
    dimension: int
    eval: Callable[[np.ndarray], np.ndarray]
    divergence: Callable[[np.ndarray], float]
    kappa: float
    exprs: Optional[tuple] = None
    div_expr: Optional[ex.Expr] = None
    div_source: str = "symbolic"  # "symbolic" | "analytic" | "finite_difference"

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("field dimension must be positive")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConfigError(f"Lipschitz constant must be positive and finite, got {self.kappa}")


def field_from_exprs(components: Sequence[ex.Expr | str], kappa: Optional[float] = None,
                     region: Optional[np.ndarray] = None) -> VectorFieldSpec:
    """Field from expression trees (or strings); divergence by symbolic differentiation.

    When ``kappa`` is omitted it is set to 1.1 times a sampled estimate over
    ``region`` (default ``[-1, 1]^N``).
    """
    n = len(components)
    nodes = tuple(ex.parse(c, n) if isinstance(c, str) else c for c in components)
    for node in nodes:
        if ex.max_var_index(node) >= n:
            raise ConfigError("field expression uses a variable beyond the field dimension")
    div_node = ex.divergence(nodes)

    def fn(x):
        return np.array([ex.evaluate(node, x) for node in nodes])

    def div(x):
        return ex.evaluate(div_node, x)

    if kappa is None:
        box = np.array([[-1.0, 1.0]] * n) if region is None else np.asarray(region, dtype=float)
        kappa = 1.1 * _sample_lipschitz(fn, box, 2000, np.random.default_rng(0))
        kappa = max(kappa, 1e-12)
    return VectorFieldSpec(n, fn, div, float(kappa), nodes, div_node, "symbolic")


def field_from_callable(dimension: int, fn: Callable, kappa: float,
                        divergence: Optional[Callable] = None) -> VectorFieldSpec:
    fn_arr = lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)  # noqa: E731
    if divergence is None:
        return VectorFieldSpec(dimension, fn_arr, lambda x: fd_divergence(fn_arr, x), kappa,
                               div_source="finite_difference")
    return VectorFieldSpec(dimension, fn_arr, divergence, kappa, div_source="analytic")


@dataclass(frozen=True)
class DomainSpec:
    """Open phase-space region given by a membership predicate.

    Domains built from half-spaces ``A x < b`` (boxes, slabs, all of R^N)
    keep ``A`` and ``b`` so the compiled kernel can test membership.
    """

    contains: Callable[[np.ndarray], bool]
    dimension: int
    bounding_box: Optional[np.ndarray] = None
    description: str = ""
    halfspaces: Optional[tuple] = None  # (A, b)

    @classmethod
    def everywhere(cls, dimension: int) -> "DomainSpec":
        return cls.from_halfspaces(np.zeros((0, dimension)), np.zeros(0), f"R^{dimension}")

    @classmethod
    def from_halfspaces(cls, A, b, description: str = "",
                        bounding_box: Optional[np.ndarray] = None) -> "DomainSpec":
        A = np.asarray(A, dtype=float).reshape(len(b), -1) if len(b) else np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        dim = A.shape[1]

        def contains(x):
            return bool(np.all(A @ np.asarray(x, dtype=float) < b)) if len(b) else True

        return cls(contains, dim, bounding_box, description, (A, b))

    @classmethod
    def box(cls, bounds) -> "DomainSpec":
        """Open box; infinite bounds are allowed and simply drop the face."""
        bounds = np.asarray(bounds, dtype=float)
        n = len(bounds)
        rows, rhs = [], []
        for i, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise ConfigError(f"box bounds for x{i} are empty: [{lo}, {hi}]")
            if math.isfinite(lo):
                rows.append(-np.eye(n)[i])
                rhs.append(-lo)
            if math.isfinite(hi):
                rows.append(np.eye(n)[i])
                rhs.append(hi)
        A = np.array(rows) if rows else np.zeros((0, n))
        desc = " x ".join(f"({lo:g}, {hi:g})" for lo, hi in bounds)
        return cls.from_halfspaces(A, np.array(rhs), desc, bounds)

    @classmethod
    def slab(cls, normal, lo: float, hi: float, description: str = "") -> "DomainSpec":
        """``{x : lo < <normal, x> < hi}``."""
        normal = np.asarray(normal, dtype=float)
        A = np.array([normal, -normal])
        return cls.from_halfspaces(A, np.array([hi, -lo]), description or f"slab {lo:g} < <n, x> < {hi:g}")

    @classmethod
    def from_predicate(cls, predicate: Callable, dimension: int, bounding_box=None,
                       description: str = "") -> "DomainSpec":
        return cls(lambda x: bool(predicate(np.asarray(x, dtype=float))), dimension,
                   None if bounding_box is None else np.asarray(bounding_box, dtype=float), description)


@dataclass(frozen=True)
class ProblemSpec:
    field: VectorFieldSpec
    h: Callable[[np.ndarray], float]
    domain: DomainSpec
    p: float = 1.0
    h_inf: float = -math.inf
    h_expr: Optional[ex.Expr] = None
    name: str = "custom"
    params: Mapping[str, Any] = dc_field(default_factory=dict)
    sample_box: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.p >= 1.0 or not math.isfinite(self.p):
            raise ConfigError(f"exponent p must lie in [1, inf), got {self.p}")
        if self.domain.dimension != self.field.dimension:
            raise ConfigError("domain and field dimensions differ")

    @property
    def dimension(self) -> int:
        return self.field.dimension

    @property
    def kappa(self) -> float:
        return self.field.kappa

    @property
    def inv_p_star(self) -> float:
        """1/p* = 1 - 1/p, exactly 0 for p = 1."""
        return 0.0 if self.p == 1.0 else 1.0 - 1.0 / self.p

    def contains(self, x) -> bool:
        return self.domain.contains(np.asarray(x, dtype=float))

    def with_kappa(self, kappa: float) -> "ProblemSpec":
        f = self.field
        new_field = VectorFieldSpec(f.dimension, f.eval, f.divergence, kappa, f.exprs, f.div_expr, f.div_source)
        return _replace(self, field=new_field)

    def with_p(self, p: float) -> "ProblemSpec":
        return _replace(self, p=p)

    def default_box(self) -> np.ndarray:
        """Sampling box: the configured one, else the domain's, else [-1, 1]^N."""
        if self.sample_box is not None:
            return np.asarray(self.sample_box, dtype=float)
        if self.domain.bounding_box is not None:
            box = np.array(self.domain.bounding_box, dtype=float)
            box[~np.isfinite(box[:, 0]), 0] = np.where(np.isfinite(box[~np.isfinite(box[:, 0]), 1]),
                                                      box[~np.isfinite(box[:, 0]), 1] - 2.0, -1.0)
            box[~np.isfinite(box[:, 1]), 1] = box[~np.isfinite(box[:, 1]), 0] + 2.0
            return box
        return np.array([[-1.0, 1.0]] * self.dimension)

    @cached_property
    def program(self) -> Optional[ex.Program]:
        """Postfix program ``[F_1..F_N, nu, div F, Sigma_p]`` or ``None``."""
        f = self.field
        if f.exprs is None or f.div_expr is None or self.h_expr is None or self.domain.halfspaces is None:
            return None
        div = f.div_expr
        nu_node = ex._add(self.h_expr, div)
        sig_node = self.h_expr if self.inv_p_star == 0.0 else ex._add(self.h_expr, ex._mul(ex.Const(self.inv_p_star), div))
        return ex.compile_program(list(f.exprs) + [nu_node, div, sig_node])

    def rhs(self, x: np.ndarray) -> np.ndarray:
        """``[F(x), nu(x), div F(x), Sigma_p(x)]`` for the Python kernel."""
        fx = self.field.eval(x)
        hx = self.h(x)
        dx = self.field.divergence(x)
        sig = hx if self.inv_p_star == 0.0 else hx + self.inv_p_star * dx
        return np.concatenate([fx, [hx + dx, dx, sig]])


def _replace(prob: ProblemSpec, **changes) -> ProblemSpec:
    from dataclasses import replace

    return replace(prob, **changes)


# --------------------------------------------------------------------------
# pointwise quantities


def _require_inside(prob: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.dimension,):
        raise ValueError(f"expected a point of dimension {prob.dimension}, got shape {x.shape}")
    if not prob.contains(x):
        raise DomainError(f"point {x.tolist()} is not in the domain {prob.domain.description}")
    return x


def sigma_p(prob: ProblemSpec, x) -> float:
    """Effective attenuation ``h(x) + (1/p*) div F(x)``; exactly ``h(x)`` when p = 1."""
    x = _require_inside(prob, x)
    if prob.inv_p_star == 0.0:
        return float(prob.h(x))
    return float(prob.h(x) + prob.inv_p_star * prob.field.divergence(x))


def nu(prob: ProblemSpec, x) -> float:
    """``h(x) + div F(x)``."""
    x = _require_inside(prob, x)
    return float(prob.h(x) + prob.field.divergence(x))


def _sample_lipschitz(fn, box: np.ndarray, n_pairs: int, rng: np.random.Generator) -> float:
    lo, hi = box[:, 0], box[:, 1]
    width = hi - lo
    best = 0.0
    n_far = (n_pairs + 1) // 2
    x1 = lo + width * rng.random((n_pairs, len(lo)))
    x2 = np.empty_like(x1)
    x2[:n_far] = lo + width * rng.random((n_far, len(lo)))
    # close pairs probe local slopes
    step = 1e-3 * width * rng.standard_normal((n_pairs - n_far, len(lo)))
    x2[n_far:] = np.clip(x1[n_far:] + step, lo, hi)
    for a, b in zip(x1, x2):
        dist = np.linalg.norm(a - b)
        if dist == 0.0:
            continue
        try:
            ratio = np.linalg.norm(fn(a) - fn(b)) / dist
        except ex.EvaluationError:
            continue
        best = max(best, ratio)
    return float(best)


def estimate_lipschitz(prob: ProblemSpec, region, n_pairs: int = 1000, seed: int = 0) -> float:
    """Largest sampled difference quotient ``|F(x1) - F(x2)| / |x1 - x2|`` over ``region``."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    box = np.asarray(region, dtype=float)
    if box.shape != (prob.dimension, 2) or not np.all(np.isfinite(box)):
        raise InvalidRegionError(f"region must be a finite ({prob.dimension}, 2) box")
    if np.any(box[:, 1] <= box[:, 0]):
        raise InvalidRegionError("region has zero volume")
    return _sample_lipschitz(prob.field.eval, box, n_pairs, np.random.default_rng(seed))


def check_absorption_bound(prob: ProblemSpec, points) -> int:
    """Warn when sampled ``h`` values fall below the declared ``h_inf``; return the count."""
    if not math.isfinite(prob.h_inf):
        return 0
    bad = sum(1 for x in points if prob.h(np.asarray(x, dtype=float)) < prob.h_inf)
    if bad:
        warnings.warn(f"{bad} sampled points have h < declared h_inf = {prob.h_inf}", DataIntegrityWarning,
                      stacklevel=2)
    return bad


# --------------------------------------------------------------------------
# built-in problems


def _num(v: float) -> str:
    v = float(v)
    return f"({v!r})" if v < 0 else repr(v)


def _vec(params, key, default, n=3):
    value = params.get(key, default)
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"parameter {key!r} must be a vector of length {n}")
    return arr


def _from_strings(name, components, h, domain, kappa, p, params, h_inf=-math.inf, sample_box=None):
    n = len(components)
    nodes = [ex.parse(c, n) for c in components]
    fld = field_from_exprs(nodes, kappa=kappa)
    h_node = ex.parse(h, n)
    return ProblemSpec(
        field=fld,
        h=lambda x, _n=h_node: ex.evaluate(_n, x),
        domain=domain,
        p=p,
        h_inf=h_inf,
        h_expr=h_node,
        name=name,
        params=dict(params),
        sample_box=None if sample_box is None else np.asarray(sample_box, dtype=float),
    )


def _rotation(params):
    omega = float(params.get("omega", 1.0))
    c = params.get("h", params.get("c", 0.0))
    h = c if isinstance(c, str) else _num(c)
    comps = [f"{_num(-omega)}*x1", f"{_num(omega)}*x0"] if omega != 1.0 else ["-x1", "x0"]
    box = params.get("sample_box", [[-1.0, 1.0], [-1.0, 1.0]])
    return _from_strings("rotation", comps, h, DomainSpec.everywhere(2), abs(omega),
                         float(params.get("p", 1.0)), params, sample_box=box)


def _lorentz(params):
    E = _vec(params, "E", [0.3, 0.2, 1.0])
    B = _vec(params, "B", [0.0, 0.0, 1.0])
    q = float(params.get("q", 1.0))
    width = params.get("slab_half_width", 1.0)
    width = math.inf if width is None else float(width)
    c = float(params.get("c", 0.0))
    # x = (x0, x1, x2), v = (x3, x4, x5); v x B componentwise
    vxb = [
        f"x4*{_num(B[2])} - x5*{_num(B[1])}",
        f"x5*{_num(B[0])} - x3*{_num(B[2])}",
        f"x3*{_num(B[1])} - x4*{_num(B[0])}",
    ]
    comps = ["x3", "x4", "x5"] + [f"{_num(q)}*({_num(E[i])} + {vxb[i]})" for i in range(3)]
    # F is affine: kappa is the spectral norm of its matrix
    cross = np.array([[0, B[2], -B[1]], [-B[2], 0, B[0]], [B[1], -B[0], 0]])
    M = np.block([[np.zeros((3, 3)), np.eye(3)], [np.zeros((3, 3)), q * cross]])
    kappa = float(np.linalg.norm(M, 2))
    bhat = B / np.linalg.norm(B)
    if math.isfinite(width):
        domain = DomainSpec.slab(np.concatenate([bhat, np.zeros(3)]), -width, width,
                                 f"|<x, B/|B|>| < {width:g}, v in R^3")
    else:
        domain = DomainSpec.everywhere(6)
    w = width if math.isfinite(width) else 1.0
    box = params.get("sample_box")
    if box is None:
        # positions in [-1,1]^3 with the B-direction squeezed into the slab
        box = [[-1.0, 1.0]] * 6
        if math.isfinite(width) and np.count_nonzero(bhat) == 1:
            axis = int(np.flatnonzero(bhat)[0])
            box[axis] = [-0.999 * w, 0.999 * w]
    return _from_strings("lorentz", comps, _num(c), domain, kappa, float(params.get("p", 1.0)),
                         {**params, "E": E.tolist(), "B": B.tolist(), "q": q, "slab_half_width": width},
                         sample_box=box)


def _vfp(params):
    n = int(params.get("N", 1))
    if n < 1:
        raise ConfigError("N must be positive")
    # x = (xi_1..xi_N, eta_1..eta_N); F = (eta, eta - xi)
    comps = [f"x{n + i}" for i in range(n)] + [f"x{n + i} - x{i}" for i in range(n)]
    h = " + ".join(f"x{n + i}^2" for i in range(n)) + f" - {n}"
    kappa = float(np.linalg.norm(np.array([[0.0, 1.0], [-1.0, 1.0]]), 2))
    box = params.get("sample_box", [[-1.0, 1.0]] * (2 * n))
    return _from_strings("vfp_fourier", comps, h, DomainSpec.everywhere(2 * n), kappa,
                         float(params.get("p", 1.0)), {**params, "N": n}, h_inf=-float(n), sample_box=box)


def _free_streaming(params):
    n = int(params.get("N", 1))
    c = float(params.get("c", 0.0))
    comps = [f"x{n + i}" for i in range(n)] + ["0"] * n
    pos_box = params.get("position_box")
    if pos_box is None:
        domain = DomainSpec.everywhere(2 * n)
    else:
        pos_box = np.asarray(pos_box, dtype=float)
        domain = DomainSpec.box(np.vstack([pos_box, [[-math.inf, math.inf]] * n]))
    box = params.get("sample_box")
    if box is None:
        box = ([list(b) for b in pos_box] if pos_box is not None else [[-1.0, 1.0]] * n) + [[-1.0, 1.0]] * n
    return _from_strings("free_streaming", comps, _num(c), domain, 1.0, float(params.get("p", 1.0)),
                         params, sample_box=box)


def _nordstrom(params):
    a = float(params.get("a", 1.0))
    p_max = float(params.get("p_max", 3.0))
    if a <= 0:
        raise ConfigError("nordstrom potential phi(x) = a x^2 / 2 needs a > 0 (convex)")
    comps = ["x1/sqrt(1 + x1^2)", f"{_num(-a)}*x0*sqrt(1 + x1^2)"]
    # Jacobian Frobenius bound over (0,1) x [-p_max, p_max]; the field is only locally Lipschitz
    kappa = math.sqrt(1.0 + a * a * (1.0 + p_max * p_max) + a * a)
    domain = DomainSpec.box([[0.0, 1.0], [-math.inf, math.inf]])
    box = params.get("sample_box", [[0.0, 1.0], [-p_max, p_max]])
    return _from_strings("nordstrom", comps, _num(float(params.get("c", 0.0))), domain, kappa,
                         float(params.get("p", 1.0)), {**params, "a": a, "p_max": p_max}, sample_box=box)


def _gradient(params):
    q = np.asarray(params.get("Q", [1.0, 0.5]), dtype=float)
    n = len(q)
    # F = -grad V with V = sum_i Q_i x_i^2 / 2
    comps = [f"{_num(-qi)}*x{i}" for i, qi in enumerate(q)]
    box_param = params.get("box")
    domain = DomainSpec.everywhere(n) if box_param is None else DomainSpec.box(box_param)
    sample_box = params.get("sample_box", box_param if box_param is not None else [[-1.0, 1.0]] * n)
    return _from_strings("gradient", comps, _num(float(params.get("c", 0.0))), domain,
                         float(np.max(np.abs(q))), float(params.get("p", 1.0)),
                         {**params, "Q": q.tolist()}, sample_box=sample_box)


def _slab_constant(params):
    if "c" not in params:
        raise ConfigError("slab_constant requires parameter 'c'")
    c = params["c"]
    h = c if isinstance(c, str) else _num(float(c))
    left = params.get("left", 0.0)
    right = params.get("right", 1.0)
    left = -math.inf if left is None else float(left)
    right = math.inf if right is None else float(right)
    speed = float(params.get("speed", 1.0))
    if speed == 0:
        raise ConfigError("speed must be non-zero")
    d = float(params.get("d", 0.0))
    comp = _num(speed) if d == 0 else f"{_num(speed)} + {_num(d)}*x0"
    kappa = abs(d) if d != 0 else 1.0
    domain = DomainSpec.box([[left, right]])
    lo = left if math.isfinite(left) else (right - 10.0)
    hi = right if math.isfinite(right) else (lo + 10.0)
    box = params.get("sample_box", [[lo, hi]])
    return _from_strings("slab_constant", [comp], h, domain, kappa, float(params.get("p", 1.0)),
                         params, sample_box=box)


BUILTINS: dict[str, Callable[[Mapping[str, Any]], ProblemSpec]] = {
    "rotation": _rotation,
    "lorentz": _lorentz,
    "vfp_fourier": _vfp,
    "free_streaming": _free_streaming,
    "nordstrom": _nordstrom,
    "gradient": _gradient,
    "slab_constant": _slab_constant,
}


def builtin(name: str, params: Optional[Mapping[str, Any]] = None) -> ProblemSpec:
    """Construct one of the worked examples.

    ========================  =================================================
    ``rotation``              F = (-w y, w x) on R^2 (``omega``, ``h``/``c``)
    ``lorentz``               F = (v, q(E + v x B)) on a slab along B
    ``vfp_fourier``           F = (eta, eta - xi), h = |eta|^2 - N on R^2N
    ``free_streaming``        F = (v, 0) on R^N x R^N or a position box
    ``nordstrom``             relativistic field with phi(x) = a x^2/2 on (0,1) x R
    ``gradient``              F = -grad(sum Q_i x_i^2 / 2)
    ``slab_constant``         F = speed + d x on (left, right), h = c
    ========================  =================================================

    Every built-in accepts ``p`` (default 1) and, except where noted, a
    constant absorption ``c``.
    """
    params = dict(params or {})
    try:
        ctor = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        prob = ctor(params)
    except ex.ParseError as err:
        raise ConfigError(f"built-in {name!r}: bad expression parameter: {err}") from err
    if "kappa" in params:
        prob = prob.with_kappa(float(params["kappa"]))
    return prob


# --------------------------------------------------------------------------
# JSON configs


def _bound(v):
    if v is None:
        return math.inf
    if isinstance(v, str):
        return float(v)
    return float(v)


def _custom(cfg: Mapping[str, Any]) -> ProblemSpec:
    try:
        n = int(cfg["dimension"])
        comps = cfg["field"]
        h_text = str(cfg.get("h", "0"))
    except KeyError as err:
        raise ConfigError(f"custom problem is missing key {err.args[0]!r}") from None
    if n < 1:
        raise ConfigError("custom.dimension must be positive")
    if not isinstance(comps, list) or len(comps) != n:
        raise ConfigError(f"custom.field must be a list of {n} expressions")
    nodes = []
    for i, text in enumerate(comps):
        try:
            nodes.append(ex.parse(str(text), n))
        except ex.ParseError as err:
            raise ConfigError(f"custom.field[{i}]: {err.message} at position {err.position}") from err
    try:
        h_node = ex.parse(h_text, n)
    except ex.ParseError as err:
        raise ConfigError(f"custom.h: {err.message} at position {err.position}") from err

    dom_cfg = cfg.get("domain", {"all": True})
    if dom_cfg.get("all"):
        domain = DomainSpec.everywhere(n)
    elif "box" in dom_cfg:
        bounds = dom_cfg["box"]
        if len(bounds) != n:
            raise ConfigError(f"custom.domain.box must have {n} intervals")
        bounds = [[-math.inf if lo is None else float(lo), _bound(hi)] for lo, hi in bounds]
        domain = DomainSpec.box(bounds)
    else:
        raise ConfigError("custom.domain must be {\"all\": true} or {\"box\": [[lo, hi], ...]}")

    sample_box = cfg.get("sample_box")
    region = None if sample_box is None else np.asarray(sample_box, dtype=float)
    if region is None and domain.bounding_box is not None and np.all(np.isfinite(domain.bounding_box)):
        region = domain.bounding_box
    kappa = cfg.get("kappa")
    fld = field_from_exprs(nodes, kappa=None if kappa is None else float(kappa), region=region)
    p = float(cfg.get("p", 1.0))
    return ProblemSpec(
        field=fld,
        h=lambda x, _n=h_node: ex.evaluate(_n, x),
        domain=domain,
        p=p,
        h_inf=float(cfg.get("h_inf", -math.inf)),
        h_expr=h_node,
        name=str(cfg.get("name", "custom")),
        params=dict(cfg),
        sample_box=region,
    )


def problem_from_config(cfg: Mapping[str, Any]) -> ProblemSpec:
    """Problem from ``{"builtin": name, "params": {...}}`` or ``{"custom": {...}}``."""
    if not isinstance(cfg, Mapping):
        raise ConfigError("problem config must be a JSON object")
    allowed = {"builtin", "params", "p", "kappa"} if "builtin" in cfg else {"custom"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown problem key(s): {sorted(unknown)}")
    if "builtin" in cfg:
        params = dict(cfg.get("params", {}))
        for key in ("p", "kappa"):
            if key in cfg:
                params[key] = cfg[key]
        return builtin(str(cfg["builtin"]), params)
    if "custom" in cfg:
        return _custom(cfg["custom"])
    raise ConfigError("problem config needs a 'builtin' or a 'custom' key")


def load_problem(source) -> ProblemSpec:
    """Load a problem from a JSON file path, JSON text or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return problem_from_config(source)
    text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from err
    return problem_from_config(cfg)
