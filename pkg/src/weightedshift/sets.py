"""Symbolic spectral regions in the complex plane.

A :class:`SpectralSet` is an exact description (half-plane, disk, finite set,
vertical lines, annulus, union or empty set) rather than a point cloud, so
set-level identities such as ``exp(t {Re z <= a}) = {0 < |z| <= e^{at}}`` can
be checked exactly, boundary included.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = ["SpectralSet", "jsonable", "annulus_from_radii"]

KINDS = ("empty", "half_plane", "disk", "discrete", "vertical_lines", "annulus", "union")


def jsonable(v):
    """Floats as JSON-safe values: non-finite numbers become strings."""
    if isinstance(v, complex):
        return [jsonable(v.real), jsonable(v.imag)]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (list, tuple)):
        return [jsonable(u) for u in v]
    if isinstance(v, dict):
        return {str(k): jsonable(u) for k, u in v.items()}
    return v


def _dedupe(values: Iterable[complex], tol: float) -> tuple:
    out: list[complex] = []
    for z in sorted((complex(v) for v in values), key=lambda z: (z.real, z.imag)):
        if not any(abs(z - w) <= tol for w in out):
            out.append(z)
    return tuple(out)


@dataclass(frozen=True)
class SpectralSet:
    """Region of the complex plane with a provenance tag.

    ``params`` by kind:

    - ``half_plane``: ``(a,)`` for ``{Re z <= a}``; ``a = -inf`` is empty.
    - ``disk``: ``(r, punctured)`` for ``{|z| <= r}``, minus 0 when punctured.
    - ``discrete``: the points.
    - ``vertical_lines``: real parts ``a`` of the full lines ``{Re z = a}``.
    - ``annulus``: ``(r1, r2)`` for ``{r1 <= |z| <= r2}``; a circle when equal.
    """

    kind: str
    params: tuple = ()
    members: tuple = ()
    provenance: str = ""
    note: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectral set kind {self.kind!r}")
        if self.kind == "disk" and not self.params[0] >= 0:
            raise ValueError("disk radius must be non-negative")
        if self.kind == "annulus" and not 0 <= self.params[0] <= self.params[1]:
            raise ValueError("annulus radii must satisfy 0 <= r1 <= r2")
        if self.kind == "union" and not all(isinstance(m, SpectralSet) for m in self.members):
            raise ValueError("union members must be spectral sets")

    # constructors ---------------------------------------------------------

    @classmethod
    def empty(cls, provenance: str = "", note: str = "") -> "SpectralSet":
        return cls("empty", provenance=provenance, note=note)

    @classmethod
    def half_plane(cls, a: float, provenance: str = "") -> "SpectralSet":
        a = float(a)
        if math.isnan(a):
            raise ValueError("half-plane abscissa is nan")
        if a == -math.inf:
            return cls.empty(provenance, "half-plane with abscissa -inf")
        return cls("half_plane", (a,), provenance=provenance)

    @classmethod
    def disk(cls, r: float, punctured: bool = False, provenance: str = "") -> "SpectralSet":
        return cls("disk", (float(r), bool(punctured)), provenance=provenance)

    @classmethod
    def discrete(cls, points: Iterable[complex], provenance: str = "", note: str = "",
                 tol: float = 0.0) -> "SpectralSet":
        pts = _dedupe(points, tol)
        if not pts:
            return cls.empty(provenance, note)
        return cls("discrete", pts, provenance=provenance, note=note)

    @classmethod
    def vertical_lines(cls, real_parts: Iterable[float], provenance: str = "") -> "SpectralSet":
        reals = tuple(sorted(set(float(a) for a in real_parts)))
        if not reals:
            return cls.empty(provenance)
        return cls("vertical_lines", reals, provenance=provenance)

    @classmethod
    def annulus(cls, r1: float, r2: float, provenance: str = "") -> "SpectralSet":
        return cls("annulus", (float(r1), float(r2)), provenance=provenance)

    @classmethod
    def circle(cls, r: float, provenance: str = "") -> "SpectralSet":
        return cls.annulus(r, r, provenance)

    @classmethod
    def union(cls, sets: Sequence["SpectralSet"], provenance: str = "") -> "SpectralSet":
        flat = []
        for s in sets:
            if s.kind == "union":
                flat.extend(s.members)
            elif s.kind != "empty":
                flat.append(s)
        if not flat:
            return cls.empty(provenance)
        if len(flat) == 1 and not provenance:
            return flat[0]
        return cls("union", members=tuple(flat), provenance=provenance)

    # queries --------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def contains(self, z: complex, tol: float = 0.0) -> bool:
        """Membership of ``z``, with the boundary thickened by ``tol``."""
        z = complex(z)
        k = self.kind
        if k == "empty":
            return False
        if k == "half_plane":
            return z.real <= self.params[0] + tol
        if k == "disk":
            r, punctured = self.params
            if punctured and abs(z) <= 0.0:
                return False
            return abs(z) <= r + tol
        if k == "discrete":
            return any(abs(z - w) <= tol for w in self.params)
        if k == "vertical_lines":
            return any(abs(z.real - a) <= tol for a in self.params)
        if k == "annulus":
            r1, r2 = self.params
            return r1 - tol <= abs(z) <= r2 + tol
        return any(m.contains(z, tol) for m in self.members)

    @property
    def points(self) -> tuple:
        if self.kind != "discrete":
            raise TypeError(f"{self.kind} set has no finite point list")
        return self.params

    def real_parts(self) -> tuple:
        """Distinct real parts of a finite or vertical-line set."""
        if self.kind == "discrete":
            return tuple(sorted({p.real for p in self.params}))
        if self.kind == "vertical_lines":
            return self.params
        if self.kind == "empty":
            return ()
        if self.kind == "union":
            return tuple(sorted({a for m in self.members for a in m.real_parts()}))
        raise TypeError(f"real parts of a {self.kind} set are not a finite list")

    def hausdorff(self, other: "SpectralSet") -> float:
        """Hausdorff distance between two finite sets."""
        a, b = np.array(self.points), np.array(other.points)
        d = np.abs(a[:, None] - b[None, :])
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))

    def distance(self, z: complex) -> float:
        """Distance from ``z`` to a finite or vertical-line set."""
        z = complex(z)
        if self.kind == "discrete":
            return min(abs(z - w) for w in self.params)
        if self.kind == "vertical_lines":
            return min(abs(z.real - a) for a in self.params)
        if self.kind == "empty":
            return math.inf
        if self.kind == "union":
            return min(m.distance(z) for m in self.members)
        raise TypeError(f"distance to a {self.kind} set is not implemented")

    # set maps -------------------------------------------------------------

    def exp_map(self, t: float, provenance: str = "") -> "SpectralSet":
        """Image ``{e^{t z} : z in self}`` for ``t > 0``."""
        if not t > 0:
            raise ValueError("exp_map needs t > 0")
        prov = provenance or (f"exp({t:g} * {self.provenance})" if self.provenance else "")
        k = self.kind
        if k == "empty":
            return SpectralSet.empty(prov)
        if k == "half_plane":
            a = self.params[0]
            if a == math.inf:
                return SpectralSet.disk(math.inf, punctured=True, provenance=prov)
            return SpectralSet.disk(math.exp(a * t), punctured=True, provenance=prov)
        if k == "discrete":
            return SpectralSet.discrete([cmath.exp(t * z) for z in self.params], prov)
        if k == "vertical_lines":
            return SpectralSet.union([SpectralSet.circle(math.exp(a * t)) for a in self.params], prov)
        if k == "union":
            return SpectralSet.union([m.exp_map(t) for m in self.members], prov)
        raise TypeError(f"exp_map is defined on generator sets, not on a {k}")

    def rotational_hull(self, provenance: str = "") -> "SpectralSet":
        """``T . S``: the union of all rotations of ``S`` about the origin."""
        prov = provenance or self.provenance
        k = self.kind
        if k in ("empty", "annulus"):
            return SpectralSet(k, self.params, provenance=prov)
        if k == "disk":
            return SpectralSet.disk(self.params[0], self.params[1], prov)
        if k == "discrete":
            radii = sorted({abs(z) for z in self.params})
            return SpectralSet.union([SpectralSet.circle(r) if r > 0 else SpectralSet.discrete([0]) for r in radii],
                                     prov)
        if k == "union":
            return SpectralSet.union([m.rotational_hull() for m in self.members], prov)
        raise TypeError(f"rotational hull of a {k} set is not bounded")

    def same_region(self, other: "SpectralSet", tol: float = 0.0) -> bool:
        """Equality as regions, ignoring provenance and notes."""
        if self.kind != other.kind:
            return False
        if self.kind == "union":
            return len(self.members) == len(other.members) and all(
                a.same_region(b, tol) for a, b in zip(self.members, other.members))
        if self.kind == "discrete":
            return len(self.params) == len(other.params) and self.hausdorff(other) <= tol
        if len(self.params) != len(other.params):
            return False
        for a, b in zip(self.params, other.params):
            if isinstance(a, bool) or isinstance(b, bool):
                if a != b:
                    return False
            elif not (a == b or abs(a - b) <= tol):
                return False
        return True

    # output ---------------------------------------------------------------

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "provenance": self.provenance}
        if self.note:
            out["note"] = self.note
        k = self.kind
        if k == "half_plane":
            out["re_max"] = jsonable(self.params[0])
        elif k == "disk":
            out["radius"] = jsonable(self.params[0])
            out["punctured"] = self.params[1]
        elif k == "discrete":
            out["points"] = [jsonable(z) for z in self.params]
        elif k == "vertical_lines":
            out["real_parts"] = jsonable(list(self.params))
        elif k == "annulus":
            out["r_inner"], out["r_outer"] = jsonable(self.params[0]), jsonable(self.params[1])
        elif k == "union":
            out["members"] = [m.to_json() for m in self.members]
        return out

    def plot_data(self, n_circle: int = 256, im_range: float = 10.0) -> list:
        """Two-column ``(Re, Im)`` blocks for plotting; blank-line separated in gnuplot output."""
        k = self.kind
        theta = np.linspace(0.0, 2.0 * math.pi, n_circle)
        if k == "discrete":
            return [np.array([[z.real, z.imag] for z in self.params])]
        if k in ("disk", "annulus"):
            radii = [self.params[0]] if k == "disk" else sorted(set(self.params))
            return [np.column_stack([r * np.cos(theta), r * np.sin(theta)]) for r in radii if math.isfinite(r)]
        if k == "half_plane":
            a = self.params[0]
            return [np.array([[a, -im_range], [a, im_range]])]
        if k == "vertical_lines":
            return [np.array([[a, -im_range], [a, im_range]]) for a in self.params]
        if k == "union":
            return [blk for m in self.members for blk in m.plot_data(n_circle, im_range)]
        return []


def annulus_from_radii(radii: Sequence[float], gap_tol: Optional[float] = None) -> SpectralSet:
    """Union of circles, collapsed to annuli where radii are contiguous within ``gap_tol``."""
    rs = sorted(set(float(r) for r in radii))
    if not rs:
        return SpectralSet.empty()
    if gap_tol is None:
        return SpectralSet.union([SpectralSet.circle(r) for r in rs])
    pieces = []
    lo = hi = rs[0]
    for r in rs[1:]:
        if r - hi <= gap_tol:
            hi = r
        else:
            pieces.append(SpectralSet.annulus(lo, hi))
            lo = hi = r
    pieces.append(SpectralSet.annulus(lo, hi))
    return SpectralSet.union(pieces)
