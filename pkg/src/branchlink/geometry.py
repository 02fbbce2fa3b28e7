"""Axis-aligned box domains, uniform source grids, and box partitions.

Everything downstream (graph validation, solver constructions, grid scaling
experiments) runs on axis-aligned boxes in dimension 1..4.  A uniform grid of
parameter ``k`` in the unit m-cube has points ``h*I`` with ``h = 1/k`` and
``I`` ranging over ``{1,...,k}^m``, so exactly ``k^m`` points; the layer with
an index equal to ``k`` sits on the boundary face and is flagged rather than
dropped, which keeps the ``k^m`` count used by all scaling quantities.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 4

# Two computed points closer than this (in unit-box scale) are the same vertex.
COINCIDENCE_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid domain, grid, or partition input."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_m, hi_m]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        m = len(lo)
        if m != len(hi):
            raise GeometryError("lo and hi must have the same length")
        if not 1 <= m <= MAX_DIM:
            raise GeometryError(f"dimension {m} unsupported (1..{MAX_DIM})")
        for a, b in zip(lo, hi):
            if not a < b:
                raise GeometryError(f"degenerate axis interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @staticmethod
    def unit(m: int) -> "BoxDomain":
        return BoxDomain((0.0,) * m, (1.0,) * m)

    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def diameter(self) -> float:
        return float(np.linalg.norm(np.asarray(self.hi) - np.asarray(self.lo)))

    def contains(self, p, tol: float = COINCIDENCE_TOL) -> bool:
        """True if ``p`` is inside the closed box (within ``tol``)."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise GeometryError(f"point of dim {p.shape} in box of dim {self.dim}")
        return bool(
            np.all(p >= np.asarray(self.lo) - tol)
            and np.all(p <= np.asarray(self.hi) + tol)
        )

    def strictly_contains_point(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(
            np.all(p > np.asarray(self.lo) + tol)
            and np.all(p < np.asarray(self.hi) - tol)
        )

    def strictly_contains_box(self, inner: "BoxDomain") -> bool:
        if inner.dim != self.dim:
            return False
        return bool(
            np.all(np.asarray(inner.lo) > np.asarray(self.lo))
            and np.all(np.asarray(inner.hi) < np.asarray(self.hi))
        )

    def contains_box(self, inner: "BoxDomain", tol: float = COINCIDENCE_TOL) -> bool:
        if inner.dim != self.dim:
            return False
        return bool(
            np.all(np.asarray(inner.lo) >= np.asarray(self.lo) - tol)
            and np.all(np.asarray(inner.hi) <= np.asarray(self.hi) + tol)
        )

    def on_boundary(self, p, tol: float = COINCIDENCE_TOL) -> bool:
        p = np.asarray(p, dtype=float)
        if not self.contains(p, tol):
            return False
        return bool(
            np.any(np.abs(p - np.asarray(self.lo)) <= tol)
            or np.any(np.abs(p - np.asarray(self.hi)) <= tol)
        )

    def scaled(self, scale: float, offset=None) -> "BoxDomain":
        off = np.zeros(self.dim) if offset is None else np.asarray(offset, float)
        return BoxDomain(
            tuple(scale * np.asarray(self.lo) + off),
            tuple(scale * np.asarray(self.hi) + off),
        )

    def to_json(self) -> dict:
        return {"dim": self.dim, "lo": list(self.lo), "hi": list(self.hi)}

    @staticmethod
    def from_json(obj: dict) -> "BoxDomain":
        box = BoxDomain(tuple(obj["lo"]), tuple(obj["hi"]))
        if "dim" in obj and int(obj["dim"]) != box.dim:
            raise GeometryError("inconsistent dim in box JSON")
        return box


def dist_to_boundary(p, box: BoxDomain) -> float:
    """Distance from an inside point to the nearest boundary face.

    The minimum over faces of the axis distance; 0 iff ``p`` lies on the
    boundary.  Raises for points outside the closed box.
    """
    p = np.asarray(p, dtype=float)
    if not box.contains(p):
        raise GeometryError(f"point {p.tolist()} outside box")
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    d = float(min(np.min(p - lo), np.min(hi - p)))
    return max(d, 0.0)


def nearest_boundary_point(p, box: BoxDomain) -> np.ndarray:
    """Foot of the shortest segment from ``p`` to the boundary (nearest face)."""
    p = np.asarray(p, dtype=float)
    if not box.contains(p):
        raise GeometryError(f"point {p.tolist()} outside box")
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    gaps = np.concatenate([p - lo, hi - p])
    j = int(np.argmin(gaps))
    q = p.copy()
    if j < box.dim:
        q[j] = lo[j]
    else:
        q[j - box.dim] = hi[j - box.dim]
    return q


@dataclass(frozen=True)
class UniformGridSpec:
    """Uniform grid ``h*I`` with ``h = 1/k``, ``I in {1..k}^m``, optionally placed affinely.

    With the default placement the points live in the closed unit cube; the
    affine placement maps the unit cube to ``offset + scale*[0,1]^m``.
    """

    dim: int
    k: int
    scale: float = 1.0
    offset: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_DIM:
            raise GeometryError(f"dimension {self.dim} unsupported")
        if self.k < 1:
            raise GeometryError("k must be >= 1")
        if self.scale <= 0:
            raise GeometryError("scale must be positive")
        if self.offset is not None:
            off = tuple(float(v) for v in self.offset)
            if len(off) != self.dim:
                raise GeometryError("offset has wrong dimension")
            object.__setattr__(self, "offset", off)

    @property
    def spacing(self) -> float:
        return self.scale / self.k

    def count(self) -> int:
        return self.k**self.dim

    def box(self) -> BoxDomain:
        off = np.zeros(self.dim) if self.offset is None else np.asarray(self.offset)
        return BoxDomain(tuple(off), tuple(off + self.scale))

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "dim": self.dim,
            "scale": self.scale,
            "offset": list(self.offset) if self.offset is not None else [0.0] * self.dim,
        }

    @staticmethod
    def from_json(obj: dict) -> "UniformGridSpec":
        return UniformGridSpec(
            dim=int(obj["dim"]),
            k=int(obj["k"]),
            scale=float(obj.get("scale", 1.0)),
            offset=tuple(obj["offset"]) if obj.get("offset") is not None else None,
        )


def grid_points(spec: UniformGridSpec) -> np.ndarray:
    """All grid points, lexicographically ordered by multi-index ``I``.

    Shape ``(k^m, m)``.  Index ``I = (i_1, ..., i_m)`` maps to
    ``offset + scale*(i_1/k, ..., i_m/k)`` with ``i_j in {1..k}``.
    """
    m, k = spec.dim, spec.k
    h = 1.0 / k
    axes = [np.arange(1, k + 1) * h] * m
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    pts = spec.scale * mesh
    if spec.offset is not None:
        pts = pts + np.asarray(spec.offset)
    return pts


def grid_boundary_flags(spec: UniformGridSpec) -> np.ndarray:
    """Boolean mask over grid_points: True where some index equals ``k``.

    Those points sit on the top faces of the placement box and are treated as
    already connected (zero cost) by the solvers.
    """
    m, k = spec.dim, spec.k
    idx = np.stack(
        np.meshgrid(*([np.arange(1, k + 1)] * m), indexing="ij"), axis=-1
    ).reshape(-1, m)
    return np.any(idx == k, axis=1)


class BoxComplement:
    """The closure of ``parent`` minus an inner box; one part of a carve partition."""

    def __init__(self, parent: BoxDomain, inner: BoxDomain):
        self.parent = parent
        self.inner = inner

    def volume(self) -> float:
        return self.parent.volume() - self.inner.volume()

    def contains(self, p, tol: float = COINCIDENCE_TOL) -> bool:
        return self.parent.contains(p, tol) and not self.inner.strictly_contains_point(p)

    def __repr__(self) -> str:  # pragma: no cover
        return f"BoxComplement(parent={self.parent}, inner={self.inner})"


@dataclass
class BoxPartition:
    """Partition of a parent box into interior-disjoint parts covering it.

    ``parts`` entries are :class:`BoxDomain` or :class:`BoxComplement`
    descriptors; their closures cover the parent up to measure zero.
    """

    parent: BoxDomain
    parts: list = field(default_factory=list)
    inner_boundary_distance: float | None = None

    def volumes(self) -> list[float]:
        return [part.volume() for part in self.parts]

    def check_volume(self, rel_tol: float = 1e-12) -> bool:
        total = sum(self.volumes())
        ref = self.parent.volume()
        return abs(total - ref) <= rel_tol * max(1.0, abs(ref))


def carve(box: BoxDomain, inner: BoxDomain) -> BoxPartition:
    """Two-part partition {inner box, complement}, recording dist(inner, boundary)."""
    if inner.dim != box.dim or not box.strictly_contains_box(inner):
        raise GeometryError("inner box must lie strictly inside the parent box")
    lo_gap = np.asarray(inner.lo) - np.asarray(box.lo)
    hi_gap = np.asarray(box.hi) - np.asarray(inner.hi)
    dist = float(min(lo_gap.min(), hi_gap.min()))
    return BoxPartition(
        parent=box,
        parts=[inner, BoxComplement(box, inner)],
        inner_boundary_distance=dist,
    )


def uniform_subcubes(box: BoxDomain, q: int) -> list[BoxDomain]:
    """The ``q^m`` congruent sub-boxes of an axis-uniform subdivision."""
    if q < 1:
        raise GeometryError("q must be >= 1")
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    step = (hi - lo) / q
    out = []
    for idx in itertools.product(range(q), repeat=box.dim):
        a = lo + step * np.asarray(idx)
        out.append(BoxDomain(tuple(a), tuple(a + step)))
    return out


def load_points_json(path: str) -> tuple[np.ndarray, BoxDomain | None]:
    """Read a point-cloud file: {"points": [[...], ...], "domain": {...}?}."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    pts = np.asarray(obj["points"], dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    box = BoxDomain.from_json(obj["domain"]) if "domain" in obj else None
    return pts, box
