"""Closed polygonal curves, reference framings, and linking numbers.

Two independent linking algorithms are provided.  ``gauss_linking``
accumulates the exact solid-angle contribution of every segment pair (the
polyline Gauss integral in closed form), so for disjoint polylines it
returns an integer up to floating-point error.  ``crossing_linking``
projects both curves along a direction and takes half the signed crossing
sum, retrying with a perturbed direction when the projection is not
generic.  The two agree on every valid input, which is the main
cross-check used by the test suite.

Framing conventions for planar curves (the only framed curves needed
downstream): curves parallel to the x3=0 plane take tau1 = e3, curves
parallel to the x1=0 plane take tau1 = e1, and tau2 = tangent x tau1, which
points away from the enclosed region for counter-clockwise orientation.
The triple (tau1, tau2, tangent) is direct.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DUPLICATE_TOL = 1e-12
MIN_SEPARATION = 1e-6


class CurveError(ValueError):
    """Degenerate curve or inadmissible linking input."""


@dataclass
class Polyline3:
    """Oriented polygonal curve in R^3; closed curves repeat no endpoint."""

    vertices: np.ndarray
    closed: bool = True

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise CurveError("vertices must be an (n, 3) array")
        if self.closed and len(v) >= 2 and np.linalg.norm(v[0] - v[-1]) <= DUPLICATE_TOL:
            v = v[:-1]
        keep = [0]
        for i in range(1, len(v)):
            if np.linalg.norm(v[i] - v[keep[-1]]) > DUPLICATE_TOL:
                keep.append(i)
        v = v[keep]
        if self.closed and len(v) < 3:
            raise CurveError("a closed curve needs at least 3 distinct vertices")
        if not self.closed and len(v) < 2:
            raise CurveError("an open curve needs at least 2 distinct vertices")
        self.vertices = v

    def __len__(self) -> int:
        return len(self.vertices)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start points and direction vectors (closing edge included)."""
        v = self.vertices
        if self.closed:
            starts = v
            ends = np.roll(v, -1, axis=0)
        else:
            starts = v[:-1]
            ends = v[1:]
        return starts, ends - starts

    def length(self) -> float:
        _, d = self.segments()
        return float(np.linalg.norm(d, axis=1).sum())

    def reversed(self) -> "Polyline3":
        return Polyline3(self.vertices[::-1].copy(), closed=self.closed)

    def translated(self, offset) -> "Polyline3":
        return Polyline3(self.vertices + np.asarray(offset, dtype=float), closed=self.closed)

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())

    def is_self_intersecting(self, tol: float = 1e-9) -> bool:
        starts, dirs = self.segments()
        n = len(starts)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (self.closed and i == 0 and j == n - 1)
                if adjacent:
                    continue
                if _segment_distance(starts[i], dirs[i], starts[j], dirs[j]) < tol:
                    return True
        return False

    def to_json(self) -> dict:
        return {"closed": self.closed, "vertices": self.vertices.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "Polyline3":
        return Polyline3(np.asarray(obj["vertices"], dtype=float), closed=bool(obj.get("closed", True)))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def load(path: str) -> "Polyline3":
        with open(path, "r", encoding="utf-8") as fh:
            return Polyline3.from_json(json.load(fh))


def circle(center, radius: float, plane: str = "xy", n: int = 96, reverse: bool = False) -> Polyline3:
    """Regular polygon approximation of a circle in a coordinate plane.

    "xy" circles run counter-clockwise in (e1, e2); "yz" circles
    counter-clockwise in (e2, e3).
    """
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    if reverse:
        t = t[::-1]
    c = np.asarray(center, dtype=float)
    pts = np.zeros((n, 3))
    if plane == "xy":
        pts[:, 0] = radius * np.cos(t)
        pts[:, 1] = radius * np.sin(t)
    elif plane == "yz":
        pts[:, 1] = radius * np.cos(t)
        pts[:, 2] = radius * np.sin(t)
    else:
        raise CurveError(f"unknown plane {plane!r}")
    return Polyline3(pts + c, closed=True)


# ------------------------------------------------------------------ framing


def _planar_tau1(vertices: np.ndarray) -> np.ndarray:
    """Reference first frame vector for a plane-parallel curve."""
    if np.ptp(vertices[:, 2]) <= 1e-9:
        return np.array([0.0, 0.0, 1.0])
    if np.ptp(vertices[:, 0]) <= 1e-9:
        return np.array([1.0, 0.0, 0.0])
    raise CurveError("reference framing needs a curve parallel to x3=0 or x1=0")


@dataclass
class FramedCurve:
    """Curve with an orthonormal normal frame (tau1, tau2) per vertex.

    With framing "reference" the plane-parallel rule above applies; explicit
    framings pass per-vertex (n, 3) arrays and are validated against the
    local tangents.
    """

    curve: Polyline3
    tau1: np.ndarray = field(default=None)
    tau2: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        v = self.curve.vertices
        starts, dirs = self.curve.segments()
        seg_tan = dirs / np.linalg.norm(dirs, axis=1)[:, None]
        if self.tau1 is None:
            t1 = _planar_tau1(v)
            self.tau1 = np.tile(t1, (len(v), 1))
            # per-vertex tangent: average of adjacent segment directions
            if self.curve.closed:
                vert_tan = seg_tan + np.roll(seg_tan, 1, axis=0)
            else:
                vert_tan = np.vstack([seg_tan[:1], seg_tan[:-1] + seg_tan[1:], seg_tan[-1:]])
            vert_tan = vert_tan / np.linalg.norm(vert_tan, axis=1)[:, None]
            self.tau2 = np.cross(vert_tan, self.tau1)
            self.tau2 /= np.linalg.norm(self.tau2, axis=1)[:, None]
        else:
            self.tau1 = np.asarray(self.tau1, dtype=float)
            self.tau2 = np.asarray(self.tau2, dtype=float)
            if self.tau1.shape != v.shape or self.tau2.shape != v.shape:
                raise CurveError("explicit framing must match the vertex count")
            self.validate_frames()

    def validate_frames(self, tol: float = 1e-6) -> None:
        _, dirs = self.curve.segments()
        seg_tan = dirs / np.linalg.norm(dirs, axis=1)[:, None]
        for name, arr in (("tau1", self.tau1), ("tau2", self.tau2)):
            norms = np.linalg.norm(arr, axis=1)
            if np.any(np.abs(norms - 1.0) > tol):
                raise CurveError(f"{name} vectors are not unit")
        if np.any(np.abs(np.einsum("ij,ij->i", self.tau1, self.tau2)) > tol):
            raise CurveError("frame vectors are not orthogonal")
        n = len(self.curve.vertices)
        for i in range(n):
            t = seg_tan[i % len(seg_tan)]
            if abs(np.dot(self.tau1[i], t)) > 1e-3 or abs(np.dot(self.tau2[i], t)) > 1e-3:
                raise CurveError("frame not orthogonal to the local tangent")
            triple = float(np.dot(np.cross(self.tau1[i], self.tau2[i]), t))
            if triple < 0:
                raise CurveError("(tau1, tau2, tangent) is not direct")


def reference_framed(curve: Polyline3) -> FramedCurve:
    return FramedCurve(curve=curve)


# ----------------------------------------------------------------- distances


def _segment_distance(p, dp, q, dq) -> float:
    """Distance between segments [p, p+dp] and [q, q+dq]."""
    r = p - q
    a = float(np.dot(dp, dp))
    b = float(np.dot(dp, dq))
    c = float(np.dot(dq, dq))
    d = float(np.dot(dp, r))
    e = float(np.dot(dq, r))
    den = a * c - b * b
    if den > 1e-14 * max(a * c, 1e-30):
        s = (b * e - c * d) / den
        t = (a * e - b * d) / den
    else:
        s, t = 0.0, e / c if c > 0 else 0.0
    s = min(1.0, max(0.0, s))
    t = (b * s + e) / c if c > 0 else 0.0
    t = min(1.0, max(0.0, t))
    s = (b * t - d) / a if a > 0 else 0.0
    s = min(1.0, max(0.0, s))
    return float(np.linalg.norm(p + s * dp - (q + t * dq)))


def polyline_min_distance(c1: Polyline3, c2: Polyline3) -> float:
    """Minimum distance between two polylines (exact over segment pairs)."""
    s1, d1 = c1.segments()
    s2, d2 = c2.segments()
    best = np.inf
    # coarse vertex prefilter keeps the exact pass short
    vv = np.linalg.norm(s1[:, None, :] - s2[None, :, :], axis=-1)
    reach = (
        np.linalg.norm(d1, axis=1)[:, None] + np.linalg.norm(d2, axis=1)[None, :]
    )
    cand = np.argwhere(vv <= vv.min() + reach.max())
    for i, j in cand:
        best = min(best, _segment_distance(s1[i], d1[i], s2[j], d2[j]))
    return float(best)


# ------------------------------------------------------------ Gauss linking


def gauss_linking(c1: Polyline3, c2: Polyline3, min_distance: float = MIN_SEPARATION) -> float:
    """Gauss linking integral of two disjoint closed polylines.

    The per-segment-pair contribution is the exact signed solid angle of the
    quadrilateral spanned by the endpoints, so the total is the linking
    number up to floating-point error.  The sign flips when either
    orientation is reversed, and the value is additive over components.
    """
    if not (c1.closed and c2.closed):
        raise CurveError("both curves must be closed")
    if polyline_min_distance(c1, c2) <= min_distance:
        raise CurveError("curves are too close for a stable linking evaluation")
    s1, d1 = c1.segments()
    s2, d2 = c2.segments()
    total = 0.0
    # batch over segments of c1 against all segments of c2
    r3 = s2
    r4 = s2 + d2
    for p1, dp in zip(s1, d1):
        p2 = p1 + dp
        r13 = r3 - p1
        r14 = r4 - p1
        r23 = r3 - p2
        r24 = r4 - p2
        n1 = np.cross(r13, r14)
        n2 = np.cross(r14, r24)
        n3 = np.cross(r24, r23)
        n4 = np.cross(r23, r13)
        for n in (n1, n2, n3, n4):
            norms = np.linalg.norm(n, axis=1)
            np.divide(n, norms[:, None], out=n, where=norms[:, None] > 1e-300)
        omega = (
            np.arcsin(np.clip(np.einsum("ij,ij->i", n1, n2), -1.0, 1.0))
            + np.arcsin(np.clip(np.einsum("ij,ij->i", n2, n3), -1.0, 1.0))
            + np.arcsin(np.clip(np.einsum("ij,ij->i", n3, n4), -1.0, 1.0))
            + np.arcsin(np.clip(np.einsum("ij,ij->i", n4, n1), -1.0, 1.0))
        )
        sign = np.sign(np.einsum("ij,ij->i", np.cross(d2, dp), r13))
        total += float(np.sum(omega * sign))
    return total / (4.0 * math.pi)


def linking_sum(curves1, curves2) -> float:
    """Additivity over components: sum of pairwise Gauss linking numbers."""
    return float(
        sum(gauss_linking(a, b) for a in curves1 for b in curves2)
    )


# -------------------------------------------------------- crossing linking


def _orthobasis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = direction / np.linalg.norm(direction)
    probe = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(e, probe)
    u /= np.linalg.norm(u)
    v = np.cross(e, u)
    return u, v


def crossing_linking(
    c1: Polyline3,
    c2: Polyline3,
    direction=(0.0, 0.0, 1.0),
    max_retries: int = 8,
) -> int:
    """Half the signed crossing sum of a generic planar projection.

    Crossings between the two curves are counted with the sign of the
    oriented 2-frame (over-strand direction, under-strand direction); half
    the total is the linking number.  Non-generic projections (tangencies or
    vertex hits within 1e-9) trigger deterministic retries with a perturbed
    direction, and failure after the retry budget raises.
    """
    if not (c1.closed and c2.closed):
        raise CurveError("both curves must be closed")
    base = np.asarray(direction, dtype=float)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for attempt in range(max_retries):
        if attempt == 0:
            e = base.copy()
        else:
            # deterministic perturbation: tilt by golden-angle steps
            tilt = 0.05 * attempt
            u, v = _orthobasis(base)
            e = base + tilt * (math.cos(attempt * golden) * u + math.sin(attempt * golden) * v)
        try:
            return _crossing_sum(c1, c2, e / np.linalg.norm(e))
        except _NonGenericProjection:
            continue
    raise CurveError("no generic projection direction found")


class _NonGenericProjection(Exception):
    pass


def _crossing_sum(c1: Polyline3, c2: Polyline3, e: np.ndarray) -> int:
    u, v = _orthobasis(e)
    s1, d1 = c1.segments()
    s2, d2 = c2.segments()

    def project(pts):
        return np.stack([pts @ u, pts @ v], axis=-1)

    p1 = project(s1)
    q1 = project(d1)
    p2 = project(s2)
    q2 = project(d2)
    z1s = s1 @ e
    z1d = d1 @ e
    z2s = s2 @ e
    z2d = d2 @ e

    total = 0.0
    for i in range(len(p1)):
        det = q1[i, 0] * q2[:, 1] - q1[i, 1] * q2[:, 0]
        rx = p2[:, 0] - p1[i, 0]
        ry = p2[:, 1] - p1[i, 1]
        scale = np.linalg.norm(q1[i]) * np.linalg.norm(q2, axis=1) + 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rx * q2[:, 1] - ry * q2[:, 0]) / det
            s = (rx * q1[i, 1] - ry * q1[i, 0]) / det
        near_parallel = np.abs(det) < 1e-9 * scale
        hits = (~near_parallel) & (t > -1e-9) & (t < 1 + 1e-9) & (s > -1e-9) & (s < 1 + 1e-9)
        for j in np.nonzero(hits)[0]:
            tt, ss = float(t[j]), float(s[j])
            if min(tt, 1 - tt) < 1e-9 or min(ss, 1 - ss) < 1e-9:
                raise _NonGenericProjection
            dz = (z1s[i] + tt * z1d[i]) - (z2s[j] + ss * z2d[j])
            if abs(dz) < 1e-9:
                raise _NonGenericProjection
            cross = float(np.sign(det[j]))
            # epsilon = orientation of (over-strand, under-strand) directions
            total += cross if dz > 0 else -cross
        parallel_hit = near_parallel & (np.abs(rx * q1[i, 1] - ry * q1[i, 0]) < 1e-9 * (np.linalg.norm(q1[i]) + 1e-300))
        if np.any(parallel_hit & (np.linalg.norm(q2, axis=1) > 0)):
            # potentially overlapping parallel projections; only fatal if the
            # segments' projections actually overlap
            for j in np.nonzero(parallel_hit)[0]:
                if _projected_overlap(p1[i], q1[i], p2[j], q2[j]):
                    raise _NonGenericProjection
    half = 0.5 * total
    rounded = round(half)
    if abs(half - rounded) > 1e-6:
        raise _NonGenericProjection
    return int(rounded)


def _projected_overlap(p, dp, q, dq) -> bool:
    lp = np.linalg.norm(dp)
    if lp < 1e-15:
        return False
    t0 = float(np.dot(q - p, dp)) / (lp * lp)
    t1 = float(np.dot(q + dq - p, dp)) / (lp * lp)
    t0, t1 = min(t0, t1), max(t0, t1)
    if t1 < 0 or t0 > 1:
        return False
    # check lateral offset
    off = q - p - np.clip(t0, 0, 1) * dp
    return bool(np.linalg.norm(off - np.dot(off, dp) / (lp * lp) * dp) < 1e-9)
