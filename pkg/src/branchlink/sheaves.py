"""Stadium-curve sheaves, the 4-cube crossing-gadget curves, and chart projection.

The two sheaves are families of k^2 stadium curves each.  The horizontal
family lives in planes x3 = q/k: straight runs at x2 = -j/k and
x2 = 10 + j/k for x1 in [-5, 5], closed by half circles of radius 5 + j/k
around (+-5, 5).  The perpendicular family lives in planes x1 = i/k:
straight runs at x3 = -+(5 + q/k) for x2 in [-7, 3], closed by half circles
of radius 5 + q/k around x2 = 3 and x2 = -7.  Every horizontal fiber links
every perpendicular fiber exactly once, so the total linking of the pair is
k^4.  Arcs are discretized to chords with sagitta at most 0.01/k on shared
angular stations, which keeps nested fibers separated by 1/k up to a
negligible correction.

The crossing-gadget curves are two linked quadrilateral-like loops on the
boundary of the 4-cube [-r, r]^4; their linking number is evaluated after a
radial normalization onto the round 3-sphere followed by a stereographic
chart, which preserves linking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from branchlink.curves import CurveError, Polyline3, gauss_linking, polyline_min_distance

SAGITTA_FACTOR = 0.01


def gadget_profile(s) -> np.ndarray | float:
    """Even transition profile: value 1/2 at 0, constant -3/4 on [1/2, 1].

    Monotone on [0, 1/2] via a smoothstep ramp; used for the top arc of the
    crossing gadget.
    """
    s_arr = np.abs(np.asarray(s, dtype=float))
    t = np.clip(s_arr / 0.5, 0.0, 1.0)
    ramp = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    out = 0.5 - 1.25 * ramp
    return float(out) if np.isscalar(s) else out


def _arc_points(center2, radius, phi0, phi1, n):
    """2D arc samples from phi0 to phi1 inclusive of phi0, exclusive of phi1."""
    phis = np.linspace(phi0, phi1, n, endpoint=False)
    return np.stack(
        [center2[0] + radius * np.cos(phis), center2[1] + radius * np.sin(phis)], axis=-1
    )


SHEAF_RADIUS_MAX = 6.0  # largest half-circle radius over both sheaves


def _arc_segments_for(k: int) -> int:
    """Chord count for sagitta <= 0.01/k at the largest sheaf radius.

    All arcs at a given center share these angular stations, so nested
    fibers stay separated by their exact radial gap up to a negligible
    cos(theta/2) factor.
    """
    sag = SAGITTA_FACTOR / k
    theta = 2.0 * math.acos(max(0.0, 1.0 - sag / SHEAF_RADIUS_MAX))
    return max(8, int(math.ceil(math.pi / max(theta, 1e-6))))


def _seg_points(p0, p1, n):
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    return p0[None, :] + t[:, None] * (np.asarray(p1) - np.asarray(p0))[None, :]


def horizontal_stadium(j_over_k: float, height: float, k_for_sampling: int = 1) -> Polyline3:
    """Stadium in the plane x3 = height, counter-clockwise in (e1, e2).

    Straight runs at x2 = -j_over_k and x2 = 10 + j_over_k for x1 in
    [-5, 5]; half circles of radius 5 + j_over_k around (+-5, 5).
    """
    r = 5.0 + j_over_k
    n_arc = _arc_segments_for(k_for_sampling)
    n_seg = max(8, n_arc)
    bottom = _seg_points(np.array([-5.0, -j_over_k]), np.array([5.0, -j_over_k]), n_seg)
    right = _arc_points((5.0, 5.0), r, -0.5 * math.pi, 0.5 * math.pi, n_arc)
    top = _seg_points(np.array([5.0, 10.0 + j_over_k]), np.array([-5.0, 10.0 + j_over_k]), n_seg)
    left = _arc_points((-5.0, 5.0), r, 0.5 * math.pi, 1.5 * math.pi, n_arc)
    xy = np.vstack([bottom, right, top, left])
    pts = np.column_stack([xy, np.full(len(xy), height)])
    return Polyline3(pts, closed=True)


def perpendicular_stadium(q_over_k: float, offset_x1: float, k_for_sampling: int = 1) -> Polyline3:
    """Stadium in the plane x1 = offset_x1, counter-clockwise in (e2, e3).

    Straight runs at x3 = -+(5 + q_over_k) for x2 in [-7, 3]; half circles
    of radius 5 + q_over_k around (offset_x1, 3, 0) and (offset_x1, -7, 0).
    """
    r = 5.0 + q_over_k
    n_arc = _arc_segments_for(k_for_sampling)
    n_seg = max(8, n_arc)
    bottom = _seg_points(np.array([-7.0, -r]), np.array([3.0, -r]), n_seg)
    right = _arc_points((3.0, 0.0), r, -0.5 * math.pi, 0.5 * math.pi, n_arc)
    top = _seg_points(np.array([3.0, r]), np.array([-7.0, r]), n_seg)
    left = _arc_points((-7.0, 0.0), r, 0.5 * math.pi, 1.5 * math.pi, n_arc)
    yz = np.vstack([bottom, right, top, left])
    pts = np.column_stack([np.full(len(yz), offset_x1), yz])
    return Polyline3(pts, closed=True)


def base_stadium() -> Polyline3:
    """The template horizontal stadium (straight runs at x2 = 0 and 10, x3 = 0)."""
    return horizontal_stadium(0.0, 0.0)


def base_perpendicular_stadium() -> Polyline3:
    """The template perpendicular stadium in the plane x1 = 0."""
    return perpendicular_stadium(0.0, 0.0)


def linked_stadia() -> tuple[Polyline3, Polyline3]:
    """The canonical linked pair: one of each template, linking number one."""
    return base_stadium(), base_perpendicular_stadium()


@dataclass
class SheafPair:
    """The two sheaves of k^2 stadium fibers each, plus measured separations."""

    k: int
    horizontal: list  # fibers L^k_{j,q}, lexicographic in (j, q)
    perpendicular: list  # fibers L^{perp,k}_{i,q}, lexicographic in (i, q)
    intra_min_distance: float
    inter_sheaf_distance: float
    tube_radius_bound: float  # safe disjoint-disk radius, paper bound 1/(3k)

    def all_fibers(self) -> list:
        return list(self.horizontal) + list(self.perpendicular)

    def bounding_radius(self) -> float:
        return max(f.bounding_radius() for f in self.all_fibers())


def build_sheaves(k: int, measure: bool = True) -> SheafPair:
    """Construct the two linked sheaves for 1 <= k <= 8.

    Fiber separations are measured exactly on the chord polylines; the
    inter-sheaf distance is reported (it approaches 1 from above as k grows,
    the idealized value claimed for the construction).
    """
    if not 1 <= k <= 8:
        raise CurveError("sheaf parameter k must be in 1..8")
    horizontal = []
    for j in range(1, k + 1):
        for q in range(1, k + 1):
            horizontal.append(horizontal_stadium(j / k, q / k, k_for_sampling=k))
    perpendicular = []
    for i in range(1, k + 1):
        for q in range(1, k + 1):
            perpendicular.append(perpendicular_stadium(q / k, i / k, k_for_sampling=k))

    intra = np.inf
    inter = np.inf
    if measure:
        for sheaf in (horizontal, perpendicular):
            for a in range(len(sheaf)):
                for b in range(a + 1, len(sheaf)):
                    intra = min(intra, polyline_min_distance(sheaf[a], sheaf[b]))
        for h in horizontal:
            for p in perpendicular:
                inter = min(inter, polyline_min_distance(h, p))
        if intra <= 0 or inter <= 0:
            raise CurveError("sheaf fibers intersect")
    rho0 = min(intra / 2.0 if np.isfinite(intra) else np.inf, inter / 2.0, 5.0 / 2.0)
    if measure and rho0 < 1.0 / (3.0 * k):
        raise CurveError("measured disjoint-disk radius fell below the 1/(3k) bound")
    return SheafPair(
        k=k,
        horizontal=horizontal,
        perpendicular=perpendicular,
        intra_min_distance=float(intra),
        inter_sheaf_distance=float(inter),
        tube_radius_bound=float(rho0) if measure else 1.0 / (3.0 * k),
    )


def total_linking(pair: SheafPair) -> int:
    """Sum of pairwise linking numbers over all horizontal x perpendicular fibers."""
    total = 0.0
    for h in pair.horizontal:
        for p in pair.perpendicular:
            val = gauss_linking(h, p)
            nearest = round(val)
            if abs(val - nearest) > 1e-3:
                raise CurveError(f"non-integer pairwise linking {val}")
            total += nearest
    return int(round(total))


# --------------------------------------------------------- 4-cube gadget


@dataclass
class Curve4:
    """Closed polygonal curve on the boundary of the 4-cube [-r, r]^4."""

    vertices: np.ndarray  # (n, 4)
    r: float

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 4:
            raise CurveError("vertices must be an (n, 4) array")
        sup = np.max(np.abs(v), axis=1)
        if np.any(np.abs(sup - self.r) > 1e-9 * max(self.r, 1.0)):
            raise CurveError("curve must lie on the boundary of the 4-cube")
        self.vertices = v


def gadget_curves(r: float, samples: int = 64) -> tuple[Curve4, Curve4]:
    """The two linked loops of the crossing gadget on the 4-cube boundary.

    L1 bounds the square [-r, r] x {0} x {r/4} x [-r, r]; L2 follows the
    profile arc on the top face, drops down the two lateral faces, and
    returns along the straight run on the bottom face.  Orientations are
    chosen so the pair links positively (+1).
    """
    if r <= 0:
        raise CurveError("r must be positive")
    s = np.linspace(-1.0, 1.0, samples)
    # L1: rectangle in the (x1, x4) plane at x2 = 0, x3 = r/4
    l1 = []
    for x1 in s:
        l1.append([r * x1, 0.0, r / 4.0, -r])
    for x4 in s:
        l1.append([r, 0.0, r / 4.0, r * x4])
    for x1 in s[::-1]:
        l1.append([r * x1, 0.0, r / 4.0, r])
    for x4 in s[::-1]:
        l1.append([-r, 0.0, r / 4.0, r * x4])
    # L2: profile arc on the top face, laterals, straight run on the bottom
    # face; traversal matches the field-induced orientation (the top face of
    # the 4-cube carries the reversed 3-space orientation)
    l2 = []
    for x2 in s[::-1]:
        l2.append([0.0, r * x2, r * gadget_profile(x2), r])
    for x4 in s[::-1]:
        l2.append([0.0, -r, -0.75 * r, r * x4])
    for x2 in s:
        l2.append([0.0, r * x2, -0.75 * r, -r])
    for x4 in s:
        l2.append([0.0, r, -0.75 * r, r * x4])
    return Curve4(np.asarray(l1), r), Curve4(np.asarray(l2), r)


DEFAULT_POLES = (
    (1.0, 1.0, -1.0, 0.0),
    (-1.0, 1.0, -1.0, 0.0),
    (1.0, -1.0, -1.0, 0.3),
    (-1.0, -1.0, -1.0, -0.3),
)


def _chart_basis(pole: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal basis (a, b, c, pole) of R^4."""
    p = pole / np.linalg.norm(pole)
    basis = [p]
    for e in np.eye(4):
        w = e.copy()
        for b in basis:
            w -= np.dot(w, b) * b
        n = np.linalg.norm(w)
        if n > 1e-9:
            basis.append(w / n)
        if len(basis) == 4:
            break
    a, b, c = basis[1], basis[2], basis[3]
    if np.linalg.det(np.stack([a, b, c, p])) < 0:
        c = -c
    return np.stack([a, b, c, p])


def boundary_chart(pole) -> "BoundaryChart":
    return BoundaryChart(np.asarray(pole, dtype=float))


class BoundaryChart:
    """Radial normalization of the 4-cube boundary to S^3 plus a stereographic chart.

    Orientation-consistent for every pole, so linking numbers computed in
    the chart do not depend on the pole choice.
    """

    def __init__(self, pole: np.ndarray):
        self.pole = pole / np.linalg.norm(pole)
        self.frame = _chart_basis(self.pole)

    def sphere_point(self, x4: np.ndarray) -> np.ndarray:
        x4 = np.asarray(x4, dtype=float)
        return x4 / np.linalg.norm(x4, axis=-1, keepdims=True)

    def to_r3(self, x4) -> np.ndarray:
        y = self.sphere_point(np.atleast_2d(x4))
        a, b, c, p = self.frame
        den = 1.0 - y @ p
        if np.any(np.abs(den) < 1e-12):
            raise CurveError("point at the projection pole")
        out = np.stack([y @ a, y @ b, y @ c], axis=-1) / den[:, None]
        return out if np.asarray(x4).ndim == 2 else out[0]

    def from_r3(self, z) -> np.ndarray:
        """Inverse chart onto the unit 3-sphere (before cube rescaling)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        a, b, c, p = self.frame
        n2 = np.einsum("ij,ij->i", z, z)
        y = (
            2.0 * z[:, 0:1] * a[None, :]
            + 2.0 * z[:, 1:2] * b[None, :]
            + 2.0 * z[:, 2:3] * c[None, :]
            + (n2 - 1.0)[:, None] * p[None, :]
        ) / (n2 + 1.0)[:, None]
        return y

    def sphere_to_cube(self, y: np.ndarray, r: float) -> np.ndarray:
        y = np.atleast_2d(y)
        sup = np.max(np.abs(y), axis=1, keepdims=True)
        return r * y / sup


def project_boundary_to_r3(curve: Curve4, pole=None) -> Polyline3:
    """Chart image of a 4-cube boundary curve as a polyline in R^3.

    The pole must stay at least 0.1*r away (on the cube) from the curve;
    linking numbers of disjoint projected curves equal those on the
    boundary 3-sphere.
    """
    pole_vec = np.asarray(pole if pole is not None else DEFAULT_POLES[0], dtype=float)
    chart = BoundaryChart(pole_vec)
    cube_pole = chart.sphere_to_cube(chart.pole[None, :], curve.r)[0]
    gap = np.min(np.linalg.norm(curve.vertices - cube_pole[None, :], axis=1))
    if gap < 0.1 * curve.r:
        raise CurveError("curve passes within 0.1 r of the projection pole")
    return Polyline3(chart.to_r3(curve.vertices), closed=True)
