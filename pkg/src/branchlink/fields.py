"""Evaluable unit-vector fields: tube maps over framed curves, the classical
fibration field, and the crossing-gadget maps.

A tube (Pontryagin) field wraps every normal disk of radius rho around a
framed curve onto the sphere through the profile

    chi(x1, x2) = (x1 f(r), x2 f(r), g(r)),   r = |x|,  r^2 f^2 + g^2 = 1,

with g(r) = cos(pi r) and f(r) = sin(pi r)/r (continuously extended at 0),
and sends everything outside the tubes to the south pole.  Frames are
interpolated along the polyline so the field is continuous, and the
gradient is bounded by a constant times 1/rho.

All evaluators are pure, accept (n, 3) batches, and return unit vectors
(normalized to 1e-12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from branchlink.curves import FramedCurve, Polyline3, polyline_min_distance, reference_framed
from branchlink.sheaves import (
    BoundaryChart,
    Curve4,
    DEFAULT_POLES,
    SheafPair,
    build_sheaves,
    gadget_curves,
    gadget_profile,
)

SOUTH = np.array([0.0, 0.0, -1.0])
NORTH = np.array([0.0, 0.0, 1.0])


class FieldError(ValueError):
    """Invalid field parameters or overlapping tubes."""


@dataclass(frozen=True)
class DiskProfile:
    """Radial profile (f, g) with r^2 f(r)^2 + g(r)^2 = 1 on [0, 1].

    g decreases from 1 (north, disk center) to -1 (south, disk boundary)
    and 0 <= r f(r) <= 1; the scaled map has gradient bounded by C/rho.
    """

    name: str = "sine"

    def g(self, r):
        return np.cos(math.pi * np.asarray(r, dtype=float))

    def rf(self, r):
        # r * f(r): the equatorial radius of the image point
        return np.sin(math.pi * np.asarray(r, dtype=float))

    def g_inverse(self, value: float) -> float:
        """Radius at which g equals value (g is strictly monotone)."""
        return float(np.arccos(np.clip(value, -1.0, 1.0)) / math.pi)

    def check(self, samples: int = 2001) -> None:
        r = np.linspace(0.0, 1.0, samples)
        g = self.g(r)
        rf = self.rf(r)
        if np.any(np.abs(rf**2 + g**2 - 1.0) > 1e-12):
            raise FieldError("profile violates r^2 f^2 + g^2 = 1")
        if np.any(np.diff(g) > 1e-12):
            raise FieldError("g must be nonincreasing")
        if abs(g[0] - 1.0) > 1e-12 or abs(g[-1] + 1.0) > 1e-12:
            raise FieldError("g must run from 1 to -1")
        if np.any(rf < -1e-12) or np.any(rf > 1.0 + 1e-12):
            raise FieldError("r f(r) must stay in [0, 1]")


DEFAULT_PROFILE = DiskProfile()


@dataclass
class SphereField:
    """Unit-vector field on R^3 with a declared support radius.

    ``support_radius`` None means the field only approaches ``background``
    at infinity (no exact compact support).  ``metadata`` carries tube
    descriptions used by adapted quadrature and preimage extraction.
    """

    evaluator: callable
    support_radius: float | None
    background: np.ndarray = field(default_factory=lambda: SOUTH.copy())
    note: str = ""
    metadata: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(self.evaluator(pts), dtype=float)
        norms = np.linalg.norm(vals, axis=-1, keepdims=True)
        if np.any(norms < 1e-6):
            raise FieldError("field evaluator returned a near-zero vector")
        vals = vals / norms
        return vals if np.asarray(points).ndim == 2 else vals[0]

    def dilated(self, factor: float) -> "SphereField":
        """The field x -> u(x / factor); support and tubes scale by factor."""
        if factor <= 0:
            raise FieldError("dilation factor must be positive")
        meta = dict(self.metadata)
        if "tubes" in meta:
            meta["tubes"] = [
                (FramedCurve(Polyline3(t.curve.vertices * factor, closed=t.curve.closed),
                             t.tau1.copy(), t.tau2.copy()))
                for t in meta["tubes"]
            ]
        if "rho" in meta:
            meta["rho"] = meta["rho"] * factor
        return SphereField(
            evaluator=lambda pts: self.evaluator(np.asarray(pts, dtype=float) / factor),
            support_radius=None if self.support_radius is None else self.support_radius * factor,
            background=self.background.copy(),
            note=f"dilated x{factor:g} of ({self.note})",
            metadata=meta,
        )


class _TubeEvaluator:
    """Nearest-point tube evaluation over a family of framed polylines."""

    def __init__(self, framed: list[FramedCurve], rho: float, profile: DiskProfile):
        self.rho = rho
        self.profile = profile
        self.curves = []
        for fc in framed:
            starts, dirs = fc.curve.segments()
            lens2 = np.einsum("ij,ij->i", dirs, dirs)
            n = len(fc.curve.vertices)
            if fc.curve.closed:
                t2a = fc.tau2
                t2b = fc.tau2[(np.arange(n) + 1) % n]
            else:
                t2a = fc.tau2[:-1]
                t2b = fc.tau2[1:]
            lo = fc.curve.vertices.min(axis=0) - 2 * rho
            hi = fc.curve.vertices.max(axis=0) + 2 * rho
            self.curves.append((starts, dirs, lens2, fc.tau1[0], t2a, t2b, lo, hi))

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.tile(SOUTH, (len(pts), 1))
        best = np.full(len(pts), np.inf)
        best_coords = np.zeros((len(pts), 2))
        for starts, dirs, lens2, tau1, t2a, t2b, lo, hi in self.curves:
            inside = np.all((pts >= lo) & (pts <= hi), axis=1)
            if not np.any(inside):
                continue
            idx = np.nonzero(inside)[0]
            p = pts[idx]
            rel = p[:, None, :] - starts[None, :, :]
            t = np.einsum("psj,sj->ps", rel, dirs) / lens2[None, :]
            np.clip(t, 0.0, 1.0, out=t)
            delta = rel - t[:, :, None] * dirs[None, :, :]
            d2 = np.einsum("psj,psj->ps", delta, delta)
            j = np.argmin(d2, axis=1)
            rows = np.arange(len(p))
            dmin = np.sqrt(d2[rows, j])
            hit = dmin < best[idx]
            if not np.any(hit):
                continue
            rows = rows[hit]
            sel = idx[hit]
            jj = j[hit]
            tt = t[rows, jj]
            dvec = delta[rows, jj]
            tau2 = (1.0 - tt)[:, None] * t2a[jj] + tt[:, None] * t2b[jj]
            tau2 /= np.linalg.norm(tau2, axis=1)[:, None]
            best[sel] = dmin[hit]
            best_coords[sel, 0] = dvec @ tau1
            best_coords[sel, 1] = np.einsum("ij,ij->i", dvec, tau2)
        in_tube = best < self.rho
        if np.any(in_tube):
            d1 = best_coords[in_tube, 0]
            d2c = best_coords[in_tube, 1]
            rr = np.sqrt(d1**2 + d2c**2) / self.rho
            rr = np.minimum(rr, 1.0)
            ang = np.arctan2(d2c, d1)
            sin_part = self.profile.rf(rr)
            vals = np.stack(
                [sin_part * np.cos(ang), sin_part * np.sin(ang), self.profile.g(rr)], axis=-1
            )
            out[in_tube] = vals
        return out


def measured_tube_separation(curves: list[Polyline3]) -> float:
    """Largest disk radius with disjoint normal disks (measured).

    The least of: half the inter-curve distances, half the self-distance
    between arc-length-separated parts of each curve, and the local
    curvature radius (normal disks along an arc of radius R stay disjoint
    up to radius R).
    """
    sep = np.inf
    for i, c in enumerate(curves):
        sep = min(sep, _self_separation(c) / 2.0, _curvature_radius(c))
        for d in curves[i + 1:]:
            sep = min(sep, polyline_min_distance(c, d) / 2.0)
    return float(sep)


def _self_separation(c: Polyline3) -> float:
    """Min distance between segment pairs whose arc-length gap is substantial.

    Nearby pairs along the curve are governed by curvature, not separation,
    and are excluded here.
    """
    starts, dirs = c.segments()
    lens = np.linalg.norm(dirs, axis=1)
    n = len(starts)
    from branchlink.curves import _segment_distance

    s_mid = np.concatenate([[0.0], np.cumsum(lens)])[:-1] + 0.5 * lens
    total = float(lens.sum())
    window = 6.0 * float(lens.max())
    best = np.inf
    for i in range(n):
        for j in range(i + 2, n):
            gap = abs(s_mid[j] - s_mid[i])
            if c.closed:
                gap = min(gap, total - gap)
            if gap < window:
                continue
            best = min(best, _segment_distance(starts[i], dirs[i], starts[j], dirs[j]))
    return best


def _curvature_radius(c: Polyline3) -> float:
    """Min osculating radius estimated from consecutive tangent turns."""
    _, dirs = c.segments()
    lens = np.linalg.norm(dirs, axis=1)
    tans = dirs / lens[:, None]
    if c.closed:
        t1, t2 = tans, np.roll(tans, -1, axis=0)
        l1, l2 = lens, np.roll(lens, -1)
    else:
        t1, t2 = tans[:-1], tans[1:]
        l1, l2 = lens[:-1], lens[1:]
    cosang = np.clip(np.einsum("ij,ij->i", t1, t2), -1.0, 1.0)
    half = 0.5 * np.arccos(cosang)
    chord = 0.5 * (l1 + l2)
    with np.errstate(divide="ignore"):
        radii = np.where(half > 1e-12, chord / (2.0 * np.sin(np.maximum(half, 1e-12))), np.inf)
    return float(radii.min()) if len(radii) else np.inf


def pontryagin_field(
    curves,
    rho: float,
    profile: DiskProfile = DEFAULT_PROFILE,
    check_separation: bool = True,
) -> SphereField:
    """Tube field over framed curves: chi_rho on each normal disk, south outside.

    ``curves`` may be Polyline3 (reference framing applied) or FramedCurve.
    Requires rho at most a third of the measured tube-separation radius so
    the disks are disjoint.
    """
    framed = [c if isinstance(c, FramedCurve) else reference_framed(c) for c in curves]
    if check_separation:
        sep = measured_tube_separation([fc.curve for fc in framed])
        if rho > sep / 3.0 + 1e-12:
            raise FieldError(
                f"tube overlap: rho={rho:g} exceeds a third of the separation radius {sep:g}"
            )
    radius = max(fc.curve.bounding_radius() for fc in framed) + 2 * rho
    return SphereField(
        evaluator=_TubeEvaluator(framed, rho, profile),
        support_radius=radius,
        note=f"tube field over {len(framed)} curve(s), rho={rho:g}",
        metadata={"tubes": framed, "rho": rho, "profile": profile},
    )


@lru_cache(maxsize=8)
def _cached_sheaves(k: int) -> SheafPair:
    return build_sheaves(k)


def spaghetton_field(k: int, profile: DiskProfile = DEFAULT_PROFILE) -> SphereField:
    """The k-spaghetton: tube field over both sheaves at rho = 1/(3000 k).

    Supported in the ball of radius 17; the sampled gradient sup grows
    linearly in k with a single constant across k.
    """
    if not 1 <= k <= 4:
        raise FieldError("spaghetton parameter k must be in 1..4")
    pair = _cached_sheaves(k)
    rho = 1.0 / (3000.0 * k)
    f = pontryagin_field(pair.all_fibers(), rho, profile=profile, check_separation=False)
    if rho > pair.tube_radius_bound:
        raise FieldError("spaghetton tube radius exceeds the separation bound")
    f.support_radius = 17.0
    f.note = f"spaghetton k={k}"
    f.metadata["k"] = k
    f.metadata["sheaves"] = pair
    return f


def hopf_map_field() -> SphereField:
    """The fibration field: inverse stereographic to S^3, then conjugation.

    In coordinates: with (a, b) = (x1 + i x2, x3 + i x4) on the unit
    3-sphere, the image is (|a|^2 - |b|^2, 2(x1 x4 - x2 x3), 2(x1 x3 + x2 x4));
    the value at infinity is (-1, 0, 0).  Every value is regular and the
    preimage of each point is a single circle.
    """

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        n2 = np.einsum("ij,ij->i", pts, pts)
        den = 1.0 + n2
        x1 = 2.0 * pts[:, 0] / den
        x2 = 2.0 * pts[:, 1] / den
        x3 = 2.0 * pts[:, 2] / den
        x4 = (1.0 - n2) / den
        return np.stack(
            [
                x1 * x1 + x2 * x2 - x3 * x3 - x4 * x4,
                2.0 * (x1 * x4 - x2 * x3),
                2.0 * (x1 * x3 + x2 * x4),
            ],
            axis=-1,
        )

    return SphereField(
        evaluator=evaluate,
        support_radius=None,
        background=np.array([-1.0, 0.0, 0.0]),
        note="fibration field (unit Hopf charge)",
        metadata={},
    )


# ------------------------------------------------------------ crossing gadget


def _gadget_segments(r: float):
    d0 = Polyline3(np.array([[-r, 0.0, r / 4.0], [r, 0.0, r / 4.0]]), closed=False)
    dperp = Polyline3(np.array([[0.0, -r, -0.75 * r], [0.0, r, -0.75 * r]]), closed=False)
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.0, 1.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    f0 = FramedCurve(d0, np.tile(e3, (2, 1)), np.tile(-e2, (2, 1)))
    fperp = FramedCurve(dperp, np.tile(e1, (2, 1)), np.tile(-e3, (2, 1)))
    return f0, fperp


def gadget_field(rho: float, r: float, variant: str, profile: DiskProfile = DEFAULT_PROFILE) -> SphereField:
    """Crossing-gadget maps on the 3-cube or the 4-cube boundary.

    "plus": tubes over the two straight crossing strands; "minus": the
    straight strand plus the profile arc mapped by the sheared disk rule;
    the two agree on the boundary of the 3-cube.  "boundary4d" glues them
    over the 4-cube boundary (plus on x4 = +r, minus on x4 = -r, the common
    trace on the lateral faces) and is evaluated at 4-vectors.
    """
    if rho > 1e-2 * r + 1e-15:
        raise FieldError("gadget requires rho <= r/100")
    f0, fperp = _gadget_segments(r)

    plus_eval = _TubeEvaluator([f0, fperp], rho, profile)
    d0_eval = _TubeEvaluator([f0], rho, profile)

    def arc_eval(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d1 = pts[:, 0]
        d2 = -(pts[:, 2] - r * gadget_profile(pts[:, 1] / r))
        rr = np.sqrt(d1**2 + d2**2) / rho
        out = np.tile(SOUTH, (len(pts), 1))
        inside = rr < 1.0
        if np.any(inside):
            ang = np.arctan2(d2[inside], d1[inside])
            sin_part = profile.rf(rr[inside])
            out[inside] = np.stack(
                [sin_part * np.cos(ang), sin_part * np.sin(ang), profile.g(rr[inside])],
                axis=-1,
            )
        return out

    def minus_eval(pts: np.ndarray) -> np.ndarray:
        base = d0_eval(pts)
        arc = arc_eval(pts)
        out = base.copy()
        take = arc[:, 2] > -1.0 + 1e-14
        out[take] = arc[take]
        return out

    if variant == "plus":
        return SphereField(plus_eval, support_radius=math.sqrt(3) * r,
                           note=f"gadget plus (r={r:g}, rho={rho:g})",
                           metadata={"r": r, "rho": rho})
    if variant == "minus":
        return SphereField(minus_eval, support_radius=math.sqrt(3) * r,
                           note=f"gadget minus (r={r:g}, rho={rho:g})",
                           metadata={"r": r, "rho": rho})
    if variant != "boundary4d":
        raise FieldError(f"unknown gadget variant {variant!r}")

    def boundary_eval(pts4: np.ndarray) -> np.ndarray:
        pts4 = np.atleast_2d(np.asarray(pts4, dtype=float))
        out = np.empty((len(pts4), 3))
        top = pts4[:, 3] >= r - 1e-9 * r
        bot = pts4[:, 3] <= -r + 1e-9 * r
        lat = ~(top | bot)
        if np.any(top):
            out[top] = plus_eval(pts4[top, :3])
        if np.any(bot):
            out[bot] = minus_eval(pts4[bot, :3])
        if np.any(lat):
            out[lat] = plus_eval(pts4[lat, :3])
        return out

    return SphereField(
        boundary_eval,
        support_radius=2.0 * r,
        note=f"gadget boundary field on the 4-cube (r={r:g}, rho={rho:g})",
        metadata={"r": r, "rho": rho, "is_4d": True},
    )


def gadget_chart_field(rho: float, r: float, pole=None, profile: DiskProfile = DEFAULT_PROFILE) -> SphereField:
    """The glued 4-cube boundary field pulled to R^3 through the chart.

    Constant south pole outside a bounded set (the chart image of the tube
    region); metadata carries the chart images of the two gadget curves for
    adapted preimage extraction.
    """
    boundary = gadget_field(rho, r, "boundary4d", profile=profile)
    pole_vec = np.asarray(pole if pole is not None else DEFAULT_POLES[0], dtype=float)
    chart = BoundaryChart(pole_vec)

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        y = chart.from_r3(pts)
        cube = chart.sphere_to_cube(y, r)
        return boundary.evaluator(cube)

    l1, l2 = gadget_curves(r, samples=256)
    chart_curves = []
    for c4 in (l1, l2):
        chart_curves.append(Polyline3(chart.to_r3(c4.vertices), closed=True))
    extent = max(c.bounding_radius() for c in chart_curves)
    return SphereField(
        evaluator=evaluate,
        support_radius=4.0 * extent,
        note=f"gadget chart field (r={r:g}, rho={rho:g})",
        metadata={
            "chart": chart,
            "r": r,
            "rho": rho,
            "chart_curves": chart_curves,
            "boundary_field": boundary,
        },
    )
