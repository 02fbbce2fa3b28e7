"""Energy integration, preimage extraction, and two Hopf-invariant algorithms.

The Hopf invariant is computed two independent ways:

* preimage route: extract the preimage curves of two regular sphere values
  by marching tetrahedra on the two level sets {u.W1 = 0} and {u.W2 = 0}
  restricted to u.M > 0 (with (W1, W2, M) a direct orthonormal triple),
  orient them by the field gradients, and sum pairwise Gauss linking
  numbers between the two families;
* integral route: the pullback 2-form is assembled from central
  differences on a periodic box, a divergence-free potential is obtained by
  spectral inversion, and the invariant is ``1/(16 pi^2)`` times the
  volume integral of potential . field strength.

Fields whose support is a union of thin tubes (metadata "tubes" or
"chart_curves") are sampled on curve-adapted lattices: a uniform box grid
cannot see features of width 1e-4, but a lattice that follows the tube can,
and the algorithms themselves are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from branchlink.curves import CurveError, Polyline3, gauss_linking
from branchlink.fields import SOUTH, SphereField

TET_SPLIT = (
    (0, 1, 3, 7),
    (0, 1, 7, 5),
    (0, 5, 7, 4),
    (0, 3, 2, 7),
    (0, 2, 6, 7),
    (0, 6, 4, 7),
)
# corner order: (i, j, k) bits -> index 4*i + 2*j + k


class HopfError(ValueError):
    """Numerical failure in extraction or integration."""


@dataclass
class SampledField:
    """Unit-vector samples on a uniform periodic box grid."""

    values: np.ndarray  # (n, n, n, 3)
    box_half: float  # box is [-box_half, box_half]^3
    background: np.ndarray

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_half / self.resolution


def sample_field(field: SphereField, resolution: int, box_half: float | None = None) -> SampledField:
    """Sample on the cell-centered grid of a cube around the support."""
    if box_half is None:
        if field.support_radius is None:
            raise HopfError("field has no declared support; pass box_half explicitly")
        box_half = 1.1 * field.support_radius
    n = int(resolution)
    axis = -box_half + (np.arange(n) + 0.5) * (2.0 * box_half / n)
    out = np.empty((n, n, n, 3))
    for i, x in enumerate(axis):
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([np.full(yy.size, x), yy.ravel(), zz.ravel()], axis=-1)
        out[i] = field(pts).reshape(n, n, 3)
    return SampledField(values=out, box_half=box_half, background=field.background)


# ----------------------------------------------------------------- energies


def _grad_squared(field: SphereField, pts: np.ndarray, step: float) -> np.ndarray:
    """|grad u|^2 by central differences at the given points."""
    total = np.zeros(len(pts))
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = step
        diff = (field(pts + e) - field(pts - e)) / (2.0 * step)
        total += np.einsum("ij,ij->i", diff, diff)
    return total


def energy_p(
    field: SphereField,
    p: float,
    resolution: int = 64,
    box_half: float | None = None,
) -> float:
    """Integral of |grad u|^p by the midpoint rule with central differences.

    Tube-supported fields integrate over curve-adapted cylindrical lattices
    (the field is exactly constant outside the tubes); everything else uses
    a uniform box grid.
    """
    if p < 1:
        raise HopfError("p must be >= 1")
    if resolution < 32:
        raise HopfError("resolution must be >= 32")
    tubes = field.metadata.get("tubes")
    if tubes:
        return _energy_tubes(field, p, resolution)
    return _energy_box(field, p, resolution, box_half)


def _energy_box(field: SphereField, p: float, resolution: int, box_half: float | None) -> float:
    if box_half is None:
        if field.support_radius is None:
            raise HopfError("field has no declared support; pass box_half explicitly")
        box_half = 1.05 * field.support_radius
    n = int(resolution)
    h = 2.0 * box_half / n
    axis = -box_half + (np.arange(n) + 0.5) * h
    total = 0.0
    step = h / 2.0
    for x in axis:
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([np.full(yy.size, x), yy.ravel(), zz.ravel()], axis=-1)
        g2 = _grad_squared(field, pts, step)
        if not np.all(np.isfinite(g2)):
            raise HopfError("non-finite gradient samples")
        total += float(np.sum(g2 ** (p / 2.0))) * h**3
    return total


def _energy_tubes(field: SphereField, p: float, resolution: int) -> float:
    rho = field.metadata["rho"]
    n_r = max(6, resolution // 8)
    n_a = max(8, resolution // 4)
    step = rho / 48.0
    margin = 1.05
    total = 0.0
    r_nodes = (np.arange(n_r) + 0.5) * (margin * rho / n_r)
    a_nodes = (np.arange(n_a) + 0.5) * (2.0 * math.pi / n_a)
    dr = margin * rho / n_r
    da = 2.0 * math.pi / n_a
    rr, aa = np.meshgrid(r_nodes, a_nodes, indexing="ij")
    weights = (rr * dr * da).ravel()
    for fc in field.metadata["tubes"]:
        starts, dirs = fc.curve.segments()
        lens = np.linalg.norm(dirs, axis=1)
        tau1 = fc.tau1[0]
        n = len(fc.curve.vertices)
        for j in range(len(starts)):
            mid = starts[j] + 0.5 * dirs[j]
            t2a = fc.tau2[j]
            t2b = fc.tau2[(j + 1) % n] if fc.curve.closed else fc.tau2[j + 1]
            tau2 = t2a + t2b
            tau2 = tau2 / np.linalg.norm(tau2)
            disk = (
                mid[None, :]
                + (rr.ravel() * np.cos(aa.ravel()))[:, None] * tau1[None, :]
                + (rr.ravel() * np.sin(aa.ravel()))[:, None] * tau2[None, :]
            )
            g2 = _grad_squared(field, disk, step)
            if not np.all(np.isfinite(g2)):
                raise HopfError("non-finite gradient samples")
            total += float(np.sum(g2 ** (p / 2.0) * weights)) * lens[j]
    return total


def sampled_sup_gradient(field: SphereField, resolution: int = 64) -> float:
    """Max |grad u| over the energy quadrature points."""
    tubes = field.metadata.get("tubes")
    best = 0.0
    if tubes:
        rho = field.metadata["rho"]
        step = rho / 48.0
        n_r = max(6, resolution // 8)
        n_a = max(8, resolution // 4)
        r_nodes = (np.arange(n_r) + 0.5) * (rho / n_r)
        a_nodes = (np.arange(n_a) + 0.5) * (2.0 * math.pi / n_a)
        rr, aa = np.meshgrid(r_nodes, a_nodes, indexing="ij")
        for fc in field.metadata["tubes"]:
            starts, dirs = fc.curve.segments()
            tau1 = fc.tau1[0]
            n = len(fc.curve.vertices)
            for j in range(0, len(starts), max(1, len(starts) // 32)):
                mid = starts[j] + 0.5 * dirs[j]
                t2b = fc.tau2[(j + 1) % n] if fc.curve.closed else fc.tau2[j + 1]
                tau2 = fc.tau2[j] + t2b
                tau2 /= np.linalg.norm(tau2)
                disk = (
                    mid[None, :]
                    + (rr.ravel() * np.cos(aa.ravel()))[:, None] * tau1[None, :]
                    + (rr.ravel() * np.sin(aa.ravel()))[:, None] * tau2[None, :]
                )
                best = max(best, float(np.sqrt(_grad_squared(field, disk, step)).max()))
        return best
    if field.support_radius is None:
        raise HopfError("field has no declared support")
    n = resolution
    h = 2.0 * 1.05 * field.support_radius / n
    axis = -1.05 * field.support_radius + (np.arange(n) + 0.5) * h
    for x in axis[:: max(1, n // 32)]:
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([np.full(yy.size, x), yy.ravel(), zz.ravel()], axis=-1)
        best = max(best, float(np.sqrt(_grad_squared(field, pts, h / 2)).max()))
    return best


# ------------------------------------------------------ preimage extraction


def _direct_triple(m_value) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = np.asarray(m_value, dtype=float)
    m = m / np.linalg.norm(m)
    probe = np.array([0.0, 1.0, 0.0]) if abs(m[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
    w1 = np.cross(probe, m)
    w1 /= np.linalg.norm(w1)
    w2 = np.cross(m, w1)
    return w1, w2, m


def _field_tangent(field: SphereField, pts: np.ndarray, w1, w2, step: float) -> np.ndarray:
    """grad(u.W1) x grad(u.W2) by central differences (curve tangent direction)."""
    grads1 = np.zeros((len(pts), 3))
    grads2 = np.zeros((len(pts), 3))
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = step
        dplus = field(pts + e)
        dminus = field(pts - e)
        grads1[:, axis] = (dplus @ w1 - dminus @ w1) / (2 * step)
        grads2[:, axis] = (dplus @ w2 - dminus @ w2) / (2 * step)
    return np.cross(grads1, grads2)


def _march_lattice(
    field: SphereField,
    nodes: np.ndarray,  # (ni, nj, nk, 3) positions
    w1,
    w2,
    m,
    periodic_i: bool,
    min_m_dot: float = 0.5,
) -> list[np.ndarray]:
    """Marching tetrahedra for {u.W1 = 0, u.W2 = 0, u.M > 0} on a warped lattice.

    Returns closed loops as vertex arrays; raises on open chains.
    """
    ni, nj, nk, _ = nodes.shape
    vals = field(nodes.reshape(-1, 3)).reshape(ni, nj, nk, 3)
    f1 = vals @ w1
    f2 = vals @ w2
    fm = vals @ np.asarray(m)

    def node_id(i, j, k):
        return (i % ni) * nj * nk + j * nk + k

    segments = []  # (face_key_a, face_key_b, p_a, p_b)
    i_range = range(ni) if periodic_i else range(ni - 1)
    for i in i_range:
        i2 = (i + 1) % ni
        # candidate cells: some node near the level set and on the M side
        cf1 = np.stack([f1[i], f1[i2]])
        cf2 = np.stack([f2[i], f2[i2]])
        cfm = np.stack([fm[i], fm[i2]])
        for j in range(nj - 1):
            for k in range(nk - 1):
                blk1 = cf1[:, j : j + 2, k : k + 2]
                blk2 = cf2[:, j : j + 2, k : k + 2]
                blkm = cfm[:, j : j + 2, k : k + 2]
                if blkm.max() < min_m_dot:
                    continue
                if blk1.min() > 0 or blk1.max() < 0 or blk2.min() > 0 or blk2.max() < 0:
                    continue
                corner_ids = []
                corner_pos = []
                corner_f = []
                for bi in (0, 1):
                    ii = (i + bi) % ni
                    for bj in (0, 1):
                        for bk in (0, 1):
                            corner_ids.append(node_id(i + bi, j + bj, k + bk))
                            corner_pos.append(nodes[ii, j + bj, k + bk])
                            corner_f.append((f1[ii, j + bj, k + bk], f2[ii, j + bj, k + bk]))
                for tet in TET_SPLIT:
                    seg = _tet_segment(
                        [corner_ids[t] for t in tet],
                        [corner_pos[t] for t in tet],
                        [corner_f[t] for t in tet],
                    )
                    if seg is not None:
                        segments.append(seg)
    if not segments:
        return []

    # filter by u.M at midpoints, then chain by shared faces
    mids = np.array([(0.5 * (s[2] + s[3])) for s in segments])
    keep = field(mids) @ np.asarray(m) > min_m_dot
    segments = [s for s, k in zip(segments, keep) if k]
    if not segments:
        return []
    loops = _chain_segments(segments)

    # orient each loop by the field tangent at a probe point
    scale = float(np.linalg.norm(nodes[0, 0, 0] - nodes[0, 1, 1]))
    out = []
    for loop in loops:
        pts = np.asarray(loop)
        mid_idx = len(pts) // 2
        seg_vec = pts[(mid_idx + 1) % len(pts)] - pts[mid_idx]
        tangent = _field_tangent(
            field, pts[mid_idx][None, :], w1, w2, step=max(scale / 8.0, 1e-9)
        )[0]
        if float(np.dot(tangent, seg_vec)) < 0:
            pts = pts[::-1]
        out.append(pts)
    out.sort(key=lambda a: (round(float(a.mean(axis=0)[0]), 6), round(float(a.mean(axis=0)[1]), 6), round(float(a.mean(axis=0)[2]), 6)))
    return out


def _tet_segment(ids, pos, f):
    """Intersection segment of the two affine level sets with one tetrahedron."""
    hits = []
    faces = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
    for fa in faces:
        a, b, c = fa
        # solve for barycentric zero of (f1, f2) on the face
        m11 = f[a][0] - f[c][0]
        m12 = f[b][0] - f[c][0]
        m21 = f[a][1] - f[c][1]
        m22 = f[b][1] - f[c][1]
        det = m11 * m22 - m12 * m21
        if abs(det) < 1e-300:
            continue
        r1 = -f[c][0]
        r2 = -f[c][1]
        la = (r1 * m22 - r2 * m12) / det
        lb = (m11 * r2 - m21 * r1) / det
        lc = 1.0 - la - lb
        if min(la, lb, lc) < -1e-9:
            continue
        point = la * np.asarray(pos[a]) + lb * np.asarray(pos[b]) + lc * np.asarray(pos[c])
        key = tuple(sorted((ids[a], ids[b], ids[c])))
        hits.append((key, point))
    if len(hits) != 2:
        return None
    (ka, pa), (kb, pb) = hits
    if ka == kb:
        return None
    return (ka, kb, pa, pb)


def _chain_segments(segments) -> list[list[np.ndarray]]:
    by_face: dict = {}
    for idx, (ka, kb, _, _) in enumerate(segments):
        by_face.setdefault(ka, []).append(idx)
        by_face.setdefault(kb, []).append(idx)
    for face, idxs in by_face.items():
        if len(idxs) > 2:
            raise HopfError("non-manifold level-set configuration; refine the lattice")
    used = [False] * len(segments)
    loops = []
    for start in range(len(segments)):
        if used[start]:
            continue
        chain = [segments[start][2], segments[start][3]]
        used[start] = True
        first_face = segments[start][0]
        face = segments[start][1]
        while True:
            nxt = None
            for idx in by_face.get(face, ()):
                if not used[idx]:
                    nxt = idx
                    break
            if nxt is None:
                break
            ka, kb, pa, pb = segments[nxt]
            used[nxt] = True
            if ka == face:
                chain.append(pb)
                face = kb
            else:
                chain.append(pa)
                face = ka
        if face != first_face:
            raise HopfError("open preimage chain; resolution too coarse")
        loops.append(chain[:-1])
    return [lp for lp in loops if len(lp) >= 3]


def _tube_lattice(field: SphereField, curve: Polyline3, half_extent, n_trans: int) -> np.ndarray:
    """Warped lattice nodes around a closed polyline: (n_s, m, m, 3)."""
    v = curve.vertices
    n = len(v)
    nxt = np.roll(v, -1, axis=0)
    prv = np.roll(v, 1, axis=0)
    tan = nxt - prv
    tan /= np.linalg.norm(tan, axis=1)[:, None]
    # parallel-transport-free frame: project a constant seed off the tangent
    seed = np.array([0.57735027, 0.57735027, 0.57735027])
    n1 = seed[None, :] - tan * (tan @ seed)[:, None]
    bad = np.linalg.norm(n1, axis=1) < 1e-6
    if np.any(bad):
        alt = np.array([1.0, 0.0, 0.0])
        n1[bad] = alt[None, :] - tan[bad] * (tan[bad] @ alt)[:, None]
    n1 /= np.linalg.norm(n1, axis=1)[:, None]
    n2 = np.cross(tan, n1)
    t = np.linspace(-1.0, 1.0, n_trans)
    he = np.broadcast_to(np.asarray(half_extent, dtype=float), (n,))
    nodes = (
        v[:, None, None, :]
        + (he[:, None, None, None] * t[None, :, None, None]) * n1[:, None, None, :]
        + (he[:, None, None, None] * t[None, None, :, None]) * n2[:, None, None, :]
    )
    return nodes


def _probe_half_extent(field: SphereField, curve: Polyline3, rho_hint: float) -> np.ndarray:
    """Per-station tube reach: scan outward until the field returns to south."""
    v = curve.vertices
    n = len(v)
    nxt = np.roll(v, -1, axis=0)
    prv = np.roll(v, 1, axis=0)
    tan = nxt - prv
    tan /= np.linalg.norm(tan, axis=1)[:, None]
    seed = np.array([0.57735027, 0.57735027, 0.57735027])
    n1 = seed[None, :] - tan * (tan @ seed)[:, None]
    n1 /= np.maximum(np.linalg.norm(n1, axis=1)[:, None], 1e-12)
    radii = rho_hint * np.geomspace(0.25, 8.0, 24)
    reach = np.full(n, rho_hint)
    for sgn in (1.0, -1.0):
        pts = v[:, None, :] + sgn * radii[None, :, None] * n1[:, None, :]
        vals = field(pts.reshape(-1, 3)).reshape(n, len(radii), 3)
        in_tube = vals[:, :, 2] > -0.999999
        for i in range(n):
            hits = np.nonzero(in_tube[i])[0]
            if len(hits):
                reach[i] = max(reach[i], radii[hits[-1]])
    return reach


def extract_preimage(
    field: SphereField,
    m_value,
    resolution: int = 128,
    box_half: float | None = None,
) -> list[Polyline3]:
    """Closed preimage curves of a regular value, oriented by the field frame.

    Marching tetrahedra on the two level sets {u.W1 = 0} and {u.W2 = 0}
    restricted to u.M > 0; tube-supported fields use adapted lattices around
    their carrier curves, other fields a uniform box lattice.  Open chains
    (resolution too coarse) raise.
    """
    w1, w2, m = _direct_triple(m_value)
    carriers = field.metadata.get("tubes")
    chart_curves = field.metadata.get("chart_curves")
    loops: list[np.ndarray] = []
    if carriers or chart_curves:
        rho = field.metadata["rho"]
        curves = [fc.curve for fc in carriers] if carriers else chart_curves
        n_trans = 13
        for curve in curves:
            base = _resample_closed(curve, max(resolution, 96))
            reach = _probe_half_extent(field, base, rho)
            nodes = _tube_lattice(field, base, 1.6 * reach, n_trans)
            loops.extend(
                _march_lattice(field, nodes, w1, w2, m, periodic_i=True)
            )
    else:
        if box_half is None:
            if field.support_radius is None:
                raise HopfError("field has no declared support; pass box_half")
            box_half = 1.05 * field.support_radius
        n = int(resolution)
        axis = np.linspace(-box_half, box_half, n)
        xx, yy, zz = np.meshgrid(axis, axis, axis, indexing="ij")
        nodes = np.stack([xx, yy, zz], axis=-1)
        loops.extend(_march_lattice(field, nodes, w1, w2, m, periodic_i=False))
    if not loops:
        raise HopfError("no preimage found; value may not be attained")
    return [Polyline3(lp, closed=True) for lp in loops]


def _resample_closed(curve: Polyline3, n: int) -> Polyline3:
    """Arc-length resampling of a closed polyline to exactly n stations."""
    v = curve.vertices
    seg = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    targets = np.linspace(0.0, total, n, endpoint=False)
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, len(v) - 1)
    frac = (targets - s[idx]) / np.maximum(seg[idx], 1e-300)
    nxt = np.roll(v, -1, axis=0)
    pts = v[idx] + frac[:, None] * (nxt[idx] - v[idx])
    return Polyline3(pts, closed=True)


DEFAULT_VALUE_TILT = 0.2


def default_value_pair(rotation: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Near-north and equatorial regular values, optionally rotated about e3."""
    delta = DEFAULT_VALUE_TILT
    c, s = math.cos(rotation), math.sin(rotation)
    m1 = np.array([math.sin(delta) * c, math.sin(delta) * s, math.cos(delta)])
    m2 = np.array([c, s, 0.0])
    return m1, m2


def hopf_preimage(
    field: SphereField,
    resolution: int = 128,
    values: tuple | None = None,
    box_half: float | None = None,
    max_retries: int = 3,
) -> int:
    """Hopf invariant as the linking of two preimage families.

    The two regular values default to a slightly tilted north and an
    equatorial point; extraction failures retry with golden-angle rotated
    values before giving up.
    """
    golden = math.pi * (3.0 - math.sqrt(5.0))
    last_error: Exception | None = None
    for attempt in range(max_retries):
        try:
            if values is not None and attempt == 0:
                m1, m2 = values
            else:
                m1, m2 = default_value_pair(rotation=attempt * golden)
            fam1 = extract_preimage(field, m1, resolution, box_half=box_half)
            fam2 = extract_preimage(field, m2, resolution, box_half=box_half)
            total = 0.0
            for c1 in fam1:
                for c2 in fam2:
                    total += gauss_linking(c1, c2, min_distance=1e-12)
            nearest = round(total)
            if abs(total - nearest) > 0.05:
                raise HopfError(f"preimage linking {total:.4f} is not near an integer")
            return int(nearest)
        except (HopfError, CurveError) as exc:
            last_error = exc
    raise HopfError(f"preimage extraction failed after retries: {last_error}")


# --------------------------------------------------------- Whitehead integral


def hopf_whitehead(sampled: SampledField, boundary_tol: float = 0.5) -> float:
    """Hopf invariant via the gauge-fixed integral on a periodic box.

    Pullback components B_l = u . (d_j u x d_k u) (cyclic) from periodic
    central differences; the divergence-free potential A solves curl A = B
    spectrally; the invariant is 1/(16 pi^2) * integral(A . B).
    """
    u = sampled.values
    n = sampled.resolution
    h = sampled.spacing
    ring = np.concatenate(
        [u[0].reshape(-1, 3), u[-1].reshape(-1, 3), u[:, 0].reshape(-1, 3),
         u[:, -1].reshape(-1, 3), u[:, :, 0].reshape(-1, 3), u[:, :, -1].reshape(-1, 3)]
    )
    dev = np.linalg.norm(ring - ring.mean(axis=0), axis=1).max()
    if dev > boundary_tol:
        raise HopfError(f"non-constant boundary ring (deviation {dev:.3f})")

    def d(axis):
        return (np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * h)

    d1, d2, d3 = d(0), d(1), d(2)
    b = np.empty_like(u)
    b[..., 0] = np.einsum("...i,...i->...", u, np.cross(d2, d3))
    b[..., 1] = np.einsum("...i,...i->...", u, np.cross(d3, d1))
    b[..., 2] = np.einsum("...i,...i->...", u, np.cross(d1, d2))

    k = 2.0 * math.pi * np.fft.fftfreq(n, d=h)
    kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
    k2 = kx**2 + ky**2 + kz**2
    k2[0, 0, 0] = 1.0
    bx = np.fft.fftn(b[..., 0])
    by = np.fft.fftn(b[..., 1])
    bz = np.fft.fftn(b[..., 2])
    # A = i k x B / |k|^2  (divergence-free potential with curl A = B)
    ax = 1j * (ky * bz - kz * by) / k2
    ay = 1j * (kz * bx - kx * bz) / k2
    az = 1j * (kx * by - ky * bx) / k2
    ax[0, 0, 0] = 0.0
    ay[0, 0, 0] = 0.0
    az[0, 0, 0] = 0.0
    a = np.stack(
        [np.real(np.fft.ifftn(ax)), np.real(np.fft.ifftn(ay)), np.real(np.fft.ifftn(az))],
        axis=-1,
    )
    integral = float(np.einsum("...i,...i->", a, b)) * h**3
    return integral / (16.0 * math.pi**2)


# ----------------------------------------------------------------- fiber flux


@dataclass(frozen=True)
class PlanarDisk:
    """Oriented disk region in a plane: center, radius, unit normal."""

    center: tuple
    radius: float
    normal: tuple = (0.0, 0.0, 1.0)

    def frame(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nrm = np.asarray(self.normal, dtype=float)
        nrm = nrm / np.linalg.norm(nrm)
        probe = np.array([1.0, 0.0, 0.0]) if abs(nrm[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        eu = np.cross(probe, nrm)
        eu /= np.linalg.norm(eu)
        ev = np.cross(nrm, eu)
        return eu, ev, nrm

    def reversed(self) -> "PlanarDisk":
        return PlanarDisk(self.center, self.radius, tuple(-np.asarray(self.normal)))


def fiber_flux(field: SphereField, disk: PlanarDisk, resolution: int = 96) -> tuple[float, float]:
    """Flux of the pullback 2-form through the disk: (raw integral, raw / 4 pi).

    The normalized value is the signed count of fiber crossings.  For tube
    fields the integral concentrates on the tube crossings and is evaluated
    on local patches; the disk boundary must stay clear of all tubes.
    """
    eu, ev, nrm = disk.frame()
    center = np.asarray(disk.center, dtype=float)
    tubes = field.metadata.get("tubes")
    step_margin = 2.0

    def pullback(pts: np.ndarray, step: float) -> np.ndarray:
        du = (field(pts + step * eu) - field(pts - step * eu)) / (2 * step)
        dv = (field(pts + step * ev) - field(pts - step * ev)) / (2 * step)
        vals = field(pts)
        return np.einsum("ij,ij->i", vals, np.cross(du, dv))

    if tubes:
        rho = field.metadata["rho"]
        # the disk boundary must stay clear of the tube set
        theta = np.linspace(0, 2 * math.pi, 256, endpoint=False)
        ring = center[None, :] + disk.radius * (
            np.cos(theta)[:, None] * eu[None, :] + np.sin(theta)[:, None] * ev[None, :]
        )
        ring_vals = field(ring)
        if np.any(ring_vals[:, 2] > -1.0 + 1e-9):
            raise HopfError("disk boundary touches a tube")
        total = 0.0
        plane_d = float(np.dot(center, nrm))
        for fc in tubes:
            starts, dirs = fc.curve.segments()
            sa = starts @ nrm - plane_d
            sb = (starts + dirs) @ nrm - plane_d
            crossing = np.nonzero(sa * sb < 0)[0]
            for j in crossing:
                t = sa[j] / (sa[j] - sb[j])
                point = starts[j] + t * dirs[j]
                offset = point - center
                if np.linalg.norm(offset - np.dot(offset, nrm) * nrm) > disk.radius:
                    continue
                cosang = abs(np.dot(dirs[j] / np.linalg.norm(dirs[j]), nrm))
                patch_r = step_margin * rho / max(cosang, 0.2)
                n_loc = 48
                t1 = (np.arange(n_loc) + 0.5) * (2 * patch_r / n_loc) - patch_r
                uu, vv = np.meshgrid(t1, t1, indexing="ij")
                pts = (
                    point[None, :]
                    + uu.ravel()[:, None] * eu[None, :]
                    + vv.ravel()[:, None] * ev[None, :]
                )
                f = pullback(pts, patch_r / n_loc)
                total += float(np.sum(f)) * (2 * patch_r / n_loc) ** 2
        return total, total / (4.0 * math.pi)

    # generic field: polar quadrature over the disk
    n_r = max(24, resolution // 2)
    n_a = max(48, resolution)
    r_nodes = (np.arange(n_r) + 0.5) * (disk.radius / n_r)
    a_nodes = (np.arange(n_a) + 0.5) * (2 * math.pi / n_a)
    rr, aa = np.meshgrid(r_nodes, a_nodes, indexing="ij")
    pts = (
        center[None, :]
        + (rr.ravel() * np.cos(aa.ravel()))[:, None] * eu[None, :]
        + (rr.ravel() * np.sin(aa.ravel()))[:, None] * ev[None, :]
    )
    step = disk.radius / (2 * n_r)
    f = pullback(pts, step)
    weights = rr.ravel() * (disk.radius / n_r) * (2 * math.pi / n_a)
    total = float(np.sum(f * weights))
    return total, total / (4.0 * math.pi)
