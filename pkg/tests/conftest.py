"""Shared generators for randomized graph-calculus properties."""

from __future__ import annotations

import numpy as np

from branchlink.geometry import BoxDomain, nearest_boundary_point
from branchlink.graphs import TransportGraph, glue, graph_from_path


def random_thread_points(rng: np.random.Generator, box: BoxDomain, n_mid: int) -> np.ndarray:
    """Source point, a few interior waypoints, then a boundary exit."""
    m = box.dim
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    pts = [lo + (hi - lo) * rng.uniform(0.05, 0.95, size=m)]
    for _ in range(n_mid):
        pts.append(lo + (hi - lo) * rng.uniform(0.05, 0.95, size=m))
    pts.append(nearest_boundary_point(pts[-1], box))
    # drop accidental duplicates
    out = [pts[0]]
    for p in pts[1:]:
        if np.linalg.norm(p - out[-1]) > 1e-6:
            out.append(p)
    return np.stack(out)


def random_loop_points(rng: np.random.Generator, box: BoxDomain) -> np.ndarray:
    """Closed triangle loop strictly inside the box."""
    m = box.dim
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    while True:
        tri = [lo + (hi - lo) * rng.uniform(0.1, 0.9, size=m) for _ in range(3)]
        sides = [np.linalg.norm(tri[i] - tri[(i + 1) % 3]) for i in range(3)]
        if min(sides) > 1e-3:
            break
    return np.stack(tri + [tri[0]])


def random_valid_graph(
    rng: np.random.Generator,
    m: int = 2,
    max_sources: int = 8,
    max_loops: int = 2,
) -> TransportGraph:
    """Random element of the graph class: glued loop-free threads plus loops."""
    box = BoxDomain.unit(m)
    n_src = int(rng.integers(1, max_sources + 1))
    g = TransportGraph(box)
    for _ in range(n_src):
        for _attempt in range(40):
            pts = random_thread_points(rng, box, n_mid=int(rng.integers(0, 3)))
            t = graph_from_path(pts, box, source=True)
            try:
                g = glue(g, t)
                break
            except Exception:
                continue
    for _ in range(int(rng.integers(0, max_loops + 1))):
        for _attempt in range(40):
            lp = graph_from_path(random_loop_points(rng, box), box, source=False)
            try:
                g = glue(g, lp)
                break
            except Exception:
                continue
    return g
