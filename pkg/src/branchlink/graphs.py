"""Directed geometric graphs with integer multiplicities and a balance law.

A transport graph routes one unit from each marked source point to the
boundary of its box domain.  At every interior vertex the outgoing
multiplicity equals the incoming multiplicity, plus one at sources (a
Kirchhoff-type conservation law); boundary vertices are exempt.  Edges are
straight segments, an edge and its exact reversal may not both be present,
and multiplicities are stored explicitly and validated rather than solved
for.

The calculus here mirrors the constructions used by the solvers and bounds:
gluing (disjoint superposition with summed multiplicities on identical
edges), subtraction of a subgraph, restriction to a sub-box (with crossing
vertices inserted on the sub-boundary), and the decomposition of a valid
graph into per-source threads plus leftover loops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from branchlink.geometry import BoxDomain, COINCIDENCE_TOL


class GraphError(ValueError):
    """Structurally invalid graph or inadmissible operation."""


def _point_key(p) -> tuple:
    # 1e-9 coincidence tolerance in unit-box scale, via rounding.
    return tuple(np.round(np.asarray(p, dtype=float) / COINCIDENCE_TOL).astype(np.int64).tolist())


@dataclass
class Thread:
    """Loop-free path from a source to the boundary: ordered vertex points."""

    points: np.ndarray  # (q, m)
    source_index: int | None = None
    kind: str = "thread"


@dataclass
class Loop:
    """Closed walk, or a boundary-to-boundary path (both ends on the boundary)."""

    points: np.ndarray
    kind: str = "loop"


class TransportGraph:
    """Directed geometric graph over a box domain.

    vertices: dict id -> point (np.ndarray, shape (m,))
    edges: list of (tail_id, head_id, multiplicity)
    sources: set of vertex ids
    """

    def __init__(self, domain: BoxDomain):
        self.domain = domain
        self.vertices: dict[int, np.ndarray] = {}
        self.edges: list[tuple[int, int, int]] = []
        self.sources: set[int] = set()
        self._key_to_id: dict[tuple, int] = {}
        self._next_id = 0

    # ---------------------------------------------------------------- build

    def add_vertex(self, p) -> int:
        """Add a vertex (or return the existing one within tolerance)."""
        p = np.asarray(p, dtype=float)
        key = _point_key(p)
        if key in self._key_to_id:
            return self._key_to_id[key]
        vid = self._next_id
        self._next_id += 1
        self.vertices[vid] = p
        self._key_to_id[key] = vid
        return vid

    def add_edge(self, tail: int, head: int, d: int = 1) -> None:
        """Add multiplicity d on the directed segment tail->head.

        Identical directed segments accumulate; an exact reversal raises.
        """
        if d < 1:
            raise GraphError("multiplicity must be >= 1")
        if tail == head:
            raise GraphError("zero-length edge")
        for i, (t, h, dd) in enumerate(self.edges):
            if t == tail and h == head:
                self.edges[i] = (t, h, dd + d)
                return
            if t == head and h == tail:
                raise GraphError("anti-parallel edge pair")
        self.edges.append((tail, head, int(d)))

    def add_source(self, p) -> int:
        vid = self.add_vertex(p)
        self.sources.add(vid)
        return vid

    def copy(self) -> "TransportGraph":
        g = TransportGraph(self.domain)
        g.vertices = {i: p.copy() for i, p in self.vertices.items()}
        g.edges = list(self.edges)
        g.sources = set(self.sources)
        g._key_to_id = dict(self._key_to_id)
        g._next_id = self._next_id
        return g

    # ------------------------------------------------------------- geometry

    def edge_length(self, i: int) -> float:
        t, h, _ = self.edges[i]
        return float(np.linalg.norm(self.vertices[h] - self.vertices[t]))

    def is_boundary_vertex(self, vid: int) -> bool:
        return self.domain.on_boundary(self.vertices[vid])

    def total_multiplicity_length(self) -> float:
        return sum(self.edges[i][2] * self.edge_length(i) for i in range(len(self.edges)))

    def segment_multiset(self) -> dict[tuple, int]:
        """Multiset {(tail_key, head_key): multiplicity} for relabel-free equality."""
        out: dict[tuple, int] = {}
        for t, h, d in self.edges:
            key = (_point_key(self.vertices[t]), _point_key(self.vertices[h]))
            out[key] = out.get(key, 0) + d
        return out

    def source_points(self) -> np.ndarray:
        ids = sorted(self.sources)
        if not ids:
            return np.zeros((0, self.domain.dim))
        return np.stack([self.vertices[i] for i in ids])

    # ------------------------------------------------------------- validate

    def validate(self) -> list[str]:
        """Empty report iff the graph satisfies all class conditions."""
        report: list[str] = []
        for vid, p in self.vertices.items():
            if not self.domain.contains(p):
                report.append(f"vertex {vid} outside the domain closure")
        for sid in self.sources:
            if sid not in self.vertices:
                report.append(f"source {sid} is not a vertex")
        seen = set()
        for i, (t, h, d) in enumerate(self.edges):
            if d < 1:
                report.append(f"edge {i} has multiplicity {d} < 1")
            if t not in self.vertices or h not in self.vertices:
                report.append(f"edge {i} references a missing vertex")
                continue
            if np.linalg.norm(self.vertices[h] - self.vertices[t]) <= COINCIDENCE_TOL:
                report.append(f"edge {i} has zero length")
            if (h, t) in seen:
                report.append(f"edges {t}->{h} and {h}->{t} are both present")
            if (t, h) in seen:
                report.append(f"duplicate edge {t}->{h}")
            seen.add((t, h))
        out_flow = {vid: 0 for vid in self.vertices}
        in_flow = {vid: 0 for vid in self.vertices}
        for t, h, d in self.edges:
            if t in out_flow:
                out_flow[t] += d
            if h in in_flow:
                in_flow[h] += d
        for vid in self.vertices:
            if self.is_boundary_vertex(vid):
                continue
            expected = 1 if vid in self.sources else 0
            if out_flow[vid] - in_flow[vid] != expected:
                report.append(
                    f"balance violated at vertex {vid}: out {out_flow[vid]} "
                    f"- in {in_flow[vid]} != {expected}"
                )
        return report

    def boundary_flux(self) -> int:
        """Multiplicity into the boundary minus multiplicity out of it.

        Equals the number of interior sources for a valid graph.
        """
        into = sum(d for t, h, d in self.edges if self.is_boundary_vertex(h))
        outof = sum(d for t, h, d in self.edges if self.is_boundary_vertex(t))
        return into - outof

    def interior_source_count(self) -> int:
        return sum(1 for s in self.sources if not self.is_boundary_vertex(s))

    # ------------------------------------------------------------------- io

    def to_json(self) -> dict:
        verts = [
            {"id": vid, "p": [float(x) for x in self.vertices[vid]]}
            for vid in sorted(self.vertices)
        ]
        edges = [
            {"tail": t, "head": h, "d": d}
            for t, h, d in sorted(self.edges, key=lambda e: (e[0], e[1]))
        ]
        return {
            "dim": self.domain.dim,
            "vertices": verts,
            "edges": edges,
            "sources": sorted(self.sources),
            "domain": self.domain.to_json(),
        }

    @staticmethod
    def from_json(obj: dict) -> "TransportGraph":
        g = TransportGraph(BoxDomain.from_json(obj["domain"]))
        id_map: dict[int, int] = {}
        for v in obj["vertices"]:
            id_map[int(v["id"])] = g.add_vertex(np.asarray(v["p"], dtype=float))
        for e in obj["edges"]:
            g.add_edge(id_map[int(e["tail"])], id_map[int(e["head"])], int(e["d"]))
        for s in obj["sources"]:
            g.sources.add(id_map[int(s)])
        return g

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @staticmethod
    def load(path: str) -> "TransportGraph":
        with open(path, "r", encoding="utf-8") as fh:
            return TransportGraph.from_json(json.load(fh))


# ------------------------------------------------------------------ helpers


def _collinear_overlap(a, b, c, d, tol: float = COINCIDENCE_TOL) -> bool:
    """True if segments [a,b] and [c,d] are collinear with an overlap of positive length."""
    u = b - a
    lu = np.linalg.norm(u)
    if lu <= tol:
        return False
    u = u / lu
    for p in (c, d):
        w = p - a
        if np.linalg.norm(w - np.dot(w, u) * u) > 10 * tol:
            return False
    t0, t1 = sorted((float(np.dot(c - a, u)), float(np.dot(d - a, u))))
    lo = max(0.0, t0)
    hi = min(lu, t1)
    return hi - lo > 10 * tol


def glue(g1: TransportGraph, g2: TransportGraph) -> TransportGraph:
    """Superposition of two graphs; identical directed segments sum multiplicities.

    Preconditions: the source point sets are disjoint, no edge of one graph is
    the exact reversal of an edge of the other, and two edges either coincide
    or meet in at most one point (no partial collinear overlap).
    """
    if g1.domain.dim != g2.domain.dim:
        raise GraphError("dimension mismatch")
    s1 = {_point_key(g1.vertices[s]) for s in g1.sources}
    s2 = {_point_key(g2.vertices[s]) for s in g2.sources}
    if s1 & s2:
        raise GraphError("source sets are not disjoint")

    seg1 = {}
    for t, h, d in g1.edges:
        seg1[(_point_key(g1.vertices[t]), _point_key(g1.vertices[h]))] = (t, h)
    for t, h, _ in g2.edges:
        kt, kh = _point_key(g2.vertices[t]), _point_key(g2.vertices[h])
        if (kh, kt) in seg1:
            raise GraphError("anti-parallel edge pair across the glued graphs")
    for t1, h1, _ in g1.edges:
        a, b = g1.vertices[t1], g1.vertices[h1]
        k1 = (_point_key(a), _point_key(b))
        for t2, h2, _ in g2.edges:
            c, d = g2.vertices[t2], g2.vertices[h2]
            k2 = (_point_key(c), _point_key(d))
            if k1 == k2:
                continue
            if _collinear_overlap(a, b, c, d):
                raise GraphError("partially overlapping non-identical segments")

    out = TransportGraph(g1.domain)
    for g in (g1, g2):
        for t, h, d in g.edges:
            nt = out.add_vertex(g.vertices[t])
            nh = out.add_vertex(g.vertices[h])
            out.add_edge(nt, nh, d)
        for s in g.sources:
            out.add_source(g.vertices[s])
    return out


def subtract(ga: TransportGraph, gb: TransportGraph) -> TransportGraph:
    """The unique graph gc with glue(gc, gb) == ga, when gb is a subgraph of ga."""
    if not set(map(_point_key, (gb.vertices[s] for s in gb.sources))) <= set(
        map(_point_key, (ga.vertices[s] for s in ga.sources))
    ):
        raise GraphError("sources of the subtrahend are not a subset")
    seg_a = ga.segment_multiset()
    seg_b = gb.segment_multiset()
    for key, d in seg_b.items():
        if seg_a.get(key, 0) < d:
            raise GraphError("not a subgraph: edge multiplicities exceed the host")

    out = TransportGraph(ga.domain)
    key_to_point = {}
    for vid, p in ga.vertices.items():
        key_to_point[_point_key(p)] = p
    b_sources = {_point_key(gb.vertices[s]) for s in gb.sources}
    for key, d in seg_a.items():
        rem = d - seg_b.get(key, 0)
        if rem > 0:
            t = out.add_vertex(key_to_point[key[0]])
            h = out.add_vertex(key_to_point[key[1]])
            out.add_edge(t, h, rem)
    for s in ga.sources:
        if _point_key(ga.vertices[s]) not in b_sources:
            out.add_source(ga.vertices[s])
    return out


def _clip_segment_to_box(a: np.ndarray, b: np.ndarray, box: BoxDomain):
    """Parameter interval [t0, t1] of [a,b] inside the closed box, or None."""
    t0, t1 = 0.0, 1.0
    u = b - a
    for i in range(box.dim):
        if abs(u[i]) < 1e-15:
            if a[i] < box.lo[i] - COINCIDENCE_TOL or a[i] > box.hi[i] + COINCIDENCE_TOL:
                return None
            continue
        ta = (box.lo[i] - a[i]) / u[i]
        tb = (box.hi[i] - a[i]) / u[i]
        ta, tb = min(ta, tb), max(ta, tb)
        t0, t1 = max(t0, ta), min(t1, tb)
    if t1 - t0 <= 1e-12:
        return None
    return t0, t1


def restrict(g: TransportGraph, sub: BoxDomain) -> TransportGraph:
    """Restriction to a sub-box: edges clipped at its boundary, crossing vertices inserted.

    The result lives in the graph class of (sources inside sub, boundary of sub).
    An edge lying inside a boundary face counts as inside (measure-zero choice).
    """
    if not g.domain.contains_box(sub):
        raise GraphError("sub-box is not contained in the domain")
    out = TransportGraph(sub)
    for t, h, d in g.edges:
        a, b = g.vertices[t], g.vertices[h]
        clip = _clip_segment_to_box(a, b, sub)
        if clip is None:
            continue
        t0, t1 = clip
        pa = a if t0 <= 0.0 else a + t0 * (b - a)
        pb = b if t1 >= 1.0 else a + t1 * (b - a)
        if np.linalg.norm(pb - pa) <= COINCIDENCE_TOL:
            continue
        nt = out.add_vertex(pa)
        nh = out.add_vertex(pb)
        out.add_edge(nt, nh, d)
    for s in g.sources:
        p = g.vertices[s]
        if sub.contains(p) and not sub.on_boundary(p):
            out.add_source(p)
    return out


def _residual_path_to_boundary(g: TransportGraph, residual: dict, start: int):
    """Simple residual path from start to a boundary vertex (DFS with backtracking)."""
    path = [start]
    on_path = {start}

    def dfs(v: int):
        if g.is_boundary_vertex(v) and len(path) > 1:
            return True
        for i, (t, h, _) in enumerate(g.edges):
            if t != v or residual[i] <= 0 or h in on_path:
                continue
            path.append(h)
            on_path.add(h)
            residual[i] -= 1
            if g.is_boundary_vertex(h) or dfs(h):
                return True
            residual[i] += 1
            on_path.discard(h)
            path.pop()
        return False

    if not dfs(start):
        return None
    return list(path)


def decompose(g: TransportGraph) -> tuple[dict[int, Thread], list[Loop]]:
    """Split a valid graph into one thread per interior source plus leftover loops.

    Greedy per-source construction on residual multiplicities (threads are
    simple paths to the boundary); the leftover balanced part is peeled into
    closed or boundary-to-boundary loops.  Re-gluing everything reproduces
    the original multiplicity multiset exactly.
    """
    report = g.validate()
    if report:
        raise GraphError(f"cannot decompose an invalid graph: {report[0]}")
    residual = {i: d for i, (_, _, d) in enumerate(g.edges)}
    threads: dict[int, Thread] = {}
    for s in sorted(g.sources):
        if g.is_boundary_vertex(s):
            threads[s] = Thread(points=g.vertices[s].reshape(1, -1), source_index=s)
            continue
        path = _residual_path_to_boundary(g, residual, s)
        if path is None:
            raise GraphError(f"no residual thread from source {s}; graph not decomposable")
        threads[s] = Thread(
            points=np.stack([g.vertices[v] for v in path]), source_index=s
        )

    # Leftover edges form a balanced graph with no sources; peel walks off it.
    # Loops may repeat vertices (the curve class allows it), so a plain greedy
    # walk suffices: from a boundary vertex it can only stop at the boundary,
    # from an interior vertex of the fully balanced leftover it closes up.
    loops: list[Loop] = []
    adj: dict[int, list[int]] = {}
    for i, (t, _, _) in enumerate(g.edges):
        adj.setdefault(t, []).append(i)

    def walk_from(start: int, stop_at_boundary: bool) -> list[int]:
        walk = [start]
        v = start
        while True:
            nxt = None
            for i in adj.get(v, ()):
                if residual[i] > 0:
                    nxt = i
                    break
            if nxt is None:
                break
            residual[nxt] -= 1
            v = g.edges[nxt][1]
            walk.append(v)
            if stop_at_boundary and g.is_boundary_vertex(v):
                break
        return walk

    def residual_starts(boundary_only: bool):
        for i, (t, _, _) in enumerate(g.edges):
            if residual[i] > 0 and (not boundary_only or g.is_boundary_vertex(t)):
                return t
        return None

    while True:
        start = residual_starts(boundary_only=True)
        if start is None:
            break
        walk = walk_from(start, stop_at_boundary=True)
        if not g.is_boundary_vertex(walk[-1]):
            raise GraphError("boundary walk stranded in the interior; invalid leftover")
        loops.append(Loop(points=np.stack([g.vertices[w] for w in walk])))
    while True:
        start = residual_starts(boundary_only=False)
        if start is None:
            break
        walk = walk_from(start, stop_at_boundary=False)
        if walk[-1] != walk[0]:
            raise GraphError("interior walk failed to close; invalid leftover")
        loops.append(Loop(points=np.stack([g.vertices[w] for w in walk])))
    return threads, loops


def graph_from_path(points: np.ndarray, domain: BoxDomain, source: bool = True) -> TransportGraph:
    """Thread or loop as a standalone graph with unit multiplicities."""
    g = TransportGraph(domain)
    ids = [g.add_vertex(p) for p in np.asarray(points, dtype=float)]
    for a, b in zip(ids, ids[1:]):
        if a != b:
            g.add_edge(a, b, 1)
    if source and len(ids) > 0:
        g.sources.add(ids[0])
    return g


def reglue(threads: dict[int, Thread], loops: list[Loop], domain: BoxDomain) -> TransportGraph:
    """Superpose decomposition pieces back into one graph (multiplicities add)."""
    out = TransportGraph(domain)
    for s in sorted(threads):
        th = threads[s]
        ids = [out.add_vertex(p) for p in th.points]
        out.sources.add(ids[0])
        for a, b in zip(ids, ids[1:]):
            out.add_edge(a, b, 1)
    for lp in loops:
        ids = [out.add_vertex(p) for p in lp.points]
        for a, b in zip(ids, ids[1:]):
            out.add_edge(a, b, 1)
    return out


@dataclass
class ChargedConfig:
    """Signed point charges: +1 at each positive, -1 at each negative.

    Integer magnitudes >= 1 scale individual charges; points must be distinct.
    """

    positives: np.ndarray
    negatives: np.ndarray
    pos_magnitudes: np.ndarray | None = None
    neg_magnitudes: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.positives = np.atleast_2d(np.asarray(self.positives, dtype=float))
        self.negatives = np.atleast_2d(np.asarray(self.negatives, dtype=float))
        if self.negatives.size == 0:
            self.negatives = np.zeros((0, self.positives.shape[1]))
        if self.pos_magnitudes is None:
            self.pos_magnitudes = np.ones(len(self.positives), dtype=int)
        if self.neg_magnitudes is None:
            self.neg_magnitudes = np.ones(len(self.negatives), dtype=int)
        self.pos_magnitudes = np.asarray(self.pos_magnitudes, dtype=int)
        self.neg_magnitudes = np.asarray(self.neg_magnitudes, dtype=int)
        if np.any(self.pos_magnitudes < 1) or np.any(self.neg_magnitudes < 1):
            raise GraphError("charge magnitudes must be >= 1")
        allpts = np.vstack([self.positives, self.negatives])
        keys = {tuple(np.round(p, 9)) for p in allpts}
        if len(keys) != len(allpts):
            raise GraphError("charge points must be distinct")

    def total_positive(self) -> int:
        return int(self.pos_magnitudes.sum())

    def total_negative(self) -> int:
        return int(self.neg_magnitudes.sum())


def validate_charged(g: TransportGraph, config: ChargedConfig) -> list[str]:
    """Balance report under the signed law: +magnitude at positives, - at negatives."""
    charge_at: dict[tuple, int] = {}
    for p, m in zip(config.positives, config.pos_magnitudes):
        charge_at[_point_key(p)] = int(m)
    for q, m in zip(config.negatives, config.neg_magnitudes):
        charge_at[_point_key(q)] = -int(m)
    report: list[str] = []
    out_flow = {vid: 0 for vid in g.vertices}
    in_flow = {vid: 0 for vid in g.vertices}
    for t, h, d in g.edges:
        out_flow[t] += d
        in_flow[h] += d
    for vid, p in g.vertices.items():
        if g.is_boundary_vertex(vid):
            continue
        expected = charge_at.get(_point_key(p), 0)
        if out_flow[vid] - in_flow[vid] != expected:
            report.append(
                f"signed balance violated at vertex {vid}: "
                f"out-in={out_flow[vid]-in_flow[vid]} expected {expected}"
            )
    return report
