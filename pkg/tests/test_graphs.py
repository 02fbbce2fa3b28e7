import numpy as np
import pytest

from branchlink.costs import CostModel, w_alpha
from branchlink.geometry import BoxDomain
from branchlink.graphs import (
    ChargedConfig,
    GraphError,
    TransportGraph,
    decompose,
    glue,
    graph_from_path,
    reglue,
    restrict,
    subtract,
    validate_charged,
)

from conftest import random_valid_graph


def square() -> BoxDomain:
    return BoxDomain.unit(2)


def single_thread() -> TransportGraph:
    g = TransportGraph(square())
    s = g.add_source([0.5, 0.5])
    b = g.add_vertex([0.5, 0.0])
    g.add_edge(s, b, 1)
    return g


def test_validate_single_thread():
    assert single_thread().validate() == []


def test_validate_flags_missing_outflow():
    g = TransportGraph(square())
    g.add_source([0.5, 0.5])
    report = g.validate()
    assert any("balance" in r for r in report)


def test_validate_flags_bad_multiplicity_balance():
    g = TransportGraph(square())
    s = g.add_source([0.5, 0.5])
    b = g.add_vertex([0.5, 0.0])
    g.edges.append((s, b, 3))  # bypass add_edge to create an unbalanced graph
    assert any("balance" in r for r in g.validate())


def test_anti_parallel_rejected():
    g = TransportGraph(square())
    a = g.add_vertex([0.2, 0.2])
    b = g.add_vertex([0.8, 0.8])
    g.add_edge(a, b, 1)
    with pytest.raises(GraphError):
        g.add_edge(b, a, 1)


def test_glue_identity_on_empty():
    g = single_thread()
    empty = TransportGraph(square())
    glued = glue(g, empty)
    assert glued.segment_multiset() == g.segment_multiset()
    assert len(glued.sources) == 1


def test_glue_two_disjoint_threads_additive_cost():
    g1 = single_thread()
    g2 = TransportGraph(square())
    s = g2.add_source([0.25, 0.5])
    b = g2.add_vertex([0.25, 0.0])
    g2.add_edge(s, b, 1)
    both = glue(g1, g2)
    assert both.validate() == []
    assert len(both.sources) == 2
    model = CostModel.power(0.75)
    assert np.isclose(w_alpha(both, model), w_alpha(g1, model) + w_alpha(g2, model))


def test_glue_shared_edge_sums_multiplicity():
    box = square()
    # two threads sharing the identical final edge [0.5,0.25] -> [0.5,0]
    t1 = graph_from_path(np.array([[0.5, 0.5], [0.5, 0.25], [0.5, 0.0]]), box)
    t2 = graph_from_path(np.array([[0.25, 0.25], [0.5, 0.25], [0.5, 0.0]]), box)
    g = glue(t1, t2)
    assert g.validate() == []
    seg = g.segment_multiset()
    shared = [d for key, d in seg.items() if d == 2]
    assert len(shared) == 1


def test_glue_rejects_duplicate_sources():
    with pytest.raises(GraphError):
        glue(single_thread(), single_thread())


def test_glue_rejects_partial_overlap():
    box = square()
    t1 = graph_from_path(np.array([[0.5, 0.8], [0.5, 0.0]]), box)
    t2 = graph_from_path(np.array([[0.5, 0.6], [0.5, 0.0]]), box)
    with pytest.raises(GraphError):
        glue(t1, t2)


def test_glue_then_subtract_roundtrip():
    rng = np.random.default_rng(7)
    for _ in range(25):
        g1 = random_valid_graph(rng, max_sources=3, max_loops=1)
        g2 = random_valid_graph(rng, max_sources=3, max_loops=1)
        try:
            both = glue(g1, g2)
        except GraphError:
            continue
        back = subtract(both, g2)
        assert back.segment_multiset() == g1.segment_multiset()
        assert {tuple(np.round(p, 9)) for p in back.source_points()} == {
            tuple(np.round(p, 9)) for p in g1.source_points()
        }


def test_subtract_rejects_non_subgraph():
    g = single_thread()
    other = TransportGraph(square())
    s = other.add_source([0.3, 0.3])
    b = other.add_vertex([0.3, 0.0])
    other.add_edge(s, b, 1)
    with pytest.raises(GraphError):
        subtract(g, other)


def test_restrict_graph_inside_is_unchanged():
    g = single_thread()
    sub = BoxDomain((0.25, 0.0), (0.75, 0.75))
    r = restrict(g, sub)
    assert r.segment_multiset() == g.segment_multiset()
    assert r.validate() == []


def test_restrict_edge_crossing_inserts_boundary_vertex():
    box = square()
    g = graph_from_path(np.array([[0.5, 0.9], [0.5, 0.0]]), box)
    sub = BoxDomain((0.0, 0.0), (1.0, 0.5))
    r = restrict(g, sub)
    assert r.validate() == []
    # clipped at x2 = 0.5: one edge from (0.5, 0.5) down to (0.5, 0.0)
    assert len(r.edges) == 1
    pts = sorted(tuple(p) for p in r.vertices.values())
    assert (0.5, 0.5) in pts
    # the source at (0.5, 0.9) fell outside the sub-box
    assert len(r.sources) == 0


def test_restrict_then_validate_on_random_instances():
    rng = np.random.default_rng(11)
    sub = BoxDomain((0.2, 0.2), (0.8, 0.8))
    count = 0
    for _ in range(20):
        g = random_valid_graph(rng, max_sources=4, max_loops=1)
        r = restrict(g, sub)
        assert r.validate() == []
        count += 1
    assert count == 20


def test_decompose_single_thread():
    g = single_thread()
    threads, loops = decompose(g)
    assert len(threads) == 1 and not loops
    th = next(iter(threads.values()))
    assert np.allclose(th.points[0], [0.5, 0.5])
    assert np.allclose(th.points[-1], [0.5, 0.0])


def test_decompose_two_disjoint_threads():
    g1 = single_thread()
    g2 = TransportGraph(square())
    s = g2.add_source([0.25, 0.5])
    b = g2.add_vertex([0.25, 0.0])
    g2.add_edge(s, b, 1)
    both = glue(g1, g2)
    threads, loops = decompose(both)
    assert len(threads) == 2 and not loops


def test_decompose_thread_plus_boundary_loop():
    box = square()
    th = single_thread()
    # boundary-to-boundary loop: down the left edge region
    lp = graph_from_path(
        np.array([[0.0, 0.25], [0.2, 0.25], [0.2, 0.75], [0.0, 0.75]]), box, source=False
    )
    g = glue(th, lp)
    assert g.validate() == []
    threads, loops = decompose(g)
    assert len(threads) == 1
    assert len(loops) == 1
    again = reglue(threads, loops, box)
    assert again.segment_multiset() == g.segment_multiset()


def test_decompose_reglue_randomized():
    rng = np.random.default_rng(3)
    for _ in range(60):
        g = random_valid_graph(rng, max_sources=8, max_loops=2)
        threads, loops = decompose(g)
        again = reglue(threads, loops, g.domain)
        assert again.segment_multiset() == g.segment_multiset()
        assert again.validate() == []


def test_boundary_flux_identity():
    rng = np.random.default_rng(5)
    for _ in range(40):
        g = random_valid_graph(rng, max_sources=6, max_loops=2)
        assert g.boundary_flux() == g.interior_source_count()


def test_graph_json_roundtrip(tmp_path):
    g = single_thread()
    path = tmp_path / "graph.json"
    g.save(str(path))
    h = TransportGraph.load(str(path))
    assert h.segment_multiset() == g.segment_multiset()
    assert h.validate() == []
    # canonical ordering in the serialized form
    obj = g.to_json()
    assert [v["id"] for v in obj["vertices"]] == sorted(v["id"] for v in obj["vertices"])


def test_charged_config_and_validation():
    box = square()
    config = ChargedConfig(
        positives=np.array([[0.3, 0.5]]), negatives=np.array([[0.7, 0.5]])
    )
    g = TransportGraph(box)
    p = g.add_vertex([0.3, 0.5])
    q = g.add_vertex([0.7, 0.5])
    g.add_edge(p, q, 1)
    assert validate_charged(g, config) == []
    bad = TransportGraph(box)
    bad.add_vertex([0.3, 0.5])
    bad.add_vertex([0.7, 0.5])
    assert validate_charged(bad, config) != []


def test_charged_config_rejects_duplicates():
    with pytest.raises(GraphError):
        ChargedConfig(positives=np.array([[0.5, 0.5]]), negatives=np.array([[0.5, 0.5]]))
