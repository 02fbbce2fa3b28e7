import json

import numpy as np
import pytest

from branchlink.bounds import charged_lower_bound, instance_lower_bound
from branchlink.costs import CostModel, w_alpha
from branchlink.geometry import BoxDomain
from branchlink.graphs import ChargedConfig, validate_charged
from branchlink.solver import (
    SolveOptions,
    SolverError,
    dyadic_construction,
    local_search,
    oracle_charged,
    oracle_exact,
    solve_brbd,
    solve_charged,
    star_baseline,
)

SQ = BoxDomain.unit(2)
HALF = CostModel.power(0.5)


def test_star_center_of_unit_square():
    sol = star_baseline(np.array([[0.5, 0.5]]), SQ, HALF)
    assert np.isclose(sol.value, 0.5)
    assert sol.graph.validate() == []


def test_star_boundary_source_is_free():
    sol = star_baseline(np.array([[0.0, 0.3]]), SQ, HALF)
    assert sol.value == 0.0
    assert sol.graph.validate() == []


def test_star_k2_grid_sum_of_face_distances():
    from branchlink.geometry import UniformGridSpec, grid_points

    pts = grid_points(UniformGridSpec(dim=2, k=2))
    sol = star_baseline(pts, SQ, HALF)
    # only (0.5, 0.5) is interior; the three boundary-incident points are free
    assert np.isclose(sol.value, 0.5)
    assert sol.graph.validate() == []


def test_dyadic_single_point_equals_star():
    pts = np.array([[0.3, 0.7]])
    star = star_baseline(pts, SQ, HALF)
    dyad = dyadic_construction(pts, SQ, HALF)
    assert np.isclose(dyad.value, star.value, atol=1e-9)
    assert dyad.graph.validate() == []


def test_dyadic_on_grids_is_valid_and_costed():
    from branchlink.geometry import UniformGridSpec, grid_points

    for k in (2, 4, 8):
        pts = grid_points(UniformGridSpec(dim=2, k=k))
        sol = dyadic_construction(pts, SQ, HALF)
        assert sol.graph.validate() == []
        assert np.isclose(sol.value, w_alpha(sol.graph, HALF), atol=1e-9)


def test_local_search_noop_on_single_thread():
    start = star_baseline(np.array([[0.5, 0.5]]), SQ, HALF)
    out = local_search(start, HALF, SolveOptions(seed=1))
    assert np.isclose(out.value, start.value)


def test_local_search_merges_nearby_pair():
    pts = np.array([[0.48, 0.5], [0.52, 0.5]])
    star = star_baseline(pts, SQ, HALF)
    assert np.isclose(star.value, 0.96)
    out = local_search(star, HALF, SolveOptions(seed=1))
    assert out.value < star.value - 0.05
    assert out.graph.validate() == []
    assert np.isclose(out.value, w_alpha(out.graph, HALF), atol=1e-9)


def test_local_search_idempotent():
    pts = np.array([[0.45, 0.5], [0.55, 0.5], [0.5, 0.8]])
    opts = SolveOptions(seed=3)
    first = local_search(star_baseline(pts, SQ, HALF), HALF, opts)
    second = local_search(first, HALF, opts)
    assert np.isclose(second.value, first.value, atol=1e-12)


def test_oracle_1d_separate_exits():
    box = BoxDomain((0.0,), (1.0,))
    pts = np.array([[1.0 / 3.0], [2.0 / 3.0]])
    val = oracle_exact(pts, box, HALF, SolveOptions(lattice_resolution=4))
    # separate exits cost 2/3; merging would cost 1/3 + sqrt(2)/3 ~ 0.8047
    assert np.isclose(val, 2.0 / 3.0, atol=1e-12)


def test_oracle_single_center():
    val = oracle_exact(np.array([[0.5, 0.5]]), SQ, HALF, SolveOptions(lattice_resolution=5))
    assert np.isclose(val, 0.5)


def test_oracle_merges_symmetric_pair_small_alpha():
    model = CostModel.power(0.3)
    pts = np.array([[0.4, 0.5], [0.6, 0.5]])
    star = star_baseline(pts, SQ, model)
    val = oracle_exact(pts, SQ, model, SolveOptions(lattice_resolution=9))
    assert val < star.value - 0.1
    # merged route through the middle: 0.2 + 2^0.3 * 0.5
    assert val <= 0.2 + 2**0.3 * 0.5 + 1e-9


def test_oracle_star_dominates():
    rng = np.random.default_rng(12)
    opts = SolveOptions(lattice_resolution=5)
    for _ in range(12):
        pts = rng.uniform(0.1, 0.9, size=(int(rng.integers(1, 4)), 2))
        star = star_baseline(pts, SQ, HALF)
        val = oracle_exact(pts, SQ, HALF, opts)
        assert val <= star.value + 1e-9


def test_oracle_size_guard():
    with pytest.raises(SolverError):
        oracle_exact(np.random.rand(4, 2), SQ, HALF)
    with pytest.raises(SolverError):
        oracle_exact(np.random.rand(2, 2), SQ, HALF, SolveOptions(lattice_resolution=11))


def test_solve_brbd_bounds_order():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pts = rng.uniform(0.05, 0.95, size=(int(rng.integers(1, 4)), 2))
        sol = solve_brbd(pts, SQ, HALF, SolveOptions(seed=9, iterations=40))
        star = star_baseline(pts, SQ, HALF)
        assert sol.value <= star.value + 1e-9
        assert sol.lower_bound is not None
        assert sol.lower_bound <= sol.value + 1e-9
        assert sol.graph.validate() == []


def test_solve_determinism():
    pts = np.random.default_rng(0).uniform(0.1, 0.9, size=(5, 2))
    a = solve_brbd(pts, SQ, HALF, SolveOptions(seed=7))
    b = solve_brbd(pts, SQ, HALF, SolveOptions(seed=7))
    assert a.value == b.value
    assert json.dumps(a.graph.to_json()) == json.dumps(b.graph.to_json())


def test_scale_equivariance():
    pts = np.array([[0.45, 0.5], [0.55, 0.5], [0.2, 0.8]])
    s = 3.0
    big_box = BoxDomain((0.0, 0.0), (s, s))
    small = solve_brbd(pts, SQ, HALF, SolveOptions(seed=2))
    big = solve_brbd(pts * s, big_box, HALF, SolveOptions(seed=2))
    assert np.isclose(big.value, s * small.value, rtol=1e-9)
    star_small = star_baseline(pts, SQ, HALF)
    star_big = star_baseline(pts * s, big_box, HALF)
    assert np.isclose(star_big.value, s * star_small.value, rtol=1e-12)


def test_subadditivity_sampled():
    rng = np.random.default_rng(21)
    opts = SolveOptions(seed=4, iterations=40)
    viol = 0
    for _ in range(30):
        a = rng.uniform(0.05, 0.45, size=(int(rng.integers(1, 4)), 2))
        b = rng.uniform(0.55, 0.95, size=(int(rng.integers(1, 4)), 2))
        both = solve_brbd(np.vstack([a, b]), SQ, HALF, opts)
        sep = solve_brbd(a, SQ, HALF, opts).value + solve_brbd(b, SQ, HALF, opts).value
        if both.value > sep + 1e-6:
            viol += 1
    assert viol == 0


def test_solve_charged_balanced_pair():
    config = ChargedConfig(positives=np.array([[0.3, 0.5]]), negatives=np.array([[0.7, 0.5]]))
    sol = solve_charged(config, None, HALF)
    assert np.isclose(sol.value, 0.4)
    assert validate_charged(sol.graph, config) == []


def test_solve_charged_unbalanced_needs_boundary():
    config = ChargedConfig(positives=np.array([[0.3, 0.5], [0.6, 0.5]]), negatives=np.array([[0.7, 0.5]]))
    with pytest.raises(SolverError):
        solve_charged(config, None, HALF)
    sol = solve_charged(config, SQ, HALF)
    assert sol.value > 0
    assert validate_charged(sol.graph, config) == []


def test_oracle_charged_dominates_combinator():
    config = ChargedConfig(
        positives=np.array([[0.4, 0.45], [0.45, 0.55]]),
        negatives=np.array([[0.85, 0.85], [0.9, 0.9]]),
    )
    box = SQ
    protected = BoxDomain((0.3, 0.3), (0.7, 0.7))
    inner = instance_lower_bound(config.positives, protected, 0.5)
    lower = charged_lower_bound(config, [protected], [inner])
    upper = oracle_charged(config, box, HALF, SolveOptions(lattice_resolution=5))
    assert lower <= upper + 1e-9


def test_instance_lower_bound_below_oracle():
    rng = np.random.default_rng(8)
    opts = SolveOptions(lattice_resolution=5)
    for _ in range(10):
        pts = rng.uniform(0.1, 0.9, size=(int(rng.integers(1, 4)), 2))
        lb = instance_lower_bound(pts, SQ, 0.5)
        val = oracle_exact(pts, SQ, HALF, opts)
        assert lb <= val + 1e-9
