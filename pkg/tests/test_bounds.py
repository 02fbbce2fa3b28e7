import numpy as np
import pytest

from branchlink.bounds import (
    BoundsError,
    certified_grid_lower_bound,
    charged_lower_bound,
    crazy_step,
    decomposition_lower_bound,
    grid_decomposition_bound,
    grid_lower_bound,
    instance_lower_bound,
    partition_lower_bound,
    scaling_consistency,
)
from branchlink.costs import critical_alpha, kappa1
from branchlink.geometry import BoxDomain
from branchlink.graphs import ChargedConfig


def test_partition_lower_bound():
    assert partition_lower_bound([0.0, 0.0, 0.0]) == 0.0
    assert partition_lower_bound([1.5, 2.5]) == 4.0
    with pytest.raises(BoundsError):
        partition_lower_bound([-1.0])


def test_decomposition_lower_bound_values():
    assert decomposition_lower_bound(1.0, 2.0, 0.5, 10, 0.0, 0.5) == 3.0
    got = decomposition_lower_bound(0.0, 0.0, 1.0, 16, 0.25, 0.5)
    assert np.isclose(got, kappa1(0.5) * 4.0 * 0.25)
    assert np.isclose(got, 0.02210, atol=5e-6)
    # strictly above the plain partition bound when dist > 0
    assert decomposition_lower_bound(1.0, 1.0, 0.5, 4, 0.3, 0.6) > partition_lower_bound(
        [1.0, 1.0]
    )


def test_crazy_step_values():
    m, q = 2, 4
    a_m = critical_alpha(m)
    # at the critical exponent the transfer factor is exactly 1
    assert np.isclose(crazy_step(0.7, m, a_m, q), 0.7 + kappa1(a_m) / (4 * q))
    got = crazy_step(0.0, 2, 0.5, 4)
    assert np.isclose(got, kappa1(0.5) / 16.0)
    assert np.isclose(got, 1.3811e-3, atol=1e-6)
    # iterating ell times from zero at critical alpha gives ell * kappa/(4q)
    xi = 0.0
    for _ in range(5):
        xi = crazy_step(xi, m, a_m, q)
    assert np.isclose(xi, 5 * kappa1(a_m) / 16.0)


def test_grid_lower_bound_closed_form():
    assert grid_lower_bound(2, 1) == (0.0, 0.0)
    lam, xi = grid_lower_bound(2, 16)
    expected_xi = (1.0 / 16.0) * (kappa1(0.5) / 16.0) * 2
    assert np.isclose(xi, expected_xi)
    assert np.isclose(xi, 1.7264e-4, atol=1e-7)
    assert np.isclose(lam, xi * 16.0)
    _, xi_big = grid_lower_bound(2, 4096)
    assert np.isclose(xi_big / xi, 3.0)


def test_grid_lower_bound_monotone_and_unbounded():
    prev = -1.0
    for k in range(1, 200):
        _, xi = grid_lower_bound(2, k)
        assert xi >= prev - 1e-15
        prev = xi
    # unbounded: for any target there is k = q**ell with a larger bound
    # (the closed form grows like kappa1/(4q) * q**-m per q-fold refinement)
    target = 2e-3
    q = 4
    ell = 1
    while grid_lower_bound(2, q**ell)[1] <= target:
        ell += 1
        assert ell < 128
    assert grid_lower_bound(2, q**ell)[1] > target


def test_grid_lower_bound_requires_critical_alpha():
    with pytest.raises(BoundsError):
        grid_lower_bound(2, 8, alpha=0.75)


def _oracle_dec_bound(m, k, alpha):
    # independent re-derivation: brute force over strip counts
    kap = kappa1(alpha)
    n = k**m
    best = 0.0
    for j in range(k):
        per_axis = k - 2 * j - 1
        if per_axis < 1:
            break
        best = max(best, kap * per_axis**m * n ** (alpha - 1.0) * ((j + 0.5) / k))
    return best


@pytest.mark.parametrize("m,k,alpha", [(2, 2, 0.5), (2, 7, 0.5), (4, 3, 0.75), (4, 4, 0.75)])
def test_grid_decomposition_bound_matches_bruteforce(m, k, alpha):
    assert np.isclose(grid_decomposition_bound(m, k, alpha), _oracle_dec_bound(m, k, alpha))


def test_certified_grid_bound_dominates_parts_and_increases():
    m, alpha = 2, 0.5
    xs = []
    for k in (2, 4, 8, 16, 32):
        lam, xi = certified_grid_lower_bound(m, k, alpha)
        assert xi >= grid_lower_bound(m, k)[1] - 1e-15
        assert lam >= grid_decomposition_bound(m, k, alpha) - 1e-15
        xs.append(xi)
    assert all(b > a for a, b in zip(xs, xs[1:]))


def test_certified_grid_bound_m4():
    vals = [certified_grid_lower_bound(4, k, 0.75)[0] / k**3 for k in (1, 2, 3, 4)]
    assert vals[0] == 0.0
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_certified_bound_respects_scaling_consistency():
    lam = {k: certified_grid_lower_bound(2, k, 0.5)[0] for k in range(1, 33)}
    assert scaling_consistency(lam) == []


def test_instance_lower_bound_dominated_by_depth():
    box = BoxDomain.unit(2)
    pts = np.array([[0.5, 0.5]])
    assert instance_lower_bound(pts, box, 0.5) >= 0.5 - 1e-12
    assert instance_lower_bound(np.array([[0.0, 0.5]]), box, 0.5) == 0.0


def test_charged_lower_bound_combinator():
    config = ChargedConfig(
        positives=np.array([[0.25, 0.25], [0.3, 0.3]]),
        negatives=np.array([[0.8, 0.8]]),
    )
    assert charged_lower_bound(config, [], []) == 0.0
    box1 = BoxDomain((0.2, 0.2), (0.4, 0.4))
    assert charged_lower_bound(config, [box1], [0.125]) == 0.125
    with pytest.raises(BoundsError):
        bad = BoxDomain((0.7, 0.7), (0.9, 0.9))
        charged_lower_bound(config, [bad], [0.1])
    with pytest.raises(BoundsError):
        overlapping = [BoxDomain((0.2, 0.2), (0.4, 0.4)), BoxDomain((0.3, 0.3), (0.5, 0.5))]
        charged_lower_bound(config, overlapping, [0.1, 0.1])


def test_scaling_consistency_flags_violation():
    ok = {1: 0.0, 2: 1.0, 4: 2.0}
    assert scaling_consistency(ok) == []
    bad = {2: 5.0, 4: 1.0}
    assert scaling_consistency(bad) == [(2, 4)]
