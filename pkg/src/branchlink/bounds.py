"""Certified lower bounds for branched boundary connections.

All bounds here are numbers derived from proved inequalities, never from
heuristic runs:

* additive partition bound: cost over a domain partition is at least the sum
  of the per-part costs;
* decomposition bound: protecting an inner region Omega_1 at distance
  ``dist`` from the outer boundary adds ``kappa1(alpha)*mu1*N**alpha*dist``
  on top of the per-part bounds, where ``mu1`` is the protected fraction of
  the ``N`` sources;
* grid recursion: one uniform q-subdivision step turns a bound for the
  k-grid into one for the (q*k)-grid, gaining ``kappa1/(4q)`` in normalized
  form (the subdivision needs q >= 4 so the protected cell keeps distance
  1/4 from the boundary);
* closed-form critical bound: iterating the recursion from zero and bridging
  between powers of q yields ``Xi >= q**(-m) * (kappa1/(4q)) * floor(log k / log q)``,
  which is unbounded in k: the logarithmic divergence at the critical
  exponent ``alpha_m = 1 - 1/m``;
* charged combinator: with no negative charge inside any protected box, the
  charged cost dominates the sum of per-box boundary-connection bounds.

``certified_grid_lower_bound`` combines all mechanisms by dynamic
programming over k and is what the scaling experiments report as the
certified column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from branchlink.costs import CostModelError, critical_alpha, kappa1
from branchlink.geometry import BoxDomain

Q_SEARCH_RANGE = range(4, 17)
VALUE_TOL = 1e-9


class BoundsError(ValueError):
    """Invalid bound parameters."""


@dataclass(frozen=True)
class GridBoundParams:
    """Parameters of the uniform-grid bound: dimension, grid size, exponent, subdivision."""

    m: int
    k: int
    alpha: float
    q: int = 4
    depth: int | None = None

    def __post_init__(self) -> None:
        if self.q < 4:
            raise BoundsError("the decomposition step requires q >= 4")
        if self.k < 1:
            raise BoundsError("k must be >= 1")


def partition_lower_bound(values) -> float:
    """Sum of nonnegative per-part lower bounds."""
    arr = np.asarray(values, dtype=float)
    if arr.size and arr.min() < 0:
        raise BoundsError("per-part bounds must be nonnegative")
    return float(arr.sum())


def decomposition_lower_bound(
    l1: float, l2: float, mu1: float, n_sources: int, dist: float, alpha: float
) -> float:
    """L1 + L2 + kappa1(alpha) * mu1 * N**alpha * dist."""
    if min(l1, l2, dist) < 0 or n_sources < 0:
        raise BoundsError("inputs must be nonnegative")
    if not 0 < mu1 <= 1:
        raise BoundsError("mu1 must lie in (0, 1]")
    return l1 + l2 + kappa1(alpha) * mu1 * n_sources**alpha * dist


def crazy_step(xi_k: float, m: int, alpha: float, q: int) -> float:
    """One grid-subdivision step: q**(m(1-alpha)-1) * xi_k + kappa1(alpha)/(4q)."""
    if xi_k < 0:
        raise BoundsError("xi_k must be nonnegative")
    if q < 4:
        raise BoundsError("q must be >= 4")
    return q ** (m * (1.0 - alpha) - 1.0) * xi_k + kappa1(alpha) / (4.0 * q)


def grid_lower_bound(m: int, k: int, alpha: float | None = None) -> tuple[float, float]:
    """Closed-form critical grid bound: returns (Lambda_lb, Xi_lb).

    Xi_lb = max over q in {4..16} of q**(-m) * (kappa1(alpha_m)/(4q)) * floor(log k / log q),
    Lambda_lb = Xi_lb * k**(m-1).  Nondecreasing and unbounded in k.
    """
    a_m = critical_alpha(m)
    if alpha is not None and abs(alpha - a_m) > 1e-12:
        raise BoundsError(f"closed-form grid bound is for the critical exponent {a_m}")
    if k < 1:
        raise BoundsError("k must be >= 1")
    kap = kappa1(a_m)
    xi = 0.0
    for q in Q_SEARCH_RANGE:
        ell = _floor_log_ratio(k, q)
        xi = max(xi, q ** (-m) * (kap / (4.0 * q)) * ell)
    return xi * k ** (m - 1.0), xi


def _floor_log_ratio(k: int, q: int) -> int:
    """floor(log k / log q), computed robustly at exact powers."""
    if k < q:
        return 0
    ell = int(math.floor(math.log(k) / math.log(q)))
    # guard against floating point just below an exact power
    while q ** (ell + 1) <= k:
        ell += 1
    while q**ell > k:
        ell -= 1
    return ell


def grid_decomposition_bound(m: int, k: int, alpha: float) -> float:
    """Protected-box decomposition bound for the unit-cube k-grid (a Lambda value).

    Strips j full layers from each side, protects the inner box at distance
    (j + 1/2)/k, and keeps the best j.  Grid points on the top faces carry no
    cost, so counting all k^m sources in N only weakens (never invalidates)
    the bound.
    """
    if k < 2:
        return 0.0
    kap = kappa1(alpha)
    n = k**m
    best = 0.0
    for j in range((k - 1) // 2 + 1):
        per_axis = k - 2 * j - 1
        if per_axis < 1:
            break
        inner = per_axis**m
        delta = (j + 0.5) / k
        best = max(best, kap * inner * n ** (alpha - 1.0) * delta)
    return best


def certified_grid_lower_bound(m: int, k: int, alpha: float) -> tuple[float, float]:
    """Best certified (Lambda, Xi) for the unit-cube k-grid at exponent alpha.

    Dynamic program combining, for each k' <= k:
      * the protected-box decomposition bound at k',
      * the subdivision recursion from any k'' with k' = q*k'', q >= 4,
      * monotone transfer Xi(k') >= (k''/k')**(m*alpha+1) * Xi(k''),
      * at the critical exponent, the closed-form logarithmic bound.
    """
    if k < 1:
        raise BoundsError("k must be >= 1")
    a_m = critical_alpha(m)
    critical = abs(alpha - a_m) <= 1e-12
    xi = np.zeros(k + 1)
    for kk in range(2, k + 1):
        best = grid_decomposition_bound(m, kk, alpha) / kk ** (m * alpha)
        if critical:
            best = max(best, grid_lower_bound(m, kk)[1])
        for q in Q_SEARCH_RANGE:
            if kk % q == 0 and kk // q >= 1:
                best = max(best, crazy_step(xi[kk // q], m, alpha, q))
        ratios = (np.arange(1, kk) / kk) ** (m * alpha + 1.0)
        best = max(best, float(np.max(ratios * xi[1:kk])))
        xi[kk] = best
    xi_k = float(xi[k])
    return xi_k * k ** (m * alpha), xi_k


def instance_lower_bound(points, box: BoxDomain, alpha: float) -> float:
    """Certified lower bound for a general finite instance in a box.

    Max of (a) the deepest interior source's boundary distance (every unit
    must travel at least that far at cost >= 1 per unit length) and (b) the
    best single protected-box decomposition bound over concentric shrinks of
    the domain.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return 0.0
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    depth = np.minimum((pts - lo).min(axis=1), (hi - pts).min(axis=1))
    depth = np.maximum(depth, 0.0)
    best = float(depth.max())
    n = len(pts)
    kap = kappa1(alpha)
    max_delta = float((hi - lo).min()) / 2.0
    for delta in np.linspace(max_delta / 24.0, max_delta * 0.98, 24):
        inside = depth > delta + 1e-12
        count = int(inside.sum())
        if count == 0:
            continue
        # the proposition needs no source exactly on the protected shell
        if np.any(np.abs(depth - delta) <= 1e-12):
            delta -= 1e-9
        best = max(best, kap * (count / n) * n**alpha * delta)
    return best


def charged_lower_bound(config, protected_boxes, per_box_values) -> float:
    """Sum of per-box boundary-connection bounds, valid when boxes are
    pairwise disjoint and contain no negative charge."""
    boxes = list(protected_boxes)
    values = [float(v) for v in per_box_values]
    if len(boxes) != len(values):
        raise BoundsError("one value per protected box required")
    for i, b1 in enumerate(boxes):
        for q in np.atleast_2d(config.negatives):
            if b1.strictly_contains_point(q):
                raise BoundsError("negative charge inside a protected box")
        for b2 in boxes[i + 1:]:
            overlap = all(
                b1.lo[d] < b2.hi[d] and b2.lo[d] < b1.hi[d] for d in range(b1.dim)
            )
            if overlap:
                raise BoundsError("protected boxes overlap")
    if any(v < 0 for v in values):
        raise BoundsError("per-box bounds must be nonnegative")
    return float(sum(values))


def scaling_consistency(lambda_values: dict[int, float], tol: float = VALUE_TOL) -> list[tuple[int, int]]:
    """Pairs (k', k) with k' <= k violating Lambda(k') <= (k/k') * Lambda(k).

    Only meaningful for certified or exact values; heuristic upper bounds may
    legitimately violate the comparison.
    """
    ks = sorted(lambda_values)
    bad = []
    for i, kp in enumerate(ks):
        for k in ks[i:]:
            if lambda_values[kp] > (k / kp) * lambda_values[k] + tol:
                bad.append((kp, k))
    return bad
