"""Edge-cost functions and the concave weighted-length functional.

A cost model maps an integer multiplicity d >= 1 to the per-unit-length cost
of an edge carrying d units.  The power law ``d**alpha`` with
``0 < alpha <= 1`` is the default; two tabulated presets cover the sphere-map
energy prices: ``nu3(d) = 2*pi^2*|d|`` (exact) and
``nu2(d) = C_nu * d**(3/4)`` (upper-bound shape with a configurable constant,
the exact values being unknown).

The module also carries the concavity toolbox: the universal constant
``kappa1(alpha) = min(alpha/4, alpha*(1/8)**(alpha+1), 1 - 8**(-alpha))`` and
the inequality

    (d1 + d2)**alpha >= d1**alpha + kappa1(alpha)*min(d2**alpha, d2*d1**(alpha-1))

on which every certified lower bound in :mod:`branchlink.bounds` rests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ALPHA_TOL = 1e-12


class CostModelError(ValueError):
    """Invalid cost-model parameter or spec string."""


def critical_alpha(m: int) -> float:
    """The critical exponent 1 - 1/m in dimension m."""
    if m < 1:
        raise CostModelError("dimension must be >= 1")
    return 1.0 - 1.0 / m


@dataclass(frozen=True)
class CostModel:
    """Multiplicity -> per-unit-length cost.

    ``variant`` is "power" or "tabulated".  Power-law models expose ``alpha``;
    tabulated models expose ``name`` and a callable.  Costs are positive and
    nondecreasing for d >= 1, and power laws with alpha <= 1 are subadditive.
    """

    variant: str
    alpha: float | None = None
    name: str | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.variant == "power":
            if self.alpha is None or not 0.0 < self.alpha <= 1.0 + ALPHA_TOL:
                raise CostModelError(f"alpha must be in (0, 1], got {self.alpha}")
        elif self.variant == "tabulated":
            if self.fn is None or self.name is None:
                raise CostModelError("tabulated model needs a name and a callable")
        else:
            raise CostModelError(f"unknown variant {self.variant!r}")

    @staticmethod
    def power(alpha: float) -> "CostModel":
        return CostModel(variant="power", alpha=float(alpha))

    @staticmethod
    def nu3() -> "CostModel":
        """Exact degree-d sphere-map energy price, 2*pi^2*|d|."""
        return CostModel(
            variant="tabulated",
            name="nu3",
            fn=lambda d: 2.0 * math.pi**2 * np.abs(np.asarray(d, dtype=float)),
        )

    @staticmethod
    def nu2_upper(c_nu: float = 1.0) -> "CostModel":
        """Sublinear Hopf-charge price shape C_nu * d**(3/4)."""
        if c_nu <= 0:
            raise CostModelError("C_nu must be positive")
        return CostModel(
            variant="tabulated",
            name=f"nu2:Cnu={c_nu:g}",
            fn=lambda d: c_nu * np.abs(np.asarray(d, dtype=float)) ** 0.75,
        )

    def cost(self, d) -> np.ndarray | float:
        d_arr = np.asarray(d, dtype=float)
        if np.any(d_arr < 1 - ALPHA_TOL):
            raise CostModelError("multiplicities must be >= 1")
        if self.variant == "power":
            out = d_arr**self.alpha
        else:
            out = np.asarray(self.fn(d_arr), dtype=float)
        return float(out) if np.isscalar(d) or d_arr.ndim == 0 else out

    def spec_string(self) -> str:
        if self.variant == "power":
            return f"alpha:{self.alpha:g}"
        return self.name


def parse_model_spec(spec: str) -> CostModel:
    """CLI model strings: "alpha:0.75", "nu3", "nu2:Cnu=1.0"."""
    spec = spec.strip()
    if spec.startswith("alpha:"):
        try:
            return CostModel.power(float(spec[len("alpha:"):]))
        except ValueError as exc:
            raise CostModelError(f"bad alpha in {spec!r}") from exc
    if spec == "nu3":
        return CostModel.nu3()
    if spec == "nu2":
        return CostModel.nu2_upper()
    if spec.startswith("nu2:"):
        tail = spec[len("nu2:"):]
        if not tail.startswith("Cnu="):
            raise CostModelError(f"bad nu2 spec {spec!r}")
        return CostModel.nu2_upper(float(tail[len("Cnu="):]))
    raise CostModelError(f"unknown model spec {spec!r}")


def kappa1(alpha: float) -> float:
    """min(alpha/4, alpha*(1/8)**(alpha+1), 1 - 8**(-alpha)) for 0 < alpha <= 1."""
    if not 0.0 < alpha <= 1.0 + ALPHA_TOL:
        raise CostModelError(f"alpha must be in (0, 1], got {alpha}")
    return min(
        alpha / 4.0,
        alpha * (1.0 / 8.0) ** (alpha + 1.0),
        1.0 - 8.0 ** (-alpha),
    )


def concavity_holds(d1, d2, alpha: float) -> bool | np.ndarray:
    """Check (d1+d2)^a >= d1^a + kappa1(a)*min(d2^a, d2*d1^(a-1)).

    Accepts scalars or arrays (broadcasting); the comparison allows a tiny
    floating-point slack since the inequality is mathematically strict.
    """
    k = kappa1(alpha)
    d1_arr = np.asarray(d1, dtype=float)
    d2_arr = np.asarray(d2, dtype=float)
    if np.any(d1_arr < 1) or np.any(d2_arr < 1):
        raise CostModelError("d1, d2 must be >= 1")
    lhs = (d1_arr + d2_arr) ** alpha
    rhs = d1_arr**alpha + k * np.minimum(d2_arr**alpha, d2_arr * d1_arr ** (alpha - 1.0))
    ok = lhs >= rhs - 1e-12 * np.maximum(1.0, lhs)
    return bool(ok) if np.isscalar(d1) and np.isscalar(d2) else ok


def w_alpha(graph, model: CostModel) -> float:
    """Weighted length: sum over edges of cost(d(e)) * Euclidean length(e).

    Raises if the graph fails validation (the functional is only defined on
    the balanced graph class).
    """
    report = graph.validate()
    if report:
        raise CostModelError(f"invalid graph: {report[0]}" if report else "invalid graph")
    if not graph.edges:
        return 0.0
    lengths = np.array([graph.edge_length(i) for i in range(len(graph.edges))])
    mults = np.array([e[2] for e in graph.edges], dtype=float)
    return float(np.sum(np.asarray(model.cost(mults)) * lengths))
