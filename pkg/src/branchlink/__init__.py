"""Branched boundary connections, curve linking, and Hopf-invariant experiments.

The package has three layers:

* transport: axis-aligned box domains (:mod:`~branchlink.geometry`), the
  directed-graph calculus with integer multiplicities (:mod:`~branchlink.graphs`),
  concave edge costs (:mod:`~branchlink.costs`), certified lower bounds
  (:mod:`~branchlink.bounds`) and constructive solvers (:mod:`~branchlink.solver`);
* topology: polygonal curves and linking numbers (:mod:`~branchlink.curves`),
  stadium-curve sheaves and 4-cube gadget curves (:mod:`~branchlink.sheaves`),
  sphere-valued fields (:mod:`~branchlink.fields`) and Hopf-invariant /
  energy machinery (:mod:`~branchlink.hopf`);
* experiments: scaling reports and budget series (:mod:`~branchlink.gridlab`)
  plus the command line front end (:mod:`~branchlink.cli`).
"""

__version__ = "0.1.0"

from branchlink.geometry import BoxDomain, UniformGridSpec, grid_points
from branchlink.graphs import TransportGraph
from branchlink.costs import CostModel, kappa1, w_alpha

__all__ = [
    "BoxDomain",
    "UniformGridSpec",
    "grid_points",
    "TransportGraph",
    "CostModel",
    "kappa1",
    "w_alpha",
    "__version__",
]
