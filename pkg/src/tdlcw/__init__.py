"""Finite-resolution workbench for dynamics of totally disconnected groups.

Two exactly-representable model groups (a bilateral shift on lamp
configurations and invertible rational matrices over Q_p) share a common
finite-quotient kernel, so that contraction groups, tidy subgroups, scale
and nubs can be computed and cross-checked at any window resolution.
"""

from tdlcw.kernel import (
    INF_LEVEL,
    DEFAULT_CAP,
    MatrixWindow,
    ResolutionError,
    SubgroupImage,
    VectorWindow,
    index,
    product_set_equals,
    subgroup_closure,
)

__version__ = "0.1.0"

__all__ = [
    "INF_LEVEL",
    "DEFAULT_CAP",
    "MatrixWindow",
    "ResolutionError",
    "SubgroupImage",
    "VectorWindow",
    "index",
    "product_set_equals",
    "subgroup_closure",
    "__version__",
]
