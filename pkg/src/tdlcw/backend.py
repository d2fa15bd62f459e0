"""Backend selection for the hot window-group kernels.

The compiled extension is preferred when it imports and the codes fit in 64
bits; otherwise the pure-Python implementation is used.  Set
``TDLCW_BACKEND=pure`` to force the fallback (useful for benchmarking and
for cross-checking the two implementations).
"""

from __future__ import annotations

import os

from tdlcw import _kernel_pure

_FAST_LIMIT = 2**63 - 1

try:  # pragma: no cover - exercised only when the extension is built
    from tdlcw import _kernel_fast
except ImportError:  # pragma: no cover
    _kernel_fast = None

_forced = os.environ.get("TDLCW_BACKEND", "")
if _forced == "pure" or _kernel_fast is None:
    _active = _kernel_pure
else:
    _active = _kernel_fast

BACKEND_NAME = _active.BACKEND_NAME


def _code_bound(desc):
    if desc[0] == "vec":
        _, p, length = desc
        return p**length
    _, n, _p, m = desc
    return m ** (n * n)


def _usable(desc):
    return _active is _kernel_pure or _code_bound(desc) <= _FAST_LIMIT


def closure(desc, gens, cap):
    impl = _active if _usable(desc) else _kernel_pure
    return impl.closure(desc, list(gens), cap)


def product_set(desc, codes_a, codes_b):
    impl = _active if _usable(desc) else _kernel_pure
    return impl.product_set(desc, list(codes_a), list(codes_b))


def get_backends():
    """All available backend modules, for cross-checks and benchmarks."""
    out = [_kernel_pure]
    if _kernel_fast is not None:
        out.append(_kernel_fast)
    return out
