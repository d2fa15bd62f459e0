"""Model-agnostic finite-quotient machinery.

A *window group* is the finite quotient that a model presents at a given
resolution: the additive group F_p^length for the shift model, GL_n(Z/p^K)
for the linear model.  Elements are canonical packed-integer codes, so that
equal elements always have identical encodings and reports are diffable.

Subgroups of a window are materialized as explicit code sets
(:class:`SubgroupImage`); everything here is immutable and pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from tdlcw import backend, _kernel_pure

#: Sentinel for "inside every filtration level", i.e. the identity.
INF_LEVEL = math.inf

#: Default cap on full-window materialization (spec'd loud-failure bound).
DEFAULT_CAP = 2**16


class ResolutionError(ValueError):
    """An operation would enumerate past the configured cap."""

    def __init__(self, message, cap):
        super().__init__(f"{message} (resolution too fine, cap={cap})")
        self.cap = cap


class ContainmentError(ValueError):
    """V was expected inside U; carries a witness element code."""

    def __init__(self, witness):
        super().__init__(f"subgroup containment fails, witness code {witness}")
        self.witness = witness


class WindowMismatchError(ValueError):
    pass


class UnsupportedElementError(ValueError):
    """The element lies outside the class the requested computation supports."""


@dataclass(frozen=True)
class VectorWindow:
    """Additive group F_p^length with coordinatewise arithmetic."""

    p: int
    length: int

    @property
    def desc(self):
        return ("vec", self.p, self.length)

    @property
    def order(self):
        return self.p**self.length

    @property
    def identity(self):
        return 0

    def mul(self, a, b):
        return _kernel_pure.mul(self.desc, a, b)

    def inv(self, a):
        return _kernel_pure.inv(self.desc, a)

    def encode(self, digits):
        if len(digits) != self.length:
            raise ValueError("digit vector has wrong length")
        return _kernel_pure._vec_encode([d % self.p for d in digits], self.p)

    def decode(self, code):
        return tuple(_kernel_pure._vec_decode(code, self.p, self.length))

    def encode_bytes(self, code):
        return bytes(self.decode(code))

    def elements(self, cap=DEFAULT_CAP):
        if self.order > cap:
            raise ResolutionError("vector window too large", cap)
        return range(self.order)


@dataclass(frozen=True)
class MatrixWindow:
    """GL_n(Z/p^K) with row-major entry packing in base p^K."""

    n: int
    p: int
    K: int

    @property
    def modulus(self):
        return self.p**self.K

    @property
    def desc(self):
        return ("mat", self.n, self.p, self.modulus)

    @property
    def order(self):
        # |GL_n(Z/p^K)| = p^((K-1) n^2) * |GL_n(F_p)|
        n, p = self.n, self.p
        glnp = 1
        for i in range(n):
            glnp *= p**n - p**i
        return p ** ((self.K - 1) * n * n) * glnp

    @property
    def identity(self):
        return _kernel_pure.identity(self.desc)

    def mul(self, a, b):
        return _kernel_pure.mul(self.desc, a, b)

    def inv(self, a):
        return _kernel_pure.inv(self.desc, a)

    def encode(self, entries):
        if len(entries) != self.n * self.n:
            raise ValueError("entry vector has wrong length")
        m = self.modulus
        code = _kernel_pure._mat_encode([e % m for e in entries], m)
        if not self.is_invertible(code):
            raise ValueError("matrix is not invertible modulo p")
        return code

    def decode(self, code):
        return tuple(_kernel_pure._mat_decode(code, self.n, self.modulus))

    def encode_bytes(self, code):
        width = (self.modulus - 1).bit_length() // 8 + 1
        return b"".join(e.to_bytes(width, "big") for e in self.decode(code))

    def det(self, code):
        e = self.decode(code)
        n, m = self.n, self.modulus
        if n == 1:
            return e[0] % m
        if n == 2:
            return (e[0] * e[3] - e[1] * e[2]) % m
        if n == 3:
            return (
                e[0] * (e[4] * e[8] - e[5] * e[7])
                - e[1] * (e[3] * e[8] - e[5] * e[6])
                + e[2] * (e[3] * e[7] - e[4] * e[6])
            ) % m
        raise ValueError(f"unsupported matrix size n={self.n}")

    def is_invertible(self, code):
        return self.det(code) % self.p != 0

    def elements(self, cap=DEFAULT_CAP):
        if self.order > cap:
            raise ResolutionError("matrix window too large", cap)
        m = self.modulus
        total = m ** (self.n * self.n)
        return (c for c in range(total) if self.is_invertible(c))


@dataclass(frozen=True)
class SubgroupImage:
    """A subgroup of a window group, given by its full element set."""

    window: object
    elements: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.elements:
            object.__setattr__(self, "elements", frozenset({self.window.identity}))

    @property
    def order(self):
        return len(self.elements)

    def sorted_codes(self):
        return sorted(self.elements)

    def __contains__(self, code):
        return code in self.elements

    def __le__(self, other):
        _same_window(self, other)
        return self.elements <= other.elements

    def is_subgroup(self):
        """Exhaustive closure check; meant for tests and small images."""
        w = self.window
        if w.identity not in self.elements:
            return False
        for a in self.elements:
            if w.inv(a) not in self.elements:
                return False
            for b in self.elements:
                if w.mul(a, b) not in self.elements:
                    return False
        return True


def _same_window(*images):
    w = images[0].window
    for im in images[1:]:
        if im.window != w:
            raise WindowMismatchError(f"windows differ: {im.window} vs {w}")
    return w


def subgroup_closure(window, gens, cap=DEFAULT_CAP):
    """Smallest subgroup of `window` containing `gens`.

    The cap bounds the materialized subgroup, not the ambient window: a
    small subgroup of a huge window is still computable exactly.
    """
    gens = list(gens)
    try:
        codes = backend.closure(window.desc, gens, cap)
    except ValueError as exc:
        raise ResolutionError(str(exc), cap) from None
    return SubgroupImage(window, frozenset(codes))


def product_set_equals(a, b, t):
    """Decide {xy : x in A, y in B} == T; on failure return a witness in T.

    Returns (True, None) or (False, witness_code).  The product of two
    subgroups always sits inside their join, so the interesting witness is
    an element of T missed by the product set (the tidy-above obstruction).
    """
    window = _same_window(a, b, t)
    # When one factor is all of T (a subgroup) and the other sits inside T,
    # the product is T without enumeration.
    if a.elements == t.elements and b.elements <= t.elements:
        return True, None
    if b.elements == t.elements and a.elements <= t.elements:
        return True, None
    prod = backend.product_set(window.desc, a.sorted_codes(), b.sorted_codes())
    if prod == t.elements:
        return True, None
    missing = sorted(t.elements - prod)
    if missing:
        return False, missing[0]
    # Product strictly larger than T: report the first excess element.
    return False, sorted(prod - t.elements)[0]


def index(u, v):
    """[U : V] for nested subgroup images; errors with a witness otherwise."""
    _same_window(u, v)
    if not v.elements <= u.elements:
        raise ContainmentError(sorted(v.elements - u.elements)[0])
    return u.order // v.order


def intersect(a, b):
    window = _same_window(a, b)
    return SubgroupImage(window, a.elements & b.elements)
