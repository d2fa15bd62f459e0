"""The bilateral shift model: lamp configurations F_p^Z extended by a shift.

Elements are pairs (lamp, m) with the semidirect product law
(a, m)(b, n) = (a + sigma^m b, m + n), where sigma shifts a sequence one
step to the right.  Lamps are exact eventually periodic sequences, so all
group arithmetic is exact and the shift element has a dense, non-closed
contraction group with full nub -- the nub-rich half of the workbench.

Compact open subgroups are "vanish sets": lamp-only subgroups cut out by
requiring coordinates to vanish on a set of the form ray + finite + ray.
The filtration is B_k = W(k) = lamps vanishing on [-k, k].
"""

from __future__ import annotations

from dataclasses import dataclass, field

from tdlcw.epseq import EPSeq
from tdlcw.kernel import (
    DEFAULT_CAP,
    INF_LEVEL,
    SubgroupImage,
    UnsupportedElementError,
    VectorWindow,
    subgroup_closure,
)


@dataclass(frozen=True)
class ShiftElement:
    lamp: EPSeq
    shift: int

    @property
    def p(self):
        return self.lamp.p

    def mul(self, other):
        if self.p != other.p:
            raise ValueError("prime mismatch")
        return ShiftElement(self.lamp.add(other.lamp.shift(self.shift)), self.shift + other.shift)

    def inv(self):
        return ShiftElement(self.lamp.neg().shift(-self.shift), -self.shift)

    def is_identity(self):
        return self.shift == 0 and self.lamp.is_zero()


def shift_identity(p):
    return ShiftElement(EPSeq.zero(p), 0)


def shift_generator(p, m=1):
    return ShiftElement(EPSeq.zero(p), m)


def lamp_element(p, support):
    return ShiftElement(EPSeq.from_support(p, support), 0)


@dataclass(frozen=True)
class VanishSet:
    """Subset of Z of the form (-inf, left] + finite + [right, inf)."""

    left: object = None
    fin: frozenset = frozenset()
    right: object = None
    everything: bool = False

    @classmethod
    def make(cls, left=None, fin=(), right=None, everything=False):
        if everything or (left is not None and right is not None and left >= right - 1):
            return cls(everything=True)
        fin = set(fin)
        if left is not None:
            while left + 1 in fin:
                left += 1
            fin = {i for i in fin if i > left}
        if right is not None:
            while right - 1 in fin:
                right -= 1
            fin = {i for i in fin if i < right}
        if left is not None and right is not None and left >= right - 1:
            return cls(everything=True)
        return cls(left, frozenset(fin), right)

    @classmethod
    def interval(cls, a, b):
        return cls.make(fin=range(a, b + 1))

    @classmethod
    def empty(cls):
        return cls.make()

    def is_empty(self):
        return not self.everything and self.left is None and self.right is None and not self.fin

    def translate(self, t):
        if self.everything:
            return self
        return VanishSet.make(
            None if self.left is None else self.left + t,
            {i + t for i in self.fin},
            None if self.right is None else self.right + t,
        )

    def union(self, other):
        if self.everything or other.everything:
            return VanishSet(everything=True)
        lefts = [x for x in (self.left, other.left) if x is not None]
        rights = [x for x in (self.right, other.right) if x is not None]
        return VanishSet.make(
            max(lefts) if lefts else None,
            self.fin | other.fin,
            min(rights) if rights else None,
        )

    def __contains__(self, i):
        if self.everything:
            return True
        if self.left is not None and i <= self.left:
            return True
        if self.right is not None and i >= self.right:
            return True
        return i in self.fin

    def positions_in(self, lo, hi):
        return [i for i in range(lo, hi + 1) if i in self]

    def __le__(self, other):
        """Subset test (self a subset of other)."""
        if other.everything:
            return True
        if self.everything:
            return False
        if self.left is not None and (other.left is None or self.left > other.left):
            return False
        if self.right is not None and (other.right is None or self.right < other.right):
            return False
        if not all(i in other for i in self.fin):
            return False
        return True


@dataclass(frozen=True)
class ShiftOpen:
    """Compact open subgroup {(a, 0): a vanishes on the vanish set}."""

    p: int
    vanish: VanishSet

    def contains(self, x):
        if x.shift != 0:
            return False
        a = x.lamp
        v = self.vanish
        if v.everything:
            return a.is_zero()
        if v.left is not None:
            if not a.left_tail_is_zero():
                return False
            lo = a.offset - len(a.left)
            if not a.vanishes_on(range(lo, v.left + 1)):
                return False
        if v.right is not None:
            if not a.right_tail_is_zero():
                return False
            hi = a.end + len(a.right)
            if not a.vanishes_on(range(v.right, hi + 1)):
                return False
        return a.vanishes_on(v.fin)

    def window_image(self, K, cap=DEFAULT_CAP):
        window = VectorWindow(self.p, 2 * K + 1)
        gens = []
        for i in range(-K, K + 1):
            if i not in self.vanish:
                digits = [0] * (2 * K + 1)
                digits[i + K] = 1
                gens.append(window.encode(digits))
        return subgroup_closure(window, gens, cap)

    def intersect(self, other):
        return ShiftOpen(self.p, self.vanish.union(other.vanish))

    def __le__(self, other):
        return other.vanish <= self.vanish


@dataclass(frozen=True)
class LampSubspace:
    """Compact open cut out by a linear condition on a window of coordinates.

    The subgroup is {(a, 0): a's restriction to [-K, K] lies in the span of
    `basis`} (mod W(K), which is always included).  When the subspace is a
    coordinate-vanishing set the interval form is recorded, which unlocks
    the symbolic dynamics path.
    """

    p: int
    K: int
    basis: tuple
    interval: object = None  # (a, b) when coordinate-vanishing on [a, b]

    @classmethod
    def from_vanish_interval(cls, p, K, a, b):
        basis = []
        for i in range(-K, K + 1):
            if not (a <= i <= b):
                digits = [0] * (2 * K + 1)
                digits[i + K] = 1
                basis.append(tuple(digits))
        return cls(p, K, tuple(basis), (a, b))

    def as_open(self):
        if self.interval is None:
            raise UnsupportedElementError("subspace has no interval form")
        return ShiftOpen(self.p, VanishSet.interval(*self.interval))

    def contains(self, x):
        if x.shift != 0:
            return False
        window = VectorWindow(self.p, 2 * self.K + 1)
        target = window.encode(list(x.lamp.window(self.K)))
        span = subgroup_closure(window, [window.encode(list(b)) for b in self.basis])
        return target in span.elements

    def window_image(self, K, cap=DEFAULT_CAP):
        if self.interval is not None:
            return self.as_open().window_image(K, cap)
        if K != self.K:
            raise UnsupportedElementError("subspace image only at its own level")
        window = VectorWindow(self.p, 2 * K + 1)
        return subgroup_closure(window, [window.encode(list(b)) for b in self.basis], cap)


def w_subgroup(p, k):
    """The filtration subgroup W(k): lamps vanishing on [-k, k]."""
    return ShiftOpen(p, VanishSet.interval(-k, k))


def reference_open(p):
    """The full compact lamp group, the model's reference compact open."""
    return ShiftOpen(p, VanishSet.empty())


def shift_mul(x, y):
    return x.mul(y)


def con_oracle_shift(g, x):
    """Exact membership of x in the contraction group of g."""
    if g.shift > 0:
        return x.shift == 0 and x.lamp.left_tail_is_zero()
    if g.shift < 0:
        return x.shift == 0 and x.lamp.right_tail_is_zero()
    return x.is_identity()


def nub_oracle_shift(g, K, cap=DEFAULT_CAP):
    """Window image of nub(g): the full lamp window iff g actually shifts."""
    p = g.p
    if g.shift != 0:
        return reference_open(p).window_image(K, cap)
    window = VectorWindow(p, 2 * K + 1)
    return SubgroupImage(window)


@dataclass(frozen=True)
class TailZeroSet:
    """Symbolic non-closed set: lamps whose tail on one side is zero.

    This is the shift model's U_-- (or U_++): the union of the backward
    translates of U_-.  It is dense in the lamp group but not closed, so it
    only ever exists as this tagged descriptor plus window images.
    """

    p: int
    side: str  # "left" or "right" (which tail must vanish)

    def contains(self, x):
        if x.shift != 0:
            return False
        if self.side == "left":
            return x.lamp.left_tail_is_zero()
        return x.lamp.right_tail_is_zero()

    def window_image(self, K, cap=DEFAULT_CAP):
        return reference_open(self.p).window_image(K, cap)


def _forward_union(v, step):
    """Union of v + i*step over i >= 0 (step > 0), in closed form."""
    if v.everything or v.left is not None:
        return VanishSet(everything=True)
    if v.is_empty():
        return v
    pieces = []
    if v.right is not None:
        pieces.append(v.right)
    if v.fin:
        lo, hi = min(v.fin), max(v.fin)
        if set(range(lo, hi + 1)) <= set(v.fin) and hi - lo + 1 >= step:
            pieces.append(lo)
        elif step == 1:
            pieces.append(lo)
        else:
            raise UnsupportedElementError("vanish set not contiguous enough for symbolic parts")
    return VanishSet.make(right=min(pieces))


def _mirror(v):
    if v.everything:
        return v
    return VanishSet.make(
        None if v.right is None else -v.right,
        {-i for i in v.fin},
        None if v.left is None else -v.left,
    )


def forward_vanish_union(v, m):
    """Union of v + i*m over i >= 0, for m of either sign."""
    if m == 0:
        return v
    if m > 0:
        return _forward_union(v, m)
    return _mirror(_forward_union(_mirror(v), -m))


def restrict_right(a, cutoff):
    """The sequence agreeing with `a` on [cutoff, inf), zero below."""
    end = max(cutoff, a.end)
    r = len(a.right)
    right = tuple(a.right[(j + end - a.end) % r] for j in range(r))
    core = tuple(a.value_at(i) for i in range(cutoff, end))
    return EPSeq.make(a.p, (0,), core, cutoff, right)


def restrict_left(a, cutoff):
    """The sequence agreeing with `a` on (-inf, cutoff], zero above."""
    start = min(cutoff + 1, a.offset)
    l = len(a.left)
    left = tuple(a.left[(j - (a.offset - start)) % l] for j in range(l))
    core = tuple(a.value_at(i) for i in range(start, cutoff + 1))
    return EPSeq.make(a.p, left, core, start, (0,))


class ShiftModel:
    """Model adapter: the common surface consumed by the generic dynamics."""

    name = "shift"
    #: Smallest resolution with a meaningful (nontrivial) window group.
    min_level = 0
    #: Resolution at which the generic dynamics checks run by default.
    default_resolution = 3

    def __init__(self, p=2):
        if p > 7:
            raise ValueError("shift model supports p <= 7")
        self.p = p

    # -- element arithmetic -------------------------------------------------

    @property
    def identity(self):
        return shift_identity(self.p)

    def mul(self, x, y):
        return x.mul(y)

    def inv(self, x):
        return x.inv()

    def power(self, g, n):
        out = self.identity
        base = g if n >= 0 else g.inv()
        for _ in range(abs(n)):
            out = out.mul(base)
        return out

    def conjugate(self, g, x):
        return g.mul(x).mul(g.inv())

    def proximity_level(self, x):
        if x.is_identity():
            return INF_LEVEL
        if x.shift != 0:
            return -1
        s = x.lamp.min_abs_support()
        return s - 1

    # -- windows ------------------------------------------------------------

    def window(self, K):
        return VectorWindow(self.p, 2 * K + 1)

    def in_reference(self, x):
        return x.shift == 0

    def project(self, x, K):
        if x.shift != 0:
            raise ValueError("element outside the reference compact open")
        return self.window(K).encode(list(x.lamp.window(K)))

    def project_image(self, image, K):
        """Project a SubgroupImage at some level K' >= K down to level K."""
        src = image.window
        K_src = (src.length - 1) // 2
        if K_src < K:
            raise ValueError("cannot project upward")
        dst = self.window(K)
        drop = K_src - K
        codes = set()
        for code in image.elements:
            digits = src.decode(code)
            codes.add(dst.encode(list(digits[drop : drop + 2 * K + 1])))
        return SubgroupImage(dst, frozenset(codes))

    def filtration(self, k):
        return w_subgroup(self.p, k)

    def reference(self):
        return reference_open(self.p)

    # -- oracles ------------------------------------------------------------

    def con_oracle(self, g, x):
        return con_oracle_shift(g, x)

    def par_oracle(self, g, x):
        return True

    def con_closure_image(self, g, K, cap=DEFAULT_CAP):
        if g.shift != 0:
            return self.reference().window_image(K, cap)
        return SubgroupImage(self.window(K))

    def bco_image(self, g, K, cap=DEFAULT_CAP):
        return self.con_closure_image(g, K, cap)

    def par_image(self, g, K, cap=DEFAULT_CAP):
        return self.reference().window_image(K, cap)

    def rbco_image(self, g, v, K, cap=DEFAULT_CAP):
        if g.shift != 0:
            return self.reference().window_image(K, cap)
        return self.filtration(v).window_image(K, cap)

    def nub_image(self, g, K, cap=DEFAULT_CAP):
        return nub_oracle_shift(g, K, cap)

    # -- symbolic subgroup dynamics -----------------------------------------

    def conj_open(self, U, g, i):
        """f^i(U) for f = conjugation by g, as a vanish-set subgroup."""
        return ShiftOpen(self.p, U.vanish.translate(i * g.shift))

    def u_parts_symbolic(self, U, g):
        from tdlcw.tidy import UParts

        m = g.shift
        v = U.vanish
        if m == 0:
            return UParts(U, U, U, U, U)
        u_plus = ShiftOpen(self.p, forward_vanish_union(v, m))
        u_minus = ShiftOpen(self.p, forward_vanish_union(v, -m))
        zero_vanish = u_plus.vanish.union(u_minus.vanish)
        u_zero = ShiftOpen(self.p, zero_vanish)
        if v.is_empty():
            u_mm, u_pp = U, U
        else:
            u_mm = TailZeroSet(self.p, "left" if m > 0 else "right")
            u_pp = TailZeroSet(self.p, "right" if m > 0 else "left")
        return UParts(u_plus, u_minus, u_zero, u_mm, u_pp)

    def split(self, x, U, g, parts):
        """Factor x = w_minus * w_plus with the factors in U_-/U_+."""
        if g.shift == 0:
            return x, self.identity
        if x.shift != 0 or not U.contains(x):
            raise ValueError("split input must lie in U")
        vm = parts.u_minus.vanish
        if vm.everything:
            return self.identity, x
        if vm.left is not None:
            w_minus_lamp = restrict_right(x.lamp, vm.left + 1)
        elif vm.right is not None:
            w_minus_lamp = restrict_left(x.lamp, vm.right - 1)
        else:
            return x, self.identity
        w_minus = ShiftElement(w_minus_lamp, 0)
        w_plus = w_minus.inv().mul(x)
        if not (parts.u_minus.contains(w_minus) and parts.u_plus.contains(w_plus)):
            raise UnsupportedElementError("interval split failed membership check")
        return w_minus, w_plus

    def adjust_to_contraction(self, t, U, g, parts):
        """U_0 is trivial for vanish-set subgroups once g really shifts, so
        t needs no adjustment; (t, v, adjusted) with v the split-off part."""
        ok = con_oracle_shift(g.inv(), t)
        return t, self.identity, ok

    def tidy_candidates(self, g, K):
        if g.shift != 0:
            return [self.reference()]
        return [self.filtration(k) for k in range(K + 1)]

    def tidy_below_certificate(self, U, g, parts):
        """(True, reason) / (False, witness) / None when undecided."""
        m = g.shift
        if m == 0 or U.vanish.is_empty():
            return True, "U is invariant under conjugation by g"
        # U_-- is the dense tail-zero set; closedness fails exactly when the
        # vanish set leaves room outside U_- inside U.
        vm = parts.u_minus.vanish
        side_left = m > 0
        bound = vm.left if side_left else vm.right
        if bound is None:
            return True, "U_- equals U"
        probe = bound - 2 if side_left else bound + 2
        for _ in range(4 * (abs(bound) + len(U.vanish.fin) + 4)):
            if probe not in U.vanish:
                witness = lamp_element(self.p, {probe: 1})
                return False, witness
            probe += -1 if side_left else 1
        return None, None

    def net_schedule(self, g, n_max):
        """Default shrinking schedule (n, W(n), lamp at n+1) for the shift."""
        if g.shift != 1:
            raise UnsupportedElementError(
                "the default schedule is defined for the unit shift"
            )
        return [
            (n, w_subgroup(self.p, n), lamp_element(self.p, {n + 1: 1}))
            for n in range(1, n_max + 1)
        ]

    # -- sampling and parsing -----------------------------------------------

    def sample_reference(self, rng, count, span=6):
        out = []
        for _ in range(count):
            support = {
                i: rng.randrange(self.p)
                for i in range(-span, span + 1)
                if rng.random() < 0.4
            }
            out.append(lamp_element(self.p, support))
        return out

    def sample_con_elements(self, g, rng, count, span=6):
        if g.shift == 0:
            return [self.identity] * count
        out = []
        for _ in range(count):
            support = {
                i: rng.randrange(self.p)
                for i in range(-span, span + 1)
                if rng.random() < 0.4
            }
            core = EPSeq.from_support(self.p, support)
            if rng.random() < 0.3:
                # nonzero periodic tail on the non-contracting side
                period = tuple(rng.randrange(self.p) for _ in range(rng.randrange(1, 3)))
                if g.shift > 0:
                    core = core.add(EPSeq.make(self.p, (0,), (), span + 1, period))
                else:
                    core = core.add(
                        EPSeq.make(self.p, period, (), -span - 1, (0,))
                    )
            out.append(ShiftElement(core, 0))
        return out

    def parse_element(self, text):
        x = self.identity
        for token in text.split("*"):
            token = token.strip()
            if not token:
                continue
            x = x.mul(self._parse_token(token))
        return x

    def _parse_token(self, token):
        if token.startswith("shift:"):
            return shift_generator(self.p, int(token[len("shift:") :]))
        if token.startswith("lamp:"):
            body = token[len("lamp:") :]
            support = {}
            if body:
                for part in body.split(","):
                    i = int(part)
                    support[i] = (support.get(i, 0) + 1) % self.p
            return lamp_element(self.p, support)
        if token.startswith("lamp-ep:"):
            body = token[len("lamp-ep:") :]
            left_s, core_s, right_s = body.split("|")
            core_word, offset_s = core_s.split("@")
            seq = EPSeq.make(
                self.p,
                tuple(int(c) for c in left_s),
                tuple(int(c) for c in core_word),
                int(offset_s),
                tuple(int(c) for c in right_s),
            )
            return ShiftElement(seq, 0)
        raise ValueError(f"cannot parse shift-model element {token!r}")

    def format_element(self, x):
        a = x.lamp
        parts = []
        if not a.is_zero():
            if a.left_tail_is_zero() and a.right_tail_is_zero():
                support = [
                    str(i)
                    for i in range(a.offset, a.end)
                    for _ in range(a.value_at(i))
                ]
                parts.append("lamp:" + ",".join(support))
            else:
                left = "".join(str(d) for d in a.left)
                core = "".join(str(d) for d in a.core)
                right = "".join(str(d) for d in a.right)
                parts.append(f"lamp-ep:{left}|{core}@{a.offset}|{right}")
        if x.shift != 0 or not parts:
            parts.append(f"shift:{x.shift}")
        return "*".join(parts)
