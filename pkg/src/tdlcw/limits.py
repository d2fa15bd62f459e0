"""Conjugator construction and convergence instrumentation.

Given g, a compact open U tidy above for g, and u in U, the inductive
algorithm builds a conjugator t in U_+ with

    t^-1 (gu)^k t = b_k g^k,   b_k in U,   for 0 <= k <= N,

entirely by exact arithmetic; the per-step data is kept as a replayable
certificate.  A two-sided variant runs the same induction for g^-1 and
combines the results into r with the identity holding for |k| <= N.

Because the construction is truncated at stage N rather than passed to a
limit, the conjugator transports contraction groups exactly at the shift
model (where the conjugator is a lamp and lamps commute) and *at finite
resolution* in the linear model: the transported samples contract to the
filtration level backed by the certificate horizon.  The Chabauty-distance
instrument quantifies exactly this: two closed subgroups of the reference
compact open are compared window-by-window, and the distance is 2^-m for
the first level m where they differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from tdlcw import tidy
from tdlcw.kernel import (
    DEFAULT_CAP,
    INF_LEVEL,
    WindowMismatchError,
)


class HypothesisError(ValueError):
    """A checked precondition of the construction fails."""


class TransportError(RuntimeError):
    """A transported sample escapes the target contraction group."""

    def __init__(self, message, counterexample):
        super().__init__(message)
        self.counterexample = counterexample


@dataclass(frozen=True)
class TraceStep:
    n: int
    c: object        # u * t_n * b_{n,n}, the element split at this step
    w_minus: object
    w_plus: object
    y: object        # g^-n w_plus^-1 g^n
    t_next: object


@dataclass(frozen=True)
class ConjugatorTrace:
    """Certificate of the forward construction; replayable independently."""

    model_name: str
    g: object
    u: object
    U: object
    horizon: int
    steps: tuple
    t: object
    certificates: tuple  # b_k for k = 0..horizon

    def replay(self, model):
        """Re-verify every certificate identity by exact multiplication."""
        gu = model.mul(self.g, self.u)
        t_inv = model.inv(self.t)
        ok = True
        for k, b in enumerate(self.certificates):
            lhs = model.mul(model.mul(t_inv, model.power(gu, k)), self.t)
            rhs = model.mul(b, model.power(self.g, k))
            ok = ok and lhs == rhs and self.U.contains(b)
        return ok


@dataclass(frozen=True)
class TwoSidedTrace:
    model_name: str
    g: object
    u: object
    U: object
    horizon: int
    forward: ConjugatorTrace      # for (g, u), yields t in U_+
    backward: ConjugatorTrace     # for (g^-1, g u^-1 g^-1), yields s in U_-
    r: object
    certificates: dict            # k -> b_k for -horizon <= k <= horizon

    def replay(self, model):
        gu = model.mul(self.g, self.u)
        r_inv = model.inv(self.r)
        ok = True
        for k, b in self.certificates.items():
            lhs = model.mul(model.mul(r_inv, model.power(gu, k)), self.r)
            rhs = model.mul(b, model.power(self.g, k))
            ok = ok and lhs == rhs and self.U.contains(b)
        return ok


def _certificate(model, g, gu, t, U, k):
    b = model.mul(
        model.mul(model.mul(model.inv(t), model.power(gu, k)), t),
        model.power(g, -k),
    )
    if not U.contains(b):
        raise HypothesisError(f"certificate b_{k} escapes U")
    return b


def conjugator_forward(model, g, u, U, N, parts=None, check_tidy=True):
    """Stage-N conjugator for the perturbation g -> gu, with certificates."""
    if not U.contains(u):
        raise HypothesisError("u must lie in U")
    if parts is None:
        parts = tidy.u_parts(model, U, g)
    if check_tidy:
        verdict, k, _ = tidy.is_tidy_above(model, U, g, max(model.min_level, 1))
        if verdict is not True:
            raise HypothesisError(f"U is not tidy above for g (level {k})")
    gu = model.mul(g, u)
    t = model.identity
    steps = []
    for n in range(N):
        b_nn = _certificate(model, g, gu, t, U, n)
        c = model.mul(model.mul(u, t), b_nn)
        w_minus, w_plus = model.split(c, U, g, parts)
        y = model.mul(
            model.mul(model.power(g, -n), model.inv(w_plus)), model.power(g, n)
        )
        t = model.mul(t, y)
        steps.append(TraceStep(n, c, w_minus, w_plus, y, t))
    if not parts.u_plus.contains(t):
        raise HypothesisError("constructed conjugator escapes U_+")
    certs = tuple(_certificate(model, g, gu, t, U, k) for k in range(N + 1))
    return ConjugatorTrace(model.name, g, u, U, N, tuple(steps), t, certs)


def adjust_to_contraction(model, t, U, g, parts=None):
    """Strip the U_0 part of t so the remainder contracts under g^-1.

    Returns (t', v, adjusted): t = t' * v with v in U_0 and t' in
    con(g^-1) ^ U_+ when the model can split; otherwise t unchanged with
    adjusted=False.
    """
    if parts is None:
        parts = tidy.u_parts(model, U, g)
    return model.adjust_to_contraction(t, U, g, parts)


def conjugator_two_sided(model, g, u, U, N, check_tidy=True):
    """Conjugator r with certificates on both sides of the horizon.

    Requires u in U and in g^-1 U g.  Runs the forward construction for
    (g, u) and for (g^-1, g u^-1 g^-1), splits t^-1 s = w_- w_+ in U, and
    combines r = t w_- (so that also r = s w_+^-1).
    """
    if not U.contains(u):
        raise HypothesisError("u must lie in U")
    if not U.contains(model.conjugate(g, u)):
        raise HypothesisError("u must lie in g^-1 U g")
    g_inv = model.inv(g)
    u_back = model.conjugate(g, model.inv(u))
    forward = conjugator_forward(model, g, u, U, N, check_tidy=check_tidy)
    backward = conjugator_forward(model, g_inv, u_back, U, N, check_tidy=check_tidy)
    t, s = forward.t, backward.t
    parts = tidy.u_parts(model, U, g)
    mix = model.mul(model.inv(t), s)
    w_minus, _w_plus = model.split(mix, U, g, parts)
    r = model.mul(t, w_minus)
    gu = model.mul(g, u)
    certs = {}
    for k in range(-N, N + 1):
        b = model.mul(
            model.mul(model.mul(model.inv(r), model.power(gu, k)), r),
            model.power(g, -k),
        )
        if not U.contains(b):
            raise HypothesisError(f"two-sided certificate b_{k} escapes U")
        certs[k] = b
    return TwoSidedTrace(model.name, g, u, U, N, forward, backward, r, certs)


def _transported_member(model, h, x, K, N):
    """Is x in con(h), exactly or at resolution K over horizon N?"""
    verdict = tidy.con_membership(model, h, x, K, N)
    if verdict is True:
        return True
    return tidy.trajectory_contracts(model, h, x, K, N)


def con_transport_check(model, g, u, U, t, rng, samples=50, K=3, N=10):
    """Transport of contraction groups along t: samples of con(g) conjugated
    by t must land in con(gu), and vice versa.

    Membership on the target side is certified at resolution K over horizon
    N (exact where the model oracle applies); a failure raises
    TransportError with the counterexample.
    """
    gu = model.mul(g, u)
    t_inv = model.inv(t)
    checked = 0
    for c in model.sample_con_elements(g, rng, samples):
        x = model.mul(model.mul(t, c), t_inv)
        if not _transported_member(model, gu, x, K, N):
            raise TransportError("t con(g) t^-1 sample escapes con(gu)", c)
        checked += 1
    for c in model.sample_con_elements(gu, rng, samples):
        x = model.mul(model.mul(t_inv, c), t)
        if not _transported_member(model, g, x, K, N):
            raise TransportError("t^-1 con(gu) t sample escapes con(g)", c)
        checked += 1
    return {"samples": checked, "resolution": K, "horizon": N, "pass": True}


def nub_transport_check(model, g, u, U, r, K=3, cap=DEFAULT_CAP):
    """Window-image equality of r nub(g) r^-1 and nub(gu) at resolution K."""
    gu = model.mul(g, u)
    nub_g, _ = tidy.nub_compute(model, g, K, cap=cap)
    nub_gu, _ = tidy.nub_compute(model, gu, K, cap=cap)
    window = nub_g.window
    rc = model.project(r, K)
    rc_inv = window.inv(rc)
    conjugated = frozenset(
        window.mul(window.mul(rc, c), rc_inv) for c in nub_g.elements
    )
    if conjugated != nub_gu.elements:
        raise TransportError(
            "conjugated nub image differs from nub(gu) image",
            (sorted(conjugated), nub_gu.sorted_codes()),
        )
    return {"resolution": K, "order": nub_gu.order, "pass": True}


# -- Chabauty instrumentation ------------------------------------------------


@dataclass(frozen=True)
class ChabautyDistance:
    """Either 2^-level (first window level that distinguishes) or certified
    indistinguishability at the comparison resolution."""

    indistinguishable: bool
    level: int

    @property
    def value(self):
        if self.indistinguishable:
            return Fraction(0)
        return Fraction(1, 2**self.level)

    def as_json(self):
        if self.indistinguishable:
            return f"indist@{self.level}"
        return {"num": 1, "log2_denom": self.level}

    def __le__(self, other):
        return self.value <= other.value


@dataclass(frozen=True)
class ClosedSubgroupApprox:
    """Per-level window images of a closed subgroup of the reference
    compact open; the finite-resolution stand-in for a Chabauty point."""

    label: str
    min_level: int
    images: tuple

    @classmethod
    def build(cls, model, label, image_fn, K):
        images = tuple(image_fn(k) for k in range(model.min_level, K + 1))
        return cls(label, model.min_level, images)

    @property
    def top_level(self):
        return self.min_level + len(self.images) - 1

    def image_at(self, k):
        return self.images[k - self.min_level]

    def coherent(self, model):
        """Images must project onto each other between adjacent levels."""
        for k in range(self.min_level, self.top_level):
            projected = model.project_image(self.image_at(k + 1), k)
            if projected.elements != self.image_at(k).elements:
                return False
        return True


def chabauty_distance(a: ClosedSubgroupApprox, b: ClosedSubgroupApprox):
    if a.min_level != b.min_level or a.top_level != b.top_level:
        raise WindowMismatchError("approximations compare only at equal resolution")
    for k in range(a.min_level, a.top_level + 1):
        if a.image_at(k).elements != b.image_at(k).elements:
            return ChabautyDistance(False, k)
    return ChabautyDistance(True, a.top_level)


def con_closure_approx(model, g, K, cap=DEFAULT_CAP, label=None):
    return ClosedSubgroupApprox.build(
        model,
        label or "con-closure",
        lambda k: model.con_closure_image(g, k, cap),
        K,
    )


def nub_approx(model, g, K, cap=DEFAULT_CAP, label=None):
    return ClosedSubgroupApprox.build(
        model, label or "nub", lambda k: model.nub_image(g, k, cap), K
    )


# -- the convergence experiment ----------------------------------------------


def _level_json(level):
    return "inf" if level == INF_LEVEL else level


def net_experiment(model, g, schedule, K, trace_horizon=None, cap=DEFAULT_CAP):
    """Instrument a shrinking schedule (n, U_n, u_n) of perturbations of g.

    For each n the forward and two-sided conjugators are built (the forward
    construction asserts t_n in (U_n)_+), and the contraction-closure and
    nub approximations of g u_n are compared against those of g with the
    Chabauty instrument.  Returns one JSON-ready row per n.
    """
    if trace_horizon is None:
        trace_horizon = K + 4
    ref_con = con_closure_approx(model, g, K, cap)
    ref_nub = nub_approx(model, g, K, cap)
    rows = []
    previous_U = None
    for n, U_n, u_n in schedule:
        if previous_U is not None and not (U_n <= previous_U):
            raise HypothesisError(f"schedule not shrinking at n={n}")
        previous_U = U_n
        if not U_n.contains(u_n):
            raise HypothesisError(f"u_{n} outside U_{n}")
        try:
            forward = conjugator_forward(model, g, u_n, U_n, trace_horizon)
            two = conjugator_two_sided(model, g, u_n, U_n, trace_horizon)
        except HypothesisError as exc:
            raise HypothesisError(f"schedule fails at n={n}: {exc}") from exc
        gu_n = model.mul(g, u_n)
        d_con = chabauty_distance(ref_con, con_closure_approx(model, gu_n, K, cap))
        d_nub = chabauty_distance(ref_nub, nub_approx(model, gu_n, K, cap))
        rows.append(
            {
                "experiment": "net-limit",
                "model": model.name,
                "n": n,
                "level_u": _level_json(model.proximity_level(u_n)),
                "level_t": _level_json(model.proximity_level(forward.t)),
                "level_r": _level_json(model.proximity_level(two.r)),
                "d_con": d_con.as_json(),
                "d_nub": d_nub.as_json(),
                "pass": True,
            }
        )
    return rows
