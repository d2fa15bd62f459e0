"""Model-generic subgroup dynamics for a conjugation automorphism.

Everything here is phrased against the model adapter surface (ShiftModel /
LinearModel): given a compact open subgroup U and an element g acting by
conjugation, compute the parts

    U_+  = intersection of the forward conjugates  g^i U g^-i, i >= 0
    U_-  = intersection of the backward conjugates
    U_0  = U_+ intersect U_-
    U_-- = union of backward conjugates of U_-  (usually not closed)
    U_++ = union of forward conjugates of U_+

test whether U is *tidy above* (U = U_+ U_-) and *tidy below* (U_-- closed,
equivalently U_-- meets U in U_-), locate tidy subgroups, derive the scale
as the index [g U_+ g^-1 : U_+], decide contraction/parabolic membership,
and compute the nub through five independent characterizations that must
agree exactly.

Semi-decisions are three-valued (True / False / INCONCLUSIVE) and never
guess; exact model oracles upgrade them wherever available.
"""

from __future__ import annotations

from dataclasses import dataclass

from tdlcw.kernel import (
    DEFAULT_CAP,
    INF_LEVEL,
    SubgroupImage,
    UnsupportedElementError,
    index,
    intersect,
    product_set_equals,
)
from tdlcw import backend

#: Three-valued "don't know" marker for semi-decisions.
INCONCLUSIVE = "inconclusive"


class HorizonExceededError(RuntimeError):
    """No horizon within the cap produced a conclusive answer."""


class NubDisagreementError(RuntimeError):
    """The nub characterizations disagree: a correctness tripwire, never a
    tolerance issue."""

    def __init__(self, images):
        lines = ", ".join(f"{k}: order {im.order}" for k, im in images.items())
        super().__init__(f"nub characterizations disagree ({lines})")
        self.images = images


@dataclass(frozen=True)
class UParts:
    """The subgroup parts attached to (U, g); see the module docstring.

    u_plus / u_minus / u_zero are compact open descriptors; u_mm / u_pp
    describe the (generally non-closed) unions and only promise membership
    tests plus window images.
    """

    u_plus: object
    u_minus: object
    u_zero: object
    u_mm: object
    u_pp: object


@dataclass(frozen=True)
class TidyReport:
    model: str
    tidy_above: object  # True/False/INCONCLUSIVE
    above_k_failed: object
    above_witness: object
    tidy_below: object
    below_witness: object
    k_used: int
    resolution: int


def u_parts(model, U, g):
    """Symbolic parts when the model supports (U, g); raises otherwise."""
    return model.u_parts_symbolic(U, g)


def u_parts_images(model, U, g, K, horizon=12, cap=DEFAULT_CAP):
    """Window-level (image_K(U_+), image_K(U_-)) via stabilizing intersections.

    Fallback for (U, g) without symbolic parts.  Intersections of window
    images are monotone decreasing, so two equal successive horizons certify
    stabilization; if the horizon is exhausted first, returns None
    (inconclusive) rather than a possibly-wrong answer.
    """

    def stabilized(direction):
        acc = U.window_image(K, cap)
        prev = None
        for i in range(1, horizon + 1):
            acc = intersect(acc, model.conj_open(U, g, direction * i).window_image(K, cap))
            if prev is not None and acc.elements == prev:
                return acc
            prev = acc.elements
        return None

    plus = stabilized(+1)
    minus = stabilized(-1)
    if plus is None or minus is None:
        return None
    return plus, minus


def image_product(a: SubgroupImage, b: SubgroupImage) -> SubgroupImage:
    window = a.window
    codes = backend.product_set(window.desc, a.sorted_codes(), b.sorted_codes())
    return SubgroupImage(window, frozenset(codes))


def is_tidy_above(model, U, g, K, cap=DEFAULT_CAP, parts=None):
    """Check image_k(U_+) * image_k(U_-) = image_k(U) for every k <= K.

    Returns (True, None, None) or (False, k, witness_code) with the smallest
    failing k, or (INCONCLUSIVE, reason, None) when parts are unavailable.
    """
    if parts is None:
        try:
            parts = u_parts(model, U, g)
        except UnsupportedElementError as exc:
            return INCONCLUSIVE, str(exc), None
    for k in range(model.min_level, K + 1):
        a = parts.u_plus.window_image(k, cap)
        b = parts.u_minus.window_image(k, cap)
        t = U.window_image(k, cap)
        ok, witness = product_set_equals(a, b, t)
        if not ok:
            return False, k, witness
    return True, None, None


def tidy_above_procedure(model, U, g, max_k=10, K=None, cap=DEFAULT_CAP):
    """Smallest k <= max_k such that the intersection of the conjugates
    g^i U g^-i for 0 <= i <= k is tidy above; returns (V, k).

    Such a k always exists for a compact open U, but no a-priori bound is
    available, hence the explicit cap.
    """
    if K is None:
        K = model.default_resolution
    V = U
    for k in range(max_k + 1):
        if k > 0:
            V = V.intersect(model.conj_open(U, g, k))
        verdict, _, _ = is_tidy_above(model, V, g, K, cap)
        if verdict is True:
            return V, k
    raise HorizonExceededError(
        f"no tidy-above intersection within max_k={max_k}"
    )


def is_tidy_below(model, U, g, parts=None, horizon=6, K=3, cap=DEFAULT_CAP):
    """Decide whether U_-- is closed, i.e. U_-- meets U in exactly U_-.

    Prefers the model's symbolic certificate; otherwise searches window
    images of the backward conjugates of U_- inside U for an element
    outside U_-.  Returns (True, reason), (False, witness) or
    (INCONCLUSIVE, None).
    """
    if parts is None:
        parts = u_parts(model, U, g)
    cert = model.tidy_below_certificate(U, g, parts)
    if cert is not None and cert[0] is not None:
        return cert
    u_minus_img = parts.u_minus.window_image(K, cap)
    u_img = U.window_image(K, cap)
    for j in range(horizon + 1):
        shifted = model.conj_open(parts.u_minus, g, -j)
        inside = intersect(shifted.window_image(K, cap), u_img)
        extra = inside.elements - u_minus_img.elements
        if extra:
            return False, sorted(extra)[0]
    return INCONCLUSIVE, None


def find_tidy(model, g, K=None, max_k=10, horizon=6, cap=DEFAULT_CAP):
    """A subgroup tidy above and below for g, from the model's candidates."""
    if K is None:
        K = model.default_resolution
    for U in model.tidy_candidates(g, K):
        try:
            V, _ = tidy_above_procedure(model, U, g, max_k, K, cap)
            parts = u_parts(model, V, g)
        except (UnsupportedElementError, HorizonExceededError):
            continue
        below, _ = is_tidy_below(model, V, g, parts, horizon, K, cap)
        if below is True:
            return V
    raise HorizonExceededError("no tidy subgroup found among the candidates")


def scale_index(model, g, K=None, cap=DEFAULT_CAP):
    """The scale of g as the index [g U_+ g^-1 : U_+] at a tidy U.

    Since g U_+ g^-1 need not sit inside the reference compact open, the
    index is evaluated in the conjugation-equivalent form
    [U_+ : g^-1 U_+ g], whose terms are both inside U_+.
    """
    U = find_tidy(model, g)
    parts = u_parts(model, U, g)
    up = parts.u_plus
    down = model.conj_open(up, g, -1)
    if not down <= up:
        raise ValueError("g^-1 U_+ g escapes U_+; U is not tidy (internal bug)")
    if hasattr(up, "image_order") and hasattr(up, "finite_entry_max"):
        if K is None:
            K = max(1, up.finite_entry_max(), down.finite_entry_max())
        a, b = up.image_order(K), down.image_order(K)
        if a % b:
            raise ValueError("image orders not nested (internal bug)")
        return a // b
    if K is None:
        K = 3
    return index(up.window_image(K, cap), down.window_image(K, cap))


def trajectory_contracts(model, g, x, K, N):
    """Resolution-level contraction test: the conjugation orbit g^n x g^-n
    reaches filtration level K and stays there through step N.

    Returns True / False(never reaches K) as a statement *at resolution K
    over horizon N*, not an exact membership decision.
    """
    if x == model.identity or model.proximity_level(x) == INF_LEVEL:
        return True
    y = x
    reached = False
    for n in range(N + 1):
        level = model.proximity_level(y)
        if level == INF_LEVEL or level >= K:
            reached = True
        elif reached:
            return False
        y = model.conjugate(g, y)
    return reached


def con_membership(model, g, x, K=6, N=40):
    """x in con(g)?  Exact via the model oracle when available; otherwise a
    trajectory semi-decision at resolution K (True here means
    true-at-resolution)."""
    try:
        return model.con_oracle(g, x)
    except UnsupportedElementError:
        pass
    if trajectory_contracts(model, g, x, K, N):
        return True
    return INCONCLUSIVE


def par_membership(model, g, x, K=6, N=40):
    """x in par(g) (relatively compact forward orbit)?  Oracle-exact when
    available; the fallback can certify only boundedness up to horizon N."""
    try:
        return model.par_oracle(g, x)
    except UnsupportedElementError:
        pass
    y = x
    for _ in range(N + 1):
        if not model.in_reference(y):
            return INCONCLUSIVE
        y = model.conjugate(g, y)
    return True


def _tidy_intersection_image(model, g, K, J, cap):
    """Window image approximating the intersection of all tidy subgroups,
    via the conjugates g^j V g^-j of each tidy candidate V for |j| <= J."""
    result = None
    for U in model.tidy_candidates(g, K):
        try:
            parts = u_parts(model, U, g)
        except UnsupportedElementError:
            continue
        k_check = min(K, 2, model.default_resolution)
        above, _, _ = is_tidy_above(model, U, g, k_check, cap, parts)
        if above is not True:
            continue
        below, _ = is_tidy_below(model, U, g, parts, K=k_check, cap=cap)
        if below is not True:
            continue
        V = U
        for j in range(-J, J + 1):
            if j:
                V = V.intersect(model.conj_open(U, g, j))
        img = V.window_image(K, cap)
        result = img if result is None else intersect(result, img)
    if result is None:
        raise HorizonExceededError("no tidy candidate usable for the nub")
    return result


def nub_compute(model, g, K, J=2, cap=DEFAULT_CAP):
    """The nub of g at resolution K, cross-validated five ways.

    Characterizations computed as window images:
      tidy:      intersection of (conjugates of) tidy subgroups,
      bco:       closure of the bounded-contraction set con(g) ^ par(g^-1),
      con-par:   closure(con(g)) ^ par(g^-1),
      con-con:   closure(con(g)) ^ closure(con(g^-1)),
      rbco:      intersection over filtration levels V of the relative
                 bounded-contraction sets rbco(g, V).

    Any disagreement raises NubDisagreementError; agreement returns the
    common image together with the per-characterization report.
    """
    g_inv = model.inv(g)
    con_img = model.con_closure_image(g, K, cap)
    images = {
        "tidy": _tidy_intersection_image(model, g, K, J, cap),
        "bco": model.bco_image(g, K, cap),
        "con-par": intersect(con_img, model.par_image(g, K, cap)),
        "con-con": intersect(con_img, model.con_closure_image(g_inv, K, cap)),
    }
    rbco = None
    for v in range(K + 1):
        img = model.rbco_image(g, v, K, cap)
        rbco = img if rbco is None else intersect(rbco, img)
    images["rbco"] = rbco
    reference = images["con-con"]
    report = {name: im.elements == reference.elements for name, im in images.items()}
    if not all(report.values()):
        raise NubDisagreementError(images)
    return reference, report


def tidy_identity_report(model, U, g, K, cap=DEFAULT_CAP, include_tidy_form=None):
    """Window-image identities tying the parts of (U, g) to the contraction
    groups, checked exactly at every level up to K:

      mm:     U_--  =  con(g) U_0          (and U_++ = con(g^-1) U_0)
      minus:  U_-   = (con(g)    ^ U_-) U_0
      plus:   U_+   = (con(g^-1) ^ U_+) U_0
      tidy:   U_-   = (con(g)    ^ U  ) U_0  (only when U is tidy)

    Left factors are computed as window-image intersections, which is exact
    for both models (contraction groups are dense in their closures inside
    each part).  Returns {"levels": per-level dicts, "pass": bool}.
    """
    parts = u_parts(model, U, g)
    g_inv = model.inv(g)
    if include_tidy_form is None:
        above, _, _ = is_tidy_above(model, U, g, K, cap, parts)
        below, _ = is_tidy_below(model, U, g, parts, K=min(K, 3), cap=cap)
        include_tidy_form = above is True and below is True
    levels = []
    for k in range(model.min_level, K + 1):
        con_img = model.con_closure_image(g, k, cap)
        con_inv_img = model.con_closure_image(g_inv, k, cap)
        u0 = parts.u_zero.window_image(k, cap)
        um = parts.u_minus.window_image(k, cap)
        up = parts.u_plus.window_image(k, cap)
        row = {
            "k": k,
            "mm": parts.u_mm.window_image(k, cap).elements
            == image_product(con_img, u0).elements,
            "pp": parts.u_pp.window_image(k, cap).elements
            == image_product(con_inv_img, u0).elements,
            "minus": um.elements
            == image_product(intersect(con_img, um), u0).elements,
            "plus": up.elements
            == image_product(intersect(con_inv_img, up), u0).elements,
        }
        if include_tidy_form:
            u_img = U.window_image(k, cap)
            row["tidy_minus"] = um.elements == image_product(
                intersect(con_img, u_img), u0
            ).elements
            row["tidy_plus"] = up.elements == image_product(
                intersect(con_inv_img, u_img), u0
            ).elements
        levels.append(row)
    ok = all(v for row in levels for key, v in row.items() if key != "k")
    return {"levels": levels, "tidy_form_checked": include_tidy_form, "pass": ok}


def tidy_report(model, U, g, K=3, horizon=6, max_k=10, cap=DEFAULT_CAP):
    """Full tidiness diagnosis of (U, g) for the CLI."""
    try:
        parts = u_parts(model, U, g)
    except UnsupportedElementError:
        imgs = u_parts_images(model, U, g, K, cap=cap)
        if imgs is None:
            return TidyReport(model.name, INCONCLUSIVE, None, None,
                              INCONCLUSIVE, None, 0, K)
        a, b = imgs
        t = U.window_image(K, cap)
        ok, witness = product_set_equals(a, b, t)
        return TidyReport(model.name, ok, None if ok else K, witness,
                          INCONCLUSIVE, None, 0, K)
    above, k_failed, witness = is_tidy_above(model, U, g, K, cap, parts)
    below, below_witness = is_tidy_below(model, U, g, parts, horizon, K, cap)
    return TidyReport(model.name, above, k_failed, witness,
                      below, below_witness, 0, K)
