"""Command-line workbench: deterministic experiments over the two models.

Every command emits JSON-lines rows (one JSON object per line) to stdout
and, with --out, to a file; the exit status is 0 exactly when every row has
pass=true.  All randomness flows from the single --seed, so identical
configurations produce byte-identical output.

A JSON config file (--config) may supply any of the shared settings; flags
given on the command line win over the file.  Unknown config keys are
rejected.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, fields

from tdlcw import limits, tidy, verify
from tdlcw.epseq import EPSeq
from tdlcw.kernel import INF_LEVEL, UnsupportedElementError
from tdlcw.linear import (
    LinearModel,
    ShapeSubgroup,
    iwahori_shape,
    scale_formula,
)
from tdlcw.shift import (
    ShiftModel,
    lamp_element,
    shift_generator,
    w_subgroup,
)


@dataclass
class RunConfig:
    """Shared run settings; every field has a documented range."""

    model: str = None          # "shift" | "linear" | None (= both batteries)
    p: int = 2                 # prime, 2..7
    n: int = 2                 # matrix size for the linear model, 2..3
    resolution: int = None     # window level K, 0..8
    horizon: int = 12          # certificate / experiment horizon N, 0..64
    max_k: int = 10            # cap on the tidying intersection depth, 0..32
    seed: int = 0
    samples: int = 50          # transport sample size, 1..1000
    out: str = None

    _RANGES = {
        "p": (2, 7),
        "n": (2, 3),
        "resolution": (0, 8),
        "horizon": (0, 64),
        "max_k": (0, 32),
        "samples": (1, 1000),
    }

    def validate(self):
        if self.model not in (None, "shift", "linear"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.p not in (2, 3, 5, 7):
            raise ValueError("p must be one of 2, 3, 5, 7")
        for name, (lo, hi) in self._RANGES.items():
            value = getattr(self, name)
            if value is not None and not lo <= value <= hi:
                raise ValueError(f"{name} must be in [{lo}, {hi}], got {value}")
        return self

    @classmethod
    def from_args(cls, args):
        cfg = cls()
        if getattr(args, "config", None):
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
            known = {f.name for f in fields(cls) if not f.name.startswith("_")}
            unknown = set(data) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            for key, value in data.items():
                setattr(cfg, key, value)
        for f in fields(cls):
            value = getattr(args, f.name, None)
            if value is not None:
                setattr(cfg, f.name, value)
        return cfg.validate()


def build_model(cfg, name=None):
    name = name or cfg.model
    if name == "shift":
        return ShiftModel(cfg.p)
    if name == "linear":
        return LinearModel(cfg.p, cfg.n)
    raise ValueError("a model is required for this command (--model)")


def battery_models(cfg):
    """The models a battery command runs over: the configured one, or the
    default cross-model battery when --model is omitted."""
    if cfg.model:
        return [build_model(cfg)]
    return [ShiftModel(2), LinearModel(2, 2), LinearModel(3, 2)]


def default_g(model):
    if model.name == "shift":
        return shift_generator(model.p, 1)
    entries = ";".join(
        ",".join(str(model.p if r == s == 0 else (1 if r == s else 0))
                 for s in range(model.n))
        for r in range(model.n)
    )
    return model.parse_element(entries)


def default_subgroup(model, g=None):
    if model.name == "shift":
        return w_subgroup(model.p, 1)
    basis = model.eigen_data(g if g is not None else default_g(model))[0]
    return ShapeSubgroup(basis, iwahori_shape(model.n))


def parse_subgroup(model, text, g=None):
    if model.name == "shift":
        if text.startswith(("W:", "w:")):
            return w_subgroup(model.p, int(text[2:]))
        raise ValueError(f"cannot parse shift-model subgroup {text!r} (use W:k)")
    shape = model.parse_shape(text).shape
    basis = model.eigen_data(g if g is not None else default_g(model))[0]
    return ShapeSubgroup(basis, shape)


def format_subgroup(model, U):
    if model.name == "shift":
        v = U.vanish
        fin = sorted(v.fin)
        if v.left is None and v.right is None and not fin:
            return "W:none"
        if fin and v.left is None and v.right is None:
            lo, hi = fin[0], fin[-1]
            if fin == list(range(lo, hi + 1)) and lo == -hi:
                return f"W:{hi}"
        return f"vanish:{v.left},{fin},{v.right}"
    return ";".join(
        ",".join("inf" if e == INF_LEVEL else str(int(e)) for e in row)
        for row in U.shape
    )


def _level(value):
    return "inf" if value == INF_LEVEL else value


def _verdict(value):
    return value if isinstance(value, (bool, str)) else str(value)


# -- commands ---------------------------------------------------------------


def cmd_scale(cfg, args):
    rows = []
    for model in battery_models(cfg):
        g = _element_arg(model, args) or default_g(model)
        value = tidy.scale_index(model, g)
        if model.name == "linear":
            formula = scale_formula(g)
        else:
            # Conjugation by any shift-model element preserves the lamp
            # group, so every element is uniscalar.
            formula = 1
        agree = value == formula
        rows.append({
            "experiment": "scale",
            "model": model.name,
            "params": {"g": model.format_element(g), "p": model.p},
            "scale": value,
            "formula": formula,
            "agree": agree,
            "pass": agree,
        })
    return rows


def cmd_tidy(cfg, args):
    rows = []
    for model in battery_models(cfg):
        g = _element_arg(model, args) or default_g(model)
        if args.subgroup and cfg.model:
            U = parse_subgroup(model, args.subgroup, g)
        else:
            U = default_subgroup(model, g)
        K = cfg.resolution if cfg.resolution is not None else model.default_resolution
        V, k = tidy.tidy_above_procedure(model, U, g, cfg.max_k, K)
        parts = tidy.u_parts(model, V, g)
        below, below_witness = tidy.is_tidy_below(model, V, g, parts, K=K)
        witness = None
        if below is False:
            witness = model.format_element(below_witness)
        rows.append({
            "experiment": "tidy",
            "model": model.name,
            "params": {
                "g": model.format_element(g),
                "U": format_subgroup(model, U),
                "resolution": K,
            },
            "k": k,
            "V": format_subgroup(model, V),
            "tidy_below": _verdict(below),
            "witness": witness,
            "pass": True,
        })
    return rows


def cmd_con_test(cfg, args):
    rows = []
    for model in battery_models(cfg):
        g = _element_arg(model, args) or default_g(model)
        x = model.parse_element(args.x) if args.x else model.identity
        K = cfg.resolution if cfg.resolution is not None else model.default_resolution
        in_con = tidy.con_membership(model, g, x, K, cfg.horizon)
        in_par = tidy.par_membership(model, g, x, K, cfg.horizon)
        rows.append({
            "experiment": "con-test",
            "model": model.name,
            "params": {
                "g": model.format_element(g),
                "x": model.format_element(x),
                "resolution": K,
                "horizon": cfg.horizon,
            },
            "in_con": _verdict(in_con),
            "in_par": _verdict(in_par),
            "pass": True,
        })
    return rows


def cmd_nub(cfg, args):
    rows = []
    for model in battery_models(cfg):
        g = _element_arg(model, args) or default_g(model)
        K = cfg.resolution if cfg.resolution is not None else model.default_resolution
        try:
            image, report = tidy.nub_compute(model, g, K)
            rows.append({
                "experiment": "nub",
                "model": model.name,
                "params": {"g": model.format_element(g), "resolution": K},
                "order": image.order,
                "characterizations": report,
                "pass": True,
            })
        except tidy.NubDisagreementError as exc:
            rows.append({
                "experiment": "nub",
                "model": model.name,
                "params": {"g": model.format_element(g), "resolution": K},
                "order": None,
                "characterizations": {
                    name: im.order for name, im in exc.images.items()
                },
                "pass": False,
            })
    return rows


def cmd_conjugator(cfg, args):
    rows = []
    for model in battery_models(cfg):
        g = _element_arg(model, args) or default_g(model)
        U = (
            parse_subgroup(model, args.subgroup, g)
            if args.subgroup and cfg.model
            else default_subgroup(model, g)
        )
        if args.u:
            u = model.parse_element(args.u)
        elif model.name == "shift":
            u = lamp_element(model.p, {2: 1})
        else:
            u = model.conjugate(
                model.eigen_data(g)[0],
                model.parse_element(_unipotent_text(model, model.p ** 2)),
            )
        trace = limits.conjugator_forward(model, g, u, U, cfg.horizon)
        row = {
            "experiment": "conjugator",
            "model": model.name,
            "params": {
                "g": model.format_element(g),
                "u": model.format_element(u),
                "U": format_subgroup(model, U),
                "horizon": cfg.horizon,
            },
            "t": model.format_element(trace.t),
            "level_t": _level(model.proximity_level(trace.t)),
            "replay": trace.replay(model),
        }
        if args.two_sided:
            two = limits.conjugator_two_sided(model, g, u, U, cfg.horizon)
            row["r"] = model.format_element(two.r)
            row["level_r"] = _level(model.proximity_level(two.r))
            row["replay_two_sided"] = two.replay(model)
        row["pass"] = row["replay"] and row.get("replay_two_sided", True)
        rows.append(row)
    return rows


def _unipotent_text(model, scalar):
    rows = []
    for r in range(model.n):
        row = []
        for s in range(model.n):
            if r == s:
                row.append("1")
            elif (r, s) == (model.n - 1, 0):
                row.append(str(scalar))
            else:
                row.append("0")
        rows.append(",".join(row))
    return ";".join(rows)


def cmd_experiment_limits(cfg, args):
    rows = []
    n_max = args.n_max if args.n_max is not None else 8
    K = cfg.resolution if cfg.resolution is not None else 6
    for model in battery_models(cfg):
        g = default_g(model)
        schedule = model.net_schedule(g, n_max)
        rows.extend(limits.net_experiment(model, g, schedule, K))
    return rows


# -- theorem-check batteries ------------------------------------------------


def _check_scale(cfg, rng):
    rows = []
    for model in battery_models(cfg):
        if model.name == "shift":
            battery = [(shift_generator(model.p, 1), 1),
                       (model.identity, 1),
                       (lamp_element(model.p, {0: 1}), 1)]
        else:
            p = model.p
            battery = [
                (model.parse_element(f"{p},0;0,1"), p),
                (model.parse_element(f"{p},0;0,1/{p}"), p * p),
                (model.identity, 1),
            ]
            c = model.parse_element("1,1;0,1")
            gc = model.conjugate(c, model.parse_element(f"{p},0;0,1"))
            battery.append((gc, p))
        for g, expected in battery:
            value = tidy.scale_index(model, g)
            formula = scale_formula(g) if model.name == "linear" else 1
            ok = value == expected == formula
            rows.append({
                "check": "scale",
                "model": model.name,
                "params": {"g": model.format_element(g), "p": model.p},
                "scale": value,
                "expected": expected,
                "pass": ok,
            })
    if cfg.model in (None, "linear"):
        model = LinearModel(2, 3)
        g = model.parse_element("4,0,0;0,2,0;0,0,1")
        value = tidy.scale_index(model, g)
        rows.append({
            "check": "scale",
            "model": model.name,
            "params": {"g": model.format_element(g), "p": 2, "n": 3},
            "scale": value,
            "expected": 16,
            "pass": value == 16 == scale_formula(g),
        })
    return rows


def _check_tidy_identities(cfg, rng):
    rows = []
    K = min(cfg.resolution if cfg.resolution is not None else 4, 4)
    for model in battery_models(cfg):
        if model.name == "shift":
            g = shift_generator(model.p, 1)
            battery = [(w_subgroup(model.p, k), g) for k in range(3)]
        else:
            g = default_g(model)
            battery = [(default_subgroup(model, g), g)]
            c = model.parse_element("1,1;0,1")
            gc = model.conjugate(c, g)
            battery.append((default_subgroup(model, gc), gc))
        k_top = K if model.p == 2 else min(K, 2)
        for U, h in battery:
            report = tidy.tidy_identity_report(model, U, h, k_top)
            rows.append({
                "check": "tidy-identities",
                "model": model.name,
                "params": {
                    "g": model.format_element(h),
                    "U": format_subgroup(model, U),
                    "resolution": k_top,
                },
                "levels": report["levels"],
                "pass": report["pass"],
            })
        # The tidying procedure itself: smallest k making the intersection
        # tidy above, with the failure witness at the coarser level.
        if model.name == "linear":
            U0 = ShapeSubgroup(model.eigen_data(g)[0],
                               tuple(tuple(0 for _ in range(model.n))
                                     for _ in range(model.n)))
            V, k = tidy.tidy_above_procedure(model, U0, g, cfg.max_k)
            expected = iwahori_shape(model.n)
            rows.append({
                "check": "tidy-identities",
                "model": model.name,
                "params": {"g": model.format_element(g), "U": "level-0"},
                "k": k,
                "V": format_subgroup(model, V),
                "pass": k == 1 and V.shape == expected,
            })
        else:
            for k in range(4):
                U = w_subgroup(model.p, k)
                parts = tidy.u_parts(model, U, shift_generator(model.p, 1))
                above, _, _ = tidy.is_tidy_above(
                    model, U, shift_generator(model.p, 1), 3, parts=parts
                )
                below, witness = tidy.is_tidy_below(
                    model, U, shift_generator(model.p, 1), parts
                )
                ok = above is True and below is False and witness is not None
                rows.append({
                    "check": "tidy-identities",
                    "model": model.name,
                    "params": {"g": "shift:1", "U": f"W:{k}"},
                    "tidy_above": _verdict(above),
                    "tidy_below": _verdict(below),
                    "witness": None if below is not False
                    else model.format_element(witness),
                    "pass": ok,
                })
    return rows


def _nub_battery(model):
    if model.name == "shift":
        p = model.p
        return [
            shift_generator(p, 1),
            shift_generator(p, -1),
            shift_generator(p, 2),
            shift_generator(p, 1).mul(lamp_element(p, {0: 1})),
            lamp_element(p, {1: 1}),
            model.identity,
        ]
    p = model.p
    gs = [
        model.parse_element(f"{p},0;0,1"),
        model.parse_element(f"1,0;0,{p}"),
        model.parse_element(f"{p},0;0,1/{p}"),
        model.identity,
        model.parse_element("0,1;-1,0"),
    ]
    c = model.parse_element("1,1;0,1")
    gs.append(model.conjugate(c, model.parse_element(f"{p},0;0,1")))
    return gs


def _check_nub(cfg, rng):
    rows = []
    for model in battery_models(cfg):
        K = min(cfg.resolution if cfg.resolution is not None else 4,
                4 if model.name == "shift" else model.default_resolution)
        for g in _nub_battery(model):
            image, report = tidy.nub_compute(model, g, K)
            if model.name == "shift":
                expected_full = g.shift != 0
                full = image.order == model.reference().window_image(K).order
                ok = all(report.values()) and full == expected_full
            else:
                ok = all(report.values()) and image.order == 1
            rows.append({
                "check": "nub-characterizations",
                "model": model.name,
                "params": {"g": model.format_element(g), "resolution": K},
                "order": image.order,
                "characterizations": report,
                "pass": ok,
            })
    return rows


def _check_transport(cfg, rng):
    rows = []
    for model in battery_models(cfg):
        g = default_g(model)
        U = default_subgroup(model, g)
        if model.name == "shift":
            u = lamp_element(model.p, {3: 1})
            u2 = lamp_element(model.p, {4: 1})
            U2 = w_subgroup(model.p, 2)
        else:
            basis = model.eigen_data(g)[0]
            u = model.conjugate(basis, model.parse_element(
                _unipotent_text(model, model.p)))
            u2 = model.conjugate(basis, model.parse_element(
                _unipotent_text(model, model.p ** 2)))
            U2 = U
        trace = limits.conjugator_forward(model, g, u, U, cfg.horizon)
        t, _, adjusted = limits.adjust_to_contraction(model, trace.t, U, g)
        con_report = limits.con_transport_check(
            model, g, u, U, t, rng, samples=cfg.samples
        )
        two = limits.conjugator_two_sided(model, g, u2, U2, min(cfg.horizon, 10))
        nub_report = limits.nub_transport_check(model, g, u2, U2, two.r, K=3)
        rows.append({
            "check": "transport",
            "model": model.name,
            "params": {
                "g": model.format_element(g),
                "u": model.format_element(u),
                "samples": cfg.samples,
            },
            "replay": trace.replay(model),
            "adjusted": adjusted,
            "con_transport": con_report["pass"],
            "two_sided_replay": two.replay(model),
            "nub_transport": nub_report["pass"],
            "pass": all([
                trace.replay(model), con_report["pass"],
                two.replay(model), nub_report["pass"],
            ]),
        })
    return rows


def _check_normal_closure(cfg, rng):
    rows = []
    for p in ((2, 3) if cfg.model in (None, "shift") else ()):
        failures = 0
        for _ in range(100):
            support = {
                i: rng.randrange(1, p)
                for i in range(-10, 11)
                if rng.random() < 0.3
            }
            b = EPSeq.from_support(p, support)
            _, ok = verify.normal_closure_witness(b)
            failures += 0 if ok else 1
        rows.append({
            "check": "normal-closure",
            "model": "shift",
            "params": {"p": p, "samples": 100},
            "failures": failures,
            "pass": failures == 0,
        })
    return rows


def _check_quotient_anisotropy(cfg, rng):
    if cfg.model == "linear":
        return []
    model = ShiftModel(2)
    g = shift_generator(2, 1)
    schedule = [g, g.inv(), g.mul(lamp_element(2, {0: 1}))]
    rows = []
    for kind in ("lamp", "trivial"):
        q = verify.QuotientDescriptor(model, kind)
        normal = q.normal_check(rng)
        report = verify.quotient_anisotropy_check(q, schedule, K=4)
        rows.append({
            "check": "quotient-anisotropy",
            "model": model.name,
            "params": {"N": kind, "resolution": 4},
            "normal": normal["pass"],
            "core_in_n": report["core_in_n"],
            "quotient_con_trivial": report["quotient_con_trivial"],
            "pass": normal["pass"] and report["pass"],
        })
    return rows


def _check_tits_core(cfg, rng):
    rows = []
    for model in battery_models(cfg):
        if model.name == "shift":
            g = shift_generator(model.p, 1)
            for K in range(4):
                image = verify.tits_core_image(model, K, [g, g.inv()])
                full = model.reference().window_image(K)
                rows.append({
                    "check": "tits-core",
                    "model": model.name,
                    "params": {"resolution": K},
                    "order": image.order,
                    "pass": image.image.elements == full.elements,
                })
        else:
            p = model.p
            schedule = [
                model.parse_element(f"{p},0;0,1"),
                model.parse_element(f"1,0;0,{p}"),
            ]
            image = verify.tits_core_image(model, 1, schedule)
            window = model.window(1)
            # SL_2(Z/p) is generated by the elementary unipotents.
            from tdlcw.kernel import subgroup_closure
            sl2 = subgroup_closure(window, [
                window.encode([1, 1, 0, 1]),
                window.encode([1, 0, 1, 1]),
            ])
            rows.append({
                "check": "tits-core",
                "model": model.name,
                "params": {"p": p, "resolution": 1},
                "order": image.order,
                "pass": sl2.elements <= image.image.elements,
            })
    return rows


def _check_limits(cfg, rng):
    rows = []
    K = cfg.resolution if cfg.resolution is not None else 6
    for model in battery_models(cfg):
        g = default_g(model)
        rows.extend(limits.net_experiment(model, g, model.net_schedule(g, 8), K))
    return rows


CHECKS = {
    "scale": _check_scale,
    "tidy-identities": _check_tidy_identities,
    "nub-characterizations": _check_nub,
    "transport": _check_transport,
    "normal-closure": _check_normal_closure,
    "quotient-anisotropy": _check_quotient_anisotropy,
    "tits-core": _check_tits_core,
    "limits": _check_limits,
}


def cmd_theorem_check(cfg, args):
    which = args.which or "all"
    if which != "all" and which not in CHECKS:
        names = ", ".join(sorted(CHECKS) + ["all"])
        raise ValueError(f"unknown check {which!r}; valid names: {names}")
    rng = random.Random(cfg.seed)
    rows = []
    for name, fn in CHECKS.items():
        if which in ("all", name):
            rows.extend(fn(cfg, rng))
    return rows


# -- orchestration ----------------------------------------------------------


def _element_arg(model, args):
    text = getattr(args, "g", None) or getattr(args, "matrix", None)
    if text is None:
        return None
    return model.parse_element(text)


def _add_shared(parser):
    parser.add_argument("--model", choices=["shift", "linear"])
    parser.add_argument("--p", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--resolution", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--max-k", dest="max_k", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--config")
    parser.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tdlcw",
        description="finite-resolution workbench for t.d.l.c. dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scale = sub.add_parser("scale", help="scale of an element, two ways")
    p_scale.add_argument("--g")
    p_scale.add_argument("--matrix")
    p_scale.set_defaults(func=cmd_scale)

    p_tidy = sub.add_parser("tidy", help="tidying procedure diagnosis")
    p_tidy.add_argument("--g")
    p_tidy.add_argument("--U", dest="subgroup")
    p_tidy.set_defaults(func=cmd_tidy)

    p_con = sub.add_parser("con-test", help="contraction/parabolic membership")
    p_con.add_argument("--g")
    p_con.add_argument("--x")
    p_con.set_defaults(func=cmd_con_test)

    p_nub = sub.add_parser("nub", help="nub via five characterizations")
    p_nub.add_argument("--g")
    p_nub.set_defaults(func=cmd_nub)

    p_conj = sub.add_parser("conjugator", help="conjugator trace with replay")
    p_conj.add_argument("--g")
    p_conj.add_argument("--u")
    p_conj.add_argument("--U", dest="subgroup")
    p_conj.add_argument("--two-sided", dest="two_sided", action="store_true")
    p_conj.set_defaults(func=cmd_conjugator)

    p_exp = sub.add_parser("experiment", help="convergence experiments")
    exp_sub = p_exp.add_subparsers(dest="experiment", required=True)
    p_lim = exp_sub.add_parser("limits", help="shrinking-schedule experiment")
    p_lim.add_argument("--n-max", dest="n_max", type=int)
    p_lim.set_defaults(func=cmd_experiment_limits)
    _add_shared(p_lim)

    p_thm = sub.add_parser("theorem-check", help="verification batteries")
    p_thm.add_argument("--which", default="all")
    p_thm.set_defaults(func=cmd_theorem_check)

    for p in (p_scale, p_tidy, p_con, p_nub, p_conj, p_thm):
        _add_shared(p)
    return parser


def emit(rows, out_path):
    text = "".join(json.dumps(row, default=str) + "\n" for row in rows)
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        rows = args.func(cfg, args)
    except (ValueError, UnsupportedElementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    emit(rows, cfg.out)
    return 0 if all(row.get("pass", True) for row in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
