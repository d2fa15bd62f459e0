#!/usr/bin/env python3
"""Benchmark the window-group kernels across available backends.

Times subgroup closure and product-set computation on representative
windows (lamp-configuration vectors and matrix groups over Z/p^K) for
every backend module that imports, and prints a comparison table.

Usage:  python benchmarks/bench_kernel.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

from tdlcw import backend


def _cases():
    """(label, desc, generator codes) for each benchmark scenario."""
    from tdlcw import _kernel_pure as k

    out = []

    desc = ("vec", 2, 13)
    gens = [1 << i for i in range(0, 13, 2)]
    out.append(("vec closure F2^13", desc, gens))

    desc = ("mat", 2, 2, 8)
    e12 = k._mat_encode([1, 1, 0, 1], 8)
    e21 = k._mat_encode([1, 0, 1, 1], 8)
    out.append(("mat closure GL2(Z/8)", desc, [e12, e21]))

    desc = ("mat", 3, 2, 4)
    gens = []
    for i in range(3):
        for j in range(3):
            if i != j:
                ent = [1 if r == c else 0 for r in range(3) for c in range(3)]
                ent[i * 3 + j] = 2
                gens.append(k._mat_encode(ent, 4))
    out.append(("mat closure GL3(Z/4) congruence", desc, gens))
    return out


def bench(repeat: int) -> None:
    backends = backend.get_backends()
    names = [m.BACKEND_NAME for m in backends]
    print(f"backends available: {', '.join(names)}")
    print(f"{'case':<36} " + " ".join(f"{n:>10}" for n in names) + "   speedup")

    for label, desc, gens in _cases():
        sets = {}
        times = {}
        for mod in backends:
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                s = mod.closure(desc, gens, 1 << 20)
                best = min(best, time.perf_counter() - t0)
            sets[mod.BACKEND_NAME] = s
            times[mod.BACKEND_NAME] = best
        assert len({frozenset(s) for s in sets.values()}) == 1, "backends disagree"
        _row(label + f" (|G|={len(s)})", names, times)

        codes = sorted(sets[names[0]])[:1200]
        times = {}
        prods = {}
        for mod in backends:
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                p = mod.product_set(desc, codes, codes)
                best = min(best, time.perf_counter() - t0)
            prods[mod.BACKEND_NAME] = p
            times[mod.BACKEND_NAME] = best
        assert len({frozenset(p) for p in prods.values()}) == 1, "backends disagree"
        _row(f"  product {len(codes)}x{len(codes)}", names, times)


def _row(label: str, names: list[str], times: dict[str, float]) -> None:
    cells = " ".join(f"{times[n] * 1e3:9.1f}ms" for n in names)
    if len(names) > 1:
        ratio = times[names[0]] / times[names[-1]]
        cells += f"   {ratio:6.1f}x"
    print(f"{label:<36} {cells}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="repetitions per measurement (best is reported)")
    bench(parser.parse_args().repeat)


if __name__ == "__main__":
    main()
