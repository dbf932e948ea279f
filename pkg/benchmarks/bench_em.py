"""Benchmark the Euler-Maruyama kernel: numba backend vs numpy fallback.

Both backends consume the same counter-based random stream, so their
outputs must be bit-identical; this script asserts that before timing.

Run:  python3 benchmarks/bench_em.py [--paths 2000] [--steps 400]
"""

import argparse
import os
import time

import numpy as np


def run_case(family, n, paths, steps, seed, **kw):
    from rmtflow.matproc import PathGrid
    from rmtflow.sde import SdeSpec, integrate

    spec = SdeSpec(family, n, PathGrid(1.0, steps), seed, **kw)
    t0 = time.perf_counter()
    _, out = integrate(spec, count=paths)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=400)
    args = ap.parse_args()

    cases = [
        ("Dyson", 4, {"beta": 2.0}),
        ("Radial", 3, {"beta": 2.0, "gamma": 1.5}),
        ("Bessel", 1, {"nu": 0.5}),
        ("LaguerreEV", 2, {"beta": 2.0, "nu": 1.0}),
    ]

    # warm up the JIT so compile time is not billed to the numba backend
    os.environ.pop("RMTFLOW_NO_NUMBA", None)
    from rmtflow._backend import use_numba
    have_numba = use_numba()
    if have_numba:
        run_case("Dyson", 2, 8, 16, 0)

    print(f"{'case':<16}{'numba':>10}{'numpy':>10}{'speedup':>9}  identical")
    for family, n, kw in cases:
        if have_numba:
            t_nb, out_nb = run_case(family, n, args.paths, args.steps, 7, **kw)
        else:
            t_nb, out_nb = float("nan"), None
        os.environ["RMTFLOW_NO_NUMBA"] = "1"
        t_np, out_np = run_case(family, n, args.paths, args.steps, 7, **kw)
        os.environ.pop("RMTFLOW_NO_NUMBA", None)
        same = "n/a" if out_nb is None else str(bool(np.array_equal(out_nb, out_np)))
        if out_nb is not None and not np.array_equal(out_nb, out_np):
            raise SystemExit(f"backend mismatch for {family}")
        print(f"{family + f'(N={n})':<16}{t_nb:>9.3f}s{t_np:>9.3f}s"
              f"{t_np / t_nb:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
