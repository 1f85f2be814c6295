"""Throughput of the compiled and pure-Python episode kernels.

    python benchmarks/bench_mc.py [--paths-exact N] [--paths-euler N] [--repeat R]

Both backends produce bit-identical outcomes (checked here too); the table
reports paths per second and the speed-up of the compiled kernels.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ddlab.mc import _backend
from ddlab.mc.oracle import MCConfig, simulate_outcomes
from ddlab.model import BrownianLevySpec, DiffusionSpec, DrawdownQuery, GenPempSpec, PempSpec

CASES = [
    ("pemp exact", PempSpec(), DrawdownQuery(a=1.0, K=20.0, x0=5.0), "exact"),
    ("jd euler dt=1e-3", GenPempSpec(), DrawdownQuery(a=1.0, K=6.0, x0=1.0), "euler"),
    ("bm euler dt=1e-3", BrownianLevySpec(0.0, 1.0), DrawdownQuery(a=1.0, K=1.0, x0=0.0), "euler"),
    ("ou euler dt=1e-3", DiffusionSpec.ou(1.0, 1.0), DrawdownQuery(a=1.0, K=2.0, x0=1.0), "euler"),
]


def _time(model, query, mc, backend, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = simulate_outcomes(model, query, mc, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths-exact", type=int, default=20_000)
    ap.add_argument("--paths-euler", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend._compiled() is None:
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")

    print(f"{'case':<20} {'paths':>7} {'python p/s':>12} {'compiled p/s':>13} {'speed-up':>9}  identical")
    for name, model, query, kind in CASES:
        n = args.paths_exact if kind == "exact" else args.paths_euler
        mc = MCConfig(n_paths=n, seed=1, workers=1)
        t_py, out_py = _time(model, query, mc, "python", 1)
        t_c, out_c = _time(model, query, mc, "compiled", args.repeat)
        same = all(np.array_equal(out_py[k], out_c[k]) for k in ("code", "tau", "M", "Y"))
        print(f"{name:<20} {n:>7d} {n / t_py:>12.0f} {n / t_c:>13.0f} {t_py / t_c:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
