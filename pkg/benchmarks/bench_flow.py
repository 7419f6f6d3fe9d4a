"""Compare the compiled and pure-Python Dormand-Prince tracers.

    python3 benchmarks/bench_flow.py [--t-max 200] [--repeat 3]

Each case traces the same seed with both backends and reports wall time,
accepted steps, speedup and the largest coordinate difference.
"""
import argparse
import math
import time

import numpy as np

from chiralkit.fields import abc_field, lutz_family
from chiralkit.flow import available_backends, integrate
from chiralkit.polyform import parse_polynomial as P, PolyVectorField


def cases():
    yield "abc(1, 0.8, 0.6)", abc_field(1, 0.8, 0.6), (0.1, 0.2, 0.3), None
    yield "lutz reeb s=-1", lutz_family(-1, 1).reeb_like(), (1e-4, 1e-4, 1.0), None
    V = PolyVectorField(P("x^2 - y^2/2 - z^2/2 - 1/4 + y z"), P("-x y + z"), P("-x z - y"))
    yield "polynomial", V, (0.1, 0.05, 0.02), 5.0


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-max", type=float, default=200.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; run `python3 setup.py build_ext --inplace`")
    print(f"{'case':<18} {'backend':<9} {'steps':>7} {'seconds':>9} {'speedup':>8} {'max diff':>9}")
    for name, field, seed, bound in cases():
        rows = {}
        for b in backends:
            sec, rec = best_of(lambda: integrate(field, seed, t_max=args.t_max, bound=bound, backend=b),
                               args.repeat)
            rows[b] = (sec, rec)
        ref = rows.get("python")
        for b, (sec, rec) in rows.items():
            speed = ref[0] / sec if ref else math.nan
            n = min(len(rec.trajectory), len(ref[1].trajectory)) if ref else 0
            diff = float(np.max(np.abs(rec.trajectory[:n] - ref[1].trajectory[:n]))) if n else math.nan
            print(f"{name:<18} {b:<9} {rec.stats['n_accepted']:>7} {sec:>9.4f} {speed:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
