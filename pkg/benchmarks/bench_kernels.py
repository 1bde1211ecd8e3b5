"""Time the compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--number N]``. Prints one row per kernel with
the per-call time of each backend and the speedup. Exits 1 if the extension is not built.
"""
from __future__ import annotations

import argparse
import sys
import timeit

from crossctl import _pykernels as py
from crossctl.kernels import compiled_backend as cy

WINDOWS = [(30.0, 2.0, 3.0), (80.0, 6.0, 7.0)]

CASES = {
    "crossing_upper": lambda k: k.crossing_upper(20.0, 30.0, 2.0, 25.0, 0.5, 1e-3),
    "crossing_lower": lambda k: k.crossing_lower(20.0, 30.0, 4.0, 25.0, 0.5),
    "rear_end_upper": lambda k: k.rear_end_upper(0.0, 20.0, 50.0, 20.0, 1.0, 25.0, 100.0),
    "rear_end_hold_guard": lambda k: k.rear_end_hold_guard(0.0, 20.0, 50.0, 20.0, 1.0, 25.0, 0.01),
    "assemble": lambda k: k.assemble(0.0, 20.0, 2.5, 25.0, 0.5, 100.0, 1.0, 50.0, 0.0,
                                     WINDOWS, True, 1e-3, 0.01),
    "clamp": lambda k: k.clamp(2.5, -25.0, -5.0),
    "profile_ok": lambda k: k.profile_ok(20.0, 3.75, -7.5, 2.0, 25.0, 30.0, 1e-3),
    "min_gap": lambda k: k.min_gap(0.0, 20.0, 3.75, -7.5, 2.0, 0.0, 10.0, 20.0, 0.0, 0.0, 1.0, 0.0,
                                   3.0, 60.0, 1e-3),
}


def per_call(fn, number: int) -> float:
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--number", type=int, default=20000, help="calls per timing repeat")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not available; build it with `python3 setup.py build_ext --inplace`",
              file=sys.stderr)
        return 1
    print(f"{'kernel':<22}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, call in CASES.items():
        n = max(args.number // 50, 100) if name in ("profile_ok", "min_gap") else args.number
        t_py = per_call(lambda: call(py), n)
        t_cy = per_call(lambda: call(cy), n)
        print(f"{name:<22}{t_py * 1e6:>10.3f}us{t_cy * 1e6:>10.3f}us{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
