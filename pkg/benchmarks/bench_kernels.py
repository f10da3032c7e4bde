"""Benchmark the enumeration kernels: numba scalar loop vs vectorized numpy.

The jitted loop wins when a satisfying assignment appears early (it exits
immediately); the numpy sweep wins on unsatisfiable queries with very wide
spaces amortized over few DAG nodes.  Run:

    python benchmarks/bench_kernels.py [--bits 18] [--repeat 3]
"""

from __future__ import annotations

import argparse
import os
import time

from mse.solver import kernels
from mse.solver.expr import binop, bv_const, cmp, sym_read


def build_query(bits, satisfiable, depth=8):
    """Arithmetic chain over two inputs; range conditions pick sat/unsat."""
    half = bits // 2
    a = sym_read("a", 0, half)
    b = sym_read("b", 0, bits - half)
    x = binop("xor", a, b) if half == bits - half else a
    for i in range(depth):
        x = binop(("add", "xor", "mul")[i % 3], x,
                  bv_const(x.width, (37 * i + 11) % (1 << x.width) or 3))
    lo = cmp("ult", x, bv_const(x.width, 4))
    if satisfiable:
        # nearly everything satisfies this; the scalar loop exits immediately
        return [cmp("uge", binop("add", x, a), bv_const(x.width, 1))]
    hi = cmp("uge", x, bv_const(x.width, (1 << x.width) - 4))
    return [lo, hi]


def timed(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return result, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bits", type=int, default=18)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cases = [("sat-early", build_query(args.bits, True)),
             ("unsat-full-sweep", build_query(args.bits, False))]
    print(f"{'case':<20}{'kernel':<10}{'first_sat':>12}{'best time':>12}")
    for name, conjuncts in cases:
        prog = kernels.compile_program(conjuncts)
        rows = []
        for label, flag in (("numba", None), ("numpy", "1")):
            old = os.environ.pop("MSE_NO_NUMBA", None)
            if flag:
                os.environ["MSE_NO_NUMBA"] = flag
            try:
                if label == "numba" and not kernels.use_numba():
                    print(f"{name:<20}{label:<10}{'(unavailable)':>12}")
                    continue
                kernels.first_sat(prog)  # warm the JIT outside the timer
                res, dt = timed(lambda: kernels.first_sat(prog), args.repeat)
                rows.append((label, res, dt))
            finally:
                os.environ.pop("MSE_NO_NUMBA", None)
                if old is not None:
                    os.environ["MSE_NO_NUMBA"] = old
        for label, res, dt in rows:
            print(f"{name:<20}{label:<10}{res:>12}{dt * 1000:>10.2f}ms")
        answers = {r[1] for r in rows}
        assert len(answers) <= 1, f"kernel paths disagree: {answers}"
    print("\nboth kernel paths agree on every case")


if __name__ == "__main__":
    main()
