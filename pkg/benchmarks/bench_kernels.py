"""Compiled vs pure-Python kernel timings.

Usage: ``python3 benchmarks/bench_kernels.py [--q 34] [--t 50] [--repeat 3]``

Times the force evaluation and an adaptive integration of a driven chain with
both backends and checks that they agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fkchain import kernels
from fkchain.model import PeriodicConfiguration, standard_model


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, default=34)
    ap.add_argument("--t", type=float, default=50.0, help="integration time span")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    spec = standard_model(k=1.0, F_DC=0.2)
    params = spec.kernel_params()
    p = int(round(args.q * 0.618))
    u0 = PeriodicConfiguration.uniform(p, args.q).base + 0.05 * np.sin(np.arange(args.q))
    ts = np.array([args.t])

    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    results, rows = {}, []
    for name in backends:
        k = kernels.get(name)
        n_rhs = 2000 if name == "python" else 200000
        t_rhs = min(timeit.repeat(lambda: k.rhs(u0, p, 0.0, params), number=n_rhs, repeat=args.repeat)) / n_rhs
        t_int = min(timeit.repeat(lambda: k.integrate(u0, p, 0.0, ts, params, 0.05, 1e-8, 0.01),
                                  number=1, repeat=args.repeat))
        results[name] = np.asarray(k.integrate(u0, p, 0.0, ts, params, 0.05, 1e-8, 0.01)[0])
        rows.append((name, t_rhs * 1e6, t_int))

    print(f"q={args.q} p={p} t_span={args.t}")
    print(f"{'backend':<10}{'rhs [us]':>12}{'integrate [s]':>16}")
    for name, a, b in rows:
        print(f"{name:<10}{a:>12.2f}{b:>16.4f}")
    if len(rows) == 2:
        print(f"speedup    {rows[0][1] / rows[1][1]:>12.1f}x{rows[0][2] / rows[1][2]:>15.1f}x")
        diff = float(np.max(np.abs(results['python'] - results['compiled'])))
        print(f"max |compiled - python| after integration: {diff:.2e}")


if __name__ == "__main__":
    main()
