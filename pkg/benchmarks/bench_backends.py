"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the two hot paths (method-of-steps integration, delay-window integrals)
with identical inputs through every available backend, checks that the
outputs agree bit for bit, and prints timings with speedups.

    python3 benchmarks/bench_backends.py [--steps N] [--samples N] [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from nicholson_lab._backend import available_kernels
from nicholson_lab.exprlang import pack_programs
from nicholson_lab.scenario import builtin


def integration_payload(n_steps):
    sc = builtin("3.9")
    model = sc.model
    packed = pack_programs(
        [model.beta, sc.history.phi]
        + [e for pr in model.pairs for e in (pr.tau, pr.sigma)]
    )
    c1 = np.array([pr.p for pr in model.pairs])
    c2 = np.array([pr.a for pr in model.pairs])
    args = (
        0,  # population kind with positivity checks
        model.delta,
        c1,
        c2,
        packed.ops,
        packed.args,
        packed.consts,
        packed.offsets,
        packed.stack_need,
        model.t0,
        0.01,
        n_steps,
        True,
    )
    return args


def window_payload(n_samples):
    model = builtin("3.9").model
    packed = pack_programs([model.beta, model.pairs[0].sigma])
    ts = np.linspace(50.0, 250.0, n_samples)
    return (
        packed.ops,
        packed.args,
        packed.consts,
        packed.offsets,
        packed.stack_need,
        ts,
        1e-10,
    )


def best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20000,
                        help="integration steps (default 20000)")
    parser.add_argument("--samples", type=int, default=2001,
                        help="window-integral sample points (default 2001)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best is kept (default 5)")
    opts = parser.parse_args()

    kernels = available_kernels()
    if "compiled" not in kernels:
        print("compiled backend not built; timing the python fallback only")

    tasks = [
        ("integrate_mos", "integrate_mos", integration_payload(opts.steps)),
        ("window_integrals", "window_integrals", window_payload(opts.samples)),
    ]

    width = max(len(name) for name, _, _ in tasks)
    results = {}
    for name, attr, payload in tasks:
        outputs = {}
        for backend, module in kernels.items():
            fn = getattr(module, attr)
            outputs[backend] = fn(*payload)
            results[(name, backend)] = best_time(lambda: fn(*payload), opts.repeats)
        if len(outputs) == 2:
            for a, b in zip(outputs["python"], outputs["compiled"]):
                if isinstance(a, np.ndarray):
                    assert np.array_equal(a, b), f"{name}: backend outputs differ"
                else:
                    same = a == b or (
                        isinstance(a, float)
                        and math.isnan(a)
                        and isinstance(b, float)
                        and math.isnan(b)
                    )
                    assert same, f"{name}: backend outputs differ"
            print(f"{name:<{width}}  outputs bit-identical across backends")

    print()
    print(f"{'task':<{width}}  {'backend':<9} {'best (ms)':>10}  speedup")
    for name, _, _ in tasks:
        base = results.get((name, "python"))
        for backend in kernels:
            t = results[(name, backend)]
            speed = "" if backend == "python" or base is None else f"{base / t:6.1f}x"
            print(f"{name:<{width}}  {backend:<9} {t * 1e3:>10.2f}  {speed}")


if __name__ == "__main__":
    main()
