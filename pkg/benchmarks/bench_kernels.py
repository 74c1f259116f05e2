"""Compare the compiled and NumPy kernel backends.

Times each pointwise kernel and one full gauged-system step on both
backends, and checks that they agree to rounding.

    python benchmarks/bench_kernels.py --n 4096 --repeat 50
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gdnls import kernels
from gdnls.gauge import gauge_pair
from gdnls.model import ModelParams
from gdnls.spectral import Field, Grid
from gdnls.timestepper import StepperConfig, evolve_gauged


def _cases(n, sigma, rng):
    z = lambda: rng.standard_normal(n) + 1j * rng.standard_normal(n)  # noqa: E731
    u, v, w, q = z(), z(), z(), z()
    theta = rng.standard_normal(n)
    return {
        "modulus_power": lambda: kernels.modulus_power(u, 2 * sigma),
        "gdnls_term": lambda: kernels.gdnls_term(u, v, sigma),
        "nonlinear_terms": lambda: kernels.nonlinear_terms(u, v, sigma),
        "assemble_pq": lambda: kernels.assemble_pq(u, v, w, q, theta, sigma * (sigma - 1)),
        "phase_multiply": lambda: kernels.phase_multiply(u, theta, 1.0),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / (1.0 + np.abs(np.asarray(b)))))


def _step_case(n, sigma):
    g = Grid(n, 0.1 * n)
    p = ModelParams(sigma)
    eta0 = gauge_pair(Field(g, 0.3 * np.exp(-g.nodes**2)), p)
    cfg = StepperConfig(dt=0.01, t_start=0.0, t_end=0.1, record_every=10**6)
    return lambda: evolve_gauged(eta0, cfg, p)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--sigma", type=float, default=3.0)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args(argv)

    try:
        kernels.use_backend("cython")
    except ImportError:
        print("compiled backend not built; run `python setup.py build_ext --inplace` first")
        return 1

    rng = np.random.default_rng(0)
    cases = _cases(args.n, args.sigma, rng)
    cases["gauged_rk4_10_steps"] = _step_case(args.n, args.sigma)
    print(f"n = {args.n}, sigma = {args.sigma}, best of 5 x {args.repeat} calls")
    print(f"{'kernel':<22}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}{'max rel diff':>14}")
    for name, fn in cases.items():
        reps = max(1, args.repeat // 10) if name.startswith("gauged") else args.repeat
        row = {}
        out = {}
        for backend in ("python", "cython"):
            kernels.use_backend(backend)
            out[backend] = fn()
            row[backend] = min(timeit.repeat(fn, number=reps, repeat=5)) / reps * 1e6
        if name.startswith("gauged"):
            diff = _max_diff(out["python"].final.stack(), out["cython"].final.stack())
        else:
            diff = _max_diff(out["python"], out["cython"])
        print(f"{name:<22}{row['python']:>14.1f}{row['cython']:>14.1f}{row['python'] / row['cython']:>10.2f}{diff:>14.2e}")
    kernels.use_backend("cython")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
