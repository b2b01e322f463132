"""Time the Monte Carlo kernels: numba-compiled loops against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both variants are imported directly, so DRRBDO_NO_NUMBA does not matter here.
The first numba call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from drrbdo.truss import load_model
from drrbdo.verify import kernels


def best_of(fn, args, repeat):
    fn(*args)  # warm-up / JIT compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    U = rng.random((1_000_000, 2))
    a = np.array([0.3, -0.7])
    model = load_model("grid_29")
    x = 2.0 * model.x_min + 0.5 * rng.standard_normal((20_000, model.n_members))
    exact_args = (model.directions, model.stiffness, model.load, model.pi_bar, x)

    cases = [
        ("box_muller 1e6x2", kernels._box_muller_nb, kernels._box_muller_np, (U,)),
        ("linear_fail_count 1e6", kernels._linear_fail_count_nb, kernels._linear_fail_count_np, (-2.0, a, U)),
        ("exact_fail_count grid_29 2e4", kernels._exact_fail_count_nb, kernels._exact_fail_count_np, exact_args),
    ]
    print(f"{'kernel':32s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  agree")
    for name, nb, np_impl, fargs in cases:
        t_nb, r_nb = best_of(nb, fargs, args.repeat)
        t_np, r_np = best_of(np_impl, fargs, args.repeat)
        same = np.allclose(r_nb, r_np) if isinstance(r_nb, np.ndarray) else r_nb == r_np
        print(f"{name:32s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.2f}  {same}")


if __name__ == "__main__":
    main()
