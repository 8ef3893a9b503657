"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--shots 4000] [--n-time 200]

Both variants are imported side by side, so the TPP_DISABLE_NUMBA flag is not
needed here. The first numba call (JIT compile) is excluded from timings.
"""

import argparse
import time

import numpy as np

from tpp import kernels
from tpp._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n_shots, n_time, rng):
    kappa = 2 * np.pi * 1.54e6
    dt = 1e-8
    n_jumps = 3
    jt = np.sort(rng.uniform(0, n_time * dt, (n_shots, n_jumps)), axis=1)
    jt[rng.random((n_shots, n_jumps)) < 0.5] = np.inf
    jt.sort(axis=1)
    chis = rng.choice([-0.195, 0.195, -0.585], size=(n_shots, n_jumps + 1)) * kappa
    cav = (jt, chis, kappa, 0.0, kappa, 0.1e-6, 0.9 * n_time * dt, dt, n_time)

    x = rng.standard_normal((n_shots, n_time))
    ar = (x, 0.95, np.zeros(n_shots))

    z = rng.standard_normal((n_shots, n_time))
    cov = z.T @ z / n_shots
    freqs = np.fft.rfftfreq(n_time, dt)
    psd = (cov, freqs, dt)
    return {"integrate_cavity": cav, "ar1_filter": ar, "psd_direct": psd}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--shots", type=int, default=4000)
    ap.add_argument("--n-time", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"shots={args.shots} n_time={args.n_time} numba={'yes' if HAVE_NUMBA else 'no'}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, a in cases(args.shots, args.n_time, rng).items():
        f_np = getattr(kernels, f"{name}_numpy")
        t_np, ref = best_of(lambda: f_np(*a), args.repeat)
        if not HAVE_NUMBA:
            print(f"{name:<18}{1e3 * t_np:>12.2f}{'-':>12}{'-':>10}{'-':>13}")
            continue
        f_nb = getattr(kernels, f"{name}_numba")
        f_nb(*a)  # compile
        t_nb, out = best_of(lambda: f_nb(*a), args.repeat)
        diff = float(np.max(np.abs(out - ref)))
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
