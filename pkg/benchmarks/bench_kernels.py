"""Time the numba and numpy paths of every hot kernel.

Both twins are called directly on the same inputs, so one run covers both
backends regardless of ``POCSREC_DISABLE_NUMBA``.  The first numba call of
each kernel (compilation or cache load) is excluded from the timings.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from pocsrec import _kernels as K
from pocsrec.signal import Grid, default_phi_table, harmonic_basis, random_bandlimited


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    tab = default_phi_table()
    t = rng.uniform(-600, 600, 200_000)
    yield "phi_lookup (2e5 points)", (t, tab.values, tab.derivs, tab.step), {}

    b = np.sort(rng.uniform(0, 315, 201))
    yield "interval_gram (200 kernels)", (b[:-1].copy(), b[1:].copy(), 315.0, 2, tab.values,
                                          tab.derivs, tab.step), {}

    ti = np.sort(rng.uniform(0, 315, 1260))
    yield "cos_sin_matrix (1260 x 158)", (ti, 2 * np.pi / 315, 157), {}

    g = Grid(64.0)
    x = random_bandlimited(1, g)
    ca, sa = x.basis.trig_coefficients(x.coords)
    tt = rng.uniform(0, 64, 50_000)
    yield "trig_eval (5e4 points)", (tt, ca, sa, x.basis.omega1, 0.0, 0.0), {}

    lo = np.sort(rng.uniform(0, 63, 2000))
    hi = lo + 1.0 / 16
    mid = K.trig_eval_np(0.5 * (lo + hi), ca, sa, x.basis.omega1, 0.0, 0.0)
    lev = K.trig_eval_np(lo, ca, sa, x.basis.omega1, 0.0, 0.0)
    yield "trig_roots (2000 brackets)", (lo, hi, ca, sa, x.basis.omega1, 0.0, 0.0,
                                         np.ascontiguousarray(0.5 * (lev + mid)), 60), {}

    gb = Grid(315.0)
    E = np.ascontiguousarray(harmonic_basis(gb).matrix(ti))
    rhs = rng.standard_normal(E.shape[0])
    rn = np.einsum("ij,ij->i", E, E)
    order = rng.integers(0, E.shape[0], E.shape[0]).astype(np.int64)
    yield "kaczmarz random sweep (1260 x 315)", (E, rhs, np.zeros(E.shape[1]), order, 1.0, rn), \
        {"copy_arg": 2}
    yield "kaczmarz cyclic sweep (1260 x 315)", (E, rhs, np.zeros(E.shape[1]),
                                                 np.arange(E.shape[0], dtype=np.int64), 1.0, rn), \
        {"copy_arg": 2}


KERNELS = {
    "phi_lookup": (K.phi_lookup_np, K.phi_lookup_nb),
    "interval_gram": (K.interval_gram_np, K.interval_gram_nb),
    "cos_sin_matrix": (K.cos_sin_matrix_np, K.cos_sin_matrix_nb),
    "trig_eval": (K.trig_eval_np, K.trig_eval_nb),
    "trig_roots": (K.trig_roots_np, K.trig_roots_nb),
    "kaczmarz": (K.kaczmarz_sweeps_np, K.kaczmarz_sweeps_nb),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"active backend: {K.backend()}  (numba available: {K.HAVE_NUMBA})")
    print(f"{'kernel':<38s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, fargs, opts in cases():
        f_np, f_nb = KERNELS[label.split(" ")[0]]
        ci = opts.get("copy_arg")

        def call(f):
            a = list(fargs)
            if ci is not None:
                a[ci] = a[ci].copy()
            return f(*a)

        t_np = best_of(lambda: call(f_np), args.repeat)
        if f_nb is None:
            print(f"{label:<38s} {1e3 * t_np:11.2f} {'n/a':>11s}")
            continue
        call(f_nb)
        t_nb = best_of(lambda: call(f_nb), args.repeat)
        print(f"{label:<38s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
