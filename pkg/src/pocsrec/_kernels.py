"""Hot numeric kernels with a numba path and a pure-numpy twin.

Every kernel ``foo`` exists as ``foo_np`` (always available) and ``foo_nb``
(``None`` when numba is missing).  The public name ``foo`` is bound at import
time to the numba version unless the environment variable
``POCSREC_DISABLE_NUMBA`` is set to a truthy value, in which case the numpy
twin is used everywhere.  Both paths compute the same quantities; results
agree to rounding (they are compared in ``tests/test_kernels.py`` and timed in
``benchmarks/bench_kernels.py``).
"""

import os

import numpy as np
from scipy.linalg import solve_triangular

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_FLAG = os.environ.get("POCSREC_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

__all__ = [
    "HAVE_NUMBA",
    "USE_NUMBA",
    "backend",
    "phi_lookup",
    "interval_gram",
    "cos_sin_matrix",
    "trig_eval",
    "trig_roots",
    "kaczmarz_sweeps",
]


def backend():
    """Name of the active kernel backend (``"numba"`` or ``"numpy"``)."""
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# cubic Hermite lookup of an even tabulated function, asymptotic beyond the table
# ---------------------------------------------------------------------------


def _phi_far(u):
    # asymptotic Si(x) = pi/2 - f(x) cos x - g(x) sin x, valid for x = pi*u >> 1
    x = np.pi * u
    r = 1.0 / (x * x)
    f = (1.0 - r * (2.0 - r * (24.0 - r * (720.0 - r * 40320.0)))) / x
    g = (1.0 - r * (6.0 - r * (120.0 - r * (5040.0 - r * 362880.0)))) * r
    si = 0.5 * np.pi - f * np.cos(x) - g * np.sin(x)
    h = np.sin(0.5 * x)
    return u * si / np.pi - 2.0 * h * h / (np.pi * np.pi)


def phi_lookup_np(t, values, derivs, step):
    u = np.abs(np.asarray(t, dtype=np.float64))
    x = u / step
    last = values.shape[0] - 1
    far = x > last
    i = np.minimum(x.astype(np.int64), last - 1)
    s = x - i
    s2 = s * s
    s3 = s2 * s
    out = ((2.0 * s3 - 3.0 * s2 + 1.0) * values[i]
           + (s3 - 2.0 * s2 + s) * (step * derivs[i])
           + (-2.0 * s3 + 3.0 * s2) * values[i + 1]
           + (s3 - s2) * (step * derivs[i + 1]))
    if np.any(far):
        out = np.where(far, _phi_far(np.where(far, u, 1e6)), out)
    return out


def _hermite_scalar(t, values, derivs, step):
    u = abs(t)
    x = u / step
    if x > values.shape[0] - 1:
        return _phi_far_nb(u)
    i = int(x)
    if i > values.shape[0] - 2:
        i = values.shape[0] - 2
    s = x - i
    s2 = s * s
    s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * values[i]
            + (s3 - 2.0 * s2 + s) * (step * derivs[i])
            + (-2.0 * s3 + 3.0 * s2) * values[i + 1]
            + (s3 - s2) * (step * derivs[i + 1]))


# ---------------------------------------------------------------------------
# closed-form Gram of interval indicators: <P_B 1_[a_l,b_l), 1_[a_k,b_k)>
# periodised over `images` copies on each side of the nearest image
# ---------------------------------------------------------------------------


def interval_gram_np(starts, ends, period, images, values, derivs, step):
    a = starts[None, :]
    b = ends[None, :]
    mid = 0.5 * (starts + ends)
    # shift row interval k to the image nearest to column interval l
    shift = -np.floor((mid[:, None] - mid[None, :]) / period + 0.5) * period if period > 0 else 0.0
    out = np.zeros((starts.shape[0], starts.shape[0]))
    for p in range(-images, images + 1):
        c = starts[:, None] + shift + p * period
        d = ends[:, None] + shift + p * period
        out += (phi_lookup_np(d - a, values, derivs, step)
                - phi_lookup_np(d - b, values, derivs, step)
                - phi_lookup_np(c - a, values, derivs, step)
                + phi_lookup_np(c - b, values, derivs, step))
    return out


# ---------------------------------------------------------------------------
# harmonic evaluation: f(t) = slope*t + offset + sum_m ca[m] cos(m w t) + sa[m] sin(m w t)
# trig_roots bisects f - level[j] on each bracket [lo[j], hi[j]]
# ---------------------------------------------------------------------------


def cos_sin_matrix_np(t, omega1, n_harm):
    arg = np.outer(np.asarray(t, dtype=np.float64), omega1 * np.arange(n_harm + 1))
    return np.cos(arg), np.sin(arg)


def trig_eval_np(t, ca, sa, omega1, slope=0.0, offset=0.0, chunk=4096):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape[0])
    harm = omega1 * np.arange(ca.shape[0])
    for s in range(0, t.shape[0], chunk):
        arg = np.outer(t[s:s + chunk], harm)
        out[s:s + chunk] = np.cos(arg) @ ca + np.sin(arg) @ sa
    return out + slope * t + offset


def trig_roots_np(lo, hi, ca, sa, omega1, slope, offset, level, iters=60):
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    level = np.broadcast_to(np.asarray(level, dtype=np.float64), lo.shape)
    flo = trig_eval_np(lo, ca, sa, omega1, slope, offset) - level
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = trig_eval_np(mid, ca, sa, omega1, slope, offset) - level
        left = (fm == 0.0) | (np.signbit(fm) != np.signbit(flo))
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fm)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Kaczmarz row-action sweeps (in place on `a`)
# ---------------------------------------------------------------------------


def kaczmarz_sweeps_np(E, rhs, a, order, relax, row_norm_sq):
    """Sequential Kaczmarz updates over the row indices in ``order``.

    A plain cyclic order ``0..n-1`` is evaluated in closed form as one lower
    triangular solve on the row Gram matrix (Gauss-Seidel on ``E E^T``);
    any other order falls back to a Python loop.
    """
    n = E.shape[0]
    if order.shape[0] == n and np.array_equal(order, np.arange(n)):
        H = np.tril(E @ E.T, -1)
        H[np.diag_indices(n)] = row_norm_sq / relax
        delta = solve_triangular(H, rhs - E @ a, lower=True, check_finite=False)
        a += E.T @ delta
        return a
    for k in order:
        r = rhs[k] - E[k] @ a
        a += (relax * r / row_norm_sq[k]) * E[k]
    return a


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    _phi_far_nb = njit(cache=True)(_phi_far)
    _hermite_nb = njit(cache=True)(_hermite_scalar)

    @njit(cache=True)
    def phi_lookup_nb(t, values, derivs, step):
        flat = t.ravel()
        out = np.empty(flat.shape[0])
        for j in range(flat.shape[0]):
            out[j] = _hermite_nb(flat[j], values, derivs, step)
        return out.reshape(t.shape)

    @njit(cache=True)
    def interval_gram_nb(starts, ends, period, images, values, derivs, step):
        n = starts.shape[0]
        out = np.zeros((n, n))
        for k in range(n):
            mk = 0.5 * (starts[k] + ends[k])
            for l in range(n):
                a = starts[l]
                b = ends[l]
                shift = 0.0
                if period > 0:
                    shift = -np.floor((mk - 0.5 * (a + b)) / period + 0.5) * period
                acc = 0.0
                for p in range(-images, images + 1):
                    c = starts[k] + shift + p * period
                    d = ends[k] + shift + p * period
                    acc += (_hermite_nb(d - a, values, derivs, step)
                            - _hermite_nb(d - b, values, derivs, step)
                            - _hermite_nb(c - a, values, derivs, step)
                            + _hermite_nb(c - b, values, derivs, step))
                out[k, l] = acc
        return out

    @njit(cache=True)
    def cos_sin_matrix_nb(t, omega1, n_harm):
        n = t.shape[0]
        C = np.empty((n, n_harm + 1))
        S = np.empty((n, n_harm + 1))
        for j in range(n):
            c1 = np.cos(omega1 * t[j])
            s1 = np.sin(omega1 * t[j])
            C[j, 0] = 1.0
            S[j, 0] = 0.0
            c = 1.0
            s = 0.0
            for m in range(1, n_harm + 1):
                # re-anchor the rotation every 32 steps to bound drift
                if m % 32 == 0:
                    c = np.cos(m * omega1 * t[j])
                    s = np.sin(m * omega1 * t[j])
                else:
                    c, s = c * c1 - s * s1, s * c1 + c * s1
                C[j, m] = c
                S[j, m] = s
        return C, S

    @njit(cache=True)
    def _trig_scalar(t, ca, sa, omega1, slope, offset):
        c1 = np.cos(omega1 * t)
        s1 = np.sin(omega1 * t)
        c = 1.0
        s = 0.0
        acc = ca[0]
        for m in range(1, ca.shape[0]):
            if m % 32 == 0:
                c = np.cos(m * omega1 * t)
                s = np.sin(m * omega1 * t)
            else:
                c, s = c * c1 - s * s1, s * c1 + c * s1
            acc += ca[m] * c + sa[m] * s
        return acc + slope * t + offset

    @njit(cache=True)
    def trig_eval_nb(t, ca, sa, omega1, slope=0.0, offset=0.0):
        out = np.empty(t.shape[0])
        for j in range(t.shape[0]):
            out[j] = _trig_scalar(t[j], ca, sa, omega1, slope, offset)
        return out

    @njit(cache=True)
    def trig_roots_nb(lo, hi, ca, sa, omega1, slope, offset, level, iters=60):
        out = np.empty(lo.shape[0])
        for j in range(lo.shape[0]):
            a = lo[j]
            b = hi[j]
            fa = _trig_scalar(a, ca, sa, omega1, slope, offset) - level[j]
            for _ in range(iters):
                m = 0.5 * (a + b)
                fm = _trig_scalar(m, ca, sa, omega1, slope, offset) - level[j]
                if fm == 0.0 or (fm < 0.0) != (fa < 0.0):
                    b = m
                else:
                    a = m
                    fa = fm
            out[j] = 0.5 * (a + b)
        return out

    @njit(cache=True)
    def kaczmarz_sweeps_nb(E, rhs, a, order, relax, row_norm_sq):
        n_b = E.shape[1]
        for k in order:
            r = rhs[k]
            for i in range(n_b):
                r -= E[k, i] * a[i]
            g = relax * r / row_norm_sq[k]
            for i in range(n_b):
                a[i] += g * E[k, i]
        return a

else:  # pragma: no cover
    phi_lookup_nb = interval_gram_nb = cos_sin_matrix_nb = None
    trig_eval_nb = trig_roots_nb = kaczmarz_sweeps_nb = None


def _pick(nb, np_):
    return nb if USE_NUMBA else np_


phi_lookup = _pick(phi_lookup_nb, phi_lookup_np)
interval_gram = _pick(interval_gram_nb, interval_gram_np)
cos_sin_matrix = _pick(cos_sin_matrix_nb, cos_sin_matrix_np)
trig_eval = _pick(trig_eval_nb, trig_eval_np)
trig_roots = _pick(trig_roots_nb, trig_roots_np)
kaczmarz_sweeps = _pick(kaczmarz_sweeps_nb, kaczmarz_sweeps_np)
