"""Small-scale invariant suite over all modules.

Each check returns a measured violation that must not exceed its tolerance.
The whole suite runs in a few seconds and never raises: failures (including
exceptions) are reported as failed lines.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels
from .baselines import frame_iterate, kaczmarz_iterate
from .encoders import (integral_encode, integrate_and_fire_boundaries, level_crossing_sample,
                       multichannel_encode)
from .kernel_space import KernelFamily, SamplingOperator, gram_entry_closed_form
from .multichannel import MultiChannelSignal, mc_reconstruct, project_U_separable
from .pocs import FORMS, Problem, iterate, least_squares_oracle
from .signal import (Grid, default_phi_table, harmonic_basis, phi_exact, project_bandlimited,
                     random_bandlimited)
from .sobolev import (PointSampleSet, check_sobolev_decomposition, groch_discrete_iterate,
                      groch_iterate)

__all__ = ["FAULTS", "CheckResult", "selftest", "format_report"]

FAULTS = ("phi-sign",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    seconds: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.value <= self.tol)


def _phi_under_test(faults):
    table = default_phi_table()
    if "phi-sign" in faults:
        return lambda t: np.sign(t) * table(np.abs(t))
    return table


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _instance(seed, period=32.0, n_kernels=8):
    g = Grid(period)
    rng = np.random.default_rng(seed)
    b = np.sort(rng.uniform(0, period, n_kernels + 1))
    op = SamplingOperator(KernelFamily(g, b, "indicator"))
    x = random_bandlimited(seed, g)
    return g, op, x


def _checks(faults):
    phi_t = _phi_under_test(faults)
    g32 = Grid(32.0)

    def phi_quadrature():
        ts = np.array([-7.3, -0.4, 0.25, 1.0, 3.7, 12.5])
        ref = np.array([quad(lambda s: (t - s) * np.sinc(s), 0, t, limit=200, epsabs=1e-13)[0]
                        for t in ts])
        return float(np.max(np.abs(phi_exact(ts) - ref))), 1e-10

    def phi_even():
        t = np.linspace(0.01, 40, 97)
        return float(np.max(np.abs(phi_t(t) - phi_t(-t)))), 1e-12

    def phi_table():
        t = np.random.default_rng(0).uniform(-500, 500, 2000)
        return float(np.max(np.abs(default_phi_table()(t) - phi_exact(t)))), 1e-8

    def projection_idempotent():
        u = np.random.default_rng(1).standard_normal(g32.n_points)
        p = project_bandlimited(u, g32)
        return float(np.max(np.abs(project_bandlimited(p, g32) - p))), 1e-12

    def kernel_samples():
        _, op, x = _instance(2)
        kf = op.kernels
        ref = np.array([quad(x.at, a, b, limit=200)[0] for a, b in zip(kf.starts, kf.ends)])
        return float(np.max(np.abs(op.apply_coords(x.coords) - ref))), 1e-10

    def gram_closed_form():
        g = Grid(129.0)
        b = np.sort(np.random.default_rng(3).uniform(0, 129, 9))
        op = SamplingOperator(KernelFamily(g, b, "indicator"))
        return float(np.max(np.abs(op.gram_closed_form() - op.gram))), 1e-4

    def gram_entry_dblquad():
        from scipy.integrate import dblquad
        ref = dblquad(lambda s, t: np.sinc(t - s), 0.3, 1.4, 0.0, 0.9)[0]
        return abs(gram_entry_closed_form(0.0, 0.9, 0.3, 1.4) - ref), 1e-8

    def form_equivalence():
        worst = 0.0
        for seed in range(3):
            _, op, x = _instance(seed)
            pr = Problem(op, op.apply_coords(x.coords))
            runs = [iterate(pr, f, 20, tol=0, record=False)[0].values for f in FORMS]
            worst = max(worst, *(_rel(r, runs[0]) for r in runs[1:]))
        return worst, 1e-10

    def landweber_oracle():
        g = Grid(16.0)
        b = np.linspace(0, 16, 65)
        op = SamplingOperator(KernelFamily(g, b, "indicator"))
        x = random_bandlimited(4, g)
        w = op.apply_coords(x.coords) + 1e-3 * np.random.default_rng(4).standard_normal(64)
        pr = Problem(op, w)
        xs, _, _ = iterate(pr, "landweber", 3000, tol=0, record=False)
        return _rel(xs.values, least_squares_oracle(pr).values), 1e-6

    def integrate_and_fire():
        x = random_bandlimited(5, g32)
        b = integrate_and_fire_boundaries(x, 0.9, 4.0)
        s = integral_encode(x, b)
        # each interval integral of x + bias equals the threshold
        return float(np.max(np.abs(s.values + 4.0 * np.diff(b) - 0.9))), 1e-10

    def level_crossing():
        x = random_bandlimited(6, g32)
        s = level_crossing_sample(x, [-0.5, 0.0, 0.5])
        return float(np.max(np.abs(x.at(s.t) - s.values))), 1e-12

    def separable_projection():
        rng = np.random.default_rng(7)
        g = Grid(16.0)
        A = rng.standard_normal((3, 2))
        v = rng.standard_normal(3)
        f = rng.standard_normal(g.n_points)
        P = project_U_separable(v, f, A, g)
        # brute force: least squares onto the span of A[:, i] (x) e_j
        basis = harmonic_basis(g)
        E = np.array([basis.values(e) for e in np.eye(basis.size)])
        cols = np.array([np.outer(A[:, i], e).ravel() for i in range(2) for e in E]).T
        coef = np.linalg.lstsq(cols, np.outer(v, f).ravel(), rcond=None)[0]
        return float(np.max(np.abs(P.values.ravel() - cols @ coef))), 1e-10

    def multichannel_recovery():
        rng = np.random.default_rng(8)
        g = Grid(16.0)
        A = rng.standard_normal((3, 2))
        S = MultiChannelSignal(g, np.array([random_bandlimited(10 + i, g).values for i in range(2)]))
        X = MultiChannelSignal.from_sources(A, S)
        bounds = [np.concatenate(([0.0], np.cumsum(rng.uniform(0.5, 0.9, 40)))) for _ in range(3)]
        bounds = [b[b <= 16.0] for b in bounds]
        Y = mc_reconstruct(multichannel_encode(X, bounds), A, n_iters=5000, grid=g)
        return _rel(Y.values, X.values), 1e-6

    def single_channel_identity():
        _, op, x = _instance(9)
        b = op.kernels.boundaries
        s = integral_encode(x, b)
        Y = mc_reconstruct([s], [[1.0]], n_iters=40, grid=x.grid, tol=0)
        ys, _, _ = iterate(Problem(op, s.values), "discrete_time", 40, tol=0, record=False)
        return float(np.max(np.abs(Y.values[0] - ys.values))), 0.0

    def sobolev_structure():
        x = random_bandlimited(11, g32)
        t = np.sort(np.random.default_rng(11).uniform(0, 32, 40))
        return max(check_sobolev_decomposition(t, x).values()), 1e-10

    def groch_forms():
        x = random_bandlimited(12, g32)
        t = np.cumsum(np.random.default_rng(12).uniform(0.2, 0.8, 80))
        t = t[t < 32]
        s = PointSampleSet(t, x.at(t), 32.0)
        a, _ = groch_iterate(s, n_iters=30, grid=g32)
        b = groch_discrete_iterate(s, n_iters=30, grid=g32)
        return _rel(a.values, b.values), 1e-10

    def groch_perfect():
        x = random_bandlimited(13, g32)
        t = np.cumsum(np.random.default_rng(13).uniform(0.3, 0.9, 80))
        t = t[t < 32]
        a, _ = groch_iterate(PointSampleSet(t, x.at(t), 32.0), n_iters=500, grid=g32)
        return _rel(a.values, x.values), 1e-6

    def baselines_converge():
        x = random_bandlimited(14, g32)
        t = np.cumsum(np.random.default_rng(14).uniform(0.1, 0.4, 200))
        t = t[t < 32]
        s = PointSampleSet(t, x.at(t), 32.0)
        f, _ = frame_iterate(s, n_iters=300, grid=g32)
        k, _ = kaczmarz_iterate(s, n_sweeps=300, grid=g32)
        return max(_rel(f.values, x.values), _rel(k.values, x.values)), 1e-6

    def kernel_twins():
        if not _kernels.HAVE_NUMBA:
            return 0.0, 0.0
        t = np.random.default_rng(15).uniform(-600, 600, 500)
        tab = default_phi_table()
        a = _kernels.phi_lookup_np(t, tab.values, tab.derivs, tab.step)
        b = _kernels.phi_lookup_nb(t, tab.values, tab.derivs, tab.step)
        return float(np.max(np.abs(a - b))), 1e-12

    return [
        ("phi closed form vs quadrature", phi_quadrature),
        ("phi evenness", phi_even),
        ("phi table accuracy", phi_table),
        ("band projection idempotence", projection_idempotent),
        ("kernel samples vs quadrature", kernel_samples),
        ("closed-form gram vs periodic gram", gram_closed_form),
        ("gram entry vs dblquad", gram_entry_dblquad),
        ("iteration form equivalence", form_equivalence),
        ("landweber vs least-squares oracle", landweber_oracle),
        ("integrate-and-fire interval integrals", integrate_and_fire),
        ("level-crossing accuracy", level_crossing),
        ("separable projection", separable_projection),
        ("multichannel recovery", multichannel_recovery),
        ("single-channel identity", single_channel_identity),
        ("sobolev decomposition", sobolev_structure),
        ("groechenig continuous vs discrete", groch_forms),
        ("groechenig perfect reconstruction", groch_perfect),
        ("frame and kaczmarz convergence", baselines_converge),
        ("numba vs numpy phi lookup", kernel_twins),
    ]


def selftest(faults=(), verbose: bool = False, stream=None) -> list:
    """Run every check.

    Parameters
    ----------
    faults : sequence of str
        Debug hook: names from :data:`FAULTS` to inject (``"phi-sign"`` makes
        the phi under test odd).
    verbose : bool
        Print each line as it completes.

    Returns
    -------
    list of CheckResult
    """
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown faults {sorted(unknown)}")
    results = []
    for name, fn in _checks(tuple(faults)):
        t0 = time.perf_counter()
        try:
            value, tol = fn()
            res = CheckResult(name, float(value), float(tol), time.perf_counter() - t0)
        except Exception as exc:  # reported, not thrown
            res = CheckResult(name, float("nan"), 0.0, time.perf_counter() - t0,
                              f"{type(exc).__name__}: {exc}")
        results.append(res)
        if verbose:
            print(format_report([res]), file=stream, flush=True)
    return results


def format_report(results) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = r.error if r.error else f"{r.value:.3g} <= {r.tol:.3g}"
        lines.append(f"{status}  {r.name:<40s} {detail}  ({r.seconds:.2f}s)")
    return "\n".join(lines)
