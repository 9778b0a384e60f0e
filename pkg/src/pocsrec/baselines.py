"""Comparison reconstructors for nonuniform point samples.

All methods act on the harmonic coordinates of the band-limited iterate.
The in-band atom for evaluation at ``t_k`` has coordinates ``E[k]`` (a row
of :attr:`PointSamplingModel.E`), since ``x(t_k) = <x, P_B delta_{t_k}>``.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .pocs import ConvergenceReport
from .signal import NYQUIST_BAND, BandlimitedSignal
from .sobolev import PointSampleSet, PointSamplingModel, point_model

__all__ = [
    "METHODS",
    "DIVERGENCE_FACTOR",
    "BaselineConfig",
    "frame_bounds",
    "optimal_relaxation",
    "frame_iterate",
    "kaczmarz_iterate",
    "run_baseline",
]

METHODS = ("frame", "kaczmarz_cyclic", "kaczmarz_random")
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class BaselineConfig:
    """Method choice and its parameters.

    ``relaxation=None`` selects the optimal frame relaxation for ``frame``
    and ``1`` for the Kaczmarz variants.
    """

    method: str = "frame"
    relaxation: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.relaxation is not None and not self.relaxation > 0:
            raise ValueError("relaxation must be positive")


def _power_iteration(apply, dim, n_iter, rng):
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = apply(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= 1e-12 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def frame_bounds(model: PointSamplingModel, n_iter: int = 5000, seed: int = 0):
    """Extreme eigenvalues of the frame operator ``E^T E`` by power iteration.

    The smallest one comes from power iteration on ``s_max I - E^T E``.
    """
    rng = np.random.default_rng(seed)
    E = model.E
    F = E.T @ E
    top = _power_iteration(lambda v: F @ v, F.shape[0], n_iter, rng)
    low = top - _power_iteration(lambda v: top * v - F @ v, F.shape[0], n_iter, rng)
    return max(low, 0.0), top


def optimal_relaxation(model: PointSamplingModel, **kw) -> float:
    """``2 / (s_max + s_min)`` for the frame operator."""
    low, top = frame_bounds(model, **kw)
    return 2.0 / (top + low)


def _report(model, values, traj, truth, reason):
    E = model.E
    res = np.array([np.linalg.norm(values - E @ a) for a in traj])
    if truth is None:
        return ConvergenceReport(np.arange(len(traj)), res, None, None, reason)
    om = model.basis.coord_omega
    at = truth.coords
    e2 = np.array([np.linalg.norm(a - at) for a in traj])
    es = np.array([np.linalg.norm(om * (a - at)) for a in traj])
    return ConvergenceReport(np.arange(len(traj)), res, e2, es, reason)


def _start(model, x0):
    return np.zeros(model.n_coords) if x0 is None else np.array(x0.coords, dtype=np.float64)


def frame_iterate(samples: PointSampleSet, x0: BandlimitedSignal | None = None,
                  n_iters: int = 1000, relaxation: float | None = None, grid=None,
                  band_edge: float = NYQUIST_BAND, truth: BandlimitedSignal | None = None,
                  model: PointSamplingModel | None = None):
    """Frame algorithm ``x <- x + lam sum_k (x_k - x(t_k)) P_B delta_{t_k}``.

    Returns
    -------
    BandlimitedSignal, ConvergenceReport
        ``stop_reason`` is ``"diverged"`` when the iterate norm exceeds
        :data:`DIVERGENCE_FACTOR` times the input scale; the returned signal
        is then the last finite iterate.
    """
    model = model or point_model(samples, x0, grid, band_edge)
    lam = optimal_relaxation(model) if relaxation is None else float(relaxation)
    E = model.E
    x = samples.values
    a = _start(model, x0)
    scale = max(np.linalg.norm(a), np.linalg.norm(x) * np.sqrt(model.grid.period / len(x)), 1e-300)
    traj = [a.copy()]
    reason = "max_iters"
    for _ in range(n_iters):
        a_new = a + lam * (E.T @ (x - E @ a))
        if not np.all(np.isfinite(a_new)) or np.linalg.norm(a_new) > DIVERGENCE_FACTOR * scale:
            reason = "diverged"
            break
        a = a_new
        traj.append(a.copy())
    return model.to_signal(a), _report(model, x, traj, truth, reason)


def kaczmarz_iterate(samples: PointSampleSet, x0: BandlimitedSignal | None = None,
                     n_sweeps: int = 100, order: str = "cyclic", relaxation: float = 1.0,
                     seed: int = 0, grid=None, band_edge: float = NYQUIST_BAND,
                     truth: BandlimitedSignal | None = None,
                     model: PointSamplingModel | None = None):
    """Row-action updates ``x <- x + (x_k - x(t_k)) a_k / ||a_k||^2``.

    Parameters
    ----------
    order : {"cyclic", "random"}
        ``"random"`` draws ``n`` rows per sweep with probability proportional
        to ``||a_k||^2`` from ``default_rng(seed)``.

    Notes
    -----
    One sweep of ``n`` row updates counts as one iteration in the report.
    """
    if order not in ("cyclic", "random"):
        raise ValueError(f"unknown order {order!r}")
    model = model or point_model(samples, x0, grid, band_edge)
    E = np.ascontiguousarray(model.E)
    n = E.shape[0]
    rn = np.einsum("ij,ij->i", E, E)
    x = np.ascontiguousarray(samples.values, dtype=np.float64)
    a = _start(model, x0)
    traj = [a.copy()]
    rng = np.random.default_rng(seed)
    cyc = np.arange(n, dtype=np.int64)
    p = rn / rn.sum()
    for _ in range(n_sweeps):
        idx = cyc if order == "cyclic" else rng.choice(n, size=n, p=p).astype(np.int64)
        a = _kernels.kaczmarz_sweeps(E, x, a, idx, float(relaxation), rn)
        traj.append(a.copy())
    return model.to_signal(a), _report(model, x, traj, truth, "max_iters")


def run_baseline(config: BaselineConfig, samples: PointSampleSet, x0=None, n_iters: int = 1000,
                 **kw):
    """Dispatch on ``config.method``."""
    if config.method == "frame":
        return frame_iterate(samples, x0, n_iters, config.relaxation, **kw)
    relax = 1.0 if config.relaxation is None else config.relaxation
    order = "cyclic" if config.method == "kaczmarz_cyclic" else "random"
    return kaczmarz_iterate(samples, x0, n_iters, order, relax, config.seed, **kw)
