"""Gröchenig interpolation of point samples as POCS in the Sobolev space.

Point samples ``x_k = x(t_k)`` of a band-limited ``x`` are interpolated by
iterating ``x <- x + P_B L(x_samples - S x)`` where ``S`` samples at the
instants and ``L`` linearly interpolates.  In the homogeneous Sobolev space
(semi-norm ``||u'||``), ``L S`` is the orthogonal projection onto the
piecewise-linear functions and the iteration is POCS.

On the periodic model the last segment wraps from ``t_{n-1}`` to
``t_0 + T``.  ``P_B L c`` is computed exactly from the jumps of the
derivative of ``L c``: for ``m >= 1`` its ``m``-th Fourier coefficient is
``-(1/w_m^2) sum_k J_k exp(-i w_m t_k)`` with ``J_k = s_{k+1} - s_k`` and
``s_k = (c_k - c_{k-1}) / dt_k``; its mean is the trapezoid integral.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, GridMismatchError, InvalidSamplingError
from .pocs import PINV_RCOND, ConvergenceReport
from .signal import (NYQUIST_BAND, BandlimitedSignal, Grid, PhiTable, default_phi_table,
                     harmonic_basis)

__all__ = [
    "PointSampleSet",
    "PiecewiseLinear",
    "SobolevSignal",
    "PointSamplingModel",
    "point_model",
    "linear_interpolate",
    "sobolev_inner",
    "sobolev_norm",
    "groch_iterate",
    "groch_discrete_iterate",
    "groch_limit",
    "pbq_closed_form",
    "spl_closed_form",
    "check_sobolev_decomposition",
]


@dataclass(frozen=True, eq=False)
class PointSampleSet:
    """Values at strictly increasing instants in ``[0, T)``.

    ``gaps[k] = t_k - t_{k-1}`` with the periodic wrap ``gaps[0] = t_0 + T - t_{n-1}``.
    """

    instants: np.ndarray
    values: np.ndarray
    period: float

    def __post_init__(self):
        t = np.array(self.instants, dtype=np.float64)
        v = np.array(self.values, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise DimensionMismatchError("instants and values differ in shape")
        if np.any(np.diff(t) <= 0):
            raise InvalidSamplingError("instants must be strictly increasing")
        if t.size and (t[0] < 0 or t[-1] >= self.period):
            raise InvalidSamplingError("instants must lie in [0, T)")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "instants", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_stream(cls, stream, period: float) -> "PointSampleSet":
        return cls(stream.t, stream.values, period)

    def __len__(self):
        return self.instants.shape[0]

    @cached_property
    def gaps(self) -> np.ndarray:
        t = self.instants
        return np.diff(np.concatenate(([t[-1] - self.period], t)))

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    def with_values(self, values) -> "PointSampleSet":
        return PointSampleSet(self.instants, values, self.period)


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Periodic function linear between consecutive knots.

    Parameters
    ----------
    knots : ndarray
        Strictly increasing instants in ``[0, T)``.
    knot_values : ndarray
    period : float
    """

    knots: np.ndarray
    knot_values: np.ndarray
    period: float

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=np.float64)
        v = np.asarray(self.knot_values, dtype=np.float64)
        if t.shape != v.shape:
            raise DimensionMismatchError("knots and values differ in length")
        if t.shape[0] < 2:
            raise InvalidSamplingError("need at least two knots")
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "knot_values", v)

    @cached_property
    def gaps(self) -> np.ndarray:
        t = self.knots
        return np.diff(np.concatenate(([t[-1] - self.period], t)))

    @cached_property
    def slopes(self) -> np.ndarray:
        """``s_k`` on the segment ending at knot ``k`` (``s_0`` wraps)."""
        c = self.knot_values
        return (c - np.roll(c, 1)) / self.gaps

    @cached_property
    def jumps(self) -> np.ndarray:
        """Derivative jumps ``J_k = s_{k+1} - s_k`` at each knot."""
        s = self.slopes
        return np.roll(s, -1) - s

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        tt = np.mod(np.atleast_1d(t), self.period)
        k = np.searchsorted(self.knots, tt, side="right") - 1
        # before the first knot: wrapped segment from the last knot
        wrap = k < 0
        k = np.where(wrap, self.knots.shape[0] - 1, k)
        base = np.where(wrap, self.knots[-1] - self.period, self.knots[k])
        s_next = np.roll(self.slopes, -1)[k]
        out = self.knot_values[k] + s_next * (tt - base)
        return float(out[0]) if scalar else out

    def derivative(self, t):
        tt = np.mod(np.atleast_1d(np.asarray(t, dtype=np.float64)), self.period)
        k = np.searchsorted(self.knots, tt, side="right") - 1
        k = np.where(k < 0, self.knots.shape[0] - 1, k)
        return np.roll(self.slopes, -1)[k]

    def fourier(self, n_harm: int) -> np.ndarray:
        """``int_0^T f(t) exp(-i w_m t) dt`` for ``m = 0..n_harm``."""
        m = np.arange(1, n_harm + 1)
        om = 2.0 * np.pi * m / self.period
        U = np.empty(n_harm + 1, dtype=np.complex128)
        g = self.gaps
        c = self.knot_values
        U[0] = np.sum(g * (c + np.roll(c, 1))) / 2.0
        U[1:] = -(np.exp(-1j * np.outer(om, self.knots)) @ self.jumps) / om ** 2
        return U

    def band_coords(self, basis) -> np.ndarray:
        """Harmonic coordinates of ``P_B f``."""
        return basis.from_fourier(self.fourier(basis.n_harmonics))

    def on_grid(self, grid: Grid) -> np.ndarray:
        return self(grid.times)


def linear_interpolate(samples: PointSampleSet) -> PiecewiseLinear:
    """Periodic linear interpolant ``L c`` of the samples."""
    if len(samples) < 2:
        raise InvalidSamplingError("need at least two samples")
    return PiecewiseLinear(samples.instants, samples.values, samples.period)


@dataclass(frozen=True, eq=False)
class SobolevSignal:
    """Element of the Sobolev space: band-limited part plus piecewise-linear part.

    The value is anchored by the parts themselves (constants are carried by
    the band-limited dc coordinate and by knot values); the semi-norm ignores
    them.
    """

    bandlimited: BandlimitedSignal | None = None
    piecewise: PiecewiseLinear | None = None
    pl_scale: float = 1.0

    def __call__(self, t):
        out = np.zeros(np.atleast_1d(t).shape)
        if self.bandlimited is not None:
            out = out + self.bandlimited.at(t)
        if self.piecewise is not None:
            out = out + self.pl_scale * self.piecewise(t)
        return out

    def __sub__(self, other):
        other = _as_sobolev(other)
        if self.piecewise is not None and other.piecewise is not None:
            raise ValueError("only one piecewise-linear part is supported")
        bl = self.bandlimited
        if other.bandlimited is not None:
            bl = -other.bandlimited if bl is None else bl - other.bandlimited
        if other.piecewise is not None:
            return SobolevSignal(bl, other.piecewise, -other.pl_scale)
        return SobolevSignal(bl, self.piecewise, self.pl_scale)


def _as_sobolev(u) -> SobolevSignal:
    if isinstance(u, SobolevSignal):
        return u
    if isinstance(u, BandlimitedSignal):
        return SobolevSignal(bandlimited=u)
    if isinstance(u, PiecewiseLinear):
        return SobolevSignal(piecewise=u)
    raise TypeError(f"cannot interpret {type(u).__name__} as a Sobolev signal")


def _bl_bl(u: BandlimitedSignal, v: BandlimitedSignal) -> float:
    if u.grid != v.grid or u.band_edge != v.band_edge:
        raise GridMismatchError("signals live on different grids")
    w = u.basis.coord_omega
    return float(np.sum(w * w * u.coords * v.coords))


def _pl_bl(p: PiecewiseLinear, u: BandlimitedSignal) -> float:
    if abs(p.period - u.grid.period) > 1e-12:
        raise GridMismatchError("periods differ")
    # integration by parts: <(Lc)', u'> = -sum_k J_k u(t_k)
    return float(-np.dot(p.jumps, u.at(p.knots)))


def _pl_pl(p: PiecewiseLinear, q: PiecewiseLinear) -> float:
    if abs(p.period - q.period) > 1e-12:
        raise GridMismatchError("periods differ")
    if p.knots.shape == q.knots.shape and np.array_equal(p.knots, q.knots):
        return float(np.sum(p.slopes * q.slopes * p.gaps))
    # merged partition; derivatives are constant on each piece
    T = p.period
    cuts = np.union1d(p.knots, q.knots)
    cuts = np.concatenate((cuts, [cuts[0] + T]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    return float(np.sum(p.derivative(mids) * q.derivative(mids) * np.diff(cuts)))


def sobolev_inner(u, v) -> float:
    """``<u', v'>`` for any pairing of band-limited and piecewise-linear signals.

    Band-limited pairs use the spectral derivative, piecewise-linear pairs the
    exact piecewise-constant derivatives, and mixed pairs integration by parts
    against the derivative jumps.
    """
    u = _as_sobolev(u)
    v = _as_sobolev(v)
    total = 0.0
    for pa, sa in ((u.bandlimited, 1.0), (u.piecewise, u.pl_scale)):
        if pa is None:
            continue
        for pb, sb in ((v.bandlimited, 1.0), (v.piecewise, v.pl_scale)):
            if pb is None:
                continue
            if isinstance(pa, BandlimitedSignal) and isinstance(pb, BandlimitedSignal):
                r = _bl_bl(pa, pb)
            elif isinstance(pa, PiecewiseLinear) and isinstance(pb, PiecewiseLinear):
                r = _pl_pl(pa, pb)
            elif isinstance(pa, PiecewiseLinear):
                r = _pl_bl(pa, pb)
            else:
                r = _pl_bl(pb, pa)
            total += sa * sb * r
    return total


def sobolev_norm(u) -> float:
    return float(np.sqrt(max(sobolev_inner(u, u), 0.0)))


class PointSamplingModel:
    """Matrices of point sampling on the band-limited space.

    Attributes
    ----------
    E : ndarray
        ``E[k, i] = e_i(t_k)``, so ``S x = E a``.
    P : ndarray
        Coordinates of ``P_B L e_k`` in column ``k``.
    """

    def __init__(self, instants, grid: Grid, band_edge: float = NYQUIST_BAND):
        self.grid = grid
        self.band_edge = float(band_edge)
        self.basis = harmonic_basis(grid, band_edge)
        t = np.asarray(instants, dtype=np.float64)
        if t.ndim != 1 or t.shape[0] < 2 or np.any(np.diff(t) <= 0):
            raise InvalidSamplingError("need at least two strictly increasing instants")
        if t[0] < 0 or t[-1] >= grid.period:
            raise InvalidSamplingError("instants must lie in [0, T)")
        self.instants = t
        self.gaps = np.diff(np.concatenate(([t[-1] - grid.period], t)))
        self.E = self.basis.matrix(t)

    @property
    def n_samples(self) -> int:
        return self.E.shape[0]

    @property
    def n_coords(self) -> int:
        return self.E.shape[1]

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        return 0.5 * (self.gaps + np.roll(self.gaps, -1))

    @cached_property
    def P(self) -> np.ndarray:
        E = self.E
        g = self.gaps
        gn = np.roll(g, -1)
        # jumps of L e_k sit at t_{k-1}, t_k, t_{k+1}
        cols = (np.roll(E, 1, axis=0) / g[:, None]
                - E * (1.0 / g + 1.0 / gn)[:, None]
                + np.roll(E, -1, axis=0) / gn[:, None])
        om = self.basis.coord_omega
        P = np.empty((self.n_coords, self.n_samples))
        P[1:] = -cols[:, 1:].T / (om[1:, None] ** 2)
        P[0] = self.trapezoid_weights / np.sqrt(self.grid.period)
        return P

    @cached_property
    def spl(self) -> np.ndarray:
        """Discrete-form matrix ``S P_B L`` with entries ``(P_B q_l)(t_k)``."""
        return self.E @ self.P

    def pbl_coords(self, c) -> np.ndarray:
        """Coordinates of ``P_B L c`` via the interpolant's jumps."""
        pl = PiecewiseLinear(self.instants, c, self.grid.period)
        om = self.basis.coord_omega
        out = np.empty(self.n_coords)
        out[1:] = -(self.E[:, 1:].T @ pl.jumps) / om[1:] ** 2
        out[0] = np.dot(self.trapezoid_weights, c) / np.sqrt(self.grid.period)
        return out

    def residual_D(self, values, a) -> float:
        """``||L(x - S u)||`` in the Sobolev semi-norm (weights ``dt_k``)."""
        r = values - self.E @ a
        dr = r - np.roll(r, 1)
        return float(np.sqrt(np.sum(dr * dr / self.gaps)))

    def to_signal(self, a) -> BandlimitedSignal:
        return BandlimitedSignal.from_coords(self.grid, a, self.band_edge)


def point_model(samples, x0=None, grid=None, band_edge=NYQUIST_BAND) -> PointSamplingModel:
    """Sampling model for ``samples`` on the grid of ``x0`` (or ``grid``)."""
    if x0 is not None:
        grid, band_edge = x0.grid, x0.band_edge
    if grid is None:
        raise ValueError("a grid is required when x0 is not given")
    if abs(grid.period - samples.period) > 1e-12:
        raise GridMismatchError("sample period differs from the grid period")
    return PointSamplingModel(samples.instants, grid, band_edge)


def _curves(model, values, traj, truth):
    om = model.basis.coord_omega
    res = [model.residual_D(values, a) for a in traj]
    if truth is None:
        return np.array(res), None, None
    at = truth.coords
    e2 = np.array([np.linalg.norm(a - at) for a in traj])
    es = np.array([np.linalg.norm(om * (a - at)) for a in traj])
    return np.array(res), e2, es


def groch_iterate(samples: PointSampleSet, x0: BandlimitedSignal | None = None,
                  n_iters: int = 500, grid: Grid | None = None,
                  band_edge: float = NYQUIST_BAND, truth: BandlimitedSignal | None = None,
                  tol: float = 0.0, model: PointSamplingModel | None = None):
    """Continuous-form Gröchenig iteration ``x <- x + P_B L(x - S x)``.

    Each step evaluates the iterate at the instants, forms the linear
    interpolant of the residual and projects it onto the band.

    Returns
    -------
    BandlimitedSignal, ConvergenceReport
        Report errors are L2 and Sobolev norms against ``truth``.
    """
    model = model or point_model(samples, x0, grid, band_edge)
    a = np.zeros(model.n_coords) if x0 is None else np.array(x0.coords)
    values = samples.values
    traj = [a.copy()]
    reason = "max_iters"
    for _ in range(n_iters):
        # the iterate at the instants; E a equals x(t_k) exactly
        r = values - model.E @ a
        da = model.pbl_coords(r)
        a = a + da
        traj.append(a.copy())
        if tol > 0 and np.linalg.norm(da) <= tol * max(np.linalg.norm(a), 1e-300):
            reason = "converged"
            break
    res, e2, es = _curves(model, values, traj, truth)
    report = ConvergenceReport(np.arange(len(traj)), res, e2, es, reason)
    return model.to_signal(a), report


def groch_discrete_iterate(samples: PointSampleSet, x0: BandlimitedSignal | None = None,
                           n_iters: int = 500, grid: Grid | None = None,
                           band_edge: float = NYQUIST_BAND, return_trajectory: bool = False,
                           matrix: str = "exact", model: PointSamplingModel | None = None):
    """Discrete-form Gröchenig iteration on the sample coefficients.

    ``c <- c + (x0_samples - S P_B L c)`` with ``x0_samples = x - S x0``;
    the output is ``x0 + P_B L c`` materialized once.

    Parameters
    ----------
    matrix : {"exact", "closed_form"}
        Source of the ``S P_B L`` matrix.
    return_trajectory : bool
        Also return the materialized coordinates of every iterate.
    """
    model = model or point_model(samples, x0, grid, band_edge)
    a0 = np.zeros(model.n_coords) if x0 is None else np.array(x0.coords)
    if matrix == "exact":
        A = model.spl
    elif matrix == "closed_form":
        A = spl_closed_form(samples.instants, model.grid.period)
    else:
        raise ValueError(f"unknown matrix source {matrix!r}")
    w0 = samples.values - model.E @ a0
    c = np.zeros(model.n_samples)
    traj = [a0.copy()] if return_trajectory else None
    for _ in range(n_iters):
        c = c + (w0 - A @ c)
        if return_trajectory:
            traj.append(a0 + model.P @ c)
    x = model.to_signal(a0 + model.P @ c)
    return (x, traj) if return_trajectory else x


def groch_limit(samples: PointSampleSet, x0: BandlimitedSignal | None = None,
                grid: Grid | None = None, band_edge: float = NYQUIST_BAND,
                rcond: float = PINV_RCOND, model: PointSamplingModel | None = None
                ) -> BandlimitedSignal:
    """Limit of the Gröchenig iteration by pseudoinversion.

    Minimizes ``||L(x - S u)||`` over band-limited ``u`` and, among the
    minimizers, picks the one closest to ``x0`` in the Sobolev semi-norm.  The
    dc coordinate makes the trapezoid mean of the residual vanish, as at the
    fixed point of the iteration.
    """
    model = model or point_model(samples, x0, grid, band_edge)
    a0 = np.zeros(model.n_coords) if x0 is None else np.array(x0.coords)
    om = model.basis.coord_omega[1:]
    x = samples.values
    g = model.gaps
    sw = 1.0 / np.sqrt(g)
    Ed = model.E[:, 1:]
    Dm = (Ed - np.roll(Ed, 1, axis=0)) * sw[:, None] / om[None, :]
    y = (x - np.roll(x, 1)) * sw
    b0 = om * a0[1:]
    b = b0 + np.linalg.pinv(Dm, rcond=rcond) @ (y - Dm @ b0)
    a = np.empty_like(a0)
    a[1:] = b / om
    r = x - Ed @ a[1:]
    tw = model.trapezoid_weights
    a[0] = np.sqrt(model.grid.period) * np.dot(tw, r) / np.sum(tw)
    return model.to_signal(a)


# ---------------------------------------------------------------------------
# closed forms from phi
# ---------------------------------------------------------------------------


def _neighbours(instants, k, period):
    t = np.asarray(instants, dtype=np.float64)
    n = t.shape[0]
    tk = t[k]
    tm = t[k - 1] - (period if k == 0 else 0.0)
    tp = t[(k + 1) % n] + (period if k == n - 1 else 0.0)
    return tm, tk, tp


def _pbq(k, instants, period, t, images, table):
    tm, tk, tp = _neighbours(instants, k, period)
    tt0 = t - np.floor((t - tk) / period + 0.5) * period
    out = np.zeros(tt0.shape)
    for p in range(-images, images + 1):
        tt = tt0 + p * period
        fk = table(tt - tk)
        out += (table(tt - tp) - fk) / (tp - tk) - (fk - table(tt - tm)) / (tk - tm)
    return out


def pbq_closed_form(k: int, instants, grid: Grid, images: int = 2, t=None,
                    table: PhiTable | None = None) -> np.ndarray:
    """``P_B q_k`` from ``phi``: ``dphi_{k+1}/dt_{k+1} - dphi_k/dt_k``.

    ``q_k`` is the hat function at knot ``k`` (neighbours wrap
    periodically) and ``phi_j(t) = phi(t - t_j)``.  The real-line formula is
    periodised by summing ``images`` copies on each side of the nearest one.

    Parameters
    ----------
    t : array_like, optional
        Evaluation instants (default: the grid).
    """
    tt = grid.times if t is None else np.asarray(t, dtype=np.float64)
    return _pbq(k, instants, grid.period, tt, images, table or default_phi_table())


def spl_closed_form(instants, period: float, images: int = 2,
                    table: PhiTable | None = None) -> np.ndarray:
    """Matrix ``(P_B q_l)(t_k)`` assembled from ``phi`` lookups."""
    t = np.asarray(instants, dtype=np.float64)
    table = table or default_phi_table()
    return np.column_stack([_pbq(l, t, float(period), t, images, table)
                            for l in range(t.shape[0])])


def check_sobolev_decomposition(instants, u: BandlimitedSignal) -> dict:
    """Diagnostics of ``H = L (+) C`` for one signal.

    Returns
    -------
    dict
        ``knot_spread``: spread of ``u - L S u`` over the knots (membership in
        ``C``); ``interp_error``: ``max |(L S u)(t_k) - u(t_k)|``;
        ``orthogonality``: ``|<L S u, u - L S u>| / ||u||^2`` in the semi-norm.
    """
    t = np.asarray(instants, dtype=np.float64)
    su = u.at(t)
    lsu = PiecewiseLinear(t, su, u.grid.period)
    rest = SobolevSignal(u) - lsu
    vals = rest(t)
    un = sobolev_inner(u, u)
    ip = sobolev_inner(lsu, rest)
    return {
        "knot_spread": float(vals.max() - vals.min()),
        "interp_error": float(np.max(np.abs(lsu(t) - su))),
        "orthogonality": float(abs(ip) / max(un, 1e-300)),
    }
