"""Multi-channel time encoding: signals on ``{1..M} x R`` with a mixing matrix.

An ``M``-channel input ``X = A Xs`` mixes ``N <= M`` band-limited sources
through a full-rank ``M x N`` matrix ``A``.  The input space is
``U = range(A) (x) B``; the projection onto it is separable,
``P_U (v (x) f) = (P_A v) (x) (P_B f)`` with ``P_A = A A^+``.

Coordinates of ``U`` use the orthonormal basis ``q_r (x) e_b`` where
``q_r`` are the left singular vectors of ``A`` and ``e_b`` the harmonic
basis, flattened source-major.  Kernel ``(i, j)`` is the indicator of the
``j``-th interval of channel ``i`` carried by the unit vector ``e_i``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, GridMismatchError, RankDeficientError
from .kernel_space import KernelFamily, SamplingOperator, WeightedSeq, gram_entry_closed_form
from .pocs import Problem, iterate
from .signal import (NYQUIST_BAND, BandlimitedSignal, Grid, default_phi_table, harmonic_basis,
                     project_bandlimited)

__all__ = [
    "MixingMatrix",
    "MultiChannelSignal",
    "MultiChannelOperator",
    "mc_inner",
    "project_U_separable",
    "mc_gram_entry",
    "mc_reconstruct",
    "zoh_output",
    "source_estimate",
]

PINV_RTOL = 1e-12


class MixingMatrix:
    """Full-rank ``M x N`` mixing matrix with pseudoinverse and range projector.

    Raises
    ------
    RankDeficientError
        If ``rank(A) < N`` or ``N > M``.
    """

    def __init__(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        M, N = A.shape
        if N > M:
            raise RankDeficientError("mixing matrix needs N <= M")
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        if s.size == 0 or s[-1] <= PINV_RTOL * s[0]:
            raise RankDeficientError("mixing matrix is rank deficient")
        self.A = A
        self.pinv = (Vt.T / s) @ U.T
        self.range_basis = U
        self.proj = A @ self.pinv
        for arr in (self.A, self.pinv, self.range_basis, self.proj):
            arr.setflags(write=False)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def to_csv(self, path):
        np.savetxt(path, self.A, delimiter=",", fmt="%.12g")

    @classmethod
    def from_csv(cls, path):
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


def _as_mixing(A) -> MixingMatrix:
    return A if isinstance(A, MixingMatrix) else MixingMatrix(A)


@dataclass(frozen=True, eq=False)
class MultiChannelSignal:
    """``M x N_grid`` array of channel signals; row ``l`` is channel ``l``."""

    grid: Grid
    values: np.ndarray
    band_edge: float = NYQUIST_BAND

    def __post_init__(self):
        v = np.atleast_2d(np.array(self.values, dtype=np.float64))
        if v.shape[1] != self.grid.n_points:
            raise GridMismatchError("rows must hold one full grid period")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_sources(cls, A, sources) -> "MultiChannelSignal":
        """``X = A Xs`` for a list (or multichannel signal) of sources."""
        mix = _as_mixing(A)
        if isinstance(sources, MultiChannelSignal):
            sources = [sources.channel(i) for i in range(sources.n_channels)]
        src = list(sources)
        if len(src) != mix.N:
            raise DimensionMismatchError("need one source per mixing column")
        S = np.vstack([s.values for s in src])
        return cls(src[0].grid, mix.A @ S, src[0].band_edge)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def channel(self, i: int) -> BandlimitedSignal:
        return BandlimitedSignal(self.grid, self.values[i], self.band_edge)

    def in_U(self, A, tol: float = 1e-10) -> bool:
        """Columns in ``range(A)`` and rows band-limited, within ``tol``."""
        mix = _as_mixing(A)
        scale = max(np.linalg.norm(self.values), 1e-300)
        col = np.linalg.norm(self.values - mix.proj @ self.values)
        row = np.linalg.norm(self.values - project_bandlimited(self.values, self.grid, self.band_edge))
        return bool(col <= tol * scale and row <= tol * scale)

    def __add__(self, other):
        return MultiChannelSignal(self.grid, self.values + other.values, self.band_edge)

    def __sub__(self, other):
        return MultiChannelSignal(self.grid, self.values - other.values, self.band_edge)

    def __mul__(self, s):
        return MultiChannelSignal(self.grid, float(s) * self.values, self.band_edge)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.sqrt(mc_inner(self, self)))


def mc_inner(U: MultiChannelSignal, V: MultiChannelSignal) -> float:
    """``sum_l int u_l v_l`` (counting measure times Lebesgue)."""
    if U.values.shape != V.values.shape:
        raise DimensionMismatchError(f"shape mismatch {U.values.shape} vs {V.values.shape}")
    if U.grid != V.grid:
        raise GridMismatchError("signals live on different grids")
    return float(np.sum(U.values * V.values) / U.grid.samples_per_unit)


def project_U_separable(v, f, A, grid: Grid | None = None,
                        band_edge: float = NYQUIST_BAND) -> MultiChannelSignal:
    """``P_U (v (x) f) = (P_A v) (x) (P_B f)``.

    Parameters
    ----------
    v : array_like
        Length-``M`` channel vector.
    f : array_like or BandlimitedSignal
        Grid signal.
    A : array_like or MixingMatrix
    """
    mix = _as_mixing(A)
    if isinstance(f, BandlimitedSignal):
        grid, band_edge, f = f.grid, f.band_edge, f.values
    if grid is None:
        raise ValueError("a grid is required for plain arrays")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (mix.M,):
        raise DimensionMismatchError("channel vector has the wrong length")
    return MultiChannelSignal(grid, np.outer(mix.proj @ v, project_bandlimited(f, grid, band_edge)),
                              band_edge)


class MultiChannelOperator:
    """Sampling operator of interval kernels on ``U = range(A) (x) B``.

    Parameters
    ----------
    grid : Grid
    per_channel_boundaries : sequence of array_like
        Boundary set of each channel.
    A : array_like or MixingMatrix
    band_edge : float
    """

    def __init__(self, grid: Grid, per_channel_boundaries, A, band_edge: float = NYQUIST_BAND):
        self.mixing = _as_mixing(A)
        if len(per_channel_boundaries) != self.mixing.M:
            raise DimensionMismatchError(
                f"{len(per_channel_boundaries)} boundary sets for {self.mixing.M} channels")
        self.grid = grid
        self.band_edge = float(band_edge)
        self.basis = harmonic_basis(grid, band_edge)
        self.channel_ops = [SamplingOperator(KernelFamily(grid, b), band_edge)
                            for b in per_channel_boundaries]
        if sum(op.n_samples for op in self.channel_ops) == 0:
            raise ValueError("empty streams")
        self.channel_index = np.concatenate(
            [np.full(op.n_samples, i) for i, op in enumerate(self.channel_ops)])
        self.stacked = np.vstack([op.coord_matrix for op in self.channel_ops])
        W = np.concatenate([op.weights for op in self.channel_ops])
        W.setflags(write=False)
        self.weights = W
        Q = self.mixing.range_basis
        B = np.einsum("kr,kb->krb", Q[self.channel_index], self.stacked)
        B = B.reshape(B.shape[0], -1)
        B.setflags(write=False)
        self.coord_matrix = B

    @property
    def n_samples(self) -> int:
        return self.coord_matrix.shape[0]

    @property
    def n_coords(self) -> int:
        return self.coord_matrix.shape[1]

    @property
    def sobolev_weights(self) -> np.ndarray:
        return np.tile(self.basis.coord_omega, self.mixing.N)

    @property
    def partition(self) -> list:
        return [op.kernels.boundaries for op in self.channel_ops]

    # -- coordinates ------------------------------------------------------------

    def coords_of(self, X) -> np.ndarray:
        if isinstance(X, MultiChannelSignal):
            if X.grid != self.grid:
                raise GridMismatchError("signal does not live on the operator grid")
            if X.values.shape[0] != self.mixing.M:
                raise DimensionMismatchError("channel count mismatch")
            return self.basis.coords(self.mixing.range_basis.T @ X.values).ravel()
        X = np.asarray(X, dtype=np.float64)
        if X.shape != (self.n_coords,):
            raise DimensionMismatchError("coordinate vector has the wrong length")
        return X

    def channel_coords(self, a) -> np.ndarray:
        """Per-channel harmonic coordinates (``M x n_B``) of a ``U`` element."""
        return self.mixing.range_basis @ np.asarray(a).reshape(self.mixing.N, -1)

    def to_signal(self, a) -> MultiChannelSignal:
        return MultiChannelSignal(self.grid, self.basis.values(self.channel_coords(a)),
                                  self.band_edge)

    # -- operators --------------------------------------------------------------

    def apply_coords(self, a) -> np.ndarray:
        return self.coord_matrix @ a

    def adjoint_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n_samples,):
            raise DimensionMismatchError("coefficient vector has the wrong length")
        return self.coord_matrix.T @ (c / self.weights)

    def sample(self, X) -> WeightedSeq:
        return WeightedSeq(self.apply_coords(self.coords_of(X)), self.weights)

    def adjoint_apply(self, c) -> MultiChannelSignal:
        return self.to_signal(self.adjoint_coords(getattr(c, "values", c)))

    @cached_property
    def weighted_matrix(self) -> np.ndarray:
        return self.coord_matrix / np.sqrt(self.weights)[:, None]

    @cached_property
    def gram(self) -> np.ndarray:
        """``(P_A)_{ii'} <P_B 1_{I_i'j'}, 1_{I_ij}> / |I_i'j'|`` (exact periodic model)."""
        ci = self.channel_index
        S = self.stacked
        M = self.mixing.proj[ci[:, None], ci[None, :]] * ((S @ S.T) / self.weights[None, :])
        M.setflags(write=False)
        return M

    def gram_closed_form(self, images: int = 2) -> np.ndarray:
        """Gram from the periodised four-term ``phi`` formula."""
        ci = self.channel_index
        fams = [op.kernels for op in self.channel_ops]
        starts = np.concatenate([f.starts for f in fams])
        ends = np.concatenate([f.ends for f in fams])
        tb = default_phi_table()
        raw = _kernels.interval_gram(np.ascontiguousarray(starts), np.ascontiguousarray(ends),
                                     float(self.grid.period), int(images),
                                     tb.values, tb.derivs, tb.step)
        return self.mixing.proj[ci[:, None], ci[None, :]] * (raw / self.weights[None, :])


def mc_gram_entry(i: int, j: int, ip: int, jp: int, partition, A, grid: Grid | None = None,
                  method: str = "closed_form") -> float:
    """Unnormalised Gram entry ``<P_U v_{i'j'}, v_{ij}>``.

    Parameters
    ----------
    i, j : int
        Channel and interval of the tested kernel ``v_ij`` (interval
        ``[t^i_j, t^i_{j+1})``).
    ip, jp : int
        Channel and interval of the projected kernel.
    partition : sequence of array_like
        Boundary set per channel.
    A : array_like or MixingMatrix
    grid : Grid, optional
        Required for ``method="exact"``.
    method : {"closed_form", "exact"}
        ``closed_form`` is the real-line four-term ``phi`` formula;
        ``exact`` is the periodic model.

    Returns
    -------
    float
        ``(P_A)_{i i'} <P_B 1_{I_i'j'}, 1_{I_ij}>``.  Divide by ``|I_i'j'|``
        for the Gram matrix.
    """
    mix = _as_mixing(A)
    a, b = partition[ip][jp], partition[ip][jp + 1]
    c, d = partition[i][j], partition[i][j + 1]
    factor = mix.proj[i, ip]
    if method == "closed_form":
        return float(factor * gram_entry_closed_form(a, b, c, d))
    if method == "exact":
        if grid is None:
            raise ValueError("exact entries need the grid")
        op = SamplingOperator(KernelFamily(grid, [a, b]))
        oq = SamplingOperator(KernelFamily(grid, [c, d]))
        return float(factor * (op.coord_matrix[0] @ oq.coord_matrix[0]))
    raise ValueError(f"unknown method {method!r}")


def _stream_boundaries(streams) -> list:
    bnds = []
    for s in streams:
        if s.kind != "integral":
            raise ValueError("multichannel reconstruction needs integral streams")
        bnds.append(s.boundaries)
    return bnds


def _zoh_channel_coords(c, op: MultiChannelOperator) -> np.ndarray:
    # per channel: P_B of the staircase c_ij/|I_ij|, then mixed by P_A
    Y = np.zeros((op.mixing.M, op.basis.size))
    start = 0
    for i, cop in enumerate(op.channel_ops):
        n = cop.n_samples
        if n:
            Y[i] = cop.adjoint_coords(c[start:start + n])
        start += n
    return op.mixing.proj @ Y


def zoh_output(c, partition, A, grid: Grid, band_edge: float = NYQUIST_BAND
               ) -> MultiChannelSignal:
    """``V* c = sum_i P_A e_i (x) P_B R_i c`` with ``R_i c`` the staircase ``c_ij/|I_ij|``."""
    op = MultiChannelOperator(grid, partition, A, band_edge)
    c = np.asarray(getattr(c, "values", c), dtype=np.float64)
    if c.shape != (op.n_samples,):
        raise DimensionMismatchError("coefficients do not match the partition")
    return MultiChannelSignal(grid, op.basis.values(_zoh_channel_coords(c, op)), band_edge)


def mc_reconstruct(streams, A, x0: MultiChannelSignal | None = None, n_iters: int = 10_000,
                   grid: Grid | None = None, band_edge: float = NYQUIST_BAND,
                   tol: float = 1e-12, gram: str = "exact", return_report: bool = False):
    """Discrete-time reconstruction from per-channel integral streams.

    Runs ``c <- c + (w0 - V V* c)`` with the multichannel Gram and converts
    once through :func:`zoh_output`: ``x = x0 + V* c``.

    Parameters
    ----------
    streams : sequence of EventStream
        One integral stream per channel, in channel order.
    A : array_like or MixingMatrix
    x0 : MultiChannelSignal, optional
        Initial guess in ``U`` (default zero).
    n_iters : int
    grid : Grid
        Required when ``x0`` is not given.
    gram : {"exact", "closed_form"}
    """
    if not streams or all(len(s) == 0 for s in streams):
        raise ValueError("empty streams")
    grid = x0.grid if x0 is not None else grid
    if grid is None:
        raise ValueError("a grid is required")
    op = MultiChannelOperator(grid, _stream_boundaries(streams), A, band_edge)
    if gram == "closed_form":
        op.__dict__["gram"] = op.gram_closed_form()
    w = np.concatenate([s.values for s in streams])
    problem = Problem(op, w)
    _, report, state = iterate(problem, "discrete_time", n_iters, x0, tol=tol, record=return_report)
    a0 = op.channel_coords(state.x0)
    X = MultiChannelSignal(grid, op.basis.values(a0 + _zoh_channel_coords(state.c, op)), band_edge)
    return (X, report) if return_report else X


def source_estimate(X: MultiChannelSignal, A) -> MultiChannelSignal:
    """``Xs = A^+ X`` column by column."""
    mix = _as_mixing(A)
    if X.values.shape[0] != mix.M:
        raise DimensionMismatchError("channel count differs from the mixing matrix")
    return MultiChannelSignal(X.grid, mix.pinv @ X.values, X.band_edge)
