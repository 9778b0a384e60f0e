"""Orthogonal kernel families and the sampling operator with its Gram matrix.

A kernel family is a finite set of pairwise orthogonal functions ``v_k``.
For interval kernels the supports ``[t_k, t_{k+1})`` are consecutive and
disjoint.  The sampling operator maps ``u`` to ``(<u, v_k>)_k``; sequences
live in the weighted space with norm ``sum c_k^2 / ||v_k||^2``.

Everything is expressed through the coordinate matrix ``B`` whose row ``k``
holds the harmonic-basis coordinates of ``P_B v_k``.  Rows are computed from
analytic Fourier coefficients of the kernels, so for band-limited inputs

* ``V u = B a`` (``a`` the coordinates of ``u``),
* ``V* c = B^T (c / W)`` with ``W_k = ||v_k||^2``,
* ``V V* = B B^T diag(1/W)``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from ._csv import read_rows, write_rows
from .errors import DimensionMismatchError, GridMismatchError, InvalidSamplingError
from .signal import (NYQUIST_BAND, BandlimitedSignal, Grid, PhiTable,
                     default_phi_table, harmonic_basis)

__all__ = [
    "KernelFamily",
    "WeightedSeq",
    "SamplingOperator",
    "sample",
    "adjoint_apply",
    "gram_matrix",
    "gram_entry_closed_form",
    "weighted_norm",
    "reduced_min_modulus",
    "KERNEL_KINDS",
]

KERNEL_KINDS = ("indicator", "leaky", "refractory", "custom")


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Finite family of orthogonal kernels on a periodic grid.

    Parameters
    ----------
    grid : Grid
    boundaries : array_like
        Strictly increasing instants ``t_0 < ... < t_n``; kernel ``k`` lives on
        ``[t_k, t_{k+1})``.  Total span at most one period.  Ignored for
        ``custom``.
    kind : {"indicator", "leaky", "refractory", "custom"}
    param : float
        Leak rate ``alpha > 0`` or refractory time ``delta >= 0``.
    custom : callable or ndarray, optional
        For ``kind="custom"``: kernel values on the grid, as an array of shape
        ``(n_kernels, N)`` or a callable ``f(t)`` returning one.
    """

    grid: Grid
    boundaries: np.ndarray = None
    kind: str = "indicator"
    param: float = 0.0
    custom: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "custom":
            vals = self.custom(self.grid.times) if callable(self.custom) else self.custom
            vals = np.atleast_2d(np.asarray(vals, dtype=np.float64))
            if vals.shape[1] != self.grid.n_points:
                raise GridMismatchError("custom kernels must be sampled on the grid")
            vals.setflags(write=False)
            object.__setattr__(self, "custom", vals)
            G = self.grid.samples_per_unit
            ip = vals @ vals.T / G
            d = np.diag(ip).copy()
            if np.any(d <= 0):
                raise InvalidSamplingError("custom kernels must have positive norm")
            off = ip - np.diag(d)
            if np.abs(off).max(initial=0.0) > 1e-12 * d.max():
                raise InvalidSamplingError("custom kernels are not pairwise orthogonal")
            object.__setattr__(self, "boundaries", None)
            return
        t = np.array(self.boundaries, dtype=np.float64)
        if t.ndim != 1 or t.shape[0] < 2:
            raise InvalidSamplingError("need at least two boundaries")
        if np.any(np.diff(t) <= 0):
            raise InvalidSamplingError("boundaries must be strictly increasing")
        if t[-1] - t[0] > self.grid.period * (1 + 1e-12):
            raise InvalidSamplingError("boundaries span more than one period")
        if self.kind == "leaky" and not self.param > 0:
            raise ValueError("leaky kernels need alpha > 0")
        if self.kind == "refractory":
            if self.param < 0:
                raise ValueError("refractory time must be non-negative")
            if np.any(np.diff(t) <= self.param):
                raise InvalidSamplingError("refractory time exceeds an interval")
        t.setflags(write=False)
        object.__setattr__(self, "boundaries", t)

    @property
    def size(self) -> int:
        if self.kind == "custom":
            return self.custom.shape[0]
        return self.boundaries.shape[0] - 1

    @property
    def starts(self) -> np.ndarray:
        return self.boundaries[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.boundaries[1:]

    @cached_property
    def norms_sq(self) -> np.ndarray:
        """``||v_k||^2`` for every kernel."""
        if self.kind == "custom":
            return np.sum(self.custom ** 2, axis=1) / self.grid.samples_per_unit
        L = np.diff(self.boundaries)
        if self.kind == "indicator":
            return L
        if self.kind == "refractory":
            return L - self.param
        a = self.param
        return -np.expm1(-2.0 * a * L) / (2.0 * a)

    def fourier(self, n_harm: int) -> np.ndarray:
        """``V_k(m) = int v_k(t) exp(-i w_m t) dt`` for ``m = 0..n_harm``."""
        T = self.grid.period
        m = np.arange(n_harm + 1)
        om = 2.0 * np.pi * m / T
        if self.kind == "custom":
            X = np.fft.rfft(self.custom, axis=1) / self.grid.samples_per_unit
            return X[:, :n_harm + 1]
        a = self.starts[:, None]
        b = self.ends[:, None]
        if self.kind == "refractory":
            a = a + self.param
        if self.kind in ("indicator", "refractory"):
            L = b - a
            return L * np.sinc(m * L / T) * np.exp(-0.5j * om * (a + b))
        z = self.param + 1j * om
        L = b - a
        return np.exp(-1j * om * a) * (-np.expm1(-z * L)) / z

    def evaluate(self, t) -> np.ndarray:
        """Raw kernel values ``v_k(t)``, shape ``(n_kernels, len(t))``.

        Instants are reduced modulo the period relative to ``t_0``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if self.kind == "custom":
            G = self.grid.samples_per_unit
            idx = np.round(np.mod(t, self.grid.period) * G).astype(int) % self.grid.n_points
            return self.custom[:, idx]
        t0 = self.boundaries[0]
        tt = t0 + np.mod(t - t0, self.grid.period)
        a = self.starts[:, None]
        b = self.ends[:, None]
        inside = (tt[None, :] >= a) & (tt[None, :] < b)
        if self.kind == "indicator":
            return inside.astype(float)
        if self.kind == "refractory":
            return (inside & (tt[None, :] >= a + self.param)).astype(float)
        return np.where(inside, np.exp(-self.param * (tt[None, :] - a)), 0.0)

    # -- serialization -----------------------------------------------------

    def to_csv(self, path):
        """Write ``k,t_start,t_end,kind,param`` rows."""
        if self.kind == "custom":
            raise ValueError("custom kernels cannot be serialized")
        write_rows(path, ["k", "t_start", "t_end", "kind", "param"],
                   [(k, self.starts[k], self.ends[k], self.kind, self.param)
                    for k in range(self.size)])

    @classmethod
    def from_csv(cls, path, grid: Grid):
        rows = read_rows(path)
        if not rows:
            raise InvalidSamplingError("empty kernel file")
        starts = np.array([float(r["t_start"]) for r in rows])
        ends = np.array([float(r["t_end"]) for r in rows])
        if not np.allclose(starts[1:], ends[:-1], rtol=0, atol=1e-9):
            raise InvalidSamplingError("kernel intervals are not consecutive")
        return cls(grid, np.append(starts, ends[-1]), rows[0]["kind"], float(rows[0]["param"]))


@dataclass(frozen=True, eq=False)
class WeightedSeq:
    """Sample sequence with weights ``||v_k||^2``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if v.shape != w.shape:
            raise DimensionMismatchError("values and weights differ in length")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.values.shape[0]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2 / self.weights)))

    def inner(self, other) -> float:
        other = np.asarray(getattr(other, "values", other), dtype=np.float64)
        if other.shape != self.values.shape:
            raise DimensionMismatchError("sequence lengths differ")
        return float(np.sum(self.values * other / self.weights))


class SamplingOperator:
    """Sampling map ``V`` of a kernel family onto the band-limited space.

    Parameters
    ----------
    kernels : KernelFamily
    band_edge : float
        Band of the input space ``U = B``.
    """

    def __init__(self, kernels: KernelFamily, band_edge: float = NYQUIST_BAND):
        self.kernels = kernels
        self.grid = kernels.grid
        self.band_edge = float(band_edge)
        self.basis = harmonic_basis(self.grid, band_edge)
        B = self.basis.from_fourier(kernels.fourier(self.basis.n_harmonics))
        B.setflags(write=False)
        self.coord_matrix = B
        W = np.array(kernels.norms_sq)
        W.setflags(write=False)
        self.weights = W

    @property
    def n_samples(self) -> int:
        return self.coord_matrix.shape[0]

    @property
    def sobolev_weights(self) -> np.ndarray:
        """Angular frequency of each coordinate (derivative weights)."""
        return self.basis.coord_omega

    @property
    def n_coords(self) -> int:
        return self.coord_matrix.shape[1]

    # -- coordinates <-> signals ----------------------------------------------

    def coords_of(self, u) -> np.ndarray:
        if isinstance(u, BandlimitedSignal):
            if u.grid != self.grid or u.band_edge != self.band_edge:
                raise GridMismatchError("signal does not live on the operator grid")
            return u.coords
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.n_coords,):
            raise DimensionMismatchError("coordinate vector has the wrong length")
        return u

    def to_signal(self, coords) -> BandlimitedSignal:
        return BandlimitedSignal.from_coords(self.grid, coords, self.band_edge)

    # -- operators ------------------------------------------------------------

    def apply_coords(self, a) -> np.ndarray:
        return self.coord_matrix @ a

    def adjoint_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n_samples,):
            raise DimensionMismatchError(
                f"expected {self.n_samples} coefficients, got shape {c.shape}")
        return self.coord_matrix.T @ (c / self.weights)

    def sample(self, u) -> WeightedSeq:
        return WeightedSeq(self.apply_coords(self.coords_of(u)), self.weights)

    def adjoint_apply(self, c) -> BandlimitedSignal:
        return self.to_signal(self.adjoint_coords(getattr(c, "values", c)))

    @cached_property
    def weighted_matrix(self) -> np.ndarray:
        """Matrix of ``V`` from orthonormal coordinates to the weighted space."""
        return self.coord_matrix / np.sqrt(self.weights)[:, None]

    @cached_property
    def gram(self) -> np.ndarray:
        """``M[k, l] = <P_B v_l, v_k> / ||v_l||^2`` (exact periodic model)."""
        B = self.coord_matrix
        M = (B @ B.T) / self.weights[None, :]
        M.setflags(write=False)
        return M

    def gram_closed_form(self, images: int = 2, table: PhiTable | None = None) -> np.ndarray:
        """Gram of indicator kernels from the four-term ``phi`` formula.

        The formula is exact for the non-periodic sinc kernel; summing
        ``images`` periodic copies on each side of the nearest one turns it
        into an approximation of the periodic model.

        When ``period / 2`` is an integer the periodic band holds a harmonic
        exactly at the band edge, which the image sum weights by one half;
        the two models then differ by ``O(1/period)``.  Odd periods avoid it.
        """
        if self.kernels.kind != "indicator":
            raise ValueError("closed form applies to indicator kernels only")
        if abs(self.band_edge - NYQUIST_BAND) > 1e-15:
            raise ValueError("closed form assumes the Nyquist band")
        table = table or default_phi_table()
        k = self.kernels
        raw = _kernels.interval_gram(np.ascontiguousarray(k.starts), np.ascontiguousarray(k.ends),
                                     float(self.grid.period), int(images),
                                     table.values, table.derivs, table.step)
        return raw / self.weights[None, :]

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.weighted_matrix, compute_uv=False)


def sample(op: SamplingOperator, u) -> WeightedSeq:
    """Samples ``<u, v_k>`` of a band-limited signal."""
    return op.sample(u)


def adjoint_apply(op: SamplingOperator, c) -> BandlimitedSignal:
    """``V* c = sum_k c_k P_B v_k / ||v_k||^2``."""
    return op.adjoint_apply(c)


def gram_matrix(op: SamplingOperator, method: str = "exact", images: int = 2) -> np.ndarray:
    """Gram matrix ``V V*``.

    Parameters
    ----------
    op : SamplingOperator
    method : {"exact", "closed_form"}
        ``exact`` uses the periodic model (consistent with ``V*``);
        ``closed_form`` the periodised four-term ``phi`` formula.
    images : int
        Periodic copies per side for ``closed_form``.
    """
    if method == "exact":
        return op.gram
    if method == "closed_form":
        return op.gram_closed_form(images)
    raise ValueError(f"unknown Gram method {method!r}")


def gram_entry_closed_form(a, b, c, d, table: PhiTable | None = None) -> float:
    """``<P_B 1_[a,b], 1_[c,d]>`` on the real line.

    Equals ``phi(d-a) - phi(d-b) - phi(c-a) + phi(c-b)``; an empty interval
    gives 0.
    """
    if a == b or c == d:
        return 0.0
    table = table or default_phi_table()
    vals = table(np.array([d - a, d - b, c - a, c - b], dtype=np.float64))
    return float((vals[0] - vals[1]) - (vals[2] - vals[3]))


def weighted_norm(c: WeightedSeq) -> float:
    """``sqrt(sum c_k^2 / ||v_k||^2)``."""
    return c.norm()


def reduced_min_modulus(op, rtol: float = 1e-12) -> float:
    """Smallest nonzero singular value of ``V`` on the input space.

    Singular values below ``rtol * sigma_max`` count as null directions.
    """
    s = np.linalg.svd(op.weighted_matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0.0
    return float(s[s > rtol * s[0]].min())
