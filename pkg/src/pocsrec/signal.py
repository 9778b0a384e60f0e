"""Periodic bandlimited signals on a fine grid.

The continuous input space is modelled by signals of period ``T`` (in Nyquist
units) sampled at ``G`` points per unit.  The bandlimited subspace is spanned
by the real harmonics with frequency at most ``band_edge``; for the default
band edge of 1/2 these are the trigonometric polynomials of degree
``K = floor(T/2)``.

All heavy lifting goes through :class:`HarmonicBasis`, an orthonormal real
basis of the band.  Coordinates in this basis are exact for grid values
(the grid Riemann sum integrates in-band products exactly) and for analytic
Fourier coefficients, so inner products and off-grid evaluation carry no
quadrature error.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import sici

from . import _kernels
from .errors import GridMismatchError, InvalidBandError

__all__ = [
    "Grid",
    "HarmonicBasis",
    "harmonic_basis",
    "BandlimitedSignal",
    "PhiTable",
    "default_phi_table",
    "project_bandlimited",
    "inner_l2",
    "norm_l2",
    "phi",
    "phi_exact",
    "phi_derivative",
    "random_bandlimited",
]

DEFAULT_G = 16
NYQUIST_BAND = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``t_m = m/G``, ``m = 0..N-1``.

    Parameters
    ----------
    period : float
        Signal period ``T`` in Nyquist units.
    samples_per_unit : int
        Grid density ``G``.
    """

    period: float
    samples_per_unit: int = DEFAULT_G

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if int(self.samples_per_unit) != self.samples_per_unit or self.samples_per_unit < 1:
            raise ValueError("samples_per_unit must be a positive integer")
        n = self.period * self.samples_per_unit
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("period * samples_per_unit must be an integer")

    @property
    def n_points(self) -> int:
        return int(round(self.period * self.samples_per_unit))

    @property
    def spacing(self) -> float:
        return 1.0 / self.samples_per_unit

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) / self.samples_per_unit

    def wrap(self, t):
        """Map instants into ``[0, T)``."""
        return np.mod(t, self.period)


class HarmonicBasis:
    """Orthonormal real basis of the band on a periodic grid.

    Coordinates are ordered ``[dc, cos_1..cos_K, sin_1..sin_Ks]`` where
    ``Ks = K`` except when ``K = N/2`` (band edge at the grid Nyquist), in
    which case the vanishing grid-Nyquist sine is dropped.

    Parameters
    ----------
    grid : Grid
    band_edge : float
        Highest frequency kept, in cycles per unit.
    """

    def __init__(self, grid: Grid, band_edge: float = NYQUIST_BAND):
        if not 0 < band_edge <= grid.samples_per_unit / 2 + 1e-12:
            raise InvalidBandError(
                f"band_edge {band_edge} outside (0, {grid.samples_per_unit / 2}]")
        self.grid = grid
        self.band_edge = float(band_edge)
        T = grid.period
        N = grid.n_points
        K = int(np.floor(band_edge * T + 1e-9))
        K = min(K, N // 2)
        self.n_harmonics = K
        self.nyquist_bin = (2 * K == N)
        self.n_sin = K - 1 if self.nyquist_bin else K
        self.size = 1 + K + self.n_sin
        self.omega1 = 2.0 * np.pi / T
        self.omega = self.omega1 * np.arange(1, K + 1)
        c = np.full(K, np.sqrt(2.0 / T))
        if self.nyquist_bin:
            c[-1] = 1.0 / np.sqrt(T)
        self._cos_scale = c
        self._sin_scale = np.full(self.n_sin, np.sqrt(2.0 / T))
        # angular frequency attached to each coordinate
        self.coord_omega = np.concatenate(([0.0], self.omega, self.omega[:self.n_sin]))

    # -- coordinate transforms ---------------------------------------------

    def from_fourier(self, U):
        """Coordinates from ``U(m) = int_0^T u(t) exp(-i w_m t) dt``, ``m = 0..K``.

        ``U`` may be 1-D (one function) or 2-D with one function per row.
        """
        U = np.asarray(U)
        K = self.n_harmonics
        T = self.grid.period
        out = np.empty(U.shape[:-1] + (self.size,))
        out[..., 0] = U[..., 0].real / np.sqrt(T)
        if self.nyquist_bin:
            # the grid Nyquist harmonic has grid norm T, not T/2
            out[..., 1:K + 1] = self._cos_scale * U[..., 1:K + 1].real
            out[..., K] = U[..., K].real / np.sqrt(T)
        else:
            out[..., 1:K + 1] = self._cos_scale * U[..., 1:K + 1].real
        out[..., K + 1:] = -self._sin_scale * U[..., 1:self.n_sin + 1].imag
        return out

    def to_fourier(self, a):
        """Inverse of :meth:`from_fourier` (``K+1`` complex bins per row)."""
        a = np.asarray(a, dtype=np.float64)
        K = self.n_harmonics
        T = self.grid.period
        U = np.zeros(a.shape[:-1] + (K + 1,), dtype=np.complex128)
        U[..., 0] = a[..., 0] * np.sqrt(T)
        U[..., 1:K + 1] = a[..., 1:K + 1] / self._cos_scale
        if self.nyquist_bin:
            U[..., K] = a[..., K] * np.sqrt(T)
        U[..., 1:self.n_sin + 1] -= 1j * a[..., K + 1:] / self._sin_scale
        return U

    def coords(self, values):
        """Coordinates of the band projection of grid values (last axis)."""
        values = np.asarray(values, dtype=np.float64)
        X = np.fft.rfft(values, axis=-1)[..., :self.n_harmonics + 1]
        return self.from_fourier(X / self.grid.samples_per_unit)

    def values(self, a):
        """Grid values of the band-limited function with coordinates ``a``."""
        U = self.to_fourier(a) * self.grid.samples_per_unit
        N = self.grid.n_points
        X = np.zeros(U.shape[:-1] + (N // 2 + 1,), dtype=np.complex128)
        X[..., :self.n_harmonics + 1] = U
        return np.fft.irfft(X, n=N, axis=-1)

    def trig_coefficients(self, a):
        """Plain ``(cos, sin)`` amplitude vectors indexed by harmonic ``0..K``."""
        a = np.asarray(a, dtype=np.float64)
        K = self.n_harmonics
        ca = np.empty(K + 1)
        sa = np.zeros(K + 1)
        ca[0] = a[0] / np.sqrt(self.grid.period)
        ca[1:] = self._cos_scale * a[1:K + 1]
        sa[1:self.n_sin + 1] = self._sin_scale * a[K + 1:]
        return ca, sa

    def evaluate(self, a, t):
        """Exact evaluation of the function with coordinates ``a`` at instants ``t``."""
        t = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=np.float64)))
        ca, sa = self.trig_coefficients(a)
        return _kernels.trig_eval(t, ca, sa, self.omega1, 0.0, 0.0)

    def matrix(self, t):
        """Basis functions evaluated at instants: ``E[k, i] = e_i(t_k)``."""
        t = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=np.float64)))
        K = self.n_harmonics
        C, S = _kernels.cos_sin_matrix(t, self.omega1, K)
        E = np.empty((t.shape[0], self.size))
        E[:, 0] = 1.0 / np.sqrt(self.grid.period)
        E[:, 1:K + 1] = C[:, 1:] * self._cos_scale
        E[:, K + 1:] = S[:, 1:self.n_sin + 1] * self._sin_scale
        return E


@lru_cache(maxsize=64)
def _basis_cached(period, G, band_edge):
    return HarmonicBasis(Grid(period, G), band_edge)


def harmonic_basis(grid: Grid, band_edge: float = NYQUIST_BAND) -> HarmonicBasis:
    """Shared :class:`HarmonicBasis` for ``(grid, band_edge)``."""
    return _basis_cached(grid.period, grid.samples_per_unit, float(band_edge))


@dataclass(frozen=True, eq=False)
class BandlimitedSignal:
    """Grid values of a periodic band-limited signal.

    Parameters
    ----------
    grid : Grid
    values : ndarray
        Length ``N`` grid samples.
    band_edge : float
        Band edge in cycles per unit.
    check : bool
        Verify membership in the band (idempotence within ``1e-12``).
    """

    grid: Grid
    values: np.ndarray
    band_edge: float = NYQUIST_BAND
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        basis = harmonic_basis(self.grid, self.band_edge)
        if self.check:
            a = basis.coords(v)
            resid = np.linalg.norm(basis.values(a) - v)
            if resid > 1e-12 * max(np.linalg.norm(v), 1e-300) and resid > 1e-300:
                raise InvalidBandError(
                    f"values are not band-limited (projection residual {resid:.3e})")
            self.__dict__["coords"] = a

    @classmethod
    def from_coords(cls, grid, coords, band_edge=NYQUIST_BAND):
        """Build from harmonic-basis coordinates."""
        basis = harmonic_basis(grid, band_edge)
        coords = np.asarray(coords, dtype=np.float64)
        sig = cls(grid, basis.values(coords), band_edge, check=False)
        sig.__dict__["coords"] = coords.copy()
        return sig

    @classmethod
    def zeros(cls, grid, band_edge=NYQUIST_BAND):
        return cls.from_coords(grid, np.zeros(harmonic_basis(grid, band_edge).size), band_edge)

    @property
    def basis(self) -> HarmonicBasis:
        return harmonic_basis(self.grid, self.band_edge)

    @cached_property
    def coords(self) -> np.ndarray:
        return self.basis.coords(self.values)

    def at(self, t):
        """Exact values at arbitrary instants (a float for scalar ``t``)."""
        if np.ndim(t) == 0:
            return float(self.basis.evaluate(self.coords, np.array([t], dtype=np.float64))[0])
        return self.basis.evaluate(self.coords, t)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))

    def _same(self, other):
        if not isinstance(other, BandlimitedSignal):
            return NotImplemented
        if other.grid != self.grid or other.band_edge != self.band_edge:
            raise GridMismatchError("signals live on different grids or bands")
        return other

    def __add__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return BandlimitedSignal.from_coords(self.grid, self.coords + other.coords, self.band_edge)

    def __sub__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return BandlimitedSignal.from_coords(self.grid, self.coords - other.coords, self.band_edge)

    def __mul__(self, s):
        return BandlimitedSignal.from_coords(self.grid, float(s) * self.coords, self.band_edge)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _values_of(u, grid=None):
    if isinstance(u, BandlimitedSignal):
        if grid is not None and u.grid != grid:
            raise GridMismatchError("signal grid differs from the requested grid")
        return u.values, u.grid
    v = np.asarray(u, dtype=np.float64)
    if grid is not None and v.shape[-1] != grid.n_points:
        raise GridMismatchError(f"expected {grid.n_points} values, got {v.shape[-1]}")
    return v, grid


def project_bandlimited(u, grid: Grid, band_edge: float = NYQUIST_BAND) -> np.ndarray:
    """Orthogonal projection onto the band by a sharp DFT mask.

    Parameters
    ----------
    u : array_like or BandlimitedSignal
        Grid values (last axis of length ``N``).
    grid : Grid
    band_edge : float

    Returns
    -------
    ndarray
        Projected grid values.

    Raises
    ------
    InvalidBandError
        If ``band_edge`` exceeds ``G/2``.
    """
    basis = harmonic_basis(grid, band_edge)
    v, _ = _values_of(u, grid)
    X = np.fft.rfft(v, axis=-1)
    X[..., basis.n_harmonics + 1:] = 0.0
    return np.fft.irfft(X, n=grid.n_points, axis=-1)


def inner_l2(u, v, grid: Grid | None = None) -> float:
    """Riemann-sum inner product ``sum(u*v)/G`` of two grid signals."""
    uv, ug = _values_of(u, grid)
    vv, vg = _values_of(v, grid)
    if ug is not None and vg is not None and ug != vg:
        raise GridMismatchError("signals live on different grids")
    if uv.shape != vv.shape:
        raise GridMismatchError(f"shape mismatch {uv.shape} vs {vv.shape}")
    g = grid or ug or vg
    if g is None:
        raise ValueError("a grid is required for plain arrays")
    return float(np.dot(uv, vv) / g.samples_per_unit)


def norm_l2(u, grid: Grid | None = None) -> float:
    return float(np.sqrt(inner_l2(u, u, grid)))


# ---------------------------------------------------------------------------
# phi(t) = int_0^t (t - s) sinc(s) ds
# ---------------------------------------------------------------------------


def phi_exact(t):
    """Closed form ``t*Si(pi t)/pi - 2 sin^2(pi t/2)/pi^2``."""
    t = np.asarray(t, dtype=np.float64)
    si, _ = sici(np.pi * t)
    return t * si / np.pi - 2.0 * np.sin(0.5 * np.pi * t) ** 2 / np.pi ** 2


def phi_derivative(t):
    """``phi'(t) = Si(pi t)/pi``."""
    si, _ = sici(np.pi * np.asarray(t, dtype=np.float64))
    return si / np.pi


@dataclass(frozen=True, eq=False)
class PhiTable:
    """Tabulated ``phi`` with cubic Hermite interpolation.

    Values and exact derivatives are stored at multiples of ``step`` on
    ``[0, range]``; evenness supplies negative arguments and arguments beyond
    ``range`` fall back to :func:`phi_exact`.
    """

    step: float = 1.0 / 1024
    range: float = 512.0
    values: np.ndarray = field(init=False, repr=False)
    derivs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(np.ceil(self.range / self.step)) + 1
        t = np.arange(n) * self.step
        vals = phi_exact(t)
        ders = phi_derivative(t)
        vals.setflags(write=False)
        ders.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "derivs", ders)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        t = np.ascontiguousarray(np.atleast_1d(t))
        out = _kernels.phi_lookup(t, self.values, self.derivs, self.step)
        far = np.abs(t) > self.range
        if far.any():
            out[far] = phi_exact(t[far])
        return float(out[0]) if scalar else out


@lru_cache(maxsize=4)
def default_phi_table(step: float = 1.0 / 1024, range_: float = 512.0) -> PhiTable:
    return PhiTable(step, range_)


def phi(t, table: PhiTable | None = None):
    """``phi(t) = int_0^t (t - s) sinc(s) ds`` served from the lookup table."""
    return (table or default_phi_table())(t)


# ---------------------------------------------------------------------------
# random inputs
# ---------------------------------------------------------------------------


def random_bandlimited(seed, grid: Grid, band_edge: float = NYQUIST_BAND,
                       rms: float = 1.0) -> BandlimitedSignal:
    """Random band-limited signal with i.i.d. Gaussian harmonic coordinates.

    Coordinates have variance ``rms**2 * T / n_basis`` so that the expected
    mean-square grid value equals ``rms**2``.
    """
    basis = harmonic_basis(grid, band_edge)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(basis.size) * rms * np.sqrt(grid.period / basis.size)
    return BandlimitedSignal.from_coords(grid, a, band_edge)
