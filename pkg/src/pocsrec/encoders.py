"""Encoders producing event streams from band-limited inputs.

Two stream types share one container: *integral* streams carry interval
samples ``w_k = <x, v_k>`` over consecutive intervals, *point* streams carry
values at instants (point samples or level crossings).  Noise perturbs values
only, never instants.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from ._csv import read_rows, write_rows
from .errors import DimensionMismatchError, InvalidSamplingError
from .kernel_space import KernelFamily, SamplingOperator, sample
from .signal import BandlimitedSignal

__all__ = [
    "EventStream",
    "TruncatedStreamWarning",
    "integral_encode",
    "integrate_and_fire_boundaries",
    "multichannel_encode",
    "level_crossing_sample",
    "point_sample",
    "add_noise",
    "channel_rng",
    "read_streams",
    "write_streams",
]

INTEGRAL_HEADER = ["channel", "j", "t_start", "t_end", "value"]
POINT_HEADER = ["channel", "k", "t", "value"]


class TruncatedStreamWarning(UserWarning):
    """The encoder stopped before producing the expected events."""


def channel_rng(seed, channel=0) -> np.random.Generator:
    """Independent generator for ``(seed, channel)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(channel)]))


@dataclass(frozen=True, eq=False)
class EventStream:
    """Acquired samples of one channel.

    Attributes
    ----------
    kind : {"integral", "point"}
    index : ndarray of int
    values : ndarray
    t_start, t_end : ndarray or None
        Interval endpoints (integral streams).
    t : ndarray or None
        Instants (point streams).
    channel : int
    noise_meta : tuple or None
        ``(snr_db, seed)`` of injected noise.
    kernel_kind, kernel_param
        Kernel family that produced integral samples.
    """

    kind: str
    index: np.ndarray
    values: np.ndarray
    t_start: np.ndarray | None = None
    t_end: np.ndarray | None = None
    t: np.ndarray | None = None
    channel: int = 0
    noise_meta: tuple | None = None
    kernel_kind: str = "indicator"
    kernel_param: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "index", np.asarray(self.index, dtype=np.int64))
        if self.kind == "integral":
            a = np.asarray(self.t_start, dtype=np.float64)
            b = np.asarray(self.t_end, dtype=np.float64)
            if not (a.shape == b.shape == vals.shape):
                raise DimensionMismatchError("interval arrays differ in length")
            if np.any(b <= a) or np.any(a[1:] < b[:-1] - 1e-12):
                raise InvalidSamplingError("intervals must be consecutive and non-overlapping")
            object.__setattr__(self, "t_start", a)
            object.__setattr__(self, "t_end", b)
        elif self.kind == "point":
            t = np.asarray(self.t, dtype=np.float64)
            if t.shape != vals.shape:
                raise DimensionMismatchError("instants and values differ in length")
            if np.any(np.diff(t) <= 0):
                raise InvalidSamplingError("instants must be strictly increasing")
            object.__setattr__(self, "t", t)
        else:
            raise ValueError(f"unknown stream kind {self.kind!r}")

    def __len__(self):
        return self.values.shape[0]

    @property
    def boundaries(self) -> np.ndarray:
        if self.kind != "integral":
            raise ValueError("point streams have no boundaries")
        return np.append(self.t_start, self.t_end[-1]) if len(self) else self.t_start.copy()

    def kernel_family(self, grid) -> KernelFamily:
        return KernelFamily(grid, self.boundaries, self.kernel_kind, self.kernel_param)

    def with_values(self, values, noise_meta=None) -> "EventStream":
        return replace(self, values=np.asarray(values, dtype=np.float64),
                       noise_meta=noise_meta if noise_meta is not None else self.noise_meta)

    def rows(self):
        if self.kind == "integral":
            return [(self.channel, int(j), a, b, v) for j, a, b, v in
                    zip(self.index, self.t_start, self.t_end, self.values)]
        return [(self.channel, int(k), t, v) for k, t, v in zip(self.index, self.t, self.values)]

    def to_csv(self, path):
        write_streams(path, [self])

    @classmethod
    def from_csv(cls, path) -> "EventStream":
        streams = read_streams(path)
        if len(streams) != 1:
            raise ValueError("file holds more than one channel; use read_streams")
        return streams[0]


def write_streams(path, streams):
    """Write streams of one kind into a single CSV."""
    kinds = {s.kind for s in streams}
    if len(kinds) != 1:
        raise ValueError("streams must share a kind")
    header = INTEGRAL_HEADER if kinds.pop() == "integral" else POINT_HEADER
    write_rows(path, header, [r for s in streams for r in s.rows()])


def read_streams(path) -> list:
    """Read a stream CSV, splitting rows by channel."""
    rows = read_rows(path)
    if not rows:
        return []
    integral = "t_start" in rows[0]
    out = {}
    for r in rows:
        out.setdefault(int(r["channel"]), []).append(r)
    streams = []
    for ch, rs in sorted(out.items()):
        if integral:
            streams.append(EventStream(
                "integral", [int(r["j"]) for r in rs], [float(r["value"]) for r in rs],
                t_start=[float(r["t_start"]) for r in rs],
                t_end=[float(r["t_end"]) for r in rs], channel=ch))
        else:
            streams.append(EventStream(
                "point", [int(r["k"]) for r in rs], [float(r["value"]) for r in rs],
                t=[float(r["t"]) for r in rs], channel=ch))
    return streams


# ---------------------------------------------------------------------------
# integral sampling
# ---------------------------------------------------------------------------


def integral_encode(x: BandlimitedSignal, boundaries, kernel_kind: str = "indicator",
                    param: float = 0.0, channel: int = 0) -> EventStream:
    """Integral samples ``w_k = int x(t) f_k(t) dt`` over consecutive intervals.

    Values come from :func:`kernel_space.sample`, so encoder and decoder use
    the same computation.

    Raises
    ------
    InvalidSamplingError
        If the boundaries are not strictly increasing.
    """
    fam = KernelFamily(x.grid, boundaries, kernel_kind, param)
    op = SamplingOperator(fam, x.band_edge)
    w = sample(op, x).values
    b = fam.boundaries
    return EventStream("integral", np.arange(fam.size), w, t_start=b[:-1], t_end=b[1:],
                       channel=channel, kernel_kind=kernel_kind, kernel_param=param)


def _antiderivative_coeffs(x: BandlimitedSignal, bias: float):
    basis = x.basis
    ca, sa = basis.trig_coefficients(x.coords)
    om = basis.omega1 * np.arange(ca.shape[0])
    om[0] = 1.0
    Ca = -sa / om
    Sa = ca / om
    Ca[0] = 0.0
    Sa[0] = 0.0
    return Ca, Sa, basis.omega1, ca[0] + bias


def integrate_and_fire_boundaries(x: BandlimitedSignal, threshold: float, bias: float,
                                  t0: float = 0.0) -> np.ndarray:
    """Firing instants of an integrate-and-fire trigger.

    Starting at ``t0`` the integral of ``x + bias`` is accumulated; each time
    it reaches ``threshold`` an event fires and the integrator resets.  Only
    events within one period ``(t0, t0 + T]`` are emitted.

    Returns
    -------
    ndarray
        ``[t0, t_1, ..., t_n]``; consecutive pairs delimit intervals whose
        integral of ``x + bias`` equals ``threshold``.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    Ca, Sa, om1, slope = _antiderivative_coeffs(x, bias)
    g = x.grid
    tg = t0 + np.arange(g.n_points + 1) / g.samples_per_unit
    F = _kernels.trig_eval(tg, Ca, Sa, om1, slope, 0.0)
    F0 = F[0]
    peak = np.maximum.accumulate(F)
    n_ev = int(np.floor((peak[-1] - F0) / threshold + 1e-12))
    if n_ev == 0:
        warnings.warn("integral never reaches the threshold within the period",
                      TruncatedStreamWarning, stacklevel=2)
        return np.array([t0])
    targets = F0 + threshold * np.arange(1, n_ev + 1)
    j = np.searchsorted(peak, targets, side="left")
    j = np.clip(j, 1, g.n_points)
    roots = np.empty(n_ev)
    # targets at or below a grid value that is itself the crossing
    exact = F[j] == targets
    roots[exact] = tg[j[exact]]
    idx = ~exact
    if np.any(idx):
        roots[idx] = _kernels.trig_roots(np.ascontiguousarray(tg[j[idx] - 1]),
                                         np.ascontiguousarray(tg[j[idx]]),
                                         Ca, Sa, om1, slope, 0.0,
                                         np.ascontiguousarray(targets[idx]), 60)
    roots = np.maximum.accumulate(roots)
    keep = np.concatenate(([True], np.diff(roots) > 0))
    return np.concatenate(([t0], roots[keep]))


def multichannel_encode(X, per_channel_boundaries, kernel_kind: str = "indicator",
                        param: float = 0.0) -> list:
    """Integral streams of every channel of a multichannel signal.

    Parameters
    ----------
    X : MultiChannelSignal
    per_channel_boundaries : sequence of array_like
        One boundary set per channel.
    """
    if len(per_channel_boundaries) != X.n_channels:
        raise DimensionMismatchError(
            f"{len(per_channel_boundaries)} boundary sets for {X.n_channels} channels")
    return [integral_encode(X.channel(i), b, kernel_kind, param, channel=i)
            for i, b in enumerate(per_channel_boundaries)]


# ---------------------------------------------------------------------------
# point-type streams
# ---------------------------------------------------------------------------


def level_crossing_sample(x: BandlimitedSignal, levels, channel: int = 0) -> EventStream:
    """Instants where ``x`` crosses any of ``levels``.

    Crossings are bracketed by sign changes of the grid values (including the
    periodic wrap) and refined by bisection on the exact harmonic expansion.
    Each value is the level crossed.
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=np.float64))
    g = x.grid
    tg = g.times
    v = x.values
    ca, sa = x.basis.trig_coefficients(x.coords)
    om1 = x.basis.omega1
    ts, vs = [], []
    for lev in levels:
        d = v - lev
        dn = np.roll(d, -1)
        on = np.flatnonzero(d == 0.0)
        br = np.flatnonzero((d != 0.0) & (dn != 0.0) & (np.signbit(d) != np.signbit(dn)))
        if br.size:
            lo = tg[br]
            hi = lo + g.spacing
            r = _kernels.trig_roots(np.ascontiguousarray(lo), np.ascontiguousarray(hi),
                                    ca, sa, om1, 0.0, 0.0, np.full(br.size, lev), 60)
            ts.append(np.mod(r, g.period))
            vs.append(np.full(br.size, lev))
        if on.size:
            ts.append(tg[on])
            vs.append(np.full(on.size, lev))
    if not ts:
        return EventStream("point", np.zeros(0, int), np.zeros(0), t=np.zeros(0), channel=channel)
    t = np.concatenate(ts)
    val = np.concatenate(vs)
    order = np.lexsort((val, t))
    t, val = t[order], val[order]
    keep = np.concatenate(([True], np.diff(t) > 1e-12))
    t, val = t[keep], val[keep]
    return EventStream("point", np.arange(t.shape[0]), val, t=t, channel=channel)


def point_sample(x: BandlimitedSignal, instants, noise=None, channel: int = 0) -> EventStream:
    """Values ``x(t_k) (+ e_k)`` at arbitrary instants.

    Parameters
    ----------
    x : BandlimitedSignal
    instants : array_like
        Strictly increasing instants within the period.
    noise : tuple, optional
        ``(snr_db, seed)``; noise is referenced to the rms of ``x``.
    """
    t = np.asarray(instants, dtype=np.float64)
    if t.size and (t[0] < 0 or t[-1] >= x.grid.period):
        raise InvalidSamplingError("instants must lie in [0, T)")
    s = EventStream("point", np.arange(t.shape[0]), x.at(t) if t.size else np.zeros(0),
                    t=t, channel=channel)
    if noise is not None:
        s = add_noise(s, noise[0], noise[1], reference_rms=x.rms())
    return s


def add_noise(stream: EventStream, snr_db: float, seed, reference_rms: float | None = None
              ) -> EventStream:
    """Add i.i.d. Gaussian noise ``snr_db`` below a reference level.

    The per-sample noise rms is ``reference_rms * 10**(-snr_db/20)``; the
    reference defaults to the rms of the stream values.  The generator is keyed
    by ``(seed, stream.channel)``.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return stream
    if reference_rms is None:
        reference_rms = float(np.sqrt(np.mean(stream.values ** 2))) if len(stream) else 0.0
    sigma = reference_rms * 10.0 ** (-snr_db / 20.0)
    rng = channel_rng(seed, stream.channel)
    noisy = stream.values + sigma * rng.standard_normal(len(stream))
    return stream.with_values(noisy, noise_meta=(float(snr_db), int(seed)))
