"""Seeded experiment drivers with their configuration and CSV outputs.

Two experiments are provided:

``fig2``
    Monte Carlo comparison of Gröchenig's iteration with the frame algorithm
    and cyclic/randomized Kaczmarz on noisy nonuniform point samples; writes
    mean relative MSE curves.
``fig3``
    Sub-Nyquist level-crossing sampling reconstructed from a zero and a
    staircase initial guess; writes waveforms and an error table.
"""

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._csv import fmt, read_rows, write_rows
from .baselines import frame_iterate, kaczmarz_iterate
from .encoders import channel_rng, level_crossing_sample, point_sample
from .kernel_space import KernelFamily
from .signal import BandlimitedSignal, Grid, harmonic_basis, random_bandlimited
from .sobolev import (PointSampleSet, PointSamplingModel, groch_discrete_iterate, groch_iterate,
                      groch_limit, sobolev_norm)

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "load_config",
    "write_manifest",
    "fig2_trial",
    "run_fig2",
    "tune_levels",
    "staircase_guess",
    "run_fig3",
    "emit_plot_script",
]

EXPERIMENTS = ("fig2", "fig3", "selftest", "custom")
FIG2_METHODS = ("frame", "kaczmarz_cyclic", "kaczmarz_random", "grochenig")
FIG3_RATIO = 0.77


@dataclass
class ExperimentConfig:
    """Resolved experiment settings.

    ``levels=None`` lets :func:`run_fig3` tune uniformly spaced levels to the
    target sampling ratio.  ``workers > 1`` runs trials in processes; results
    are reduced in trial order either way.
    """

    experiment: str = "fig2"
    trials: int = 100
    period: float = 315.0
    G: int = 16
    snr_db: float = 45.0
    gap_low: float = 0.0
    gap_high: float = 0.5
    levels: tuple | None = None
    seed: int = 0
    max_iters: int = 2000
    output_dir: str = "runs"
    workers: int = 1
    target_ratio: float = FIG3_RATIO
    pocs_iters: int = 20000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        for name in ("trials", "G", "max_iters", "workers", "pocs_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")
        n = self.period * self.G
        if abs(n - round(n)) > 1e-9:
            raise ValueError("period * G must be an integer")
        if not 0 <= self.gap_low < self.gap_high:
            raise ValueError("need 0 <= gap_low < gap_high")
        if self.levels is not None:
            self.levels = tuple(float(v) for v in self.levels)

    @classmethod
    def for_experiment(cls, name: str, **overrides) -> "ExperimentConfig":
        """Defaults of one experiment updated by ``overrides``."""
        base = {"fig3": {"period": 64.0, "trials": 1}}.get(name, {})
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment=name, **base)

    @property
    def grid(self) -> Grid:
        return Grid(float(self.period), int(self.G))

    def items(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "levels" and v is not None:
                v = ",".join(fmt(x) for x in v)
            yield f.name, v


_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key, text):
    text = text.strip()
    if key == "levels":
        return None if text in ("", "none", "None") else tuple(float(s) for s in text.split(","))
    kind = _TYPES[key]
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def load_config(path) -> dict:
    """Parse a ``key=value`` file (``#`` comments) into config overrides."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def write_manifest(config: ExperimentConfig, path, extra: dict | None = None):
    lines = [f"{k}={'' if v is None else v}" for k, v in config.items()]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# fig2
# ---------------------------------------------------------------------------


def random_instants(rng, period, low, high):
    """Cumulative sums of i.i.d. gaps ``U[low, high]`` after an offset in ``[0, high)``."""
    mean = 0.5 * (low + high)
    n_draw = int(np.ceil(period / mean * 1.2)) + 16
    t = rng.uniform(0.0, high) + np.cumsum(rng.uniform(low, high, n_draw))
    while t[-1] < period:
        t = np.concatenate((t, t[-1] + np.cumsum(rng.uniform(low, high, n_draw))))
    t = t[t < period]
    keep = np.concatenate(([True], np.diff(t) > 0))
    return t[keep]


def fig2_trial(config: ExperimentConfig, trial: int) -> dict:
    """One Monte Carlo trial; returns relative MSE curves per method."""
    g = config.grid
    rng = channel_rng(config.seed, trial)
    x = random_bandlimited(int(rng.integers(2 ** 63)), g)
    t = random_instants(rng, g.period, config.gap_low, config.gap_high)
    stream = point_sample(x, t, noise=(config.snr_db, int(rng.integers(2 ** 63))))
    s = PointSampleSet(stream.t, stream.values, g.period)
    model = PointSamplingModel(s.instants, g)
    n = config.max_iters
    x2 = np.sum(x.coords ** 2)
    xs2 = np.sum((model.basis.coord_omega * x.coords) ** 2)
    out = {}
    _, r = frame_iterate(s, None, n, truth=x, model=model)
    out["frame"] = (r.err_l2 ** 2 / x2, None)
    _, r = kaczmarz_iterate(s, None, n, "cyclic", truth=x, model=model)
    out["kaczmarz_cyclic"] = (r.err_l2 ** 2 / x2, None)
    _, r = kaczmarz_iterate(s, None, n, "random", seed=int(rng.integers(2 ** 63)), truth=x,
                            model=model)
    out["kaczmarz_random"] = (r.err_l2 ** 2 / x2, None)
    _, r = groch_iterate(s, None, n, truth=x, model=model)
    out["grochenig"] = (r.err_l2 ** 2 / x2, r.err_sobolev ** 2 / xs2)
    return out


def _pad(curve, n):
    # a diverged run counts as infinite error from then on
    if curve.shape[0] >= n + 1:
        return curve[:n + 1]
    return np.concatenate((curve, np.full(n + 1 - curve.shape[0], np.inf)))


def _trial_star(args):
    return fig2_trial(*args)


def run_fig2(config: ExperimentConfig, write: bool = True) -> dict:
    """Mean relative MSE curves over ``config.trials`` trials.

    Returns
    -------
    dict
        ``method -> (mse_l2, mse_sobolev or None)`` arrays of length
        ``max_iters + 1``.  With ``write`` the curves go to
        ``output_dir/mse_curves.csv`` with a ``manifest.txt``.
    """
    jobs = [(config, k) for k in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            results = list(ex.map(_trial_star, jobs))
    else:
        results = [_trial_star(j) for j in jobs]
    n = config.max_iters
    curves = {}
    for m in FIG2_METHODS:
        l2 = np.mean([_pad(r[m][0], n) for r in results], axis=0)
        sob = None
        if results[0][m][1] is not None:
            sob = np.mean([_pad(r[m][1], n) for r in results], axis=0)
        curves[m] = (l2, sob)
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for m in FIG2_METHODS:
            l2, sob = curves[m]
            for k in range(n + 1):
                rows.append((m, k, l2[k], None if sob is None else sob[k]))
        write_rows(out / "mse_curves.csv", ["method", "n", "mse_l2", "mse_sobolev"], rows)
        write_manifest(config, out / "manifest.txt")
    return curves


# ---------------------------------------------------------------------------
# fig3
# ---------------------------------------------------------------------------


def tune_levels(x: BandlimitedSignal, target_ratio: float = FIG3_RATIO, tol: float = 0.02,
                n_scan: int = 400):
    """Uniform levels whose crossings give a sampling ratio near ``target_ratio``.

    Levels are ``(j + 1/2) * spacing`` for all integers ``j`` within the
    signal range.  Scans spacings from coarse to fine and returns the first
    one whose ratio (crossings per unit time) is closest to the target among
    those within ``tol``.

    Returns
    -------
    levels : ndarray
    ratio : float
    """
    v = x.values
    lo, hi = float(v.min()), float(v.max())
    best = None
    for spacing in np.geomspace(hi - lo, (hi - lo) / 200.0, n_scan):
        j = np.arange(np.floor(lo / spacing - 0.5), np.ceil(hi / spacing - 0.5) + 1)
        lev = (j + 0.5) * spacing
        lev = lev[(lev > lo) & (lev < hi)]
        if lev.size == 0:
            continue
        ratio = len(level_crossing_sample(x, lev)) / x.grid.period
        if abs(ratio - target_ratio) <= tol and (best is None or
                                                  abs(ratio - target_ratio) < abs(best[1] - target_ratio)):
            best = (lev, ratio)
        if best is not None and ratio > target_ratio + tol:
            break
    if best is None:
        raise RuntimeError("no level spacing reaches the requested sampling ratio")
    return best


def staircase_guess(samples: PointSampleSet, grid: Grid, band_edge: float = 0.5
                    ) -> BandlimitedSignal:
    """Band-limited version of the function holding each crossing value until the next crossing."""
    t = samples.instants
    bounds = np.concatenate((t, [t[0] + grid.period]))
    kf = KernelFamily(grid, bounds, "indicator")
    basis = harmonic_basis(grid, band_edge)
    U = samples.values @ kf.fourier(basis.n_harmonics)
    return BandlimitedSignal.from_coords(grid, basis.from_fourier(U), band_edge)


def _rel(a: BandlimitedSignal, b: BandlimitedSignal):
    d = a - b
    return (d.norm() / b.norm(), sobolev_norm(d) / sobolev_norm(b))


def run_fig3(config: ExperimentConfig, write: bool = True) -> dict:
    """Sub-Nyquist level-crossing reconstruction from two initial guesses.

    Returns
    -------
    dict
        ``levels``, ``ratio``, ``signals`` (label to signal), ``errors``
        (label to relative L2 and Sobolev errors), ``pocs_gap`` (guess to
        relative distance of the last POCS iterate from the pseudoinverse
        limit) and ``limit_residual`` (max interpolation residual of the
        limits at the crossings).
    """
    g = config.grid
    x = random_bandlimited(int(channel_rng(config.seed, 0).integers(2 ** 63)), g)
    if config.levels is None:
        levels, _ = tune_levels(x, config.target_ratio)
    else:
        levels = np.asarray(config.levels)
    stream = level_crossing_sample(x, levels)
    s = PointSampleSet(stream.t, stream.values, g.period)
    ratio = len(s) / g.period
    model = PointSamplingModel(s.instants, g)
    guesses = {"zero": BandlimitedSignal.zeros(g), "staircase": staircase_guess(s, g)}
    signals = {"input": x}
    errors, gap, resid = {}, {}, {}
    for name, x0 in guesses.items():
        x2, _ = groch_iterate(s, x0, 2, model=model)
        lim = groch_limit(s, x0, model=model)
        xp = groch_discrete_iterate(s, x0, config.pocs_iters, model=model)
        signals[f"{name}_n0"] = x0
        signals[f"{name}_n2"] = x2
        signals[f"{name}_ninf"] = lim
        for n_label, sig in (("0", x0), ("2", x2), ("inf", lim)):
            errors[(name, n_label)] = _rel(sig, x)
        gap[name] = float((xp - lim).norm() / lim.norm())
        resid[name] = float(np.max(np.abs(lim.at(s.instants) - s.values)))
    result = {"levels": levels, "ratio": ratio, "samples": s, "signals": signals,
              "errors": errors, "pocs_gap": gap, "limit_residual": resid}
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        labels = ["input", "zero_n2", "zero_ninf", "staircase_n0", "staircase_n2",
                  "staircase_ninf"]
        rows = []
        for lab in labels:
            for tk, v in zip(g.times, signals[lab].values):
                rows.append((lab, tk, v))
        for tk, v in zip(s.instants, s.values):
            rows.append(("samples", tk, v))
        write_rows(out / "waveforms.csv", ["label", "t", "value"], rows)
        write_rows(out / "errors.csv", ["guess", "n", "rel_err_l2", "rel_err_sobolev"],
                   [(k[0], k[1], e2, es) for k, (e2, es) in errors.items()])
        resolved = dataclasses.replace(config, levels=tuple(levels))
        write_manifest(resolved, out / "manifest.txt",
                       {"sampling_ratio": fmt(ratio), "n_samples": len(s)})
    return result


# ---------------------------------------------------------------------------
# plot scripts
# ---------------------------------------------------------------------------

_PLOT_HEAD = '''"""Plots for the CSV outputs in this directory (requires matplotlib)."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(HERE, name), newline="") as f:
        return list(csv.DictReader(f))
'''

_PLOT_FIG2 = '''

CURVES = {curves!r}


def plot_mse():
    data = defaultdict(lambda: ([], []))
    for row in read("mse_curves.csv"):
        for method, column, label in CURVES:
            if row["method"] == method and row[column]:
                data[label][0].append(int(row["n"]))
                data[label][1].append(float(row[column]))
    fig, ax = plt.subplots()
    for _, _, label in CURVES:
        ns, vs = data[label]
        ax.semilogy(ns, vs, "--" if "sobolev" in label else "-", label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean relative MSE")
    ax.legend()
    fig.savefig(os.path.join(HERE, "mse_curves.png"), dpi=150)
'''

_PLOT_FIG3 = '''

WAVEFORMS = {labels!r}


def plot_waveforms():
    data = defaultdict(lambda: ([], []))
    for row in read("waveforms.csv"):
        data[row["label"]][0].append(float(row["t"]))
        data[row["label"]][1].append(float(row["value"]))
    fig, ax = plt.subplots(figsize=(10, 4))
    for label in WAVEFORMS:
        ts, vs = data[label]
        if label == "samples":
            ax.plot(ts, vs, "k.", label=label)
        else:
            ax.plot(ts, vs, label=label)
    ax.set_xlabel("t")
    ax.legend(fontsize="small")
    fig.savefig(os.path.join(HERE, "waveforms.png"), dpi=150)
'''


def emit_plot_script(run_dir) -> Path:
    """Write ``plot.py`` next to the CSVs of a run.

    Raises
    ------
    FileNotFoundError
        When the directory holds neither ``mse_curves.csv`` nor ``waveforms.csv``.
    """
    run_dir = Path(run_dir)
    parts, calls = [_PLOT_HEAD], []
    mse = run_dir / "mse_curves.csv"
    wav = run_dir / "waveforms.csv"
    if mse.exists():
        curves, seen = [], set()
        for row in read_rows(mse):
            m = row["method"]
            if m in seen:
                continue
            seen.add(m)
            curves.append((m, "mse_l2", f"{m} (L2)"))
            if row["mse_sobolev"] != "":
                curves.append((m, "mse_sobolev", f"{m} (sobolev)"))
        parts.append(_PLOT_FIG2.format(curves=curves))
        calls.append("plot_mse()")
    if wav.exists():
        labels = list(dict.fromkeys(r["label"] for r in read_rows(wav)))
        parts.append(_PLOT_FIG3.format(labels=labels))
        calls.append("plot_waveforms()")
    if not calls:
        raise FileNotFoundError(f"no experiment CSVs in {run_dir}")
    parts.append('\n\nif __name__ == "__main__":\n' + "".join(f"    {c}\n" for c in calls))
    path = run_dir / "plot.py"
    path.write_text("".join(parts))
    return path
