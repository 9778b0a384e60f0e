import numpy as np
import pytest

from pocsrec.kernel_space import KernelFamily, SamplingOperator
from pocsrec.pocs import Problem
from pocsrec.signal import Grid, random_bandlimited


def random_instance(seed, period=32.0, n_kernels=8, kind="indicator", param=0.0):
    """Random kernel boundaries on one period and a random input."""
    g = Grid(period)
    rng = np.random.default_rng(seed)
    b = np.sort(rng.uniform(0.0, period, n_kernels + 1))
    op = SamplingOperator(KernelFamily(g, b, kind, param))
    return op, random_bandlimited(seed + 1000, g)


def semiconvergence_instance(seed=0, snr_db=45.0):
    """Noisy 4x oversampled instance with a 4-unit gap (period 32).

    The truth is ``V* z`` (a source-condition element), normalized to unit
    rms, so the error curve dips well before the noise is amplified.
    """
    g = Grid(32.0)
    b = np.arange(0.0, 28.0 + 1e-12, 0.25)
    op = SamplingOperator(KernelFamily(g, b, "indicator"))
    z = np.random.default_rng(seed).standard_normal(op.n_samples) * op.weights
    a = op.adjoint_coords(z)
    x = op.to_signal(a)
    x = x * (1.0 / x.rms())
    w = op.apply_coords(x.coords)
    sigma = np.sqrt(np.mean(w ** 2)) * 10.0 ** (-snr_db / 20.0)
    d = sigma * np.random.default_rng(seed + 7).standard_normal(op.n_samples)
    return Problem(op, w + d, truth=x), d


@pytest.fixture
def grid32():
    return Grid(32.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
