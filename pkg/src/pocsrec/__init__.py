"""Signal reconstruction from generalized samples by projections onto convex sets.

Submodules
----------
signal
    Periodic grid and band-limited signals, with the ``phi`` lookup table.
kernel_space
    Sampling kernels and the sampling operator with its Gram matrix.
encoders
    Event samplers: integrate-and-fire, level crossings, point values.
pocs
    Iteration forms and their least-squares and semi-convergence oracles.
multichannel
    Mixed multichannel signals and their reconstruction.
sobolev
    Gröchenig's iteration for point samples.
baselines
    Frame algorithm and Kaczmarz methods.
experiments, selftest, cli
    Experiment drivers with the invariant suite, plus the command line.
"""

from ._kernels import backend
from .encoders import (EventStream, add_noise, integral_encode, integrate_and_fire_boundaries,
                       level_crossing_sample, multichannel_encode, point_sample)
from .errors import (DimensionMismatchError, GridMismatchError, InvalidBandError,
                     InvalidSamplingError, PocsrecError, RankDeficientError)
from .kernel_space import KernelFamily, SamplingOperator, gram_matrix, reduced_min_modulus
from .multichannel import (MixingMatrix, MultiChannelOperator, MultiChannelSignal, mc_reconstruct,
                           source_estimate)
from .pocs import FORMS, ConvergenceReport, Problem, iterate, least_squares_oracle
from .signal import BandlimitedSignal, Grid, PhiTable, phi, random_bandlimited
from .sobolev import PointSampleSet, groch_discrete_iterate, groch_iterate, groch_limit

__version__ = "0.1.0"

__all__ = [
    "backend",
    "EventStream", "add_noise", "integral_encode", "integrate_and_fire_boundaries",
    "level_crossing_sample", "multichannel_encode", "point_sample",
    "DimensionMismatchError", "GridMismatchError", "InvalidBandError", "InvalidSamplingError",
    "PocsrecError", "RankDeficientError",
    "KernelFamily", "SamplingOperator", "gram_matrix", "reduced_min_modulus",
    "MixingMatrix", "MultiChannelOperator", "MultiChannelSignal", "mc_reconstruct",
    "source_estimate",
    "FORMS", "ConvergenceReport", "Problem", "iterate", "least_squares_oracle",
    "BandlimitedSignal", "Grid", "PhiTable", "phi", "random_bandlimited",
    "PointSampleSet", "groch_discrete_iterate", "groch_iterate", "groch_limit",
]
