"""Nonlinear-spectrum fiber transmission simulator.

Signal data travels jointly on the continuous and discrete parts of the
nonlinear Fourier spectrum of the focusing NLSE; this package provides the
direct and inverse transforms, the bit-level modem for both spectrum parts,
a split-step amplified-link channel model, and a sweep harness with a CLI.
"""

from .core import (
    ComplexEnvelope,
    ContinuousSpectrum,
    DiscreteSpectrum,
    NonlinearSpectrum,
    NormalizationMap,
    average_power,
    denormalize,
    empty_spectrum,
    make_default_grid,
    normalize,
    signal_energy,
    spectrum_energy,
)
from .forward import (
    ScatteringPair,
    continuous_spectrum,
    find_eigenvalues,
    forward_backward_amplitude,
    full_nft,
    scatter,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexEnvelope",
    "ContinuousSpectrum",
    "DiscreteSpectrum",
    "NonlinearSpectrum",
    "NormalizationMap",
    "ScatteringPair",
    "average_power",
    "continuous_spectrum",
    "denormalize",
    "empty_spectrum",
    "find_eigenvalues",
    "forward_backward_amplitude",
    "full_nft",
    "make_default_grid",
    "normalize",
    "scatter",
    "signal_energy",
    "spectrum_energy",
]
