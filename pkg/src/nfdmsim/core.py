"""Core types and unit handling for nonlinear-spectrum signal processing.

Conventions fixed here and used everywhere else in the package:

* Normalized focusing NLSE: i dq/dz = d^2q/dt^2 + 2|q|^2 q.  A fundamental
  soliton with eigenvalue i*A is q(t) = 2A sech(2At); nonlinear spectral
  coefficients evolve along z as multiplication by exp(-4i lam^2 z).
* Scattering problem: v' = [[-i lam, q], [-conj(q), i lam]] v with the left
  Jost solution v -> (exp(-i lam t), 0) as t -> -inf.  Then
  a(lam) = lim v1 exp(+i lam t), b(lam) = lim v2 exp(-i lam t) at t -> +inf,
  continuous spectrum q_c(lam) = b/a on the real axis and discrete amplitudes
  q_d(lam_k) = b(lam_k)/a'(lam_k) at the zeros of a in the upper half plane.
* Physical envelopes (units of sqrt(W), time in seconds) map to normalized
  ones by t -> t/T0, amplitude -> conj(amplitude)/sqrt(P_norm), and physical
  distance Z maps to normalized distance zeta = Z/(2 L_norm).  The complex
  conjugation is what aligns the anomalous-dispersion fiber equation
  i q_z = (beta2/2) q_tt - gamma |q|^2 q (beta2 < 0) with the normalized
  convention above; it is its own inverse, so round trips are exact.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

# Planck constant times the carrier frequency at 1550 nm, in joules.
H_PLANCK = 6.62607015e-34
CARRIER_FREQ_HZ = 299_792_458.0 / 1550e-9
PHOTON_ENERGY_J = H_PLANCK * CARRIER_FREQ_HZ

# Default spectral grid: 1024 points covering the full multiplex band.
# 64 sinc subcarriers at spacing pi/T_c (T_c = 2 normalized) reach out to
# |lam| ~= 16 pi ~= 50.3, so the grid spans +-56 to leave guard room.
DEFAULT_LAMBDA_SPAN = 56.0
DEFAULT_LAMBDA_POINTS = 1024

UNIT_SYSTEMS = ("normalized", "physical")


def make_default_grid(span=DEFAULT_LAMBDA_SPAN, n=DEFAULT_LAMBDA_POINTS):
    """Uniform real spectral grid used by default for continuous spectra."""
    return np.linspace(-span, span, n)


@dataclass(frozen=True)
class ComplexEnvelope:
    """Uniformly sampled complex envelope.

    Args:
        samples: complex sample values.
        dt: sample spacing (seconds when physical, dimensionless otherwise).
        t0: time of the first sample.
        units: "normalized" or "physical".
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0
    units: str = "normalized"

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("envelope samples must be a non-empty 1-d array")
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise ValueError("envelope samples must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("envelope dt must be positive and finite")
        if not np.isfinite(self.t0):
            raise ValueError("envelope t0 must be finite")
        if self.units not in UNIT_SYSTEMS:
            raise ValueError(f"unknown unit system {self.units!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n(self):
        return self.samples.size

    @property
    def t(self):
        """Sample time grid."""
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self):
        return self.dt * self.samples.size

    def with_samples(self, samples):
        """Same time base and units, new sample values."""
        return replace(self, samples=samples)


@dataclass(frozen=True)
class NormalizationMap:
    """Dimensional scales tying physical envelopes to normalized ones.

    Args:
        beta2: group-velocity dispersion, ps^2/km (negative: anomalous).
        gamma: Kerr coefficient, 1/(W km).
        t0: time scale, ns.
    """

    beta2: float = -21.3
    gamma: float = 1.3
    t0: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.beta2) and self.beta2 < 0):
            raise ValueError("beta2 must be negative (anomalous dispersion)")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be positive")
        if not (np.isfinite(self.t0) and self.t0 > 0):
            raise ValueError("t0 must be positive")

    @property
    def beta2_si(self):
        """s^2/m"""
        return self.beta2 * 1e-24 / 1e3

    @property
    def gamma_si(self):
        """1/(W m)"""
        return self.gamma / 1e3

    @property
    def t0_si(self):
        """s"""
        return self.t0 * 1e-9

    @property
    def p_norm_w(self):
        """Power scale |beta2| / (gamma T0^2), watts."""
        return abs(self.beta2_si) / (self.gamma_si * self.t0_si**2)

    @property
    def l_norm_m(self):
        """Length scale T0^2 / |beta2|, meters."""
        return self.t0_si**2 / abs(self.beta2_si)

    def zeta(self, z_m):
        """Normalized propagation distance for a physical length in meters."""
        return z_m / (2.0 * self.l_norm_m)

    def path_averaged(self, factor):
        """Map with gamma scaled by a path-average factor in (0, 1]."""
        if not (0 < factor <= 1):
            raise ValueError("path-average factor must be in (0, 1]")
        return replace(self, gamma=self.gamma * factor)


@dataclass(frozen=True)
class ContinuousSpectrum:
    """Continuous nonlinear spectrum q_c sampled on a uniform real grid."""

    lam: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lam = np.ascontiguousarray(self.lam, dtype=np.float64)
        values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("spectral grid needs at least two points")
        if values.shape != lam.shape:
            raise ValueError("spectral values must match the grid shape")
        if not np.all(np.isfinite(lam)):
            raise ValueError("spectral grid must be finite")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("spectral values must be finite")
        d = np.diff(lam)
        if d[0] <= 0 or np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
            raise ValueError("spectral grid must be uniform and ascending")
        lam.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "values", values)

    @property
    def dlam(self):
        return float(self.lam[1] - self.lam[0])


@dataclass(frozen=True)
class DiscreteSpectrum:
    """Discrete nonlinear spectrum: eigenvalues in C+ with amplitudes.

    Amplitudes are the q_d(lam_k) = b/a' values; they may be omitted (None)
    when only eigenvalue positions are known.
    """

    eigenvalues: np.ndarray
    amplitudes: np.ndarray | None = None

    def __post_init__(self):
        ev = np.ascontiguousarray(self.eigenvalues, dtype=np.complex128)
        if ev.ndim != 1:
            raise ValueError("eigenvalues must be a 1-d array")
        if not np.all(np.isfinite(ev.view(np.float64))):
            raise ValueError("eigenvalues must be finite")
        if np.any(ev.imag <= 0):
            raise ValueError("eigenvalues must lie strictly in the upper half plane")
        if ev.size > 1:
            sep = np.abs(ev[:, None] - ev[None, :])
            sep[np.diag_indices(ev.size)] = np.inf
            if sep.min() < 1e-6:
                raise ValueError("eigenvalues must be pairwise distinct (min gap 1e-6)")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        if self.amplitudes is not None:
            amp = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
            if amp.shape != ev.shape:
                raise ValueError("amplitudes must match eigenvalues in shape")
            if not np.all(np.isfinite(amp.view(np.float64))):
                raise ValueError("amplitudes must be finite")
            if np.any(amp == 0):
                raise ValueError("amplitudes must be nonzero")
            amp.setflags(write=False)
            object.__setattr__(self, "amplitudes", amp)

    @property
    def n(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class NonlinearSpectrum:
    """Full nonlinear Fourier data: continuous part and/or discrete part."""

    continuous: ContinuousSpectrum | None = None
    discrete: DiscreteSpectrum | None = None


def empty_spectrum():
    return NonlinearSpectrum()


def normalize(env, nmap):
    """Physical envelope -> normalized envelope.

    Applies t -> t/T0, amplitude -> conj(amplitude)/sqrt(P_norm).  The
    conjugation aligns the physical anomalous-dispersion evolution with the
    normalized convention in the module docstring.
    """
    if env.units != "physical":
        raise ValueError("normalize expects a physical-units envelope")
    scale = 1.0 / np.sqrt(nmap.p_norm_w)
    return ComplexEnvelope(
        samples=np.conj(env.samples) * scale,
        dt=env.dt / nmap.t0_si,
        t0=env.t0 / nmap.t0_si,
        units="normalized",
    )


def denormalize(env, nmap):
    """Normalized envelope -> physical envelope (exact inverse of normalize)."""
    if env.units != "normalized":
        raise ValueError("denormalize expects a normalized-units envelope")
    scale = np.sqrt(nmap.p_norm_w)
    return ComplexEnvelope(
        samples=np.conj(env.samples) * scale,
        dt=env.dt * nmap.t0_si,
        t0=env.t0 * nmap.t0_si,
        units="physical",
    )


def signal_energy(env):
    """Time-domain energy sum(|q|^2) dt."""
    return float(np.sum(np.abs(env.samples) ** 2) * env.dt)


def average_power(env):
    """Time-averaged power energy/duration."""
    return signal_energy(env) / env.duration


def spectrum_energy(spectrum):
    """Signal energy carried by nonlinear spectral data.

    Continuous part contributes (1/pi) integral ln(1 + |q_c|^2) dlam
    (trapezoid on the stored grid); each eigenvalue contributes 4 Im(lam_k).
    """
    total = 0.0
    if spectrum.continuous is not None:
        c = spectrum.continuous
        edge = max(abs(c.values[0]), abs(c.values[-1]))
        if edge > 1e-6:
            warnings.warn(
                "continuous tails not decayed at grid edges (|q_c| = %.3g); "
                "energy integral is truncated" % edge
            )
        total += float(np.trapezoid(np.log1p(np.abs(c.values) ** 2), c.lam)) / np.pi
    if spectrum.discrete is not None:
        total += 4.0 * float(np.sum(spectrum.discrete.eigenvalues.imag))
    return total
