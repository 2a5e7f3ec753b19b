import numpy as np
import pytest
from scipy.special import gamma

from nfdmsim.core import (
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


def sampled(fn, lo, hi, dt, units="normalized"):
    n = int(round((hi - lo) / dt))
    t = lo + dt * (np.arange(n) + 0.5)
    return ComplexEnvelope(fn(t), dt, t0=t[0], units=units)


def test_power_scale_value():
    nmap = NormalizationMap()
    assert np.isclose(nmap.p_norm_w, 21.3e-27 / 1.3e-21, rtol=1e-12)
    assert abs(nmap.p_norm_w - 16e-6) / 16e-6 < 0.03


def test_length_scale_and_distance_map():
    nmap = NormalizationMap()
    assert np.isclose(nmap.l_norm_m, 1e-18 / (21.3e-27), rtol=1e-12)
    assert np.isclose(nmap.zeta(2.0 * nmap.l_norm_m), 1.0, rtol=1e-12)
    assert nmap.zeta(0.0) == 0.0


def test_path_averaged_map():
    nmap = NormalizationMap()
    eff = nmap.path_averaged(0.25)
    assert np.isclose(eff.p_norm_w, 4.0 * nmap.p_norm_w, rtol=1e-12)
    with pytest.raises(ValueError):
        nmap.path_averaged(0.0)
    with pytest.raises(ValueError):
        nmap.path_averaged(1.5)


def test_soliton_energy():
    env = sampled(lambda t: 2.0 / np.cosh(2.0 * t), -10.0, 10.0, 1e-3)
    assert abs(signal_energy(env) - 4.0) < 1e-6


def test_normalization_round_trip():
    rng = np.random.default_rng(0)
    nmap = NormalizationMap()
    samples = rng.normal(size=256) + 1j * rng.normal(size=256)
    phys = ComplexEnvelope(samples * 1e-3, dt=9.77e-12, t0=-5e-9, units="physical")
    norm = normalize(phys, nmap)
    assert norm.units == "normalized"
    np.testing.assert_allclose(
        norm.samples, np.conj(phys.samples) / np.sqrt(nmap.p_norm_w), rtol=1e-14
    )
    back = denormalize(norm, nmap)
    np.testing.assert_allclose(back.samples, phys.samples, rtol=1e-13)
    assert np.isclose(back.dt, phys.dt, rtol=1e-13)
    assert np.isclose(back.t0, phys.t0, rtol=1e-13)
    # energy maps by the power scale times the time scale
    ratio = signal_energy(phys) / (nmap.p_norm_w * nmap.t0_si)
    assert np.isclose(signal_energy(norm), ratio, rtol=1e-12)


def test_normalize_direction_guards():
    nmap = NormalizationMap()
    norm = ComplexEnvelope(np.ones(8), 0.1, units="normalized")
    phys = ComplexEnvelope(np.ones(8), 1e-11, units="physical")
    with pytest.raises(ValueError):
        normalize(norm, nmap)
    with pytest.raises(ValueError):
        denormalize(phys, nmap)


def test_power_scale_maps_to_unit_amplitude():
    nmap = NormalizationMap()
    phys = ComplexEnvelope(
        np.full(16, np.sqrt(nmap.p_norm_w)), 1e-11, units="physical"
    )
    norm = normalize(phys, nmap)
    np.testing.assert_allclose(norm.samples, np.ones(16), rtol=1e-14)
    assert np.isclose(average_power(norm), 1.0, rtol=1e-13)


def test_spectrum_energy_discrete():
    assert spectrum_energy(empty_spectrum()) == 0.0
    one = NonlinearSpectrum(discrete=DiscreteSpectrum(np.array([0.5j])))
    assert np.isclose(spectrum_energy(one), 2.0, rtol=1e-14)
    pair = NonlinearSpectrum(discrete=DiscreteSpectrum(np.array([1.0j, 1.5j])))
    assert np.isclose(spectrum_energy(pair), 10.0, rtol=1e-14)


def test_spectrum_energy_continuous_trace():
    # |q_c| of A sech(t) from the closed-form |a|; total energy is 2 A^2
    A = 0.4
    lam = np.linspace(-20.0, 20.0, 2048)
    z = 0.5 - 1j * lam
    a = gamma(z) ** 2 / (gamma(z + A) * gamma(z - A))
    mags = np.sqrt(np.maximum(1.0 / np.abs(a) ** 2 - 1.0, 0.0))
    spec = NonlinearSpectrum(continuous=ContinuousSpectrum(lam, mags))
    assert abs(spectrum_energy(spec) - 2.0 * A * A) < 1e-4


def test_spectrum_energy_tail_warning():
    lam = np.linspace(-4.0, 4.0, 64)
    spec = NonlinearSpectrum(continuous=ContinuousSpectrum(lam, np.full(64, 0.5)))
    with pytest.warns(UserWarning, match="tails"):
        spectrum_energy(spec)


def test_envelope_accessors():
    env = ComplexEnvelope(np.arange(4, dtype=complex), 0.5, t0=-1.0)
    np.testing.assert_allclose(env.t, [-1.0, -0.5, 0.0, 0.5])
    assert env.n == 4
    assert np.isclose(env.duration, 2.0)
    env2 = env.with_samples(np.ones(4, dtype=complex))
    assert env2.dt == env.dt and env2.t0 == env.t0
    with pytest.raises(ValueError):
        env.samples[0] = 1.0


def test_envelope_validation():
    with pytest.raises(ValueError):
        ComplexEnvelope(np.array([], dtype=complex), 0.1)
    with pytest.raises(ValueError):
        ComplexEnvelope(np.array([np.nan + 0j]), 0.1)
    with pytest.raises(ValueError):
        ComplexEnvelope(np.ones(4), 0.0)
    with pytest.raises(ValueError):
        ComplexEnvelope(np.ones(4), 0.1, units="furlongs")
    with pytest.raises(ValueError):
        ComplexEnvelope(np.ones((2, 2)), 0.1)


def test_normalization_map_validation():
    with pytest.raises(ValueError):
        NormalizationMap(beta2=0.0)
    with pytest.raises(ValueError):
        NormalizationMap(beta2=21.3)
    with pytest.raises(ValueError):
        NormalizationMap(gamma=-1.0)
    with pytest.raises(ValueError):
        NormalizationMap(t0=0.0)


def test_continuous_spectrum_validation():
    lam = np.linspace(-1, 1, 16)
    with pytest.raises(ValueError):
        ContinuousSpectrum(lam, np.ones(8))
    with pytest.raises(ValueError):
        ContinuousSpectrum(lam[::-1].copy(), np.ones(16))
    bad = lam.copy()
    bad[3] += 0.05
    with pytest.raises(ValueError):
        ContinuousSpectrum(bad, np.ones(16))
    with pytest.raises(ValueError):
        ContinuousSpectrum(lam, np.full(16, np.inf))
    spec = ContinuousSpectrum(lam, np.ones(16))
    assert np.isclose(spec.dlam, lam[1] - lam[0])


def test_discrete_spectrum_validation():
    with pytest.raises(ValueError):
        DiscreteSpectrum(np.array([1.0 + 0j]))
    with pytest.raises(ValueError):
        DiscreteSpectrum(np.array([-0.5j]))
    with pytest.raises(ValueError):
        DiscreteSpectrum(np.array([1j, 1j]))
    with pytest.raises(ValueError):
        DiscreteSpectrum(np.array([1j, 1.5j]), np.array([1.0 + 0j]))
    with pytest.raises(ValueError):
        DiscreteSpectrum(np.array([1j]), np.array([0.0 + 0j]))
    two = DiscreteSpectrum(np.array([1j, 1.5j]), np.array([2j, 3j]))
    assert two.n == 2


def test_default_grid():
    grid = make_default_grid()
    assert grid.size == 1024
    assert grid[0] == -56.0 and grid[-1] == 56.0
    assert np.allclose(np.diff(grid), grid[1] - grid[0])
