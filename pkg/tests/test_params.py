import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotopump.errors import ConfigError, InvalidParameterError
from rotopump.params import (
    DEFAULT_CONSTANTS,
    CrystalSpec,
    FieldSpec,
    PhysicalConstants,
    RateSet,
    alpha_coupling,
    alpha_omega,
    density_to_ppm,
    matching_field,
    moment_from_rotor_rate,
    nu0,
    nu1,
    parse_params,
    ppm_to_density,
    r_max_from_density,
    resonant_wavelength,
    rotor_energy_step,
    rotor_rate,
)

# frozen from an independent 30-digit evaluation (mpmath) of the SI-unit expressions
ALPHA_OMEGA_1NM = 326983346.859383
R_MAX_1PPM = 1.10696249712223e-8
B_STAR = 0.0512043706438145


def test_constants_invariants():
    c = DEFAULT_CONSTANTS
    assert c.Delta / (2 * math.pi) == pytest.approx(2.87e9, rel=1e-3)
    with pytest.raises(InvalidParameterError):
        PhysicalConstants(hbar=-1.0)


def test_matching_field():
    # 1e-8 covers the CODATA revision of gamma_e between the oracle and scipy
    assert matching_field() == pytest.approx(B_STAR, rel=1e-8)
    assert matching_field() == pytest.approx(0.0512, abs=1e-4)
    assert matching_field(PhysicalConstants(Delta=0.0)) == 0.0
    doubled = PhysicalConstants(gamma_e=2 * DEFAULT_CONSTANTS.gamma_e)
    assert matching_field(doubled) == pytest.approx(matching_field() / 2, rel=1e-15)


def test_alpha_conventions():
    r = 1e-9
    assert alpha_omega() / r**3 == pytest.approx(ALPHA_OMEGA_1NM, rel=1e-6)
    assert alpha_coupling() == pytest.approx(alpha_omega() * DEFAULT_CONSTANTS.hbar, rel=1e-15)
    assert alpha_omega() / 1e3**3 < 1e-20


def test_nu0_nu1_mixed_convention():
    assert nu0(293.0, matching_field()) == pytest.approx(2.36e-4, rel=0.01)
    assert nu1(293.0, 1e6) == pytest.approx(2.6e-8, rel=0.01)


def test_r_max():
    assert r_max_from_density(3 / (4 * math.pi)) == pytest.approx(1.0, rel=1e-14)
    assert r_max_from_density(1.76e23) == pytest.approx(R_MAX_1PPM, rel=1e-10)
    assert r_max_from_density(1e40) < 1e-13
    for bad in (0.0, -1.0):
        with pytest.raises(InvalidParameterError):
            r_max_from_density(bad)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_ppm_round_trip(ppm):
    assert density_to_ppm(ppm_to_density(ppm)) == pytest.approx(ppm, rel=1e-12)


@given(st.floats(min_value=0.0, max_value=0.2), st.floats(min_value=1e-4, max_value=0.05))
def test_detuning_monotone_and_zero_at_match(b, db):
    f1, f2 = FieldSpec(b), FieldSpec(b + db)
    assert f2.detuning < f1.detuning
    assert f1.omega0 == DEFAULT_CONSTANTS.gamma_e * b


def test_field_round_trip():
    assert FieldSpec.matched().detuning == pytest.approx(0.0, abs=1e-3)
    f = FieldSpec.from_detuning(1.234e6)
    assert f.detuning == pytest.approx(1.234e6, rel=1e-6)


def test_wavelength_conventions():
    w0 = DEFAULT_CONSTANTS.gamma_e * matching_field()
    hz = resonant_wavelength(1.2e4, w0, "hz")
    rad = resonant_wavelength(1.2e4, w0, "rad")
    assert 50e-6 < hz < 60e-6
    assert 7e-6 < rad < 9e-6
    with pytest.raises(InvalidParameterError):
        resonant_wavelength(1.2e4, w0, "cycles")


def test_rotor_helpers():
    j = moment_from_rotor_rate(10.0)
    assert rotor_rate(j) == pytest.approx(10.0, rel=1e-15)
    hbar = DEFAULT_CONSTANTS.hbar
    assert rotor_energy_step(0, j) == pytest.approx(2 * hbar**2 / j, rel=1e-15)
    m = np.arange(-3, 5)
    e = hbar**2 * m**2 / (2 * j)
    assert np.allclose(rotor_energy_step(m[:-2], j), e[2:] - e[:-2], rtol=1e-12, atol=0)


def test_crystal_spec():
    c = CrystalSpec()
    assert c.r_max == pytest.approx(r_max_from_density(c.eta))
    radius = (3 * c.volume / (4 * math.pi)) ** (1 / 3)
    assert c.moment_of_inertia == pytest.approx(0.4 * c.mass * radius**2, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        CrystalSpec(moment_of_inertia=2 * c.moment_of_inertia)
    with pytest.raises(InvalidParameterError):
        CrystalSpec(r_min=1e-6, r_max=1e-7)
    with pytest.raises(InvalidParameterError):
        CrystalSpec(geometry="free")
    assert CrystalSpec(geometry="free", moment_of_inertia=1e-30).moment_of_inertia == 1e-30


def test_rate_set():
    r = RateSet(gamma_d=2e5)
    assert r.gamma_p1 == 2e5
    assert r.with_(gamma_o=3.0).gamma_o == 3.0
    with pytest.raises(InvalidParameterError):
        RateSet(gamma_o=-1.0)
    with pytest.raises(InvalidParameterError):
        RateSet(gamma_l=math.inf)


def test_parse_params():
    text = """
    # comment
    gamma_d_hz = 5e5   # inline
    eta_ppm = 2
    n_trajectories = 50
    flag = yes
    name = hz
    """
    p = parse_params(text)
    assert p["gamma_d_hz"] == 5e5
    assert p["eta_m3"] == pytest.approx(2 * 1.76e23)
    assert "eta_ppm" not in p
    assert p["n_trajectories"] == 50 and isinstance(p["n_trajectories"], int)
    assert p["flag"] is True and p["name"] == "hz"
    assert parse_params("eta_cm3 = 1e18")["eta_m3"] == pytest.approx(1e24)
    with pytest.raises(ConfigError):
        parse_params("eta_ppm = 1\neta_m3 = 3")
    with pytest.raises(ConfigError):
        parse_params("[section]\na = 1")
    with pytest.raises(ConfigError):
        parse_params("a = 1\na = 2")
