import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from heraldcal.exceptions import DomainError
from heraldcal.spectral import (
    SPEED_OF_LIGHT,
    FiberSpec,
    FilterSpec,
    PumpSpec,
    detuning_from_wavelength,
    filter_transmittance,
    fwhm_from_width_param,
    wavelength_from_detuning,
    width_angular_to_nm,
    width_nm_to_angular,
    width_param_from_fwhm,
)


@pytest.mark.parametrize("fwhm, expected", [(0.6, 0.360), (0.15, 0.090)])
def test_width_param_from_gaussian_fwhm(fwhm, expected):
    assert width_param_from_fwhm(fwhm, 1) == pytest.approx(expected, abs=5e-4)


def test_width_param_closed_form():
    assert width_param_from_fwhm(1.0, 3) == pytest.approx(0.5 / math.log(2) ** (1 / 6), rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_width_param_rejects_nonpositive(bad):
    with pytest.raises(DomainError):
        width_param_from_fwhm(bad)


@given(st.floats(1e-3, 1e3), st.integers(1, 6))
def test_width_param_round_trip(fwhm, m):
    assert fwhm_from_width_param(width_param_from_fwhm(fwhm, m), m) == pytest.approx(fwhm,
                                                                                    rel=1e-12)


def test_detuning_zero_at_centre():
    assert detuning_from_wavelength(1550.7, 1550.7) == 0.0


def test_detuning_matches_first_order():
    # longer wavelength means lower frequency
    d = detuning_from_wavelength(1551.06, 1550.70)
    first_order = -2 * math.pi * SPEED_OF_LIGHT * 0.36e-9 / (1550.70e-9) ** 2
    assert d < 0
    assert d == pytest.approx(-2.82e11, rel=5e-3)
    assert d == pytest.approx(first_order, rel=5e-4)


# asymmetry grows as 2*offset/center; filter-scale offsets stay below 1e-3
@given(st.floats(1500, 1600), st.floats(1e-3, 0.5), st.booleans())
def test_detuning_antisymmetric_to_first_order(center, offset, flip):
    offset = -offset if flip else offset
    up = detuning_from_wavelength(center + offset, center)
    down = detuning_from_wavelength(center - offset, center)
    assert abs(up + down) / abs(up) < 1e-3


@given(st.floats(1500, 1600), st.floats(-5, 5))
def test_detuning_round_trip(center, offset):
    lam = center + offset
    back = wavelength_from_detuning(detuning_from_wavelength(lam, center), center)
    assert back == pytest.approx(lam, rel=1e-12)


def test_detuning_accepts_arrays():
    lam = np.array([1550.0, 1550.7, 1551.4])
    d = detuning_from_wavelength(lam, 1550.7)
    assert d.shape == (3,)
    assert d[1] == 0


def test_detuning_rejects_nonpositive_wavelength():
    with pytest.raises(DomainError):
        detuning_from_wavelength(0.0, 1550.0)


@given(st.floats(1e-3, 5.0), st.floats(1500, 1600))
def test_width_conversion_round_trip(w, center):
    assert width_angular_to_nm(width_nm_to_angular(w, center), center) == pytest.approx(w,
                                                                                       rel=1e-12)


@given(st.floats(0.05, 2.0), st.integers(1, 5))
def test_transmittance_peak_and_one_over_e(a_nm, m):
    f = FilterSpec.from_nm(1550.0, a_nm, m)
    assert f.transmittance(0.0) == 1.0
    assert f.transmittance(f.width_param_a) == pytest.approx(math.exp(-1), rel=1e-12)


@given(st.floats(0.05, 2.0), st.integers(1, 5), st.floats(0, 5))
def test_transmittance_even_and_decreasing(a_nm, m, x):
    f = FilterSpec.from_nm(1550.0, a_nm, m)
    w = x * f.width_param_a
    assert f.transmittance(w) == f.transmittance(-w)
    assert f.transmittance(w * 1.1 + 1.0) <= f.transmittance(w)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_numerical_fwhm_matches_conversion(m):
    f = FilterSpec.from_fwhm_nm(1550.0, 0.6, m)
    half = brentq(lambda w: f.transmittance(w) - 0.5, 0.0, 3 * f.width_param_a, xtol=1e-3,
                  rtol=1e-15)
    assert 2 * half == pytest.approx(f.fwhm, rel=1e-9)
    assert f.fwhm_nm == pytest.approx(0.6, rel=1e-12)


def test_peak_transmittance_scales():
    f = FilterSpec.from_nm(1550.0, 0.3, 1, peak_transmittance=0.8)
    assert filter_transmittance(f, 0.0) == pytest.approx(0.8)


@pytest.mark.parametrize("kwargs", [
    dict(center_wavelength=1550.0, width_param_a=-1.0),
    dict(center_wavelength=1550.0, width_param_a=1e11, order_m=0),
    dict(center_wavelength=1550.0, width_param_a=1e11, peak_transmittance=1.5),
    dict(center_wavelength=-1.0, width_param_a=1e11),
])
def test_filter_spec_validation(kwargs):
    with pytest.raises(DomainError):
        FilterSpec(**kwargs)


def test_with_center_keeps_width():
    f = FilterSpec.from_nm(1550.0, 0.3, 3)
    g = f.with_center(1551.0)
    assert g.width_param_a == f.width_param_a and g.order_m == 3
    assert g.center_wavelength == 1551.0


def test_pump_peak_power_from_duty_factor():
    p = PumpSpec.from_nm(1544.0, 0.18, average_power=0.3, repetition_rate=41e6,
                         pulse_duration=10e-12)
    assert p.peak_power == pytest.approx(0.3e-3 / (41e6 * 10e-12))
    assert p.sigma_nm == pytest.approx(0.18, rel=1e-12)


def test_pump_validation():
    with pytest.raises(DomainError):
        PumpSpec(1544.0, -1.0)


def test_fiber_validation():
    with pytest.raises(DomainError):
        FiberSpec(length=0.0)
    with pytest.raises(DomainError):
        FiberSpec(k3=float("nan"))
