import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from heraldcal.exceptions import ConvergenceError, DomainError, FitError
from heraldcal.jsa import (
    ConditionalSpectrum,
    SpectralFunctionParams,
    analytic_conditional_width,
    collection_efficiency,
    conditional_spectrum,
    deduce_sigma0_from_scan,
    gaussian_collection_efficiency,
    spectral_function,
    synthetic_scan,
    taylor_delta_k,
    xi_curve,
)
from heraldcal.records import ScanRecord
from heraldcal.spectral import (
    FiberSpec,
    FilterSpec,
    PumpSpec,
    detuning_from_wavelength,
    width_angular_to_nm,
    width_nm_to_angular,
    width_param_from_fwhm,
)

PUMP = PumpSpec.from_nm(1544.0, width_param_from_fwhm(0.3), average_power=0.3)
FIBER = FiberSpec()
OFFSET = detuning_from_wavelength(1550.7, 1544.0)


@pytest.fixture(scope="module")
def params():
    return SpectralFunctionParams(FIBER, PUMP, signal_offset=OFFSET)


def _quad_oracle(p, ws, wi):
    """z integral by adaptive scipy quadrature, independent of the panel rule."""
    sp2 = p.pump.sigma_p**2
    dk = taylor_delta_k(p.fiber.k2, p.fiber.k3)(ws + p.signal_offset, wi - p.signal_offset)
    nl = 2 * p.fiber.gamma * p.pump.peak_power

    def g(z):
        return np.exp(-1j * (dk + nl) * z) / np.sqrt(
            1 - 1j * p.fiber.k2 * sp2 * z - 0.5j * p.fiber.k3 * (ws + wi) * z * sp2)

    kw = dict(epsabs=0, epsrel=1e-12, limit=200)
    val = quad(lambda z: g(z).real, -p.fiber.length, 0, **kw)[0]
    val += 1j * quad(lambda z: g(z).imag, -p.fiber.length, 0, **kw)[0]
    return val * math.exp(-(ws + wi) ** 2 / (4 * sp2))


@pytest.mark.parametrize("ws, wi", [(0.0, 0.0), (3e11, -1e11), (-2e11, 4e11)])
def test_spectral_function_matches_adaptive_quadrature(params, ws, wi):
    assert spectral_function(params, ws, wi) == pytest.approx(_quad_oracle(params, ws, wi),
                                                              rel=1e-9)


def test_simplified_limit():
    fiber = FiberSpec(gamma=0.0, k2=0.0, k3=0.0)
    p = SpectralFunctionParams(fiber, PUMP, delta_k_model=lambda a, b: 0.0 * a)
    ws = np.linspace(-5e11, 5e11, 7)[:, None]
    wi = np.linspace(-4e11, 4e11, 5)[None, :]
    expected = fiber.length * np.exp(-(ws + wi) ** 2 / (4 * PUMP.sigma_p**2))
    assert np.allclose(spectral_function(p, ws, wi), expected, rtol=1e-12, atol=0)
    simple = dataclasses.replace(p, model="simplified")
    assert np.allclose(spectral_function(simple, ws, wi), expected, rtol=1e-15, atol=0)


@given(st.floats(-5e11, 5e11), st.floats(-5e11, 5e11))
def test_exchange_symmetry(ws, wi):
    p = SpectralFunctionParams(FIBER, PUMP, signal_offset=0.0)
    assert abs(spectral_function(p, ws, wi)) == pytest.approx(abs(spectral_function(p, wi, ws)),
                                                              rel=1e-9, abs=1e-12)


def test_step_doubling_self_convergence(params):
    ws = np.linspace(-4e11, 4e11, 9)[:, None]
    wi = np.linspace(-4e11, 4e11, 9)[None, :]
    coarse = spectral_function(params, ws, wi)
    fine = spectral_function(dataclasses.replace(params, quadrature_steps=1024), ws, wi)
    assert np.max(np.abs(coarse - fine)) / np.max(np.abs(fine)) < 1e-6


def test_nonconvergence_raises_with_diagnostics(params):
    p = dataclasses.replace(params, rtol=0.0, max_doublings=2)
    with pytest.raises(ConvergenceError) as err:
        spectral_function(p, 1e11, 1e11)
    assert len(err.value.diagnostics["panels_and_changes"]) == 2


def test_unknown_model():
    with pytest.raises(DomainError):
        SpectralFunctionParams(FIBER, PUMP, model="exact")


def test_analytic_width_limits():
    assert analytic_conditional_width(2.0, 0.0) == pytest.approx(math.sqrt(2) * 2.0)
    assert analytic_conditional_width(0.18, 0.66) == pytest.approx(0.7074, abs=1e-4)


def test_analytic_width_predicts_scan_width():
    sigma_i = width_param_from_fwhm(1.02)
    sigma0 = analytic_conditional_width(0.18, sigma_i)
    assert sigma0 == pytest.approx(0.663, abs=1e-3)
    scan_fwhm = 2 * math.sqrt(math.log(2)) * math.hypot(sigma0, 0.36)
    assert scan_fwhm == pytest.approx(1.26, abs=0.01)
    assert abs(scan_fwhm - 1.22) <= 0.06


@given(st.floats(0.05, 0.5), st.floats(0.02, 1.0))
def test_conditional_spectrum_width_matches_closed_form(sp_nm, si_nm):
    pump = PumpSpec.from_nm(1544.0, sp_nm)
    p = SpectralFunctionParams(FIBER, pump, model="simplified")
    idler = FilterSpec.from_nm(1537.4, si_nm)
    spec = conditional_spectrum(p, idler)
    expected = analytic_conditional_width(pump.sigma_p, idler.width_param_a)
    assert spec.width() == pytest.approx(expected, rel=1e-3)
    assert np.all(spec.density >= 0)


def test_full_model_width_close_to_closed_form(params):
    idler = FilterSpec.from_fwhm_nm(1537.4, 1.02)
    spec = conditional_spectrum(params, idler)
    expected = analytic_conditional_width(PUMP.sigma_p, idler.width_param_a)
    assert spec.width() == pytest.approx(expected, rel=5e-3)
    assert np.all(spec.density >= 0)


def test_narrow_idler_limit():
    p = SpectralFunctionParams(FIBER, PUMP, model="simplified")
    idler = FilterSpec.from_nm(1537.4, 1e-3)
    spec = conditional_spectrum(p, idler)
    assert spec.width() == pytest.approx(math.sqrt(2) * PUMP.sigma_p, rel=1e-3)


def test_analytic_mode_needs_gaussian_idler(params):
    with pytest.raises(DomainError):
        conditional_spectrum(params, FilterSpec.from_nm(1537.4, 0.3, 3), analytic=True)
    spec = conditional_spectrum(params, FilterSpec.from_nm(1537.4, 0.3), analytic=True)
    assert spec.is_analytic


def test_too_narrow_grid_rejected():
    p = SpectralFunctionParams(FIBER, PUMP, model="simplified")
    with pytest.raises(DomainError):
        conditional_spectrum(p, FilterSpec.from_nm(1537.4, 0.3), grid=np.linspace(-1e11, 1e11, 51))


def test_xi_closed_form_at_ratio_seven():
    f = FilterSpec(1550.0, 7.0, 1)
    xi = collection_efficiency(f, ConditionalSpectrum(sigma0=1.0))
    assert xi == pytest.approx(1 / math.sqrt(1 + 1 / 49), abs=1e-6)
    assert xi == pytest.approx(0.98995, abs=1e-5)


@given(st.floats(0.05, 20))
def test_xi_quadrature_equals_closed_form(ratio):
    xi = collection_efficiency(FilterSpec(1550.0, ratio, 1), ConditionalSpectrum(sigma0=1.0))
    assert abs(xi - gaussian_collection_efficiency(ratio, 1.0)) < 1e-6


@pytest.mark.parametrize("m, ratio", [(3, 2.3), (3, 0.7), (2, 1.3)])
def test_xi_super_gaussian_matches_adaptive_quadrature(m, ratio):
    num = quad(lambda w: math.exp(-((w / ratio) ** (2 * m)) - w * w), -np.inf, np.inf,
               epsabs=1e-13)[0]
    oracle = num / math.sqrt(math.pi)
    xi = collection_efficiency(FilterSpec(1550.0, ratio, m), ConditionalSpectrum(sigma0=1.0))
    assert xi == pytest.approx(oracle, abs=1e-6)


def test_xi_super_gaussian_near_unity_at_2p3():
    assert xi_curve(3, [2.3])[0, 1] == pytest.approx(0.99, abs=5e-3)


def test_xi_limits():
    spec = ConditionalSpectrum(sigma0=1.0)
    assert collection_efficiency(FilterSpec(1550.0, 1e4, 1), spec) == pytest.approx(1.0, abs=1e-6)
    assert collection_efficiency(FilterSpec(1550.0, 1e-4, 1), spec) < 1e-3
    assert xi_curve(1, [1.0])[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-6)


def test_xi_off_centre_spectrum():
    f = FilterSpec(1550.0, 1.0, 1)
    shifted = collection_efficiency(f, ConditionalSpectrum(sigma0=1.0, center_detuning=1.0))
    # Gaussian overlap of offset Gaussians
    assert shifted == pytest.approx(math.exp(-0.5) / math.sqrt(2), abs=1e-6)


def test_xi_sampled_spectrum_matches_analytic():
    grid = np.linspace(-8, 8, 4001)
    sampled = ConditionalSpectrum(grid=grid, density=np.exp(-grid**2))
    f = FilterSpec(1550.0, 1.5, 3)
    assert collection_efficiency(f, sampled) == pytest.approx(
        collection_efficiency(f, ConditionalSpectrum(sigma0=1.0)), abs=1e-6)


def test_xi_curve_orders_and_monotone():
    ratios = np.linspace(0.1, 10, 100)
    g = xi_curve(1, ratios)[:, 1]
    s = xi_curve(3, ratios)[:, 1]
    assert np.all(s >= g)
    assert np.all(np.diff(g) > 0) and np.all(np.diff(s) > 0)
    assert np.all((g > 0) & (g <= 1)) and np.all((s > 0) & (s <= 1))


def test_xi_curve_rejects_empty():
    with pytest.raises(DomainError):
        xi_curve(1, [])


def test_conditional_spectrum_validation():
    with pytest.raises(DomainError):
        ConditionalSpectrum()
    with pytest.raises(DomainError):
        ConditionalSpectrum(grid=np.array([0.0, 2.0, 1.0]), density=np.ones(3))
    with pytest.raises(DomainError):
        ConditionalSpectrum(grid=np.arange(3.0), density=np.array([1.0, -1.0, 1.0]))


SIGNAL = FilterSpec.from_fwhm_nm(1550.7, 0.6)
SCAN_NM = np.linspace(1549.3, 1552.1, 15)


def test_scan_example_values():
    s0p = width_nm_to_angular(0.73, 1550.7)
    ded = deduce_sigma0_from_scan(synthetic_scan(s0p, SIGNAL, SCAN_NM, amplitude=3e-5), SIGNAL)
    assert ded.sigma0_prime == pytest.approx(s0p, rel=1e-6)
    assert width_angular_to_nm(ded.sigma0, 1550.7) == pytest.approx(0.635, abs=1e-3)
    # closed-form chain without intermediate rounding
    sigma0 = math.sqrt(0.73**2 - width_param_from_fwhm(0.6) ** 2)
    assert ded.xi_s == pytest.approx(gaussian_collection_efficiency(width_param_from_fwhm(0.6),
                                                                    sigma0), abs=1e-6)
    assert ded.xi_s == pytest.approx(0.493, abs=1e-3)
    assert ded.reference_nm == 1550.7


@given(st.floats(0.5, 1.2), st.floats(-0.2, 0.2))
def test_scan_round_trip(s0p_nm, shift_nm):
    s0p = width_nm_to_angular(s0p_nm, 1550.7)
    sigma_s = SIGNAL.width_param_a
    centre = detuning_from_wavelength(1550.7 + shift_nm, 1550.7)
    scan = synthetic_scan(s0p, SIGNAL, SCAN_NM, center_detuning=centre)
    ded = deduce_sigma0_from_scan(scan, SIGNAL)
    assert ded.sigma0 == pytest.approx(math.sqrt(s0p**2 - sigma_s**2), rel=1e-6)


def test_scan_with_noise_brackets_truth():
    rng = np.random.default_rng(4)
    s0p = width_nm_to_angular(0.73, 1550.7)
    clean = synthetic_scan(s0p, SIGNAL, SCAN_NM, amplitude=1.0)
    err = 0.02
    noisy = [ScanRecord(r.lambda_s0_prime, r.true_coincidence_normalized + err * rng.normal(),
                        1.0, err) for r in clean]
    ded = deduce_sigma0_from_scan(noisy, SIGNAL)
    truth = deduce_sigma0_from_scan(clean, SIGNAL).xi_s
    assert ded.xi_s_std > 0
    assert abs(ded.xi_s - truth) < 4 * ded.xi_s_std


def test_scan_failures():
    flat = [ScanRecord(float(l), 1.0) for l in SCAN_NM]
    with pytest.raises(FitError):
        deduce_sigma0_from_scan(flat, SIGNAL)
    with pytest.raises(FitError):
        deduce_sigma0_from_scan(flat[:4], SIGNAL)
    narrow = synthetic_scan(0.5 * SIGNAL.width_param_a, SIGNAL, SCAN_NM)
    with pytest.raises(FitError):
        deduce_sigma0_from_scan(narrow, SIGNAL)
    with pytest.raises(DomainError):
        deduce_sigma0_from_scan(synthetic_scan(2e11, SIGNAL, SCAN_NM),
                                FilterSpec.from_fwhm_nm(1550.7, 0.6, 3))
