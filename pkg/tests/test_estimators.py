import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from heraldcal.estimators import GaussianPeakRegressor, PowerSweepRegressor, ThroughOriginRegressor
from heraldcal.exceptions import FitError


def test_through_origin_exact():
    x = np.array([1.0, 2.0, 3.0])
    reg = ThroughOriginRegressor().fit(x, 2.5 * x)
    assert reg.slope_ == pytest.approx(2.5, rel=1e-12)
    assert reg.predict([4.0])[0] == pytest.approx(10.0)


def test_through_origin_weighted_matches_closed_form():
    rng = np.random.default_rng(0)
    x = np.linspace(1, 5, 8)
    y = 3 * x + rng.normal(0, 0.1, x.size)
    w = 1 / np.linspace(0.05, 0.2, x.size) ** 2
    reg = ThroughOriginRegressor().fit(x, y, sample_weight=w)
    assert reg.slope_ == pytest.approx(np.sum(w * x * y) / np.sum(w * x * x), rel=1e-12)
    assert reg.slope_std_ == pytest.approx(1 / np.sqrt(np.sum(w * x * x)), rel=1e-12)


def test_through_origin_degenerate():
    with pytest.raises(FitError):
        ThroughOriginRegressor().fit(np.zeros(4), np.ones(4))
    with pytest.raises(FitError):
        ThroughOriginRegressor().fit([1.0, 2.0], [1.0, 2.0])


@given(st.floats(0.1, 100), st.floats(1, 1e3))
def test_power_sweep_exact(s1, s2):
    p = np.linspace(0.05, 0.3, 6)
    y = 1e-3 * (0.1 * s1 * p + s2 * p * p)
    reg = PowerSweepRegressor(eta_ti=0.1).fit(p, y)
    assert reg.coef_["s1_prime"] == pytest.approx(s1, rel=1e-8, abs=1e-8)
    assert reg.coef_["s2"] == pytest.approx(s2, rel=1e-8)
    assert reg.predict(p) == pytest.approx(y, rel=1e-8)
    assert reg.sfwm_rate([0.2])[0] == pytest.approx(1e-3 * s2 * 0.04, rel=1e-8)


def test_power_sweep_fixed_s1():
    p = np.linspace(0.05, 0.3, 5)
    y = 1e-3 * (0.1 * 80 * p + 300 * p * p)
    reg = PowerSweepRegressor(eta_ti=0.1, s1_prime=80).fit(p, y)
    assert list(reg.coef_) == ["s2"]
    assert reg.coef_["s2"] == pytest.approx(300, rel=1e-10)


def test_power_sweep_linear_data_has_null_s2():
    rng = np.random.default_rng(3)
    p = np.linspace(0.05, 0.3, 8)
    y = 1e-3 * 0.1 * 80 * p * (1 + rng.normal(0, 1e-3, p.size))
    res = PowerSweepRegressor(eta_ti=0.1).fit(p, y).result_
    assert abs(res["s2"]) < 3 * res.stderr("s2")


def test_power_sweep_rank_deficient():
    with pytest.raises(FitError):
        PowerSweepRegressor().fit(np.full(5, 0.2), np.ones(5))


def test_power_sweep_too_few_points():
    with pytest.raises(FitError):
        PowerSweepRegressor().fit([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])


def test_covariance_symmetric_positive():
    rng = np.random.default_rng(1)
    p = np.linspace(0.05, 0.3, 8)
    y = 1e-3 * (8 * p + 300 * p * p) * (1 + rng.normal(0, 1e-2, p.size))
    cov = PowerSweepRegressor(eta_ti=0.1).fit(p, y).covariance_
    assert np.allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) > 0)


@given(st.floats(-2, 2), st.floats(0.5, 3))
def test_gaussian_peak_exact(center, width):
    x = np.linspace(-8, 8, 41)
    y = 2.0 * np.exp(-((x - center) / width) ** 2)
    reg = GaussianPeakRegressor().fit(x, y)
    assert reg.width_ == pytest.approx(width, rel=1e-6)
    assert reg.center_ == pytest.approx(center, abs=1e-6)


def test_gaussian_peak_flat_fails():
    with pytest.raises(FitError):
        GaussianPeakRegressor().fit(np.linspace(-5, 5, 11), np.ones(11))


@pytest.mark.parametrize("est", [ThroughOriginRegressor(), PowerSweepRegressor(eta_ti=0.2),
                                 GaussianPeakRegressor(x_scale=2.0)])
def test_sklearn_protocol(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    assert twin is not est
