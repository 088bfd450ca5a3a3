"""scikit-learn compatible regressors used by the calibration chain.

Each estimator takes a single abscissa column (pump power, herald rate,
scan detuning) and follows the usual ``fit``/``predict``/``get_params``
protocol, so they can be cloned, grid-searched or dropped into pipelines.
Weights are inverse variances; with ``sample_weight=None`` all points are
weighted equally and the covariance is rescaled by the reduced chi-square.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import _check_sample_weight, check_is_fitted, check_X_y, check_array

from .exceptions import FitError


@dataclass
class FitResult:
    """Fitted coefficients with their covariance.

    ``units`` maps coefficient names to unit strings for reports.
    """

    coefficients: dict
    covariance: np.ndarray
    reduced_chi2: float
    n_points: int
    units: dict = field(default_factory=dict)

    def stderr(self, name):
        idx = list(self.coefficients).index(name)
        return float(np.sqrt(max(self.covariance[idx, idx], 0.0)))

    def __getitem__(self, name):
        return self.coefficients[name]


def _validate_xy(X, y, min_points):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X, y = check_X_y(X, y, y_numeric=True)
    if X.shape[1] != 1:
        raise ValueError("expected a single abscissa column")
    if X.shape[0] < min_points:
        raise FitError(f"need at least {min_points} points, got {X.shape[0]}")
    return X[:, 0], y


def _validate_x(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return check_array(X)[:, 0]


def weighted_linear_lstsq(design, y, weights, absolute_weights):
    """Weighted linear least squares returning (beta, covariance, reduced chi2)."""
    sw = np.sqrt(weights)
    A = design * sw[:, None]
    b = y * sw
    if np.linalg.matrix_rank(A) < design.shape[1]:
        raise FitError("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(A, b, rcond=None)
    normal = A.T @ A
    cov = np.linalg.inv(normal)
    resid = b - A @ beta
    dof = len(y) - design.shape[1]
    chi2 = float(resid @ resid)
    red = chi2 / dof if dof > 0 else float("nan")
    if not absolute_weights and dof > 0:
        cov = cov * red
    return beta, cov, red


class ThroughOriginRegressor(RegressorMixin, BaseEstimator):
    """Weighted straight-line fit through the origin, ``y = slope * x``."""

    def __init__(self, min_points=3):
        self.min_points = min_points

    def fit(self, X, y, sample_weight=None):
        x, y = _validate_xy(X, y, self.min_points)
        absolute = sample_weight is not None
        w = _check_sample_weight(sample_weight, x)
        if not np.any((x != 0) & (w > 0)):
            raise FitError("abscissa is degenerate (all zero)")
        beta, cov, red = weighted_linear_lstsq(x[:, None], y, w, absolute)
        self.slope_ = float(beta[0])
        self.slope_std_ = float(np.sqrt(cov[0, 0]))
        self.reduced_chi2_ = red
        self.n_points_ = len(x)
        self.result_ = FitResult({"slope": self.slope_}, cov, red, len(x))
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        return self.slope_ * _validate_x(X)


class PowerSweepRegressor(RegressorMixin, BaseEstimator):
    """Fit of detected idler singles against average pump power.

    The model is ``N_T = 1e-3 * (eta_ti * s1_prime * P + s2 * P**2)`` with
    ``N_T`` in photons per gated pulse, ``P`` in mW, ``s1_prime`` in
    1e-3 photons/pulse/mW and ``s2`` in 1e-3 photons/pulse/mW^2. When
    ``s1_prime`` is given only ``s2`` is free.
    """

    def __init__(self, eta_ti=1.0, s1_prime=None, min_points=4):
        self.eta_ti = eta_ti
        self.s1_prime = s1_prime
        self.min_points = min_points

    def fit(self, X, y, sample_weight=None):
        p, y = _validate_xy(X, y, self.min_points)
        absolute = sample_weight is not None
        w = _check_sample_weight(sample_weight, p)
        # work in 1e-3 photons/pulse so coefficients are O(1..100)
        y3 = y * 1e3
        w3 = w * 1e-6
        if self.s1_prime is None:
            design = np.column_stack([self.eta_ti * p, p * p])
            beta, cov, red = weighted_linear_lstsq(design, y3, w3, absolute)
            coefs = {"s1_prime": float(beta[0]), "s2": float(beta[1])}
        else:
            resid = y3 - self.eta_ti * self.s1_prime * p
            beta, cov, red = weighted_linear_lstsq((p * p)[:, None], resid, w3, absolute)
            coefs = {"s2": float(beta[0])}
        self.coef_ = coefs
        self.covariance_ = cov
        self.result_ = FitResult(
            coefs, cov, red, len(p),
            units={"s1_prime": "1e-3 photons/pulse/mW", "s2": "1e-3 photons/pulse/mW^2"},
        )
        return self

    def _s1(self):
        return self.coef_.get("s1_prime", self.s1_prime)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        p = _validate_x(X)
        return 1e-3 * (self.eta_ti * self._s1() * p + self.coef_["s2"] * p * p)

    def sfwm_rate(self, X):
        """Quadratic (pair) part ``1e-3 * s2 * P**2`` of the fitted model."""
        check_is_fitted(self, "coef_")
        p = _validate_x(X)
        return 1e-3 * self.coef_["s2"] * p * p


def _gaussian(x, amplitude, center, width):
    return amplitude * np.exp(-((x - center) / width) ** 2)


class GaussianPeakRegressor(RegressorMixin, BaseEstimator):
    """Nonlinear fit of ``A * exp(-((x - x0) / w)**2)``.

    ``x_scale`` rescales the abscissa internally to keep the optimiser well
    conditioned (detunings are ~1e11 rad/s).
    """

    def __init__(self, x_scale=1.0, max_width_factor=10.0):
        self.x_scale = x_scale
        self.max_width_factor = max_width_factor

    def fit(self, X, y, sample_weight=None):
        x, y = _validate_xy(X, y, 3)
        u = x / self.x_scale
        if np.ptp(y) <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
            raise FitError("data are flat; there is no peak to fit")
        sigma = None
        if sample_weight is not None:
            w = _check_sample_weight(sample_weight, x)
            sigma = 1.0 / np.sqrt(w)
        pos = np.clip(y, 0, None)
        a0 = float(np.max(y))
        c0 = float(np.sum(u * pos) / np.sum(pos)) if np.sum(pos) > 0 else float(u[np.argmax(y)])
        var = float(np.sum(pos * (u - c0) ** 2) / np.sum(pos)) if np.sum(pos) > 0 else 0.0
        w0 = np.sqrt(2 * var) if var > 0 else np.ptp(u) / 4
        try:
            with warnings.catch_warnings():
                # zero residuals (noiseless input) leave the covariance undefined
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(
                    _gaussian, u, y, p0=[a0, c0, w0], sigma=sigma,
                    absolute_sigma=sigma is not None, xtol=1e-14, ftol=1e-14, maxfev=20000,
                )
        except (RuntimeError, ValueError) as exc:
            raise FitError(f"Gaussian fit did not converge: {exc}") from exc
        if not np.all(np.isfinite(pcov)):
            pcov = np.zeros((3, 3))
        amp, cen, wid = popt
        wid = abs(wid)
        span = np.ptp(u)
        if amp <= 0 or wid > self.max_width_factor * span or not (u.min() <= cen <= u.max()):
            raise FitError("fit did not find a peak inside the scanned range")
        scale = np.array([1.0, self.x_scale, self.x_scale])
        self.amplitude_ = float(amp)
        self.center_ = float(cen * self.x_scale)
        self.width_ = float(wid * self.x_scale)
        self.covariance_ = pcov * np.outer(scale, scale)
        resid = (y - _gaussian(u, *popt)) / (1.0 if sigma is None else sigma)
        dof = len(y) - 3
        self.reduced_chi2_ = float(resid @ resid / dof) if dof > 0 else float("nan")
        self.result_ = FitResult(
            {"amplitude": self.amplitude_, "center": self.center_, "width": self.width_},
            self.covariance_, self.reduced_chi2_, len(y),
        )
        return self

    @property
    def width_std_(self):
        check_is_fitted(self, "width_")
        return float(np.sqrt(max(self.covariance_[2, 2], 0.0)))

    def predict(self, X):
        check_is_fitted(self, "width_")
        return _gaussian(_validate_x(X), self.amplitude_, self.center_, self.width_)
