"""Parametric filter and pump shapes, and wavelength/frequency conversions.

All widths are stored as 1/e half-widths in angular frequency (rad/s).
Nanometres only appear in the ``*_nm`` constructors and properties.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import (
    check_efficiency,
    check_nonnegative,
    check_positive,
    check_positive_int,
)
from .exceptions import DomainError

SPEED_OF_LIGHT = 299_792_458.0  # m/s
_NM = 1e-9


def width_param_from_fwhm(fwhm, order_m=1):
    """Convert a FWHM into the 1/e half-width ``a`` of ``exp(-(x/a)^(2m))``.

    Works in whatever unit ``fwhm`` is given in.
    """
    fwhm = float(fwhm)
    if not fwhm > 0:
        raise DomainError(f"fwhm must be positive, got {fwhm!r}")
    order_m = check_positive_int(order_m, "order_m")
    return fwhm / (2.0 * math.log(2.0) ** (1.0 / (2 * order_m)))


def fwhm_from_width_param(a, order_m=1):
    order_m = check_positive_int(order_m, "order_m")
    return 2.0 * float(a) * math.log(2.0) ** (1.0 / (2 * order_m))


def detuning_from_wavelength(wavelength_nm, center_nm):
    """Angular-frequency detuning (rad/s) of ``wavelength_nm`` from ``center_nm``.

    Uses the exact ``2*pi*c*(1/lambda - 1/lambda_c)``; accepts arrays.
    """
    lam = np.asarray(wavelength_nm, dtype=float)
    lam_c = float(center_nm)
    if np.any(lam <= 0) or lam_c <= 0:
        raise DomainError("wavelengths must be positive")
    omega = 2.0 * math.pi * SPEED_OF_LIGHT * (1.0 / (lam * _NM) - 1.0 / (lam_c * _NM))
    return omega if omega.ndim else float(omega)


def wavelength_from_detuning(detuning, center_nm):
    """Inverse of :func:`detuning_from_wavelength`; returns nm."""
    omega = np.asarray(detuning, dtype=float)
    lam_c = check_positive(center_nm, "center_nm")
    inv = 1.0 / (lam_c * _NM) + omega / (2.0 * math.pi * SPEED_OF_LIGHT)
    if np.any(inv <= 0):
        raise DomainError("detuning maps to a non-positive wavelength")
    lam = 1.0 / inv / _NM
    return lam if lam.ndim else float(lam)


def width_nm_to_angular(width_nm, center_nm):
    """Map a small spectral width from nm to rad/s at ``center_nm`` (|d omega/d lambda|)."""
    return 2.0 * math.pi * SPEED_OF_LIGHT * float(width_nm) * _NM / (float(center_nm) * _NM) ** 2


def width_angular_to_nm(width, center_nm):
    return float(width) * (float(center_nm) * _NM) ** 2 / (2.0 * math.pi * SPEED_OF_LIGHT) / _NM


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian (``order_m=1``) or super-Gaussian passband.

    Transmittance is ``peak_transmittance * exp(-(omega / width_param_a)**(2*order_m))``
    with ``omega`` the detuning from the filter centre in rad/s.
    """

    center_wavelength: float  # nm
    width_param_a: float  # rad/s, 1/e half-width
    order_m: int = 1
    peak_transmittance: float = 1.0

    def __post_init__(self):
        check_positive(self.center_wavelength, "center_wavelength")
        check_positive(self.width_param_a, "width_param_a")
        check_positive_int(self.order_m, "order_m")
        check_efficiency(self.peak_transmittance, "peak_transmittance")

    @classmethod
    def from_nm(cls, center_nm, a_nm, order_m=1, peak_transmittance=1.0):
        return cls(center_nm, width_nm_to_angular(a_nm, center_nm), order_m, peak_transmittance)

    @classmethod
    def from_fwhm_nm(cls, center_nm, fwhm_nm, order_m=1, peak_transmittance=1.0):
        return cls.from_nm(center_nm, width_param_from_fwhm(fwhm_nm, order_m), order_m,
                           peak_transmittance)

    @property
    def fwhm(self):
        """Full width at half maximum in rad/s."""
        return fwhm_from_width_param(self.width_param_a, self.order_m)

    @property
    def width_param_nm(self):
        return width_angular_to_nm(self.width_param_a, self.center_wavelength)

    @property
    def fwhm_nm(self):
        return width_angular_to_nm(self.fwhm, self.center_wavelength)

    def transmittance(self, detuning):
        return filter_transmittance(self, detuning)

    def with_center(self, center_nm):
        """Same passband shifted to a new centre (width kept in rad/s)."""
        return FilterSpec(float(center_nm), self.width_param_a, self.order_m,
                          self.peak_transmittance)


def filter_transmittance(filt, detuning):
    """Evaluate the passband of ``filt`` at ``detuning`` (rad/s); accepts arrays."""
    x = np.asarray(detuning, dtype=float) / filt.width_param_a
    out = filt.peak_transmittance * np.exp(-(x * x) ** filt.order_m)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PumpSpec:
    """Pulsed pump. ``sigma_p`` is the 1/e half-width of the fitted spectrum in rad/s.

    ``peak_power`` (W) is derived from the duty factor unless given explicitly.
    """

    center_wavelength: float  # nm
    sigma_p: float  # rad/s
    average_power: float = 0.3  # mW
    repetition_rate: float = 41e6  # Hz
    pulse_duration: float = 10e-12  # s
    peak_power: float = field(default=None)  # W

    def __post_init__(self):
        check_positive(self.center_wavelength, "center_wavelength")
        check_positive(self.sigma_p, "sigma_p")
        check_positive(self.average_power, "average_power")
        check_positive(self.repetition_rate, "repetition_rate")
        check_positive(self.pulse_duration, "pulse_duration")
        if self.peak_power is None:
            derived = self.average_power * 1e-3 / (self.repetition_rate * self.pulse_duration)
            object.__setattr__(self, "peak_power", derived)
        else:
            check_positive(self.peak_power, "peak_power")

    @classmethod
    def from_nm(cls, center_nm, sigma_nm, **kwargs):
        return cls(center_nm, width_nm_to_angular(sigma_nm, center_nm), **kwargs)

    @property
    def sigma_nm(self):
        return width_angular_to_nm(self.sigma_p, self.center_wavelength)


@dataclass(frozen=True)
class FiberSpec:
    """Nonlinear fibre: length (m), gamma (1/(W m)), dispersion at the pump centre."""

    length: float = 300.0
    gamma: float = 2e-3
    zero_dispersion_wavelength: float = 1544.0  # nm
    k2: float = 0.0  # s^2/m
    k3: float = 1.2e-40  # s^3/m

    def __post_init__(self):
        check_positive(self.length, "length")
        check_nonnegative(self.gamma, "gamma")
        check_positive(self.zero_dispersion_wavelength, "zero_dispersion_wavelength")
        for name in ("k2", "k3"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
