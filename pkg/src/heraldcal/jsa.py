"""Two-photon spectral function, conditional spectra and collection efficiency.

Detunings ``omega_s`` / ``omega_i`` are measured from the signal and idler
filter centres, which are assumed energy matched
(``omega_s0 + omega_i0 = 2 * omega_p``), so ``omega_s + omega_i`` is also the
summed detuning from the pump.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._validation import check_nonnegative, check_positive, check_positive_int
from .estimators import GaussianPeakRegressor
from .exceptions import ConvergenceError, DomainError, FitError
from .records import ScanRecord
from .spectral import (
    FiberSpec,
    FilterSpec,
    PumpSpec,
    detuning_from_wavelength,
    filter_transmittance,
)

_GL_ORDER = 4
_EDGE_TOL = 1e-4


def taylor_delta_k(k2, k3):
    """Wave-vector mismatch from the pump-centred Taylor expansion.

    Returns ``f(wt_s, wt_i) = k2 (wt_s^2 + wt_i^2)/2 + k3 (wt_s^3 + wt_i^3)/6``
    where ``wt`` are detunings from the pump centre.
    """

    def delta_k(wt_s, wt_i):
        return 0.5 * k2 * (wt_s**2 + wt_i**2) + k3 * (wt_s**3 + wt_i**3) / 6.0

    return delta_k


@dataclass(frozen=True)
class SpectralFunctionParams:
    """Inputs of the two-photon spectral function.

    ``signal_offset`` is the signal filter centre minus the pump centre
    (rad/s); the idler sits at ``-signal_offset``. ``delta_k_model`` takes
    pump-centred detunings and returns the mismatch in 1/m; ``None`` selects
    :func:`taylor_delta_k` built from the fibre dispersion. ``model`` is
    ``"full"`` for the z-integral or ``"simplified"`` for the
    perfectly-phase-matched, narrow-pump limit ``L * exp(-(Ws+Wi)^2/(4 sp^2))``.
    """

    fiber: FiberSpec
    pump: PumpSpec
    signal_offset: float = 0.0
    delta_k_model: object = None
    quadrature_steps: int = 16
    rtol: float = 1e-7
    max_doublings: int = 10
    model: str = "full"

    def __post_init__(self):
        check_positive_int(self.quadrature_steps, "quadrature_steps", minimum=16)
        if self.model not in ("full", "simplified"):
            raise DomainError(f"unknown model {self.model!r}")
        if self.delta_k_model is None:
            object.__setattr__(self, "delta_k_model", taylor_delta_k(self.fiber.k2, self.fiber.k3))


def _pump_envelope(sum_detuning, sigma_p):
    return np.exp(-(sum_detuning**2) / (4.0 * sigma_p**2))


def _z_integral(params, ws, wi, panels):
    """Composite Gauss-Legendre estimate of the z integral on broadcast grids."""
    L = params.fiber.length
    nodes, weights = leggauss(_GL_ORDER)
    edges = np.linspace(-L, 0.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    z = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wz = (half[:, None] * weights[None, :]).ravel()

    sp2 = params.pump.sigma_p**2
    total = ws + wi
    dk = params.delta_k_model(ws + params.signal_offset, wi - params.signal_offset)
    nl = 2.0 * params.fiber.gamma * params.pump.peak_power
    k2, k3 = params.fiber.k2, params.fiber.k3

    total = np.asarray(total)[..., None]
    dk = np.asarray(dk)[..., None]
    phase = np.exp(-1j * (dk + nl) * z)
    denom = np.sqrt(1.0 - 1j * k2 * sp2 * z - 0.5j * k3 * total * z * sp2)
    return np.sum(wz * phase / denom, axis=-1)


def spectral_function(params, omega_s, omega_i):
    """Complex two-photon amplitude ``F(omega_s, omega_i)``; broadcasts its inputs.

    The z integral uses composite Gauss-Legendre panels, doubled until the
    largest change relative to ``max |F|`` drops below ``params.rtol``.
    """
    ws, wi = np.broadcast_arrays(np.asarray(omega_s, float), np.asarray(omega_i, float))
    envelope = _pump_envelope(ws + wi, params.pump.sigma_p)
    if params.model == "simplified":
        out = params.fiber.length * envelope + 0j
        return out if out.ndim else complex(out)

    panels = params.quadrature_steps
    prev = _z_integral(params, ws, wi, panels)
    history = []
    for _ in range(params.max_doublings):
        panels *= 2
        cur = _z_integral(params, ws, wi, panels)
        scale = np.max(np.abs(cur)) if cur.size else 0.0
        change = float(np.max(np.abs(cur - prev)) / scale) if scale > 0 else 0.0
        history.append((panels, change))
        if change < params.rtol:
            out = cur * envelope
            return out if out.ndim else complex(out)
        prev = cur
    raise ConvergenceError(
        "z quadrature did not converge",
        diagnostics={"panels_and_changes": history, "rtol": params.rtol},
    )


def analytic_conditional_width(sigma_p, sigma_i):
    """Width ``sqrt(2 sigma_p^2 + sigma_i^2)`` of the heralded signal spectrum."""
    check_positive(sigma_p, "sigma_p")
    check_nonnegative(sigma_i, "sigma_i")
    return math.sqrt(2.0 * sigma_p**2 + sigma_i**2)


@dataclass(frozen=True)
class ConditionalSpectrum:
    """Heralded signal spectrum, either a Gaussian of 1/e half-width ``sigma0``
    or a sampled density on a strictly increasing detuning grid."""

    sigma0: float = None
    grid: np.ndarray = field(default=None, repr=False)
    density: np.ndarray = field(default=None, repr=False)
    center_detuning: float = 0.0

    def __post_init__(self):
        if self.sigma0 is not None:
            check_positive(self.sigma0, "sigma0")
            return
        if self.grid is None or self.density is None:
            raise DomainError("need either sigma0 or a sampled grid and density")
        grid = np.asarray(self.grid, float)
        dens = np.asarray(self.density, float)
        if grid.shape != dens.shape or grid.ndim != 1 or grid.size < 3:
            raise DomainError("grid and density must be matching 1-D arrays")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(dens < 0):
            raise DomainError("density must be non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)

    @property
    def is_analytic(self):
        return self.sigma0 is not None

    def evaluate(self, detuning):
        """Unnormalised density at ``detuning`` (peak 1 for the analytic form)."""
        w = np.asarray(detuning, float)
        if self.is_analytic:
            return np.exp(-(((w - self.center_detuning) / self.sigma0) ** 2))
        return np.interp(w, self.grid, self.density, left=0.0, right=0.0)

    def norm(self):
        if self.is_analytic:
            return self.sigma0 * math.sqrt(math.pi)
        return float(np.trapezoid(self.density, self.grid))

    def width(self):
        """Gaussian-equivalent 1/e half-width, ``sqrt(2 * variance)``."""
        if self.is_analytic:
            return self.sigma0
        n = self.norm()
        mean = np.trapezoid(self.grid * self.density, self.grid) / n
        var = np.trapezoid((self.grid - mean) ** 2 * self.density, self.grid) / n
        return float(np.sqrt(2.0 * var))


def _idler_grid(idler_filter, sigma_p):
    a = idler_filter.width_param_a
    step = min(a, sigma_p) / 20.0
    half = 6.0 * a
    n = int(np.clip(2 * math.ceil(half / step) + 1, 201, 4001))
    return np.linspace(-half, half, n)


def conditional_spectrum(params, idler_filter, grid=None, *, analytic=False, chunk=64):
    """Signal spectrum heralded by an idler passing ``idler_filter``.

    With ``analytic=True`` (Gaussian idler filter only) the closed-form
    Gaussian is returned. Otherwise ``integral f(W_i) |F(W_s, W_i)|^2 dW_i``
    is evaluated by the trapezoidal rule for every ``W_s`` in ``grid``.
    """
    sigma_p = params.pump.sigma_p
    if analytic:
        if idler_filter.order_m != 1:
            raise DomainError("the analytic conditional spectrum needs a Gaussian idler filter")
        return ConditionalSpectrum(
            sigma0=analytic_conditional_width(sigma_p, idler_filter.width_param_a))

    if grid is None:
        width = analytic_conditional_width(sigma_p, idler_filter.width_param_a)
        grid = np.linspace(-6.0 * width, 6.0 * width, 301)
    grid = np.asarray(grid, float)
    wi = _idler_grid(idler_filter, sigma_p)
    f_i = filter_transmittance(
        FilterSpec(idler_filter.center_wavelength, idler_filter.width_param_a,
                   idler_filter.order_m, 1.0), wi)

    dens = np.empty_like(grid)
    for start in range(0, grid.size, chunk):
        ws = grid[start:start + chunk, None]
        amp = spectral_function(params, ws, wi[None, :])
        dens[start:start + chunk] = np.trapezoid(f_i * np.abs(amp) ** 2, wi, axis=1)

    peak = dens.max()
    if not peak > 0:
        raise DomainError("conditional spectrum vanishes on the grid")
    if max(dens[0], dens[-1]) > _EDGE_TOL * peak:
        raise DomainError("grid too narrow: density at the edges exceeds 1e-4 of the peak")
    return ConditionalSpectrum(grid=grid, density=np.clip(dens, 0.0, None))


def collection_efficiency(signal_filter, spectrum):
    """Fraction of the heralded spectrum passed by ``signal_filter``.

    The filter's peak transmittance is ignored here (pure spectral overlap;
    channel loss belongs to the transmission efficiency).
    """
    a = signal_filter.width_param_a
    shape = FilterSpec(signal_filter.center_wavelength, a, signal_filter.order_m, 1.0)
    if not spectrum.is_analytic:
        norm = spectrum.norm()
        if not norm > 0:
            raise DomainError("conditional spectrum has zero norm")
        num = np.trapezoid(filter_transmittance(shape, spectrum.grid) * spectrum.density,
                           spectrum.grid)
        return float(num / norm)

    s0, c = spectrum.sigma0, spectrum.center_detuning
    lo, hi = max(-8.0 * a, c - 8.0 * s0), min(8.0 * a, c + 8.0 * s0)
    if hi <= lo:
        return 0.0
    step = min(a, s0) / 40.0
    n = max(int(math.ceil((hi - lo) / step)) + 1, 401)
    w = np.linspace(lo, hi, n)
    num = np.trapezoid(filter_transmittance(shape, w) * spectrum.evaluate(w), w)
    return float(num / spectrum.norm())


def gaussian_collection_efficiency(sigma_s, sigma0):
    """Closed form for a Gaussian filter on a Gaussian spectrum."""
    return 1.0 / math.sqrt(1.0 + (sigma0 / sigma_s) ** 2)


def xi_curve(order_m, ratios):
    """Collection efficiency against ``sigma_s / sigma0`` for one filter order.

    Returns an ``(n, 2)`` array of ``(ratio, xi)`` rows.
    """
    order_m = check_positive_int(order_m, "order_m")
    ratios = np.asarray(ratios, float).ravel()
    if ratios.size == 0 or np.any(ratios <= 0):
        raise DomainError("ratios must be a non-empty list of positive numbers")
    spectrum = ConditionalSpectrum(sigma0=1.0)
    xi = [collection_efficiency(FilterSpec(1550.0, r, order_m), spectrum) for r in ratios]
    return np.column_stack([ratios, xi])


@dataclass(frozen=True)
class ScanDeduction:
    """Outcome of deconvolving a filter-centre scan."""

    sigma0_prime: float  # rad/s
    sigma0: float  # rad/s
    xi_s: float
    xi_s_std: float
    center_detuning: float  # rad/s, scan peak relative to the signal filter centre
    fit: object = field(repr=False, default=None)
    reference_nm: float = None  # scanned filter centre, the detuning origin


def deduce_sigma0_from_scan(scan, signal_filter, target_filter=None):
    """Recover the heralded-spectrum width from a scan of a Gaussian signal filter.

    ``signal_filter`` is the scanned Gaussian (its width is ``sigma_s``; its
    centre is the detuning reference). The collection efficiency is computed
    for ``target_filter`` (defaults to ``signal_filter``) on a Gaussian
    spectrum of the deduced width.
    """
    records = list(scan)
    if len(records) < 5:
        raise FitError(f"need at least 5 scan points, got {len(records)}")
    if signal_filter.order_m != 1:
        raise DomainError("scan deconvolution assumes a Gaussian scanned filter")
    lam = np.array([r.lambda_s0_prime for r in records])
    y = np.array([r.true_coincidence_normalized for r in records])
    x = detuning_from_wavelength(lam, signal_filter.center_wavelength)
    order = np.argsort(x)
    x, y = x[order], y[order]
    weights = None
    if all(r.uncertainty is not None for r in records):
        err = np.array([r.uncertainty for r in records])[order]
        weights = 1.0 / err**2

    sigma_s = signal_filter.width_param_a
    model = GaussianPeakRegressor(x_scale=sigma_s).fit(x, y, sample_weight=weights)
    if model.width_ <= sigma_s:
        raise FitError("fitted scan width does not exceed the scanned filter width")
    sigma0 = math.sqrt(model.width_**2 - sigma_s**2)

    target = signal_filter if target_filter is None else target_filter
    xi = collection_efficiency(target, ConditionalSpectrum(sigma0=sigma0))
    # d xi / d sigma0' by central difference on the closed chain
    h = 1e-6 * model.width_
    s_hi = math.sqrt((model.width_ + h) ** 2 - sigma_s**2)
    s_lo = math.sqrt(max((model.width_ - h) ** 2 - sigma_s**2, 1e-300))
    dxi = (collection_efficiency(target, ConditionalSpectrum(sigma0=s_hi))
           - collection_efficiency(target, ConditionalSpectrum(sigma0=s_lo))) / (2 * h)
    xi_std = abs(dxi) * model.width_std_
    return ScanDeduction(model.width_, sigma0, xi, xi_std, model.center_, model,
                         signal_filter.center_wavelength)


def synthetic_scan(sigma0_prime, signal_filter, wavelengths_nm, *, amplitude=1.0,
                   center_detuning=0.0, eta_ts=1.0):
    """Noiseless scan records from a Gaussian of width ``sigma0_prime`` (rad/s)."""
    lam = np.asarray(wavelengths_nm, float)
    x = detuning_from_wavelength(lam, signal_filter.center_wavelength)
    y = amplitude * np.exp(-(((x - center_detuning) / sigma0_prime) ** 2))
    return [ScanRecord(float(l), float(v), eta_ts) for l, v in zip(lam, y)]
