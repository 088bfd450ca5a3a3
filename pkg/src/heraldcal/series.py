"""Efficiency from a series of filter configurations, each with a measured zeta."""

from dataclasses import dataclass
import csv

import numpy as np

from .calibration import qe_from_zeta
from .exceptions import SchemaError
from .jsa import ConditionalSpectrum, analytic_conditional_width, collection_efficiency
from .spectral import FilterSpec, PumpSpec, width_nm_to_angular
from .uncertainty import UncertaintyInputs, budget_report, with_raman_ratio

SERIES_HEADER = ("label", "pump_center_nm", "pump_a_nm", "signal_center_nm", "signal_a_nm",
                 "signal_order", "idler_center_nm", "idler_a_nm", "zeta", "raman_ratio")


@dataclass(frozen=True)
class SeriesConfiguration:
    """One filter configuration; widths are 1/e half-widths in nm.

    ``raman_ratio`` is the idler-channel Raman/pair ratio at the operating
    point, used only for the uncertainty column.
    """

    label: str
    pump_center_nm: float
    pump_a_nm: float
    signal_center_nm: float
    signal_a_nm: float
    signal_order: int
    idler_center_nm: float
    idler_a_nm: float
    zeta: float
    raman_ratio: float = 0.0

    def signal_filter(self):
        return FilterSpec.from_nm(self.signal_center_nm, self.signal_a_nm, self.signal_order)

    def sigma0(self):
        """Heralded-spectrum width (rad/s) for a Gaussian idler filter."""
        sigma_p = PumpSpec.from_nm(self.pump_center_nm, self.pump_a_nm).sigma_p
        sigma_i = width_nm_to_angular(self.idler_a_nm, self.idler_center_nm)
        return analytic_conditional_width(sigma_p, sigma_i)

    def ratio(self):
        return self.signal_filter().width_param_a / self.sigma0()

    def xi_s(self):
        return collection_efficiency(self.signal_filter(), ConditionalSpectrum(sigma0=self.sigma0()))


@dataclass
class SeriesRow:
    label: str
    ratio: float
    xi_s: float
    zeta: float
    eta_ut: float
    rel_eta: float


@dataclass
class SeriesResult:
    rows: list
    eta_mean: float
    eta_mean_rel_dev: float
    budget: object


def read_series(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != SERIES_HEADER:
        raise SchemaError(f"header must be {','.join(SERIES_HEADER)}", line=1)
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(SERIES_HEADER):
            raise SchemaError(f"expected {len(SERIES_HEADER)} fields", line=n)
        try:
            vals = [row[0].strip()] + [float(v) for v in row[1:]]
        except ValueError as exc:
            raise SchemaError(str(exc), line=n) from None
        vals[5] = int(vals[5])
        out.append(SeriesConfiguration(*vals))
    return out


def evaluate_series(configurations, base_inputs=None):
    """Per-configuration ``xi_s`` and ``eta = zeta / xi_s`` plus the series budget.

    ``base_inputs`` supplies the relative deviations; each row is re-centred
    on its own Raman ratio.
    """
    base = base_inputs or UncertaintyInputs()
    rows, per_config = [], {}
    for c in configurations:
        xi = c.xi_s()
        eta = qe_from_zeta(c.zeta, xi)
        inputs = with_raman_ratio(base, c.raman_ratio)
        per_config[c.label] = inputs
        rows.append(SeriesRow(c.label, c.ratio(), xi, c.zeta, eta, float("nan")))
    budget = budget_report(per_config)
    for row, brow in zip(rows, budget.rows):
        row.rel_eta = brow.rel_eta
    eta_mean = float(np.mean([r.eta_ut for r in rows]))
    return SeriesResult(rows, eta_mean, budget.combined_rel_eta, budget)


def zeta_curve(order_m, eta, ratios):
    """Predicted ``zeta = xi_s(ratio) * eta`` for one signal-filter order."""
    spectrum = ConditionalSpectrum(sigma0=1.0)
    return np.array([
        collection_efficiency(FilterSpec(1550.0, float(r), order_m), spectrum) * eta
        for r in ratios])

