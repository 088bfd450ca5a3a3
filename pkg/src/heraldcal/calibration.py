"""From count records to a heralded detector efficiency.

Rates are per gated pulse, powers in mW, Raman coefficients in
1e-3 photons/pulse/mW. Negative intermediate rates are returned with a
warning instead of being clamped.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative, check_positive, check_probability
from .estimators import PowerSweepRegressor, ThroughOriginRegressor
from .exceptions import DomainError, FitError, NegativeRateWarning, UnphysicalResultWarning
from .records import CountRecord
from .uncertainty import UncertaintyInputs, budget_report, propagate_inputs

MULTI_PAIR_CAUTION = 0.03
ACCIDENTAL_MODES = ("computed", "measured")
ACCIDENTAL_BASES = ("raw", "dark_subtracted")


def _check_gates(record):
    if record.gates <= 0:
        raise DomainError("record has zero gates")


def _dark_pair(dark_probs):
    if dark_probs is None:
        return 0.0, 0.0
    if np.ndim(dark_probs) == 0:
        d = float(dark_probs)
        return d, d
    ds, di = dark_probs
    return check_probability(ds, "dark_s"), check_probability(di, "dark_i")


def live_fraction(click_prob, dead_gates):
    """Fraction of gates a non-paralysable detector is armed, from its measured click rate."""
    check_nonnegative(dead_gates, "dead_gates")
    live = 1.0 - dead_gates * click_prob
    if live <= 0:
        raise DomainError("click rate is too high for the dead-time correction")
    return live


def correct_dead_time(record, dead_gates):
    """Record rescaled to what an always-armed detector pair would have counted.

    ``dead_gates`` is ``(signal, idler)`` gates lost after each click. The
    coincidence correction assumes the two live fractions are independent.
    """
    ds, di = dead_gates if np.ndim(dead_gates) else (dead_gates, dead_gates)
    if ds == 0 and di == 0:
        return record
    _check_gates(record)
    ls = live_fraction(record.singles_signal / record.gates, ds)
    li = live_fraction(record.singles_idler / record.gates, di)
    acc = record.accidentals_measured
    return CountRecord(
        record.p_ave, record.gates,
        record.singles_signal / ls, record.singles_idler / li,
        record.coincidences_raw / (ls * li),
        None if acc is None else acc / (ls * li),
        record.dark_corrected,
    )


def accidental_rate(record, dark_probs=None, mode="computed", basis="raw"):
    """Accidental coincidences per pulse.

    ``mode="computed"`` uses the product of the per-gate singles
    probabilities; ``basis="dark_subtracted"`` removes the dark probabilities
    from both factors first. ``mode="measured"`` uses
    ``record.accidentals_measured``.
    """
    _check_gates(record)
    if mode not in ACCIDENTAL_MODES:
        raise ValueError(f"mode must be one of {ACCIDENTAL_MODES}")
    if mode == "measured":
        if record.accidentals_measured is None:
            raise DomainError("record has no measured accidentals")
        return record.accidentals_measured / record.gates
    if basis not in ACCIDENTAL_BASES:
        raise ValueError(f"basis must be one of {ACCIDENTAL_BASES}")
    p_s = record.singles_signal / record.gates
    p_i = record.singles_idler / record.gates
    if basis == "dark_subtracted" and not record.dark_corrected:
        ds, di = _dark_pair(dark_probs)
        p_s, p_i = p_s - ds, p_i - di
    return p_s * p_i


def true_coincidence(record, dark_probs=None, mode="computed", basis="raw"):
    """Accidental-subtracted coincidence rate ``C_c`` per pulse."""
    acc = accidental_rate(record, dark_probs, mode, basis)
    return record.coincidences_raw / record.gates - acc


def true_coincidence_std(record, mode="computed"):
    """Poisson standard error of :func:`true_coincidence`."""
    _check_gates(record)
    g = record.gates
    if mode == "measured" and record.accidentals_measured is not None:
        var_acc = record.accidentals_measured
    else:
        acc = record.singles_signal * record.singles_idler / g
        inv = sum(1.0 / s for s in (record.singles_signal, record.singles_idler) if s > 0)
        var_acc = acc * acc * inv
    return math.sqrt(record.coincidences_raw + var_acc) / g


def idler_rate(record, dark_prob=0.0, afterpulse_prob=0.0):
    """Dark-subtracted idler singles ``N_T`` per pulse.

    ``afterpulse_prob`` removes the afterpulse share ``(1 - p_ap)`` of the
    clicks before the dark probability is subtracted.
    """
    _check_gates(record)
    check_probability(afterpulse_prob, "afterpulse_prob")
    n = record.singles_idler / record.gates * (1.0 - afterpulse_prob)
    return n if record.dark_corrected else n - dark_prob


@dataclass
class RamanFit:
    s1_prime: float
    s1_prime_std: float
    result: object


def _record_list(records, minimum, what):
    records = list(records)
    if len(records) < minimum:
        raise FitError(f"{what} needs at least {minimum} records, got {len(records)}")
    for r in records:
        _check_gates(r)
    return records


def fit_raman(records, eta_ti, dark_prob=0.0, afterpulse_prob=0.0):
    """Normalised Raman coefficient ``s1'`` from an SFWM-free power sweep."""
    records = _record_list(records, 3, "fit_raman")
    check_positive(eta_ti, "eta_ti")
    p = np.array([r.p_ave for r in records])
    y = np.array([idler_rate(r, dark_prob, afterpulse_prob) for r in records]) / eta_ti * 1e3
    counts = np.array([r.singles_idler for r in records])
    if not np.any(counts > 0):
        raise FitError("all Raman records have zero idler counts")
    gates = np.array([r.gates for r in records])
    sigma = np.sqrt(np.maximum(counts, 1.0)) / gates / eta_ti * 1e3
    reg = ThroughOriginRegressor(min_points=3).fit(p, y, sample_weight=1.0 / sigma**2)
    # scale by the scatter when it exceeds counting noise
    std = reg.slope_std_ * math.sqrt(max(reg.reduced_chi2_, 1.0)) if len(p) > 1 else reg.slope_std_
    reg.result_.units["slope"] = "1e-3 photons/pulse/mW"
    return RamanFit(reg.slope_, std, reg.result_)


def extract_sfwm_rate(record, s1_prime, eta_ti, dark_prob=0.0, afterpulse_prob=0.0):
    """Pair-induced idler rate ``R_iF = N_T - eta_ti * s1' * P * 1e-3``."""
    r_if = idler_rate(record, dark_prob, afterpulse_prob) - eta_ti * s1_prime * record.p_ave * 1e-3
    if r_if < 0:
        warnings.warn(f"negative R_iF={r_if:.3e} at P={record.p_ave} mW", NegativeRateWarning,
                      stacklevel=2)
    return r_if


def fit_power_sweep(records, eta_ti, s1_prime=None, dark_prob=0.0, afterpulse_prob=0.0):
    """Weighted polynomial fit of ``N_T`` against pump power."""
    records = _record_list(records, 4, "fit_power_sweep")
    p = np.array([r.p_ave for r in records])
    y = np.array([idler_rate(r, dark_prob, afterpulse_prob) for r in records])
    var = np.array([max(r.singles_idler, 1.0) / r.gates**2 for r in records])
    reg = PowerSweepRegressor(eta_ti=eta_ti, s1_prime=s1_prime, min_points=4)
    reg.fit(p, y, sample_weight=1.0 / var)
    return reg.result_


def deduce_qe(c_c, xi_s, r_if, eta_ts):
    """Efficiency ``C_c / (xi_s * R_iF * eta_ts)``; warns above 1."""
    check_positive(xi_s, "xi_s")
    check_positive(r_if, "R_iF")
    check_positive(eta_ts, "eta_ts")
    eta = c_c / (xi_s * r_if * eta_ts)
    if eta > 1:
        warnings.warn(f"deduced efficiency {eta:.3f} exceeds 1", UnphysicalResultWarning,
                      stacklevel=2)
    return eta


def fit_zeta(points, sigmas=None):
    """Slope ``zeta`` of ``C_c = zeta * (eta_ts * R_iF)`` and its standard error.

    ``points`` is a sequence of ``(eta_ts * R_iF, C_c)``; ``sigmas`` are the
    standard errors of ``C_c`` (unweighted when omitted).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (x, C_c) pairs")
    w = None if sigmas is None else 1.0 / np.asarray(sigmas, dtype=float) ** 2
    reg = ThroughOriginRegressor(min_points=3).fit(pts[:, 0], pts[:, 1], sample_weight=w)
    return reg.slope_, reg.slope_std_


def qe_from_zeta(zeta, xi_s):
    if not 0.0 < xi_s <= 1.0:
        raise DomainError("xi_s must lie in (0, 1]")
    return zeta / xi_s


@dataclass(frozen=True)
class MultiPairParams:
    """Mean idler photon number and the two end-to-end detection probabilities."""

    n_bar: float
    eta_ts_eta_s0: float
    eta_ti_eta_i0: float

    def __post_init__(self):
        for name in ("n_bar", "eta_ts_eta_s0", "eta_ti_eta_i0"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise DomainError(f"{name} must lie in [0, 1), got {v!r}")


def multipair_ratio(params, eta_ts_eta_s0=None, eta_ti_eta_i0=None):
    """Ratio of the apparent to the true efficiency caused by multi-pair events.

    Accepts a :class:`MultiPairParams` or the three numbers directly.
    """
    if not isinstance(params, MultiPairParams):
        params = MultiPairParams(params, eta_ts_eta_s0, eta_ti_eta_i0)
    n = params.n_bar
    s = params.eta_ts_eta_s0
    i = params.eta_ti_eta_i0
    return (1 + n) / ((1 + n * s) * (1 + n * (s + i - s * i)))


def cw_click_probability(eta, mu, nominal_gate_width, effective_gate_width):
    """Click probability for Poisson light of ``mu`` photons per nominal gate."""
    check_positive(mu, "mu")
    mu_eff = mu * check_positive(effective_gate_width, "effective_gate_width") / check_positive(
        nominal_gate_width, "nominal_gate_width")
    return -math.expm1(-eta * mu_eff)


def cw_reference_qe(mu, nominal_gate_width, effective_gate_width, click_prob):
    """Efficiency from a weak-laser measurement, inverse of :func:`cw_click_probability`."""
    check_positive(mu, "mu")
    if not 0.0 <= click_prob < 1.0:
        raise DomainError("click_prob must lie in [0, 1)")
    mu_eff = mu * check_positive(effective_gate_width, "effective_gate_width") / check_positive(
        nominal_gate_width, "nominal_gate_width")
    return -math.log1p(-click_prob) / mu_eff


@dataclass
class PointResult:
    """Per-power intermediates."""

    p_ave: float
    n_total: float
    r_if: float
    r_if_std: float
    c_c: float
    c_c_std: float
    pair_rate: float
    eta: float
    eta_std: float
    within_cap: bool


@dataclass
class CalibrationResult:
    """Outcome of :func:`calibrate`.

    ``eta_ut`` combines all points within the pair cap through the
    ``C_c`` versus ``eta_ts * R_iF`` slope; ``eta_ut_operating_point`` uses
    the single point with the largest ``C_c`` under the cap.
    """

    eta_ut: float
    eta_ut_stat_std: float
    eta_ut_std: float
    rel_budget: float
    xi_s: float
    xi_s_std: float
    zeta: float
    zeta_std: float
    s1_prime: float
    s1_prime_std: float
    s2: float
    s2_std: float
    eta_ts: float
    eta_ti: float
    operating_index: int
    eta_ut_operating_point: float
    r_if: float
    c_c: float
    pair_rate: float
    pair_rate_flag: bool
    points: list = field(default_factory=list)
    budget: object = None

    def summary(self):
        """Flat ``{name: value}`` report."""
        out = {}
        for k, v in self.__dict__.items():
            if k in ("points", "budget"):
                continue
            out[k] = v
        if self.budget is not None:
            for term, value in self.budget.rows[0].terms.items():
                out[f"rel_dev_{term}"] = value
        return out


@dataclass(frozen=True)
class SystematicDeviations:
    """Relative deviations that counting statistics do not capture."""

    rel_eta_ts: float = 0.04
    rel_eta_ti: float = 0.04
    rel_p_ave: float = 0.02
    rel_xi: float = None  # None: use the supplied xi_s_std


def calibrate(records, raman_records, xi_s, eta_ts, eta_ti, *, dark_probs=None,
              eta_trigger=1.0, pair_cap=MULTI_PAIR_CAUTION, xi_s_std=0.0,
              accidental_mode="computed", accidental_basis="raw", dead_gates=(0, 0),
              afterpulse_idler=0.0, systematics=None):
    """Run the chain Raman fit -> pair rate -> true coincidences -> efficiency.

    ``eta_trigger`` is the idler detector efficiency used only to convert the
    detected pair rate into pairs per pulse for the cap. ``dead_gates`` turns
    on the dead-time correction of the counts and ``afterpulse_idler`` removes
    idler afterpulses from ``N_T``.
    """
    records = [correct_dead_time(r, dead_gates) for r in _record_list(records, 1, "calibrate")]
    raman_records = [correct_dead_time(r, dead_gates) for r in raman_records]
    check_positive(xi_s, "xi_s")
    check_positive(eta_ts, "eta_ts")
    check_positive(eta_ti, "eta_ti")
    check_positive(eta_trigger, "eta_trigger")
    ds, di = _dark_pair(dark_probs)
    sys = systematics or SystematicDeviations()

    ap = afterpulse_idler
    raman = fit_raman(raman_records, eta_ti, di, ap)
    s1, s1_std = raman.s1_prime, raman.s1_prime_std
    if len(records) >= 4:
        sweep = fit_power_sweep(records, eta_ti, s1, di, ap)
        s2, s2_std = sweep["s2"], sweep.stderr("s2")
    else:
        s2 = s2_std = float("nan")

    points = []
    for r in records:
        n_t = idler_rate(r, di, ap)
        r_if = extract_sfwm_rate(r, s1, eta_ti, di, ap)
        raman_part = eta_ti * s1 * r.p_ave * 1e-3
        r_std = math.hypot(math.sqrt(r.singles_idler) / r.gates, raman_part * s1_std / s1)
        c_c = true_coincidence(r, (ds, di), accidental_mode, accidental_basis)
        c_std = true_coincidence_std(r, accidental_mode)
        pair = r_if / (eta_ti * eta_trigger)
        if r_if > 0 and c_c > 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnphysicalResultWarning)
                eta = deduce_qe(c_c, xi_s, r_if, eta_ts)
            eta_std = eta * math.hypot(c_std / c_c, r_std / r_if)
        else:
            eta = eta_std = float("nan")
        points.append(PointResult(r.p_ave, n_t, r_if, r_std, c_c, c_std, pair, eta, eta_std,
                                  pair <= pair_cap))

    usable = [k for k, pt in enumerate(points) if pt.within_cap and pt.r_if > 0]
    if not usable:
        raise FitError("no record has a positive pair rate within the pair cap")
    op = max(usable, key=lambda k: points[k].c_c)
    opp = points[op]

    if len(usable) >= 3:
        xs = [(eta_ts * points[k].r_if, points[k].c_c) for k in usable]
        zeta, zeta_std = fit_zeta(xs, [points[k].c_c_std for k in usable])
    else:
        zeta = opp.c_c / (eta_ts * opp.r_if)
        zeta_std = zeta * opp.c_c_std / opp.c_c
    eta_ut = qe_from_zeta(zeta, min(xi_s, 1.0))
    if eta_ut > 1:
        warnings.warn(f"deduced efficiency {eta_ut:.3f} exceeds 1", UnphysicalResultWarning,
                      stacklevel=2)
    # the Raman-coefficient error is common to every point
    raman_common = eta_ti * s1 * opp.p_ave * 1e-3 * s1_std / s1 / opp.r_if
    rel_stat = math.sqrt((zeta_std / zeta) ** 2 + raman_common**2 + (xi_s_std / xi_s) ** 2)

    rel_xi = sys.rel_xi if sys.rel_xi is not None else xi_s_std / xi_s
    opr = records[op]
    inputs = UncertaintyInputs(
        rel_eta_ti=sys.rel_eta_ti,
        rel_eta_ts=sys.rel_eta_ts,
        rel_p_ave=sys.rel_p_ave,
        rel_n_total=math.sqrt(opr.singles_idler) / opr.gates / opp.n_total,
        rel_r_raman=s1_std / s1,
        rel_cc=zeta_std / zeta,
        rel_xi=rel_xi,
        n_total=opp.n_total,
        eta_ti=eta_ti,
        s1_prime=s1,
        p_ave=opp.p_ave,
        r_if=opp.r_if,
        cc=opp.c_c,
        xi_s=xi_s,
        eta_ts=eta_ts,
    )
    budget = budget_report({f"P={opp.p_ave:g}mW": inputs})
    _, rel_budget = propagate_inputs(inputs)

    return CalibrationResult(
        eta_ut=eta_ut,
        eta_ut_stat_std=eta_ut * rel_stat,
        eta_ut_std=eta_ut * rel_budget,
        rel_budget=rel_budget,
        xi_s=xi_s,
        xi_s_std=xi_s_std,
        zeta=zeta,
        zeta_std=zeta_std,
        s1_prime=s1,
        s1_prime_std=s1_std,
        s2=s2,
        s2_std=s2_std,
        eta_ts=eta_ts,
        eta_ti=eta_ti,
        operating_index=op,
        eta_ut_operating_point=opp.eta,
        r_if=opp.r_if,
        c_c=opp.c_c,
        pair_rate=opp.pair_rate,
        pair_rate_flag=opp.pair_rate > MULTI_PAIR_CAUTION,
        points=points,
        budget=budget,
    )


_COLUMNS = ("p_ave", "gates", "singles_signal", "singles_idler", "coincidences_raw")


def as_records(X):
    """CountRecords from records or an array with columns
    ``p_ave, gates, singles_signal, singles_idler, coincidences_raw[, accidentals]``."""
    if len(X) and isinstance(X[0], CountRecord):
        return list(X)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (5, 6):
        raise ValueError("expected an (n, 5) or (n, 6) count array")
    out = []
    for row in arr:
        acc = float(row[5]) if arr.shape[1] == 6 and np.isfinite(row[5]) else None
        out.append(CountRecord(*map(float, row[:5]), acc))
    return out


class HeraldedEfficiencyCalibrator(BaseEstimator):
    """Estimator wrapper around :func:`calibrate`.

    ``fit(X, raman)`` takes the SFWM sweep and the Raman-only sweep, each as
    records or as a count array (see :func:`as_records`). ``transform``
    returns per-record ``[R_iF, C_c]`` with the fitted Raman coefficient.
    """

    def __init__(self, xi_s=1.0, eta_ts=0.1, eta_ti=0.1, dark_signal=0.0, dark_idler=0.0,
                 eta_trigger=1.0, pair_cap=MULTI_PAIR_CAUTION, accidental_mode="computed",
                 dead_gates_signal=0, dead_gates_idler=0, afterpulse_idler=0.0):
        self.xi_s = xi_s
        self.eta_ts = eta_ts
        self.eta_ti = eta_ti
        self.dark_signal = dark_signal
        self.dark_idler = dark_idler
        self.eta_trigger = eta_trigger
        self.pair_cap = pair_cap
        self.accidental_mode = accidental_mode
        self.dead_gates_signal = dead_gates_signal
        self.dead_gates_idler = dead_gates_idler
        self.afterpulse_idler = afterpulse_idler

    def _dead(self):
        return (self.dead_gates_signal, self.dead_gates_idler)

    def fit(self, X, raman):
        self.result_ = calibrate(
            as_records(X), as_records(raman), self.xi_s, self.eta_ts, self.eta_ti,
            dark_probs=(self.dark_signal, self.dark_idler), eta_trigger=self.eta_trigger,
            pair_cap=self.pair_cap, accidental_mode=self.accidental_mode,
            dead_gates=self._dead(), afterpulse_idler=self.afterpulse_idler,
        )
        self.eta_ut_ = self.result_.eta_ut
        self.s1_prime_ = self.result_.s1_prime
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        out = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NegativeRateWarning)
            for r in as_records(X):
                r = correct_dead_time(r, self._dead())
                out.append([
                    extract_sfwm_rate(r, self.s1_prime_, self.eta_ti, self.dark_idler,
                                      self.afterpulse_idler),
                    true_coincidence(r, (self.dark_signal, self.dark_idler),
                                     self.accidental_mode),
                ])
        return np.array(out)
