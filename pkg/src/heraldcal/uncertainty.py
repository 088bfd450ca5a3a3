"""First-order error propagation for the heralded efficiency and a Monte Carlo check.

All ``rel_*`` quantities are relative standard deviations (0.04 means 4 %).
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from ._validation import check_nonnegative

# bounded but not propagated (fractions)
SYSTEMATIC_BOUNDS = {
    "timing_drift": 0.005,
    "afterpulsing": 0.005,
    "multi_pair": 0.03,
}


def _quad(*terms):
    return math.sqrt(sum(float(t) ** 2 for t in terms))


@dataclass(frozen=True)
class UncertaintyInputs:
    """Relative deviations of the measured quantities plus the operating point.

    ``n_total``, ``eta_ti``, ``s1_prime``, ``p_ave`` and ``r_if`` carry the
    absolute values needed to weigh the Raman subtraction. ``n_total`` and
    ``r_if`` are per pulse; ``s1_prime`` in 1e-3 photons/pulse/mW; ``p_ave``
    in mW. ``rel_s1_prime=None`` derives it from the Raman-fit inputs.
    """

    rel_eta_ti: float = 0.04
    rel_eta_ts: float = 0.04
    rel_p_ave: float = 0.02
    rel_n_total: float = 0.001
    rel_r_raman: float = 0.001
    rel_cc: float = 0.01
    rel_xi: float = 0.015
    rel_s1_prime: float = None
    n_total: float = 0.0
    eta_ti: float = 0.1
    s1_prime: float = 0.0
    p_ave: float = 1.0
    r_if: float = None
    # informational values for resampling through the full chain
    cc: float = 1.0
    xi_s: float = 1.0
    eta_ts: float = 0.1

    def __post_init__(self):
        for name in ("rel_eta_ti", "rel_eta_ts", "rel_p_ave", "rel_n_total", "rel_r_raman",
                     "rel_cc", "rel_xi"):
            check_nonnegative(getattr(self, name), name)
        if self.r_if is None:
            object.__setattr__(self, "r_if", self.n_total - self.raman_rate)

    @property
    def raman_rate(self):
        """Raman counts per pulse in the idler channel, ``eta_ti * s1' * P * 1e-3``."""
        return self.eta_ti * self.s1_prime * self.p_ave * 1e-3

    @classmethod
    def from_raman_ratio(cls, raman_to_sfwm, r_if=1e-3, **kwargs):
        """Inputs whose Raman/pair ratio in the idler channel is ``raman_to_sfwm``."""
        eta_ti = kwargs.pop("eta_ti", 0.1)
        p_ave = kwargs.pop("p_ave", 0.2)
        raman = raman_to_sfwm * r_if
        s1 = raman / (eta_ti * p_ave * 1e-3)
        return cls(n_total=r_if + raman, eta_ti=eta_ti, s1_prime=s1, p_ave=p_ave, r_if=r_if,
                   **kwargs)


def propagate_s1prime(inputs):
    """Relative deviation of the normalised Raman coefficient."""
    if inputs.rel_s1_prime is not None:
        return float(inputs.rel_s1_prime)
    return _quad(inputs.rel_r_raman, inputs.rel_eta_ti, inputs.rel_p_ave)


def propagate_Rif(inputs):
    """Absolute and relative deviation of the extracted pair rate ``R_iF``.

    Returns ``(delta_r_if, delta_r_if / r_if)``.
    """
    d_nt = inputs.rel_n_total * inputs.n_total
    raman = inputs.raman_rate
    bracket = _quad(inputs.rel_eta_ti, propagate_s1prime(inputs), inputs.rel_p_ave)
    delta = _quad(d_nt, raman * bracket)
    rel = delta / inputs.r_if if inputs.r_if > 0 else math.inf
    return delta, rel


def propagate_qe(rel_cc, rel_xi, rel_r_if, rel_eta_ts):
    """Relative deviation of the deduced efficiency (quadrature sum)."""
    for name, v in (("rel_cc", rel_cc), ("rel_xi", rel_xi), ("rel_r_if", rel_r_if),
                    ("rel_eta_ts", rel_eta_ts)):
        check_nonnegative(v, name)
    return _quad(rel_cc, rel_xi, rel_r_if, rel_eta_ts)


def propagate_inputs(inputs):
    """``(rel_r_if, rel_eta)`` for a full :class:`UncertaintyInputs`."""
    _, rel_r = propagate_Rif(inputs)
    return rel_r, propagate_qe(inputs.rel_cc, inputs.rel_xi, rel_r, inputs.rel_eta_ts)


def mc_resample_oracle(inputs, draws=200_000, seed=0, chain=True):
    """Empirical relative deviation of the efficiency from Gaussian resampling.

    With ``chain=True`` the pair rate is rebuilt from resampled ``N_T``,
    ``eta_ti``, ``s1'`` and ``P``; otherwise ``R_iF`` is resampled directly
    with its propagated deviation. Returns ``std / mean`` of the samples.
    """
    if draws < 10_000:
        raise ValueError("draws must be at least 1e4")
    rng = np.random.default_rng(seed)

    def sample(value, rel):
        return value * (1.0 + rel * rng.standard_normal(draws))

    cc = sample(inputs.cc, inputs.rel_cc)
    xi = sample(inputs.xi_s, inputs.rel_xi)
    eta_ts = sample(inputs.eta_ts, inputs.rel_eta_ts)
    if chain:
        n_t = sample(inputs.n_total, inputs.rel_n_total)
        eta_ti = sample(inputs.eta_ti, inputs.rel_eta_ti)
        s1 = sample(inputs.s1_prime, propagate_s1prime(inputs))
        p = sample(inputs.p_ave, inputs.rel_p_ave)
        r_if = n_t - eta_ti * s1 * p * 1e-3
    else:
        _, rel_r = propagate_Rif(inputs)
        r_if = sample(inputs.r_if, rel_r)
    eta = cc / (xi * r_if * eta_ts)
    mean = float(np.mean(eta))
    if mean == 0:
        return 0.0
    return float(np.std(eta, ddof=1) / abs(mean))


def oracle_divergence(inputs, draws=200_000, seed=0, chain=True):
    """Relative gap between the resampling oracle and :func:`propagate_inputs`."""
    _, formula = propagate_inputs(inputs)
    oracle = mc_resample_oracle(inputs, draws, seed, chain)
    if formula == 0:
        return 0.0 if oracle == 0 else math.inf
    return abs(oracle - formula) / formula


@dataclass
class BudgetRow:
    configuration: str
    rel_r_if: float
    rel_eta: float
    terms: dict = field(default_factory=dict)


@dataclass
class BudgetReport:
    rows: list
    combined_rel_eta: float
    systematic_bounds: dict = field(default_factory=lambda: dict(SYSTEMATIC_BOUNDS))

    def as_table(self):
        return [(r.configuration, r.rel_r_if, r.rel_eta) for r in self.rows]

    def term_rows(self):
        """Long format ``(configuration, term, relative_dev)`` for CSV export."""
        out = []
        for r in self.rows:
            for term, value in r.terms.items():
                out.append((r.configuration, term, value))
        for term, value in self.systematic_bounds.items():
            out.append(("unpropagated", term, value))
        return out


def budget_report(configurations):
    """Budget table over named configurations.

    ``configurations`` maps a label to :class:`UncertaintyInputs`. The combined
    deviation is that of the mean of the per-configuration efficiencies,
    ``sqrt(sum(d_k^2)) / n``.
    """
    rows = []
    for label, inputs in dict(configurations).items():
        rel_r, rel_eta = propagate_inputs(inputs)
        terms = {
            "C_c": inputs.rel_cc,
            "xi_s": inputs.rel_xi,
            "R_iF": rel_r,
            "eta_ts": inputs.rel_eta_ts,
            "s1_prime": propagate_s1prime(inputs),
            "eta_UT": rel_eta,
        }
        rows.append(BudgetRow(str(label), rel_r, rel_eta, terms))
    if not rows:
        raise ValueError("no configurations given")
    combined = _quad(*(r.rel_eta for r in rows)) / len(rows)
    return BudgetReport(rows, combined)


def infer_raman_ratio(rel_r_if, inputs):
    """Raman-to-pair ratio that makes :func:`propagate_Rif` return ``rel_r_if``.

    ``inputs`` supplies the relative deviations; its absolute values are
    ignored. Solved in closed form from the quadratic in the ratio.
    """
    k = _quad(inputs.rel_eta_ti, propagate_s1prime(inputs), inputs.rel_p_ave)
    d = inputs.rel_n_total
    # rel^2 = d^2 (1 + r)^2 + (r k)^2
    a = d * d + k * k
    b = 2 * d * d
    c = d * d - rel_r_if**2
    disc = b * b - 4 * a * c
    if disc < 0:
        raise ValueError("target deviation is below the N_T floor")
    return (-b + math.sqrt(disc)) / (2 * a)


def with_raman_ratio(inputs, ratio, r_if=1e-3):
    """Copy of ``inputs`` re-centred on a given Raman/pair ratio."""
    raman = ratio * r_if
    s1 = raman / (inputs.eta_ti * inputs.p_ave * 1e-3)
    return replace(inputs, n_total=r_if + raman, s1_prime=s1, r_if=r_if)
