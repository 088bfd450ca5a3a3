"""Seeded Monte Carlo of gated photon counting with a pulsed pair source.

Each gate carries a Poisson number of photon pairs, independent Poisson
Raman photons in each channel and Bernoulli dark clicks. Rather than
visiting every gate, the simulator draws the positions of gates holding at
least one raw click (geometric gaps) and then the click pattern of those
gates from its exact conditional distribution. Dead time and afterpulsing
are applied per detector afterwards.

Coefficient convention: ``SourceCoefficients.s1``/``s2`` are *generated*
rates before any channel or detector loss. The pipeline's normalised Raman
coefficient is ``s1' = eta_di * s1`` and its fitted quadratic coefficient
is ``eta_ti * eta_di * s2``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math

import numpy as np
from numba import njit

from ._validation import (
    check_efficiency,
    check_nonnegative,
    check_positive,
    check_probability,
)
from .exceptions import DomainError
from .records import CountRecord
from .spectral import FilterSpec

MIN_GATES = 10_000


@dataclass(frozen=True)
class DetectorSpec:
    """Gated InGaAs/InP detector. Gate widths in ns, dead time in us."""

    quantum_efficiency: float
    dark_count_prob: float = 0.0
    afterpulse_prob: float = 0.0
    gate_width: float = 2.5
    effective_gate_width: float = None
    dead_time: float = 10.0
    gate_rate: float = 1.29e6

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise DomainError("quantum_efficiency must lie in [0, 1]")
        check_probability(self.dark_count_prob, "dark_count_prob")
        check_probability(self.afterpulse_prob, "afterpulse_prob")
        check_positive(self.gate_width, "gate_width")
        if self.effective_gate_width is None:
            object.__setattr__(self, "effective_gate_width", self.gate_width)
        check_positive(self.effective_gate_width, "effective_gate_width")
        if self.effective_gate_width > self.gate_width:
            raise DomainError("effective_gate_width cannot exceed gate_width")
        check_nonnegative(self.dead_time, "dead_time")
        check_positive(self.gate_rate, "gate_rate")

    @property
    def dead_gates(self):
        """Number of gates that fall strictly inside the dead time after a click."""
        span = self.dead_time * 1e-6 * self.gate_rate
        return max(math.ceil(span - 1e-9) - 1, 0)


@dataclass(frozen=True)
class ChannelSpec:
    transmission_efficiency: float
    filter: FilterSpec = None

    def __post_init__(self):
        check_efficiency(self.transmission_efficiency, "transmission_efficiency")


@dataclass(frozen=True)
class SourceCoefficients:
    """Generated Raman (linear) and pair (quadratic) coefficients.

    ``s1`` in 1e-3 photons/pulse/mW for the idler band, ``s1_signal`` for the
    signal band (defaults to ``s1``); ``s2`` in 1e-3 pairs/pulse/mW^2.
    ``sfwm_enabled=False`` models the pump moved out of phase matching.
    """

    s1: float
    s2: float
    sfwm_enabled: bool = True
    s1_signal: float = None

    def __post_init__(self):
        check_nonnegative(self.s1, "s1")
        check_nonnegative(self.s2, "s2")
        if self.s1_signal is None:
            object.__setattr__(self, "s1_signal", self.s1)
        check_nonnegative(self.s1_signal, "s1_signal")

    def pair_rate(self, p_ave):
        return self.s2 * p_ave**2 * 1e-3 if self.sfwm_enabled else 0.0

    def raman_off(self):
        return SourceCoefficients(self.s1, self.s2, False, self.s1_signal)


def _pair(obj, name):
    if isinstance(obj, dict):
        return obj["signal"], obj["idler"]
    if len(obj) != 2:
        raise DomainError(f"{name} needs a signal and an idler entry")
    return obj[0], obj[1]


@dataclass(frozen=True)
class _GateModel:
    """Per-gate rates for one pump power."""

    mu: float  # mean pairs
    a: float  # heralded signal detection probability per pair
    b: float  # idler detection probability per pair
    lam_s: float  # mean detected Raman photons, signal
    lam_i: float
    dark_s: float
    dark_i: float

    @classmethod
    def build(cls, source, xi_s, channels, detectors, p_ave):
        ch_s, ch_i = _pair(channels, "channels")
        det_s, det_i = _pair(detectors, "detectors")
        eta_s = ch_s.transmission_efficiency * det_s.quantum_efficiency
        eta_i = ch_i.transmission_efficiency * det_i.quantum_efficiency
        return cls(
            mu=source.pair_rate(p_ave),
            a=xi_s * eta_s,
            b=eta_i,
            lam_s=source.s1_signal * p_ave * 1e-3 * eta_s,
            lam_i=source.s1 * p_ave * 1e-3 * eta_i,
            dark_s=det_s.dark_count_prob,
            dark_i=det_i.dark_count_prob,
        )

    def log_silent(self):
        """log P(no signal click), log P(no idler click), log P(neither)."""
        ls = -self.lam_s + math.log1p(-self.dark_s)
        li = -self.lam_i + math.log1p(-self.dark_i)
        no_s = ls - self.mu * self.a
        no_i = li - self.mu * self.b
        neither = ls + li - self.mu * (self.a + self.b - self.a * self.b)
        return no_s, no_i, neither

    def click_probabilities(self):
        """Exact (P_s, P_i, P_both) for one gate, ignoring dead time."""
        no_s, no_i, neither = self.log_silent()
        p_s = -math.expm1(no_s)
        p_i = -math.expm1(no_i)
        p_both = 1.0 - math.exp(no_s) - math.exp(no_i) + math.exp(neither)
        return p_s, p_i, p_both


@dataclass(frozen=True)
class ExpectedRates:
    """Closed-form per-gate means (dead time and afterpulsing excluded).

    ``singles_*`` are exact click probabilities including dark counts,
    ``coincidence`` is the true (pair) coincidence ``xi_s eta_ds eta_ts R_iF``
    and ``accidental`` the product of the singles probabilities.
    """

    singles_s: float
    singles_i: float
    coincidence: float
    accidental: float
    R_iF: float  # detected idler clicks from pairs
    raman_i: float  # detected idler Raman photons
    pair_rate: float


def expected_rates(source, xi_s, channels, detectors, p_ave):
    m = _GateModel.build(source, xi_s, channels, detectors, check_nonnegative(p_ave, "p_ave"))
    p_s, p_i, _ = m.click_probabilities()
    r_if = m.mu * m.b
    return ExpectedRates(
        singles_s=p_s,
        singles_i=p_i,
        coincidence=m.a * r_if,
        accidental=p_s * p_i,
        R_iF=r_if,
        raman_i=m.lam_i,
        pair_rate=m.mu,
    )


def expected_records(source, xi_s, channels, detectors, powers, gates):
    """Noiseless records built from first-order (linear) rates.

    Singles are ``dark + Raman + pairs`` and raw coincidences are the true
    coincidences plus the singles product, so the pipeline recovers its inputs
    exactly. Counts are expected values and need not be integers.
    """
    records = []
    for p in powers:
        m = _GateModel.build(source, xi_s, channels, detectors, p)
        ps = m.dark_s + m.lam_s + m.mu * m.a
        pi = m.dark_i + m.lam_i + m.mu * m.b
        cc = m.mu * m.a * m.b + ps * pi
        records.append(CountRecord(float(p), float(gates), gates * ps, gates * pi, gates * cc,
                                   gates * ps * pi))
    return records


def _event_gates(n_gates, p_any, rng):
    """Indices of gates with at least one raw click (a Bernoulli process)."""
    if p_any <= 0:
        return np.empty(0, dtype=np.int64)
    if p_any >= 1:
        return np.arange(n_gates, dtype=np.int64)
    mean = n_gates * p_any
    chunks = []
    last = -1
    while True:
        size = int(mean + 6 * math.sqrt(mean) + 16)
        gaps = rng.geometric(p_any, size=size)
        pos = last + np.cumsum(gaps)
        chunks.append(pos)
        last = int(pos[-1])
        if last >= n_gates:
            break
    pos = np.concatenate(chunks)
    return pos[pos < n_gates]


@njit(cache=True)
def _dead_time_kernel(raw, n_gates, step, ap_prob, uniforms):
    """Greedy non-paralysable dead time with single-gate afterpulsing.

    Returns the accepted gate indices and the number of uniforms used, or -1
    when ``uniforms`` ran out.
    """
    out = np.empty(2 * raw.size + 16, np.int64)
    k = 0
    i = 0
    n = raw.size
    next_live = 0
    pending = -1
    used = 0
    while True:
        if pending >= 0 and (i >= n or pending <= raw[i]):
            if i < n and raw[i] == pending:
                i += 1
            t = pending
            pending = -1
        elif i < n:
            t = raw[i]
            i += 1
            if t < next_live:
                continue
        else:
            break
        if k >= out.size:
            return out[:k], -1
        out[k] = t
        k += 1
        next_live = t + step
        if ap_prob > 0.0:
            if used >= uniforms.size:
                return out[:k], -1
            hit = uniforms[used] < ap_prob
            used += 1
            if hit and next_live < n_gates:
                pending = next_live
    return out[:k], used


def _gate_detector(raw, n_gates, dead_gates, ap_prob, seed):
    """Apply dead time and afterpulsing to the raw click gates of one detector."""
    if dead_gates == 0 and ap_prob == 0:
        return raw
    size = raw.size + 1024
    while True:
        rng = np.random.default_rng(seed)
        uniforms = rng.random(size) if ap_prob > 0 else np.empty(0)
        accepted, used = _dead_time_kernel(raw, n_gates, dead_gates + 1, ap_prob, uniforms)
        if used >= 0:
            return accepted
        size *= 4


def _count_common(a, b):
    """Number of common elements of two sorted, duplicate-free int arrays."""
    if a.size == 0 or b.size == 0:
        return 0
    idx = np.searchsorted(b, a)
    idx[idx == b.size] = b.size - 1
    return int(np.count_nonzero(b[idx] == a))


def simulate_point(source, xi_s, channels, detectors, p_ave, gates, seed, index=0):
    """Simulate one power point; the stream depends only on ``(seed, index)``."""
    det_s, det_i = _pair(detectors, "detectors")
    m = _GateModel.build(source, xi_s, channels, detectors, p_ave)
    ss = np.random.SeedSequence([int(seed), int(index)])
    ev_seed, ap_s_seed, ap_i_seed = ss.spawn(3)
    rng = np.random.default_rng(ev_seed)

    no_s, no_i, neither = m.log_silent()
    p_none = math.exp(neither)
    p_any = -math.expm1(neither)
    p_s_only = math.exp(no_i) - p_none
    p_i_only = math.exp(no_s) - p_none
    pos = _event_gates(gates, p_any, rng)
    # category of each event gate: 0 signal only, 1 idler only, 2 both
    if pos.size and p_any > 0:
        probs = np.array([p_s_only, p_i_only, p_any - p_s_only - p_i_only]) / p_any
        probs = np.clip(probs, 0.0, None)
        cat = rng.choice(3, size=pos.size, p=probs / probs.sum())
    else:
        cat = np.empty(0, dtype=np.int64)
    raw_s = pos[cat != 1]
    raw_i = pos[cat != 0]

    acc_s = _gate_detector(raw_s, gates, det_s.dead_gates, det_s.afterpulse_prob, ap_s_seed)
    acc_i = _gate_detector(raw_i, gates, det_i.dead_gates, det_i.afterpulse_prob, ap_i_seed)
    coinc = _count_common(acc_s, acc_i)
    # accidentals estimated from signal/idler clicks one gate apart
    adjacent = _count_common(acc_s + 1, acc_i)
    return CountRecord(float(p_ave), int(gates), int(acc_s.size), int(acc_i.size), int(coinc),
                       int(adjacent))


def _simulate_star(args):
    return simulate_point(*args)


def simulate_power_sweep(source, xi_s, channels, detectors, powers, gates_per_point, seed,
                         n_jobs=1):
    """Simulate a pump-power sweep; one :class:`CountRecord` per power.

    Each point draws from its own stream derived from ``(seed, point_index)``
    so the output does not depend on ``n_jobs``.
    """
    if isinstance(gates_per_point, bool) or int(gates_per_point) != gates_per_point:
        raise DomainError("gates_per_point must be an integer")
    gates = int(gates_per_point)
    if gates < MIN_GATES:
        raise DomainError(f"gates_per_point must be at least {MIN_GATES}, got {gates}")
    if not 0.0 < xi_s <= 1.0:
        raise DomainError("xi_s must lie in (0, 1]")
    powers = [float(p) for p in powers]
    if not powers or any(p <= 0 for p in powers):
        raise DomainError("powers must be a non-empty list of positive values")
    jobs = [(source, xi_s, channels, detectors, p, gates, seed, k) for k, p in enumerate(powers)]
    if n_jobs == 1 or len(jobs) == 1:
        return [_simulate_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_simulate_star, jobs))
