"""Regenerate the packaged example datasets in src/heraldcal/data.

Run from the repository root: ``python3 scripts/make_datasets.py``.
"""

from pathlib import Path

import numpy as np

from heraldcal.io import load_config, write_counts, write_scan, write_table
from heraldcal.jsa import deduce_sigma0_from_scan, synthetic_scan
from heraldcal.records import CountRecord
from heraldcal.series import SERIES_HEADER
from heraldcal.simulator import SourceCoefficients, expected_records
from heraldcal.spectral import FilterSpec, detuning_from_wavelength, width_nm_to_angular
from heraldcal.uncertainty import UncertaintyInputs, infer_raman_ratio

DATA = Path(__file__).resolve().parents[1] / "src" / "heraldcal" / "data"

GATES = 774_000_000  # 10 min at 1.29 MHz
ETA_TI = 0.1
ETA_DI = 0.3
S1_PRIME = 83.5
RAMAN_TO_PAIR = 1.9  # at the 0.18 mW operating point
P_OP = 0.18
POWERS = [0.06, 0.09, 0.12, 0.15, 0.18]
DARK = 2e-5

REPLICA_INI = """\
# Replica dataset: Gaussian filters, 0.18 mW operating point.
[pump]
center_wavelength_nm = 1544.0
sigma_nm = 0.18
average_power_mw = 0.18
repetition_rate_hz = 41.28e6
pulse_duration_ps = 10

[fiber]
length_m = 300
gamma_per_w_km = 2
zero_dispersion_wavelength_nm = 1544

[signal_filter]
center_wavelength_nm = 1550.7
fwhm_nm = 0.6
order = 1

[idler_filter]
center_wavelength_nm = 1537.4
fwhm_nm = 1.02
order = 1

[signal_channel]
transmission_efficiency = 0.1

[idler_channel]
transmission_efficiency = {eta_ti}

[signal_detector]
quantum_efficiency = 0.117
dark_count_prob = {dark}
gate_width_ns = 2.5
effective_gate_width_ns = 0.62
dead_time_us = 10
gate_rate_hz = 1.29e6

[idler_detector]
quantum_efficiency = {eta_di}
dark_count_prob = {dark}
dead_time_us = 10
gate_rate_hz = 1.29e6

[source]
s1_mphotons_per_mw = {s1}
s2_mpairs_per_mw2 = {s2}

[simulation]
xi_s = {xi}
powers_mw = {powers}
raman_powers_mw = {powers}
gates_per_point = {gates}
seed = 1

[analysis]
spectral_mode = analytic
accidentals = computed
xi_s_rel_dev = 0.04
pair_cap_pairs_per_pulse = 0.03

[uncertainty]
eta_t_rel_dev = 0.04
p_ave_rel_dev = 0.02
"""

DEMO_INI = """\
# Closed-loop demo: eta_ds = 0.12, pair rate 0.01 per pulse at the top power.
[signal_channel]
transmission_efficiency = 0.1

[idler_channel]
transmission_efficiency = 0.1

[signal_detector]
quantum_efficiency = 0.12
dark_count_prob = 1.7e-5
afterpulse_prob = 0.005
dead_time_us = 10
gate_rate_hz = 1.29e6

[idler_detector]
quantum_efficiency = 0.5
dark_count_prob = 3e-5
afterpulse_prob = 0.005
dead_time_us = 10
gate_rate_hz = 1.29e6

[source]
s1_mphotons_per_mw = 167
s2_mpairs_per_mw2 = {s2}

[simulation]
xi_s = 0.496
powers_mw = 0.05, 0.075, 0.1, 0.125, 0.15
raman_powers_mw = 0.05, 0.075, 0.1, 0.125, 0.15
gates_per_point = 1000000000
seed = 2024

[analysis]
xi_s = 0.496
accidentals = computed
correct_dead_time = true
correct_afterpulse = true
pair_cap_pairs_per_pulse = 0.03
"""


def _rounded(records):
    out = []
    for r in records:
        acc = None if r.accidentals_measured is None else float(round(r.accidentals_measured))
        out.append(CountRecord(r.p_ave, r.gates, float(round(r.singles_signal)),
                               float(round(r.singles_idler)), float(round(r.coincidences_raw)),
                               acc))
    return out


def replica():
    s1 = S1_PRIME / ETA_DI
    raman_op = ETA_TI * S1_PRIME * P_OP * 1e-3
    r_if_op = raman_op / RAMAN_TO_PAIR
    s2 = r_if_op / (ETA_TI * ETA_DI * P_OP**2 * 1e-3)

    # 0.73 nm (1/e) Gaussian profile centred at 1550.72 nm, scanned with the signal filter
    sig = FilterSpec.from_fwhm_nm(1550.7, 0.6)
    lam = np.round(np.linspace(1549.3, 1552.1, 15), 3)
    scan = synthetic_scan(width_nm_to_angular(0.73, 1550.7), sig, lam, amplitude=3.6e-5,
                          center_detuning=detuning_from_wavelength(1550.72, 1550.7))
    write_scan(DATA / "replica_scan.csv", scan)
    xi = deduce_sigma0_from_scan(scan, sig).xi_s
    text = REPLICA_INI.format(eta_ti=ETA_TI, eta_di=ETA_DI, dark=DARK, s1=repr(s1),
                              s2=repr(s2), xi=f"{xi:.6f}", powers=", ".join(map(str, POWERS)),
                              gates=GATES)
    (DATA / "replica.ini").write_text(text)
    cfg = load_config(DATA / "replica.ini")

    src = cfg.source()
    chans, dets = cfg.channels(), cfg.detectors()
    write_counts(DATA / "replica_counts.csv",
                 _rounded(expected_records(src, xi, chans, dets, POWERS, GATES)))
    write_counts(DATA / "replica_raman.csv",
                 _rounded(expected_records(src.raman_off(), xi, chans, dets, POWERS, GATES)))
    return xi


def raman_table_row():
    """Raman-only sweep for the 0.15 nm idler filter (s1' = 11.93)."""
    src = SourceCoefficients(11.93 / ETA_DI, 0.0, sfwm_enabled=False)
    cfg = load_config(DATA / "replica.ini")
    recs = expected_records(src, 1.0, cfg.channels(), cfg.detectors(),
                            [0.1, 0.15, 0.2, 0.25, 0.3], GATES)
    write_counts(DATA / "raman_0p15nm.csv", _rounded(recs))


def demo():
    s2 = 0.01 / (0.15**2 * 1e-3)
    (DATA / "demo.ini").write_text(DEMO_INI.format(s2=repr(s2)))


def zeta_series():
    base = UncertaintyInputs()
    # (label, signal a, idler a, zeta, delta R_iF / R_iF in percent)
    rows = [
        ("s0.36_i0.66", 0.36, 0.66, 0.058, 8.27),
        ("s0.60_i0.66", 0.60, 0.66, 0.086, 9.75),
        ("s0.60_i0.46", 0.60, 0.46, 0.106, 8.94),
        ("s0.60_i0.27", 0.60, 0.27, 0.115, 7.37),
        ("s0.60_i0.09", 0.60, 0.09, 0.123, 7.85),
    ]
    table = []
    for label, sa, ia, zeta, d_r in rows:
        ratio = infer_raman_ratio(d_r / 100.0, base)
        table.append((label, 1544.0, 0.18, 1550.7, sa, 3, 1537.4, ia, zeta, round(ratio, 4)))
    write_table(DATA / "zeta_series.csv", SERIES_HEADER, table)


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    xi = replica()
    raman_table_row()
    demo()
    zeta_series()
    print(f"replica xi_s = {xi:.5f}")
