import dataclasses
import itertools

import pytest
from hypothesis import given, strategies as st

from heraldcal.uncertainty import (
    SYSTEMATIC_BOUNDS,
    UncertaintyInputs,
    budget_report,
    infer_raman_ratio,
    mc_resample_oracle,
    oracle_divergence,
    propagate_inputs,
    propagate_qe,
    propagate_Rif,
    propagate_s1prime,
    with_raman_ratio,
)

# column pairs (delta R_iF / R_iF, delta eta / eta) in percent, one per filter configuration
DEVIATION_TABLE = [(7.85, 8.84), (7.37, 8.43), (8.94, 9.85), (9.75, 10.58), (8.27, 9.23)]
TABLE_INPUTS = UncertaintyInputs(rel_cc=0.01, rel_xi=0.015)


def test_s1prime_examples():
    zero = UncertaintyInputs(rel_eta_ti=0, rel_p_ave=0, rel_r_raman=0)
    assert propagate_s1prime(zero) == 0.0
    assert propagate_s1prime(UncertaintyInputs(rel_r_raman=0.0)) == pytest.approx(0.0447, abs=1e-4)
    single = UncertaintyInputs(rel_eta_ti=0, rel_p_ave=0, rel_r_raman=0.03)
    assert propagate_s1prime(single) == pytest.approx(0.03)
    assert propagate_s1prime(UncertaintyInputs(rel_s1_prime=0.05)) == 0.05


def test_rif_examples():
    free = UncertaintyInputs(n_total=1e-3, s1_prime=0.0, rel_n_total=0.0)
    assert propagate_Rif(free) == (0.0, 0.0)
    _, rel = propagate_Rif(UncertaintyInputs.from_raman_ratio(1.24))
    assert rel == pytest.approx(0.0785, abs=1e-4)


def test_rif_raman_term_is_linear():
    base = dict(rel_n_total=0.0)
    d1, _ = propagate_Rif(UncertaintyInputs.from_raman_ratio(0.5, **base))
    d2, _ = propagate_Rif(UncertaintyInputs.from_raman_ratio(1.0, **base))
    assert d2 == pytest.approx(2 * d1, rel=1e-12)


def test_qe_examples():
    assert propagate_qe(0, 0, 0, 0) == 0.0
    assert propagate_qe(0.01, 0.015, 0.0785, 0.04) == pytest.approx(0.0899, abs=1e-4)
    assert propagate_qe(0.0, 0.0, 0.05, 0.0) == 0.05
    assert propagate_qe(0.01, 0.04, 0.12, 0.04) == pytest.approx(0.1330, abs=1e-4)


@given(st.lists(st.floats(0, 0.5), min_size=4, max_size=4))
def test_qe_permutation_invariant_and_dominates(terms):
    vals = {propagate_qe(*p) for p in itertools.permutations(terms)}
    assert max(vals) - min(vals) < 1e-15
    assert propagate_qe(*terms) >= max(terms)


FIELDS = ["rel_eta_ti", "rel_eta_ts", "rel_p_ave", "rel_n_total", "rel_r_raman", "rel_cc",
          "rel_xi"]


@given(st.sampled_from(FIELDS), st.floats(0, 0.2), st.floats(1e-4, 0.1), st.floats(0, 3))
def test_monotone_in_every_input(name, start, step, ratio):
    base = UncertaintyInputs.from_raman_ratio(ratio, **{name: start})
    bigger = dataclasses.replace(base, **{name: start + step})
    r0, e0 = propagate_inputs(base)
    r1, e1 = propagate_inputs(bigger)
    assert r1 >= r0 - 1e-15 and e1 >= e0 - 1e-15
    assert propagate_s1prime(bigger) >= propagate_s1prime(base)


def test_oracle_zero_deviation():
    zero = UncertaintyInputs(**{f: 0.0 for f in FIELDS}, n_total=1e-3, s1_prime=2.0, p_ave=0.2)
    assert mc_resample_oracle(zero, draws=10_000) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        mc_resample_oracle(zero, draws=100)


@given(st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 0.1))
def test_oracle_agrees_with_formula_below_ten_percent(cc, xi, nt, ts):
    inputs = UncertaintyInputs(rel_cc=cc, rel_xi=xi, rel_n_total=nt, rel_eta_ts=ts,
                               n_total=1e-3, s1_prime=0.0)
    _, formula = propagate_inputs(inputs)
    oracle = mc_resample_oracle(inputs, draws=200_000, seed=1)
    assert abs(oracle - formula) <= 0.05 * formula + 2e-4


def test_oracle_through_full_chain_at_table_inputs():
    inputs = UncertaintyInputs.from_raman_ratio(1.24, rel_cc=0.01, rel_xi=0.015)
    assert oracle_divergence(inputs, draws=400_000, seed=2) < 0.05


def test_oracle_divergence_reported_for_large_input():
    inputs = UncertaintyInputs.from_raman_ratio(3.0, rel_eta_ti=0.3)
    div = oracle_divergence(inputs, draws=200_000, seed=3)
    assert div > 0.05  # first-order propagation no longer holds


def test_budget_single_configuration_reduces_to_qe():
    inputs = UncertaintyInputs.from_raman_ratio(1.24, rel_cc=0.01, rel_xi=0.015)
    report = budget_report({"only": inputs})
    rel_r, rel_eta = propagate_inputs(inputs)
    assert report.combined_rel_eta == pytest.approx(rel_eta)
    assert report.as_table() == [("only", rel_r, rel_eta)]
    assert report.systematic_bounds == SYSTEMATIC_BOUNDS
    terms = report.term_rows()
    assert ("only", "eta_UT", rel_eta) in terms
    assert ("unpropagated", "multi_pair", 0.03) in terms


def test_budget_rows_reproduce_deviation_table():
    configs = {}
    for k, (d_r, _) in enumerate(DEVIATION_TABLE):
        ratio = infer_raman_ratio(d_r / 100, TABLE_INPUTS)
        configs[f"c{k}"] = with_raman_ratio(TABLE_INPUTS, ratio)
    report = budget_report(configs)
    for row, (d_r, d_eta) in zip(report.rows, DEVIATION_TABLE):
        assert 100 * row.rel_r_if == pytest.approx(d_r, abs=1e-9)
        assert abs(100 * row.rel_eta - d_eta) <= 0.3
    assert 100 * report.combined_rel_eta == pytest.approx(4.0, abs=0.5)


def test_deviation_table_columns_share_a_constant():
    consts = [e * e - r * r for r, e in DEVIATION_TABLE]
    spread = max(consts) - min(consts)
    # 0.3 percentage point on eta near 9 % changes the constant by about 2*9*0.3
    assert spread <= 2 * 9 * 0.3


@given(st.floats(0, 5))
def test_infer_raman_ratio_round_trip(ratio):
    _, rel = propagate_Rif(with_raman_ratio(TABLE_INPUTS, ratio))
    assert infer_raman_ratio(rel, TABLE_INPUTS) == pytest.approx(ratio, rel=1e-9, abs=1e-9)


def test_infer_raman_ratio_below_floor():
    with pytest.raises(ValueError):
        infer_raman_ratio(1e-6, TABLE_INPUTS)


def test_budget_needs_configurations():
    with pytest.raises(ValueError):
        budget_report({})
