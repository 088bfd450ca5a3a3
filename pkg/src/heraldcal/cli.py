"""Command-line entry point: ``heraldcal <command> ...``.

Exit codes: 0 success, 2 usage, 3 input/config schema, 4 numerical failure.
"""

import argparse
from importlib import resources
import math
from pathlib import Path
import sys
import warnings

import numpy as np

from . import io
from .calibration import (
    MULTI_PAIR_CAUTION,
    SystematicDeviations,
    calibrate,
    correct_dead_time,
    fit_raman,
    idler_rate,
    true_coincidence,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    NegativeRateWarning,
    SchemaError,
    UnphysicalResultWarning,
)
from .jsa import (
    SpectralFunctionParams,
    collection_efficiency,
    conditional_spectrum,
    deduce_sigma0_from_scan,
    xi_curve,
)
from .series import evaluate_series, read_series, zeta_curve
from .simulator import expected_rates, simulate_power_sweep
from .spectral import FilterSpec, detuning_from_wavelength, width_angular_to_nm
from .uncertainty import (
    UncertaintyInputs,
    budget_report,
    mc_resample_oracle,
    propagate_inputs,
    propagate_qe,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4
SHAPES = {"gaussian": 1, "supergaussian6": 3}


class UsageError(Exception):
    pass


def data_path(name):
    """Path of a file shipped in the package data directory."""
    return Path(resources.files("heraldcal") / "data" / name)


def _floats(text):
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    return vals


def _emit(out, header, rows):
    if out is None or out == "-":
        sys.stdout.write(io.table_text(header, rows))
    else:
        io.write_table(out, header, rows)


def _print_report(mapping):
    width = max(len(k) for k in mapping)
    for k, v in mapping.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k:<{width}}  {v}")


# ------------------------------------------------------------------- xi-curve

def cmd_xi_curve(args):
    if args.ratios is not None:
        ratios = args.ratios
    else:
        lo, hi, n = args.range
        if not (0 < lo < hi) or n < 2 or not float(n).is_integer():
            raise UsageError("--range needs 0 < start < stop and at least 2 points")
        ratios = np.linspace(lo, hi, int(n))
    if len(ratios) == 0:
        raise UsageError("ratio list is empty")
    if any(r <= 0 for r in ratios):
        raise UsageError("ratios must be positive")
    curve = xi_curve(SHAPES[args.shape], ratios)
    _emit(args.out, io.CURVE_HEADER, curve.tolist())
    if args.emit_plot_data:
        grid = np.linspace(0.1, 10.0, 200)
        for shape, m in SHAPES.items():
            io.write_curve(Path(args.emit_plot_data) / f"xi_curve_{shape}.csv", grid,
                           xi_curve(m, grid)[:, 1])
    return EXIT_OK


# ------------------------------------------------------------------- simulate

def _xi_from_config(cfg):
    """Collection efficiency from the spectral model described by the config."""
    mode = cfg.get("analysis", "spectral_mode", "analytic")
    idler = cfg.filter("idler_filter")
    signal = cfg.filter("signal_filter")
    pump = cfg.pump()
    offset = detuning_from_wavelength(signal.center_wavelength, pump.center_wavelength)
    params = SpectralFunctionParams(cfg.fiber(), pump, signal_offset=offset)
    spectrum = conditional_spectrum(params, idler, analytic=(mode == "analytic"))
    return collection_efficiency(signal, spectrum)


def _simulation_xi(cfg, override):
    if override is not None:
        return override
    xi = cfg.get("simulation", "xi_s")
    return xi if xi is not None else _xi_from_config(cfg)


def _verify(cfg, records, xi_s):
    """z-scores of simulated singles and true coincidences against closed-form means."""
    det_s, det_i = cfg.detectors()
    dead = (det_s.dead_gates, det_i.dead_gates)
    rows, worst = [], 0.0
    for r in records:
        exp = expected_rates(cfg.source(), xi_s, cfg.channels(), cfg.detectors(), r.p_ave)
        c = correct_dead_time(r, dead)
        g = r.gates
        obs_s = c.singles_signal * (1 - det_s.afterpulse_prob)
        obs_i = c.singles_idler * (1 - det_i.afterpulse_prob)
        obs_c = true_coincidence(c) * g
        zs = (obs_s - exp.singles_s * g) / math.sqrt(max(exp.singles_s * g, 1.0))
        zi = (obs_i - exp.singles_i * g) / math.sqrt(max(exp.singles_i * g, 1.0))
        var_c = (exp.coincidence + exp.accidental) * g
        zc = (obs_c - exp.coincidence * g) / math.sqrt(max(var_c, 1.0))
        worst = max(worst, abs(zs), abs(zi), abs(zc))
        rows.append((r.p_ave, zs, zi, zc))
    return rows, worst


def cmd_simulate(args):
    cfg = io.load_config(args.config)
    sim = cfg.sections.get("simulation", {})
    seed = args.seed if args.seed is not None else sim.get("seed", 0)
    gates = args.gates if args.gates is not None else sim.get("gates_per_point")
    if gates is None:
        raise ConfigError("no gate count: set gates_per_point or pass --gates")
    powers = cfg.section("simulation")["powers_mw"]
    xi_s = _simulation_xi(cfg, args.xi)
    source, chans, dets = cfg.source(), cfg.channels(), cfg.detectors()

    records = simulate_power_sweep(source, xi_s, chans, dets, powers, gates, seed, args.jobs)
    raman = None
    if args.raman_out:
        raman_powers = sim.get("raman_powers_mw", powers)
        raman = simulate_power_sweep(source.raman_off(), xi_s, chans, dets, raman_powers, gates,
                                     seed + 1, args.jobs)

    status = EXIT_OK
    if args.verify:
        rows, worst = _verify(cfg, records, xi_s)
        print("p_ave_mw  z_singles_signal  z_singles_idler  z_true_coincidence")
        for p, zs, zi, zc in rows:
            print(f"{p:<8g}  {zs:+16.2f}  {zi:+15.2f}  {zc:+18.2f}")
        ok = worst <= 3.0
        print(f"verify: {'PASS' if ok else 'FAIL'} (max |z| = {worst:.2f}, limit 3)")
        status = EXIT_OK if ok else EXIT_NUMERIC

    io.write_counts(args.out, records)
    if raman is not None:
        io.write_counts(args.raman_out, raman)
    return status


# ------------------------------------------------------------------ calibrate

def _scan_filters(cfg, args):
    if getattr(args, "filter_fwhm_nm", None) is not None:
        if args.filter_center_nm is None:
            raise UsageError("--filter-fwhm-nm needs --filter-center-nm")
        scanned = FilterSpec.from_fwhm_nm(args.filter_center_nm, args.filter_fwhm_nm)
        return scanned, scanned
    if cfg is None:
        raise UsageError("give --config or --filter-center-nm/--filter-fwhm-nm")
    target = cfg.filter("signal_filter")
    scanned = cfg.filter("scan_filter") if cfg.has("scan_filter") else target
    return scanned, target


def _resolve_xi(cfg, args):
    """(xi_s, xi_s_std, scan deduction or None, source label)."""
    if args.xi is not None:
        if not 0 < args.xi <= 1:
            raise UsageError("--xi must lie in (0, 1]")
        return args.xi, 0.0, None, "command line"
    if args.scan:
        scan = io.read_scan(args.scan)
        scanned, target = _scan_filters(cfg, args)
        ded = deduce_sigma0_from_scan(scan, scanned, target)
        return ded.xi_s, ded.xi_s_std, ded, "scan"
    fixed = cfg.get("analysis", "xi_s")
    if fixed is not None:
        return fixed, 0.0, None, "config"
    return _xi_from_config(cfg), 0.0, None, "spectral model"


def _calibration_plot_data(outdir, result, scan_ded, scan_path, eta_ti):
    outdir = Path(outdir)
    rows = []
    for pt in result.points:
        raman = eta_ti * result.s1_prime * pt.p_ave * 1e-3
        pair = 1e-3 * result.s2 * pt.p_ave**2 if math.isfinite(result.s2) else pt.r_if
        rows.append((pt.p_ave, pt.n_total, raman + pair, raman, pair))
    io.write_table(outdir / "power_sweep.csv",
                   ("p_ave_mw", "n_total", "fit_total", "raman_part", "pair_part"), rows)
    rows = [(result.eta_ts * pt.r_if, pt.c_c, pt.c_c_std, result.zeta * result.eta_ts * pt.r_if)
            for pt in result.points]
    io.write_table(outdir / "coincidence_vs_rate.csv",
                   ("eta_ts_r_if", "c_c", "c_c_std", "zeta_fit"), rows)
    if scan_ded is not None:
        scan = io.read_scan(scan_path)
        lam = np.array([r.lambda_s0_prime for r in scan])
        grid = np.linspace(lam.min(), lam.max(), 200)
        fit = scan_ded.fit.predict(detuning_from_wavelength(grid, scan_ded.reference_nm))
        io.write_table(outdir / "scan_profile.csv", ("lambda_nm", "cc_normalized", "fit"),
                       [(l, None, f) for l, f in zip(grid, fit)]
                       + [(r.lambda_s0_prime, r.true_coincidence_normalized, None) for r in scan])


def cmd_calibrate(args):
    cfg = io.load_config(args.config)
    records = io.read_counts(args.counts)
    raman = io.read_counts(args.raman)
    xi_s, xi_std, scan_ded, xi_source = _resolve_xi(cfg, args)

    ch_s, ch_i = cfg.channels()
    det_s, det_i = cfg.detectors()
    analysis = cfg.sections.get("analysis", {})
    unc = cfg.sections.get("uncertainty", {})
    dead = (det_s.dead_gates, det_i.dead_gates) if analysis.get("correct_dead_time") else (0, 0)
    ap = det_i.afterpulse_prob if analysis.get("correct_afterpulse") else 0.0
    rel_t = unc.get("eta_t_rel_dev", 0.04)
    systematics = SystematicDeviations(
        rel_eta_ts=rel_t, rel_eta_ti=rel_t, rel_p_ave=unc.get("p_ave_rel_dev", 0.02),
        rel_xi=analysis.get("xi_s_rel_dev"),
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NegativeRateWarning)
        warnings.simplefilter("always", UnphysicalResultWarning)
        result = calibrate(
            records, raman, xi_s, ch_s.transmission_efficiency, ch_i.transmission_efficiency,
            dark_probs=(det_s.dark_count_prob, det_i.dark_count_prob),
            eta_trigger=det_i.quantum_efficiency if det_i.quantum_efficiency > 0 else 1.0,
            pair_cap=analysis.get("pair_cap_pairs_per_pulse", MULTI_PAIR_CAUTION),
            xi_s_std=xi_std, accidental_mode=analysis.get("accidentals", "computed"),
            accidental_basis=analysis.get("accidental_basis", "raw"),
            dead_gates=dead, afterpulse_idler=ap, systematics=systematics,
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    report = {"xi_s_source": xi_source}
    if scan_ded is not None:
        report["scan_sigma0_prime_nm"] = width_angular_to_nm(scan_ded.sigma0_prime,
                                                              scan_ded.reference_nm)
        report["scan_sigma0_nm"] = width_angular_to_nm(scan_ded.sigma0, scan_ded.reference_nm)
    report.update(result.summary())
    _print_report({
        "eta_UT": result.eta_ut,
        "eta_UT_std": result.eta_ut_std,
        "eta_UT_stat_std": result.eta_ut_stat_std,
        "xi_s": result.xi_s,
        "s1_prime": result.s1_prime,
        "operating_p_ave_mw": result.points[result.operating_index].p_ave,
        "R_iF": result.r_if,
        "C_c": result.c_c,
        "pair_rate": result.pair_rate,
    })
    if result.pair_rate_flag:
        print(f"caution: pair rate {result.pair_rate:.3g} exceeds {MULTI_PAIR_CAUTION}; "
              "multi-pair events bias eta_UT upward", file=sys.stderr)
    if args.out:
        io.write_report(args.out, report)
    if args.points_out:
        io.write_table(args.points_out,
                       ("p_ave_mw", "n_total", "r_if", "r_if_std", "c_c", "c_c_std",
                        "pair_rate", "eta", "eta_std", "within_cap"),
                       [tuple(p.__dict__.values()) for p in result.points])
    if args.budget_out:
        io.write_table(args.budget_out, ("configuration", "term", "relative_dev"),
                       result.budget.term_rows())
    if args.emit_plot_data:
        _calibration_plot_data(args.emit_plot_data, result, scan_ded, args.scan,
                               ch_i.transmission_efficiency)
    return EXIT_OK


# ---------------------------------------------------------- scan-fit / raman-fit

def cmd_scan_fit(args):
    cfg = io.load_config(args.config) if args.config else None
    scan = io.read_scan(args.scan)
    scanned, target = _scan_filters(cfg, args)
    ded = deduce_sigma0_from_scan(scan, scanned, target)
    ref = scanned.center_wavelength
    report = {
        "sigma0_prime_nm": width_angular_to_nm(ded.sigma0_prime, ref),
        "sigma0_nm": width_angular_to_nm(ded.sigma0, ref),
        "sigma0_rad_s": ded.sigma0,
        "center_offset_rad_s": ded.center_detuning,
        "xi_s": ded.xi_s,
        "xi_s_std": ded.xi_s_std,
    }
    _print_report(report)
    if args.out:
        io.write_report(args.out, report)
    return EXIT_OK


def cmd_raman_fit(args):
    cfg = io.load_config(args.config) if args.config else None
    eta_ti = args.eta_ti
    dark = args.dark_prob
    if eta_ti is None:
        if cfg is None:
            raise UsageError("give --eta-ti or --config")
        eta_ti = cfg.section("idler_channel")["transmission_efficiency"]
    if dark is None:
        dark = cfg.detector("idler_detector").dark_count_prob if cfg is not None else 0.0
    records = io.read_counts(args.counts)
    fit = fit_raman(records, eta_ti, dark)
    report = {"s1_prime": fit.s1_prime, "s1_prime_std": fit.s1_prime_std,
              "reduced_chi2": fit.result.reduced_chi2, "n_points": fit.result.n_points}
    _print_report(report)
    if args.out:
        io.write_report(args.out, report)
    if args.emit_plot_data:
        io.write_table(Path(args.emit_plot_data) / "raman_sweep.csv",
                       ("p_ave_mw", "n_total_over_eta_ti_mphotons", "fit"),
                       [(r.p_ave, idler_rate(r, dark) / eta_ti * 1e3, fit.s1_prime * r.p_ave)
                        for r in records])
    return EXIT_OK


# ---------------------------------------------------------------- uncertainty

def _base_inputs(args):
    kw = {}
    for flag, name in (("rel_eta_t", "rel_eta_ti"), ("rel_eta_t", "rel_eta_ts"),
                       ("rel_p", "rel_p_ave"), ("rel_nt", "rel_n_total"),
                       ("rel_rr", "rel_r_raman"), ("rel_cc", "rel_cc"), ("rel_xi", "rel_xi")):
        v = getattr(args, flag)
        if v is not None:
            kw[name] = v / 100.0
    return UncertaintyInputs(**kw)


def cmd_uncertainty(args):
    base = _base_inputs(args)
    if args.series:
        path = args.table or data_path("zeta_series.csv")
        configs = read_series(path)
        budget = budget_report({c.label: UncertaintyInputs.from_raman_ratio(
            c.raman_ratio, **{k: getattr(base, k) for k in (
                "rel_eta_ti", "rel_eta_ts", "rel_p_ave", "rel_n_total", "rel_r_raman",
                "rel_cc", "rel_xi")}) for c in configs})
        print("configuration  dR_iF/R_iF(%)  deta/eta(%)")
        for label, rel_r, rel_eta in budget.as_table():
            print(f"{label:<13}  {100 * rel_r:13.2f}  {100 * rel_eta:11.2f}")
        print(f"mean of {len(budget.rows)}: deta/eta = {100 * budget.combined_rel_eta:.2f}%")
    else:
        if args.rel_r_if is not None:
            rel_r = args.rel_r_if / 100.0
            rel_eta = propagate_qe(base.rel_cc, base.rel_xi, rel_r, base.rel_eta_ts)
            inputs = None
        else:
            ratio = args.raman_ratio if args.raman_ratio is not None else 0.0
            inputs = UncertaintyInputs.from_raman_ratio(ratio, **{k: getattr(base, k) for k in (
                "rel_eta_ti", "rel_eta_ts", "rel_p_ave", "rel_n_total", "rel_r_raman",
                "rel_cc", "rel_xi")})
            rel_r, rel_eta = propagate_inputs(inputs)
        budget = budget_report({"single": inputs}) if inputs is not None else None
        report = {"rel_cc_pct": 100 * base.rel_cc, "rel_xi_pct": 100 * base.rel_xi,
                  "rel_r_if_pct": 100 * rel_r, "rel_eta_ts_pct": 100 * base.rel_eta_ts,
                  "rel_eta_pct": 100 * rel_eta}
        if args.mc_draws and inputs is not None:
            report["rel_eta_mc_pct"] = 100 * mc_resample_oracle(inputs, args.mc_draws, args.seed)
        _print_report(report)
        if args.report:
            io.write_report(args.report, report)
    if args.out and budget is not None:
        io.write_table(args.out, ("configuration", "term", "relative_dev"), budget.term_rows())
    return EXIT_OK


# ----------------------------------------------------------------------- zeta

def cmd_zeta(args):
    configs = read_series(args.table or data_path("zeta_series.csv"))
    res = evaluate_series(configs)
    header = ("label", "ratio", "xi_s", "zeta", "eta_ut", "rel_eta")
    rows = [(r.label, r.ratio, r.xi_s, r.zeta, r.eta_ut, r.rel_eta) for r in res.rows]
    _emit(args.out, header, rows)
    print(f"mean eta_UT = {res.eta_mean:.4f} +/- {res.eta_mean * res.eta_mean_rel_dev:.4f}",
          file=sys.stderr)
    if args.emit_plot_data:
        out = Path(args.emit_plot_data)
        grid = np.linspace(0.2, 3.0, 120)
        io.write_table(out / "zeta_vs_ratio.csv", ("ratio", "zeta_model", "zeta_measured"),
                       [(x, z, None) for x, z in zip(grid, zeta_curve(3, res.eta_mean, grid))]
                       + [(r.ratio, None, r.zeta) for r in res.rows])
        io.write_table(out / "eta_vs_ratio.csv", ("ratio", "eta_ut", "eta_ut_std"),
                       [(r.ratio, r.eta_ut, r.eta_ut * r.rel_eta) for r in res.rows])
        xs = np.linspace(0.0, 1e-4, 11)
        io.write_table(out / "zeta_lines.csv", ("eta_ts_r_if",) + tuple(r.label for r in res.rows),
                       [(x,) + tuple(r.zeta * x for r in res.rows) for x in xs])
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="heraldcal", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    x = sub.add_parser("xi-curve", help="collection efficiency against sigma_s/sigma_0")
    x.add_argument("--shape", choices=sorted(SHAPES), required=True)
    g = x.add_mutually_exclusive_group()
    g.add_argument("--ratios", type=_floats, help="comma-separated ratios")
    g.add_argument("--range", type=float, nargs=3, metavar=("START", "STOP", "N"),
                   default=(0.1, 10.0, 100))
    x.add_argument("--out", help="output CSV (default stdout)")
    x.add_argument("--emit-plot-data", metavar="DIR")
    x.set_defaults(func=cmd_xi_curve)

    s = sub.add_parser("simulate", help="Monte Carlo power sweep to a counts CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--gates", type=int, help="gates per power point")
    s.add_argument("--xi", type=float, help="collection efficiency override")
    s.add_argument("--out", required=True)
    s.add_argument("--raman-out", help="also simulate the SFWM-free sweep")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--verify", action="store_true",
                   help="compare against closed-form rates (3 sigma)")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="full efficiency calibration")
    c.add_argument("--config", required=True)
    c.add_argument("--counts", required=True)
    c.add_argument("--raman", required=True)
    c.add_argument("--scan")
    c.add_argument("--xi", type=float)
    c.add_argument("--out", help="key,value report CSV")
    c.add_argument("--points-out")
    c.add_argument("--budget-out")
    c.add_argument("--emit-plot-data", metavar="DIR")
    c.set_defaults(func=cmd_calibrate)

    f = sub.add_parser("scan-fit", help="heralded-spectrum width from a filter scan")
    f.add_argument("--scan", required=True)
    f.add_argument("--config")
    f.add_argument("--filter-center-nm", type=float)
    f.add_argument("--filter-fwhm-nm", type=float)
    f.add_argument("--out")
    f.set_defaults(func=cmd_scan_fit)

    r = sub.add_parser("raman-fit", help="normalised Raman coefficient")
    r.add_argument("--counts", required=True)
    r.add_argument("--config")
    r.add_argument("--eta-ti", type=float)
    r.add_argument("--dark-prob", type=float)
    r.add_argument("--out")
    r.add_argument("--emit-plot-data", metavar="DIR")
    r.set_defaults(func=cmd_raman_fit)

    u = sub.add_parser("uncertainty", help="uncertainty budget (deviations in percent)")
    u.add_argument("--rel-cc", type=float)
    u.add_argument("--rel-xi", type=float)
    u.add_argument("--rel-eta-t", type=float)
    u.add_argument("--rel-p", type=float)
    u.add_argument("--rel-nt", type=float)
    u.add_argument("--rel-rr", type=float)
    g = u.add_mutually_exclusive_group()
    g.add_argument("--rel-r-if", type=float, help="pair-rate deviation given directly")
    g.add_argument("--raman-ratio", type=float, help="Raman/pair ratio at the operating point")
    g.add_argument("--series", action="store_true", help="budget over a configuration table")
    u.add_argument("--table")
    u.add_argument("--mc-draws", type=int, default=0)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--out", help="budget CSV (configuration, term, relative_dev)")
    u.add_argument("--report")
    u.set_defaults(func=cmd_uncertainty)

    z = sub.add_parser("zeta", help="efficiency from a table of filter configurations")
    z.add_argument("--table")
    z.add_argument("--out")
    z.add_argument("--emit-plot-data", metavar="DIR")
    z.set_defaults(func=cmd_zeta)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"heraldcal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, ConfigError) as exc:
        print(f"heraldcal: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, ConvergenceError, DomainError, ArithmeticError) as exc:
        print(f"heraldcal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
