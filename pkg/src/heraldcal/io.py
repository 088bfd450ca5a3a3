"""CSV schemas, atomic writes and the sectioned run configuration."""

import configparser
import csv
from dataclasses import dataclass, field
import io
import math
import os
from pathlib import Path
import tempfile

from .exceptions import ConfigError, DomainError, SchemaError
from .records import CountRecord, ScanRecord
from .simulator import ChannelSpec, DetectorSpec, SourceCoefficients
from .spectral import FiberSpec, FilterSpec, PumpSpec, width_param_from_fwhm

COUNTS_HEADER = ("p_ave_mw", "gates", "singles_signal", "singles_idler", "coincidences_raw",
                 "accidentals_measured")
SCAN_HEADER = ("lambda_s0_prime_nm", "cc_normalized", "eta_ts")
SCAN_HEADER_WITH_ERRORS = SCAN_HEADER + ("cc_uncertainty",)
CURVE_HEADER = ("x", "value")


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def table_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, header, rows):
    atomic_write(path, table_text(header, rows))


def _read_rows(path, allowed_headers):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("file is empty", line=1)
    header = tuple(c.strip() for c in rows[0])
    if header not in allowed_headers:
        expected = " or ".join(",".join(h) for h in allowed_headers)
        raise SchemaError(f"header {','.join(header)!r} does not match {expected}", line=1)
    body = []
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"expected {len(header)} fields, got {len(row)}", line=n)
        body.append((n, header, [c.strip() for c in row]))
    if not body:
        raise SchemaError("no data rows", line=len(rows) + 1)
    return body


def _num(text, line, column, optional=False):
    if text == "" and optional:
        return None
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"column {column!r}: {text!r} is not a number", line=line) from None
    if not math.isfinite(v):
        raise SchemaError(f"column {column!r}: value is not finite", line=line)
    return v


def read_counts(path):
    """Count records from a counts CSV; ``accidentals_measured`` may be blank."""
    out = []
    for line, header, row in _read_rows(path, [COUNTS_HEADER]):
        vals = [_num(t, line, c, optional=(c == "accidentals_measured"))
                for t, c in zip(row, header)]
        try:
            out.append(CountRecord(*vals))
        except DomainError as exc:
            raise SchemaError(str(exc), line=line) from None
    return out


def counts_text(records):
    return table_text(COUNTS_HEADER, [
        (r.p_ave, r.gates, r.singles_signal, r.singles_idler, r.coincidences_raw,
         r.accidentals_measured) for r in records])


def write_counts(path, records):
    atomic_write(path, counts_text(records))


def read_scan(path):
    """Scan records; an optional ``cc_uncertainty`` column turns on weighting."""
    out = []
    for line, header, row in _read_rows(path, [SCAN_HEADER, SCAN_HEADER_WITH_ERRORS]):
        vals = [_num(t, line, c) for t, c in zip(row, header)]
        try:
            out.append(ScanRecord(*vals))
        except DomainError as exc:
            raise SchemaError(str(exc), line=line) from None
    return out


def write_scan(path, records):
    with_err = all(r.uncertainty is not None for r in records)
    header = SCAN_HEADER_WITH_ERRORS if with_err else SCAN_HEADER
    rows = []
    for r in records:
        row = [r.lambda_s0_prime, r.true_coincidence_normalized, r.eta_ts_at_point]
        if with_err:
            row.append(r.uncertainty)
        rows.append(row)
    write_table(path, header, rows)


def read_curve(path):
    return [tuple(_num(t, line, c) for t, c in zip(row, header))
            for line, header, row in _read_rows(path, [CURVE_HEADER])]


def write_curve(path, xs, values):
    write_table(path, CURVE_HEADER, zip(xs, values))


def write_report(path, mapping):
    """Flat ``key,value`` report."""
    write_table(path, ("key", "value"), mapping.items())


# ---------------------------------------------------------------- configuration

def _float(v):
    return float(v)


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _bool(v):
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _floats(v):
    items = [x for x in v.replace(";", ",").split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return [float(x) for x in items]


def _choice(*options):
    def parse(v):
        v = v.strip().lower()
        if v not in options:
            raise ValueError(f"{v!r} is not one of {', '.join(options)}")
        return v
    return parse


_FILTER_KEYS = {"center_wavelength_nm": _float, "fwhm_nm": _float, "width_param_nm": _float,
                "order": _int, "peak_transmittance": _float}
_DETECTOR_KEYS = {"quantum_efficiency": _float, "dark_count_prob": _float,
                  "afterpulse_prob": _float, "gate_width_ns": _float,
                  "effective_gate_width_ns": _float, "dead_time_us": _float,
                  "gate_rate_hz": _float}

SCHEMA = {
    "pump": {"center_wavelength_nm": _float, "sigma_nm": _float, "fwhm_nm": _float,
             "average_power_mw": _float, "repetition_rate_hz": _float,
             "pulse_duration_ps": _float},
    "fiber": {"length_m": _float, "gamma_per_w_km": _float,
              "zero_dispersion_wavelength_nm": _float, "k2_ps2_per_km": _float,
              "k3_ps3_per_km": _float},
    "signal_filter": _FILTER_KEYS,
    "idler_filter": _FILTER_KEYS,
    "scan_filter": _FILTER_KEYS,
    "signal_channel": {"transmission_efficiency": _float},
    "idler_channel": {"transmission_efficiency": _float},
    "signal_detector": _DETECTOR_KEYS,
    "idler_detector": _DETECTOR_KEYS,
    "source": {"s1_mphotons_per_mw": _float, "s1_signal_mphotons_per_mw": _float,
               "s2_mpairs_per_mw2": _float},
    "simulation": {"xi_s": _float, "powers_mw": _floats, "raman_powers_mw": _floats,
                   "gates_per_point": _int, "seed": _int},
    "analysis": {"spectral_mode": _choice("analytic", "full"),
                 "accidentals": _choice("computed", "measured"),
                 "accidental_basis": _choice("raw", "dark_subtracted"),
                 "pair_cap_pairs_per_pulse": _float, "xi_s": _float, "xi_s_rel_dev": _float,
                 "correct_dead_time": _bool, "correct_afterpulse": _bool},
    "uncertainty": {"eta_t_rel_dev": _float, "p_ave_rel_dev": _float},
}

REQUIRED = {
    "pump": ("center_wavelength_nm",),
    "signal_filter": ("center_wavelength_nm",),
    "idler_filter": ("center_wavelength_nm",),
    "scan_filter": ("center_wavelength_nm",),
    "signal_channel": ("transmission_efficiency",),
    "idler_channel": ("transmission_efficiency",),
    "signal_detector": ("quantum_efficiency",),
    "idler_detector": ("quantum_efficiency",),
    "source": ("s1_mphotons_per_mw", "s2_mpairs_per_mw2"),
    "simulation": ("powers_mw",),
}


@dataclass
class RunConfig:
    """Parsed configuration: ``sections`` maps section -> {key: typed value}."""

    sections: dict = field(default_factory=dict)
    source_path: str = None

    def has(self, section):
        return section in self.sections

    def section(self, name):
        if name not in self.sections:
            raise ConfigError(f"config has no [{name}] section")
        return self.sections[name]

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    # domain objects -------------------------------------------------------
    def filter(self, name):
        s = self.section(name)
        order = s.get("order", 1)
        if ("fwhm_nm" in s) == ("width_param_nm" in s):
            raise ConfigError(f"[{name}] needs exactly one of fwhm_nm or width_param_nm")
        a_nm = s["width_param_nm"] if "width_param_nm" in s else width_param_from_fwhm(
            s["fwhm_nm"], order)
        return FilterSpec.from_nm(s["center_wavelength_nm"], a_nm, order,
                                  s.get("peak_transmittance", 1.0))

    def pump(self):
        s = self.section("pump")
        if ("sigma_nm" in s) == ("fwhm_nm" in s):
            raise ConfigError("[pump] needs exactly one of sigma_nm or fwhm_nm")
        sigma = s["sigma_nm"] if "sigma_nm" in s else width_param_from_fwhm(s["fwhm_nm"], 1)
        kwargs = {}
        if "average_power_mw" in s:
            kwargs["average_power"] = s["average_power_mw"]
        if "repetition_rate_hz" in s:
            kwargs["repetition_rate"] = s["repetition_rate_hz"]
        if "pulse_duration_ps" in s:
            kwargs["pulse_duration"] = s["pulse_duration_ps"] * 1e-12
        return PumpSpec.from_nm(s["center_wavelength_nm"], sigma, **kwargs)

    def fiber(self):
        s = self.sections.get("fiber", {})
        d = FiberSpec()
        return FiberSpec(
            length=s.get("length_m", d.length),
            gamma=s["gamma_per_w_km"] * 1e-3 if "gamma_per_w_km" in s else d.gamma,
            zero_dispersion_wavelength=s.get("zero_dispersion_wavelength_nm",
                                             d.zero_dispersion_wavelength),
            k2=s["k2_ps2_per_km"] * 1e-27 if "k2_ps2_per_km" in s else d.k2,
            k3=s["k3_ps3_per_km"] * 1e-39 if "k3_ps3_per_km" in s else d.k3,
        )

    def channels(self):
        return (ChannelSpec(self.section("signal_channel")["transmission_efficiency"],
                            self.filter("signal_filter") if self.has("signal_filter") else None),
                ChannelSpec(self.section("idler_channel")["transmission_efficiency"],
                            self.filter("idler_filter") if self.has("idler_filter") else None))

    def detector(self, name):
        s = self.section(name)
        kwargs = {"quantum_efficiency": s["quantum_efficiency"]}
        mapping = {"dark_count_prob": "dark_count_prob", "afterpulse_prob": "afterpulse_prob",
                   "gate_width_ns": "gate_width",
                   "effective_gate_width_ns": "effective_gate_width",
                   "dead_time_us": "dead_time", "gate_rate_hz": "gate_rate"}
        for key, attr in mapping.items():
            if key in s:
                kwargs[attr] = s[key]
        return DetectorSpec(**kwargs)

    def detectors(self):
        return self.detector("signal_detector"), self.detector("idler_detector")

    def source(self):
        s = self.section("source")
        return SourceCoefficients(s["s1_mphotons_per_mw"], s["s2_mpairs_per_mw2"],
                                  s1_signal=s.get("s1_signal_mphotons_per_mw"))


def parse_config(text, source_path=None):
    """Parse INI text into a :class:`RunConfig`; unknown sections or keys raise."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source_path or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections = {}
    for name in parser.sections():
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        keys = SCHEMA[name]
        values = {}
        for key, raw in parser.items(name):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            try:
                values[key] = keys[key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {key}: {exc}") from None
        missing = [k for k in REQUIRED.get(name, ()) if k not in values]
        if missing:
            raise ConfigError(f"[{name}] is missing {', '.join(missing)}")
        sections[name] = values
    return RunConfig(sections, source_path)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
