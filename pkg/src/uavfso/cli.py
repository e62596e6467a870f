"""Command-line front end: ``uavfso eval|sweep|optimize|validate|pdf``.

Configuration is flat ``key = value unit`` text. Every dimensioned key needs
an explicit unit; values are stored in one fixed unit per key, and the output
header echoes the resolved configuration in that unit with full precision so
it parses back to the same configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import capacity as cap
from .capacity import NoiseModel, dbm_to_watts
from .channel import LinkParameters, ParameterError, channel_pdf, pdf_continuous
from .sweep import PATH_FUNCTIONS, SweepError, SweepSpec, argmax_1d, grid_sweep


class ConfigError(ValueError):
    pass


LENGTH = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
ANGLE = {"rad": 1.0, "mrad": 1e-3, "urad": 1e-6}
FREQUENCY = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
OPTICAL_BAND = {"um": 1.0, "nm": 1e-3, "m": 1e6}
RESPONSIVITY = {"A/W": 1.0, "mA/W": 1e-3}
RADIANCE = {"W/cm2/um/sr": 1.0, "W/(cm2*um*sr)": 1.0, "W/(cm^2*um*sr)": 1.0}
POWER = {"W": 1.0, "mW": 1e-3, "uW": 1e-6}
DIMENSIONLESS: dict = {}


@dataclass(frozen=True)
class Key:
    record: str          # "link", "noise" or "power"
    attr: str
    units: dict
    unit: str            # storage and echo unit
    integer: bool = False


KEYS = {
    "lambda": Key("link", "wavelength", LENGTH, "m"),
    "r_a": Key("link", "aperture_radius", LENGTH, "m"),
    "w_z": Key("link", "beam_width", LENGTH, "m"),
    "Z": Key("link", "link_length", LENGTH, "m"),
    "h_l": Key("link", "attenuation", DIMENSIONLESS, ""),
    "sigma2_lnha": Key("link", "log_irradiance_variance", DIMENSIONLESS, ""),
    "sigma_p": Key("link", "position_sd", LENGTH, "m"),
    "sigma_theta": Key("link", "orientation_sd", ANGLE, "rad"),
    "theta_fov": Key("link", "fov_angle", ANGLE, "rad"),
    "M": Key("link", "series_order", DIMENSIONLESS, "", integer=True),
    "R": Key("noise", "responsivity", RESPONSIVITY, "A/W"),
    "B_e": Key("noise", "pd_bandwidth", FREQUENCY, "Hz"),
    "B_o": Key("noise", "optical_bandwidth_um", OPTICAL_BAND, "um"),
    "N_b": Key("noise", "spectral_radiance", RADIANCE, "W/cm2/um/sr"),
    "P_t": Key("power", "transmit_power", POWER, "W"),
}
FIELD_TO_KEY = {k.attr: name for name, k in KEYS.items()}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf|nan)\s*(.*?)\s*$")


def parse_quantity(key: str, text: str) -> float:
    """Value of ``key`` from ``"<number> [unit]"`` in its storage unit."""
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    spec = KEYS[key]
    m = _NUMBER.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse value {text!r}")
    number, unit = m.group(1), m.group(2)
    value = float(number)
    if spec.integer:
        if unit or not re.fullmatch(r"[-+]?\d+", number):
            raise ConfigError(f"{key}: expected a plain integer, got {text!r}")
        return int(number)
    if not spec.units:
        if unit and unit != "-":
            raise ConfigError(f"{key}: dimensionless, unexpected unit {unit!r}")
        return value
    if not unit:
        raise ConfigError(f"{key}: unit required (one of {', '.join(_unit_names(key))})")
    if key == "P_t" and unit in ("dBm", "dBW"):
        return dbm_to_watts(value + (30.0 if unit == "dBW" else 0.0))
    if unit not in spec.units:
        raise ConfigError(f"{key}: unknown unit {unit!r} (one of {', '.join(_unit_names(key))})")
    factor = spec.units[unit] / spec.units[spec.unit]
    return value * factor if factor != 1.0 else value


def _unit_names(key):
    names = list(KEYS[key].units)
    return names + ["dBm", "dBW"] if key == "P_t" else names


@dataclass(frozen=True)
class RunConfig:
    """Resolved inputs; ``transmit_power`` is ``None`` until given."""

    link: LinkParameters = field(default_factory=LinkParameters)
    responsivity: float = 0.6
    pd_bandwidth: float = 1e9
    optical_bandwidth_um: float = 0.01
    spectral_radiance: float = 1e-3
    transmit_power: float | None = None

    def noise(self, transmit_power: float | None = None) -> NoiseModel:
        pt = self.transmit_power if transmit_power is None else transmit_power
        if pt is None:
            raise ConfigError("P_t: transmit power is required (no default)")
        return NoiseModel.for_link(self.link, pt, responsivity=self.responsivity,
                                   pd_bandwidth=self.pd_bandwidth,
                                   optical_bandwidth_um=self.optical_bandwidth_um,
                                   spectral_radiance=self.spectral_radiance)

    def value(self, key: str):
        spec = KEYS[key]
        if spec.record == "link":
            return getattr(self.link, spec.attr)
        return getattr(self, spec.attr)

    def echo(self) -> list[str]:
        """``key = value unit`` lines that parse back to this configuration."""
        lines = []
        for key, spec in KEYS.items():
            v = self.value(key)
            if v is None:
                continue
            text = str(v) if spec.integer else repr(float(v))
            lines.append(f"{key} = {text} {spec.unit}".rstrip())
        return lines


def _split_assignment(line: str, sep: str) -> tuple[str, str]:
    if sep not in line:
        raise ConfigError(f"expected 'key {sep} value unit', got {line.strip()!r}")
    key, value = line.split(sep, 1)
    return key.strip(), value.strip()


def build_config(assignments: dict[str, str]) -> RunConfig:
    """RunConfig from raw ``key -> "value unit"`` strings over the defaults."""
    link_kw, noise_kw = {}, {}
    for key, text in assignments.items():
        value = parse_quantity(key, text)
        spec = KEYS[key]
        (link_kw if spec.record == "link" else noise_kw)[spec.attr] = value
    try:
        link = LinkParameters().replace(**link_kw)
        cfg = RunConfig(link=link, **noise_kw)
        cfg.noise(1.0)  # validates the receiver fields
        if cfg.transmit_power is not None and not (math.isfinite(cfg.transmit_power)
                                                   and cfg.transmit_power > 0):
            raise ParameterError("transmit_power", f"must be a finite positive number, "
                                                   f"got {cfg.transmit_power!r}")
    except ParameterError as exc:
        key = FIELD_TO_KEY.get(exc.name, exc.name)
        raise ConfigError(f"{key}: {str(exc).split(': ', 1)[1]}") from None
    return cfg


def parse_config_text(text: str, overrides=()) -> RunConfig:
    """Parse config text, then apply ``key=value unit`` overrides."""
    assignments = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = _split_assignment(line, "=")
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        assignments[key] = value
    for item in overrides:
        key, value = _split_assignment(item, "=")
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        assignments[key] = value
    return build_config(assignments)


def parse_config(path=None, overrides=()) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config_text(text, overrides)


CONFIG_PREFIX = "# config: "


def config_from_output(text: str) -> RunConfig:
    """Recover the resolved configuration echoed in an output header."""
    lines = [ln[len(CONFIG_PREFIX):] for ln in text.splitlines() if ln.startswith(CONFIG_PREFIX)]
    return parse_config_text("\n".join(lines))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@dataclass
class OutputTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: list[str] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} fields, schema has {len(self.columns)}")
        self.rows.append(list(values))

    @property
    def has_errors(self) -> bool:
        if "error" not in self.columns:
            return False
        i = self.columns.index("error")
        return any(row[i] for row in self.rows)


def format_field(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def render(table: OutputTable) -> str:
    buf = io.StringIO()
    for line in table.metadata:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_field(v) for v in row])
    return buf.getvalue()


def emit(table: OutputTable, destination=None):
    """Write ``table`` as CSV to a path, or stdout when ``destination`` is None."""
    text = render(table)
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
    else:
        with open(destination, "w", newline="") as fh:
            fh.write(text)


def _header(command: str, cfg: RunConfig, paths=()) -> list[str]:
    meta = [f"tool: uavfso {__version__}", f"command: {command}"]
    meta += [f"config: {line}" for line in cfg.echo()]
    if paths:
        meta.append("paths: " + ",".join(paths))
    return meta


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

PATH_ALIASES = {
    "exact": "exact",
    "oracle": "oracle",
    "oracle_q": "oracle_qapprox",
    "oracle_qapprox": "oracle_qapprox",
    "closed": "closed_form",
    "closed_form": "closed_form",
    "largefov": "large_fov",
    "large_fov": "large_fov",
}
EVAL_PATHS = ("exact", "oracle", "oracle_qapprox", "closed_form", "large_fov")

# unit of the swept-value column
SWEEP_UNITS = {"w_z": "m", "theta_fov": "rad", "sigma_theta": "rad", "P_t": "dBm"}


def parse_paths(text: str | None, default) -> tuple[str, ...]:
    if not text:
        return tuple(default)
    out = []
    for name in text.split(","):
        name = name.strip()
        if name not in PATH_ALIASES:
            raise ConfigError(f"unknown path {name!r} (one of {', '.join(sorted(PATH_ALIASES))})")
        if PATH_ALIASES[name] not in out:
            out.append(PATH_ALIASES[name])
    return tuple(out)


def parse_sweep(text: str) -> tuple[str, float, float, int]:
    """``param=lo:hi:n [unit]``; ``lo``/``hi`` may carry their own units.

    Returns bounds in the sweep unit (m, rad or dBm).
    """
    param, rng = _split_assignment(text, "=")
    if param not in SWEEP_UNITS:
        raise ConfigError(f"cannot sweep {param!r} (one of {', '.join(SWEEP_UNITS)})")
    parts = rng.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--sweep expects param=lo:hi:n [unit], got {text!r}")
    lo_t, hi_t, tail = (s.strip() for s in parts)
    m = re.fullmatch(r"(\d+)\s*(.*)", tail)
    if not m:
        raise ConfigError(f"--sweep point count must be a nonnegative integer, got {tail!r}")
    count, unit = int(m.group(1)), m.group(2)

    def bound(t):
        m1 = _NUMBER.match(t)
        if unit and m1 and not m1.group(2):
            t = f"{t} {unit}"
        if param == "P_t":
            m2 = _NUMBER.match(t)
            if m2 and m2.group(2) in ("dBm", "dBW"):
                return float(m2.group(1)) + (30.0 if m2.group(2) == "dBW" else 0.0)
            w = parse_quantity("P_t", t)
            if not w > 0:
                raise ConfigError("P_t: sweep bounds must be positive powers")
            return 10.0 * math.log10(w) + 30.0
        return parse_quantity(param, t)

    return param, bound(lo_t), bound(hi_t), count


def _sweep_spec(args, cfg: RunConfig, paths) -> SweepSpec:
    param, lo, hi, count = parse_sweep(args.sweep)
    noise = None if param == "P_t" else cfg.noise()
    return SweepSpec(parameter=param, lo=lo, hi=hi, count=count, link=cfg.link, noise=noise,
                     paths=paths, allow_out_of_range=args.allow_out_of_range)


def cmd_eval(args, cfg: RunConfig) -> OutputTable:
    paths = parse_paths(args.paths, EVAL_PATHS)
    noise = cfg.noise()
    table = OutputTable(["path", "capacity_bits", "capacity_nats", "rel_delta_vs_closed_form",
                         "error"], metadata=_header("eval", cfg, paths))
    warn = cap.high_snr_warning(cfg.link, noise)
    if warn:
        table.metadata.append(f"warning: {warn}")
    values = {}
    errors = {}
    for path in paths:
        try:
            values[path] = float(PATH_FUNCTIONS[path](cfg.link, noise))
        except (ArithmeticError, ValueError) as exc:
            errors[path] = f"{type(exc).__name__}: {exc}"
    ref = values.get("closed_form")
    if ref is None and "closed_form" not in errors:
        try:
            ref = cap.capacity_closed_form(cfg.link, noise)
        except (ArithmeticError, ValueError):
            ref = None
    for path in paths:
        if path in errors:
            table.add(path, None, None, None, errors[path])
            continue
        v = values[path]
        delta = abs(v - ref) / abs(ref) if ref else None
        table.add(path, cap.nats_to_bits(v), v, delta, "")
    return table


def cmd_sweep(args, cfg: RunConfig) -> OutputTable:
    paths = parse_paths(args.paths, ("closed_form",))
    spec = _sweep_spec(args, cfg, paths)
    col = f"{spec.parameter}_{SWEEP_UNITS[spec.parameter]}"
    columns = [col]
    for p in paths:
        columns += [f"{p}_bits", f"{p}_nats"]
    columns += ["warning", "error"]
    meta = _header("sweep", cfg, paths)
    meta.append(f"sweep: {spec.parameter} {spec.lo!r}:{spec.hi!r}:{spec.count} "
                f"{SWEEP_UNITS[spec.parameter]}")
    table = OutputTable(columns, metadata=meta)
    result = grid_sweep(spec, workers=args.workers)
    for row in result.rows:
        vals = [row.value]
        for p in paths:
            if p in row.nats:
                vals += [row.bits[p], row.nats[p]]
            else:
                vals += [None, None]
        vals += ["; ".join(row.warnings), row.error or ""]
        table.add(*vals)
    return table


def cmd_optimize(args, cfg: RunConfig) -> OutputTable:
    paths = parse_paths(args.paths, ("exact",))
    spec = _sweep_spec(args, cfg, paths[:1])
    unit = SWEEP_UNITS[spec.parameter]
    table = OutputTable(["parameter", "path", f"optimum_{unit}", "capacity_bits", "capacity_nats",
                         f"coarse_{unit}", "coarse_bits", "at_boundary", "error"],
                        metadata=_header("optimize", cfg, paths[:1]))
    opt = argmax_1d(spec, path=paths[0], refine=not args.no_refine, workers=args.workers)
    failed = [r for r in (opt.result.rows if opt.result else ()) if r.error]
    err = f"{len(failed)} grid points failed: {failed[0].error}" if failed else ""
    table.add(spec.parameter, paths[0], opt.value, opt.capacity_bits,
              opt.capacity_bits * cap.LN2, opt.coarse_value, opt.coarse_bits, opt.at_boundary, err)
    if opt.at_boundary:
        table.metadata.append("warning: maximum on the range boundary, no interior optimum")
    return table


def cmd_validate(args, cfg: RunConfig) -> OutputTable:
    from . import validation

    table = OutputTable(["check", "value", "limit", "status", "detail", "error"],
                        metadata=_header("validate", cfg))
    for chk in validation.run_all(cfg.link, cfg.noise() if cfg.transmit_power else None,
                                  quick=args.quick):
        table.add(chk.name, chk.value, chk.limit, "PASS" if chk.passed else "FAIL",
                  chk.detail, "" if chk.passed else "check failed")
    return table


def cmd_pdf(args, cfg: RunConfig) -> OutputTable:
    """Outage atom, then density samples with trapezoid masses on a log-h grid."""
    pdf = channel_pdf(cfg.link)
    n = args.points
    if n < 2:
        raise ConfigError("--points must be >= 2")
    u = np.linspace(math.log(pdf.support_floor), math.log(pdf.support_ceiling), n)
    h = np.exp(u)
    dens = np.array([pdf_continuous(x, cfg.link, pdf.constants) for x in h])
    w = np.full(n, u[1] - u[0])
    w[0] = w[-1] = 0.5 * (u[1] - u[0])
    mass = w * dens * h
    table = OutputTable(["kind", "h", "density", "mass"], metadata=_header("pdf", cfg))
    table.metadata.append(f"total_mass: {format_field(pdf.outage_mass + float(mass.sum()))}")
    table.add("atom", 0.0, None, pdf.outage_mass)
    for hi, di, mi in zip(h, dens, mass):
        table.add("density", hi, di, mi)
    return table


COMMANDS = {
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "pdf": cmd_pdf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavfso", description="Ergodic capacity of a hovering "
                                     "UAV-to-UAV optical link.")
    parser.add_argument("--version", action="version", version=f"uavfso {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value unit file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one key, e.g. --set 'sigma_theta=5 mrad'")
    common.add_argument("--out", help="output CSV path (default stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="all capacity paths at one point")
    p.add_argument("--paths", help="comma list of exact,oracle,oracle_q,closed,largefov")

    for name, hlp in (("sweep", "capacity over a 1-D grid"), ("optimize", "1-D capacity maximum")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--sweep", required=True, metavar="PARAM=LO:HI:N [UNIT]")
        p.add_argument("--paths", help="comma list of exact,oracle,oracle_q,closed,largefov")
        p.add_argument("--workers", type=int, default=None, help="process pool size")
        p.add_argument("--allow-out-of-range", action="store_true",
                       help="accept ranges outside the reference setup")
        if name == "optimize":
            p.add_argument("--no-refine", action="store_true", help="grid maximum only")

    p = sub.add_parser("validate", parents=[common], help="oracle vs closed-form checks")
    p.add_argument("--quick", action="store_true", help="skip the figure-level sweeps")

    p = sub.add_parser("pdf", parents=[common], help="outage mass and density samples")
    p.add_argument("--points", type=int, default=801)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.set)
        table = COMMANDS[args.command](args, cfg)
        emit(table, args.out)
    except (ConfigError, SweepError, ParameterError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    return 1 if table.has_errors else 0


if __name__ == "__main__":
    sys.exit(main())
