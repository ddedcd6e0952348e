"""Run configuration: INI-style key-value files resolved into a SimulationPlan.

Keys may sit under their section header or, since every key name is
unique, before any header.  Values are validated as they are read so
errors name the key and its line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .calibrate import CalibrationTargets
from .calibration_data import frozen_calibration
from .carriers import CarrierState, DEFAULT_GAMMA, make_carrier_state, pump_to_density
from .coincidence import CoincidenceConfig
from .constants import DomainError
from .materials import MaterialLookupError, MaterialParams, QWLayerSpec, lookup
from .quantumwell import QWSolverError, QWStack, build_stack
from .spectra import CollectionGeometry, StimulationConfig

COMMANDS = ("spectrum", "stimulated", "onephoton", "coincidence", "sweep", "calibrate")
SYSTEMS = ("bulk", "qw")


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None, source=None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key '{key}'")
        super().__init__((": ".join([", ".join(where), message])) if where else message)
        self.key, self.line = key, line


# --------------------------------------------------------------- value types


def _float(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("not a finite number")
    return x


def _pos(v):
    x = _float(v)
    if x <= 0:
        raise ValueError("must be > 0")
    return x


def _nonneg(v):
    x = _float(v)
    if x < 0:
        raise ValueError("must be >= 0")
    return x


def _prob(v):
    x = _float(v)
    if not 0 <= x <= 1:
        raise ValueError("must be in [0, 1]")
    return x


def _unit(v):
    x = _float(v)
    if not 0 < x <= 1:
        raise ValueError("must be in (0, 1]")
    return x


def _int_pos(v):
    x = int(v)
    if x < 1:
        raise ValueError("must be a positive integer")
    return x


def _u64(v):
    x = int(v)
    if not 0 <= x < 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return x


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("must be true or false")


def _choice(*opts):
    def f(v):
        s = v.strip()
        if s not in opts:
            raise ValueError(f"must be one of {', '.join(opts)}")
        return s

    return f


def _str(v):
    s = v.strip()
    if not s:
        raise ValueError("must not be empty")
    return s


def _pos_list(v):
    xs = [_pos(t) for t in v.split(",") if t.strip()]
    if not xs:
        raise ValueError("must list at least one value")
    return tuple(xs)


def _float_list(v):
    return tuple(_float(t) for t in v.split(",") if t.strip())


def _targets(v):
    out = []
    for item in v.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise ValueError("expected density:temperature:center entries")
        out.append(tuple(_pos(p) for p in parts))
    return tuple(out)


# section -> key -> parser
SCHEMA = {
    "run": {"command": _choice(*COMMANDS), "system": _choice(*SYSTEMS), "seed": _u64, "label": _str},
    "carriers": {
        "material": _str, "density": _pos, "pump_mW": _nonneg, "spot_um": _pos,
        "temp": _pos, "gamma": _pos, "C_bgr": _nonneg,
    },
    "qw": {
        "well_width_A": _pos, "barrier_width_A": _pos, "well_material": _str,
        "barrier_material": _str, "cbo_eV": _float, "vbo_eV": _float, "periods": _int_pos,
        "strain_shift_eV": _float, "sheet_area_cm2": _pos,
    },
    "geometry": {"solid_angle_fraction": _unit, "optics_efficiency": _unit, "volume_cm3": _pos},
    "grid": {"e_min": _pos, "e_max": _pos, "points": _int_pos, "resolution_nm": _nonneg},
    "stimulation": {
        "energies_eV": _pos_list, "power_mW": _nonneg, "mode_area_um2": _pos,
        "confinement": _unit, "n_s": _pos, "carrier_budget": _bool,
    },
    "sweep": {
        "energy_eV": _pos, "power_min_mW": _pos, "power_max_mW": _pos, "points": _int_pos,
        "spacing": _choice("linear", "log"),
    },
    "coincidence": {
        "pulse_width_ns": _pos, "period_us": _pos, "n_pulses": _int_pos, "pair_prob": _prob,
        "eta_si": _prob, "eta_ingaas": _prob, "dark_prob_si": _prob, "dark_prob_ingaas": _prob,
        "p0_afterpulse": _prob, "tau_trap_us": _pos, "delay_periods": _int_pos,
        "extra_delays_us": _float_list,
    },
    "calibrate": {
        "bulk_targets": _targets, "bulk_material": _str, "qw_density": _pos,
        "qw_temperature": _pos, "qw_center": _pos, "freeze": _bool,
    },
}
# grid.points and sweep.points share a name; bare keys must be unambiguous
_OWNER = {}
for _sec, _keys in SCHEMA.items():
    for _k in _keys:
        _OWNER.setdefault(_k, []).append(_sec)

_SECTION_RE = re.compile(r"^\[([A-Za-z_][\w-]*)\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][\w]*)\s*[=:]\s*(.*)$")


@dataclass
class RawConfig:
    """Validated values with the line each came from."""

    values: dict = field(default_factory=dict)  # (section, key) -> value
    lines: dict = field(default_factory=dict)  # (section, key) -> line number
    source: str | None = None

    def get(self, section, key, default=None):
        return self.values.get((section, key), default)

    def has(self, section, key):
        return (section, key) in self.values

    def line(self, section, key=None):
        if key is None:
            ls = [v for (s, _), v in self.lines.items() if s == section]
            return min(ls) if ls else None
        return self.lines.get((section, key))

    def merged(self, other: "RawConfig") -> "RawConfig":
        out = RawConfig(dict(self.values), dict(self.lines), other.source or self.source)
        out.values.update(other.values)
        out.lines.update(other.lines)
        return out


def read_raw(text: str, source=None) -> RawConfig:
    raw = RawConfig(source=source)
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not s:
            continue
        m = _SECTION_RE.match(s)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=no, source=source)
            continue
        m = _KEY_RE.match(s)
        if not m:
            raise ConfigError(f"cannot parse {s!r}", line=no, source=source)
        key, val = m.group(1), m.group(2).strip()
        sec = section
        if sec is None:
            owners = _OWNER.get(key, [])
            if len(owners) != 1:
                msg = "unknown key" if not owners else f"ambiguous key; put it under one of {owners}"
                raise ConfigError(msg, key=key, line=no, source=source)
            sec = owners[0]
        if key not in SCHEMA[sec]:
            raise ConfigError(f"unknown key in [{sec}]", key=key, line=no, source=source)
        if (sec, key) in raw.values:
            raise ConfigError("duplicate key", key=key, line=no, source=source)
        try:
            raw.values[(sec, key)] = SCHEMA[sec][key](val)
        except ValueError as exc:
            raise ConfigError(f"{exc} (got {val!r})", key=key, line=no, source=source) from None
        raw.lines[(sec, key)] = no
    return raw


def read_raw_file(path) -> RawConfig:
    p = Path(path)
    return read_raw(p.read_text(), source=str(p))


# --------------------------------------------------------------- plan


@dataclass(frozen=True)
class GridSpec:
    e_min: float
    e_max: float
    points: int
    resolution_nm: float

    def energies(self):
        import numpy as np

        return np.linspace(self.e_min, self.e_max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    energy_eV: float
    power_min_mW: float
    power_max_mW: float
    points: int
    spacing: str

    def powers_W(self):
        import numpy as np

        if self.spacing == "log":
            p = np.geomspace(self.power_min_mW, self.power_max_mW, self.points)
        else:
            p = np.linspace(self.power_min_mW, self.power_max_mW, self.points)
        return p * 1e-3


@dataclass(frozen=True)
class SimulationPlan:
    command: str
    system: str
    seed: int
    label: str
    output_dir: Path | None
    material: MaterialParams | None = None
    state: CarrierState | None = None
    stack: QWStack | None = None
    geometry: CollectionGeometry | None = None
    grid: GridSpec | None = None
    stimulations: tuple = ()
    carrier_budget: bool = False
    sweep: SweepSpec | None = None
    coincidence: CoincidenceConfig | None = None
    delays_us: tuple = ()
    calibration_targets: CalibrationTargets | None = None
    freeze_calibration: bool = False
    # resolved scalar inputs kept for the config echo
    echo: dict = field(default_factory=dict)

    @property
    def system_obj(self):
        return self.stack if self.system == "qw" else self.material

    def with_output(self, out) -> "SimulationPlan":
        return replace(self, output_dir=Path(out))


DEFAULT_GRIDS = {
    ("bulk", "tpe"): (0.55, 1.15, 601, 10.0),
    ("qw", "tpe"): (0.7, 1.4, 701, 5.0),
    ("bulk", "onephoton"): (1.3, 1.8, 501, 10.0),
    ("qw", "onephoton"): (1.75, 2.15, 401, 5.0),
}
BULK_VOLUME_CM3 = math.pi * (15e-4) ** 2 * 1e-4  # 30 um spot, 1 um deep


def _err(raw, sec, key, msg):
    return ConfigError(msg, key=key, line=raw.line(sec, key) or raw.line(sec), source=raw.source)


def _build(raw: RawConfig, command: str, seed: int | None, output_dir) -> SimulationPlan:
    g = raw.get
    system = g("run", "system", "bulk")
    seed = g("run", "seed", 0) if seed is None else seed
    label = g("run", "label", command)
    echo = {("run", "command"): command, ("run", "system"): system, ("run", "seed"): seed,
            ("run", "label"): label}
    plan = dict(command=command, system=system, seed=seed, label=label,
                output_dir=Path(output_dir) if output_dir else None)
    cal = frozen_calibration()

    if command == "coincidence":
        c = CoincidenceConfig()
        keys = {
            "pulse_width_ns": "pulse_width", "period_us": "period", "n_pulses": "n_pulses",
            "pair_prob": "pair_prob_per_pulse", "eta_si": "eta_si", "eta_ingaas": "eta_ingaas",
            "dark_prob_si": "dark_prob_si", "dark_prob_ingaas": "dark_prob_ingaas",
            "p0_afterpulse": "p0_afterpulse", "tau_trap_us": "tau_trap",
        }
        kw = {f: g("coincidence", k, getattr(c, f)) for k, f in keys.items()}
        try:
            c = CoincidenceConfig(rng_seed=seed, **kw)
        except DomainError as exc:
            raise _err(raw, "coincidence", None, str(exc)) from None
        n = g("coincidence", "delay_periods", 30)
        extra = g("coincidence", "extra_delays_us", ())
        delays = tuple(k * c.period for k in range(-n, n + 1)) + tuple(extra)
        for k, f in keys.items():
            echo[("coincidence", k)] = getattr(c, f)
        echo[("coincidence", "delay_periods")] = n
        if extra:
            echo[("coincidence", "extra_delays_us")] = extra
        return SimulationPlan(**plan, coincidence=c, delays_us=delays, echo=echo)

    if command == "calibrate":
        t = CalibrationTargets()
        kw = {}
        if raw.has("calibrate", "bulk_targets"):
            kw["bulk"] = g("calibrate", "bulk_targets")
        if raw.has("calibrate", "bulk_material"):
            kw["material"] = g("calibrate", "bulk_material")
        for k in ("qw_density", "qw_temperature", "qw_center"):
            if raw.has("calibrate", k):
                kw[k] = g("calibrate", k)
        t = replace(t, **kw)
        try:
            lookup(t.material)
        except MaterialLookupError as exc:
            raise _err(raw, "calibrate", "bulk_material", str(exc)) from None
        echo[("calibrate", "bulk_targets")] = ", ".join(":".join(repr(float(x)) for x in b) for b in t.bulk)
        echo[("calibrate", "bulk_material")] = t.material
        for k in ("qw_density", "qw_temperature", "qw_center"):
            echo[("calibrate", k)] = getattr(t, k)
        freeze = g("calibrate", "freeze", True)
        echo[("calibrate", "freeze")] = freeze
        return SimulationPlan(**plan, calibration_targets=t, freeze_calibration=freeze, echo=echo)

    # ---- spectral commands
    T = g("carriers", "temp", 300.0)
    gamma = g("carriers", "gamma", DEFAULT_GAMMA)
    C_bgr = g("carriers", "C_bgr", cal.C_bgr)
    if raw.has("carriers", "density") and raw.has("carriers", "pump_mW"):
        raise _err(raw, "carriers", "pump_mW", "give either density or pump_mW, not both")
    if raw.has("carriers", "density"):
        n = g("carriers", "density")
    elif raw.has("carriers", "pump_mW"):
        n = pump_to_density(g("carriers", "pump_mW") * 1e-3, g("carriers", "spot_um", 30.0))
        if n <= 0:
            raise _err(raw, "carriers", "pump_mW", "pump power must be > 0")
    else:
        raise ConfigError("missing required key (or pump_mW)", key="density", source=raw.source)
    echo.update({("carriers", "density"): n, ("carriers", "temp"): T,
                 ("carriers", "gamma"): gamma, ("carriers", "C_bgr"): C_bgr})

    stack = None
    try:
        if system == "qw":
            layers = QWLayerSpec(
                well_width=g("qw", "well_width_A", 50.0),
                barrier_width=g("qw", "barrier_width_A", 55.0),
                well_material=g("qw", "well_material", "GaInP-well"),
                barrier_material=g("qw", "barrier_material", "AlGaInP-barrier"),
                conduction_band_offset=g("qw", "cbo_eV", 0.28),
                valence_band_offset=g("qw", "vbo_eV", 0.14),
                num_periods=g("qw", "periods", 4),
                strain_shift=g("qw", "strain_shift_eV", cal.qw_strain_shift),
            )
            S = g("qw", "sheet_area_cm2", 2e-5)
            stack = build_stack(layers, S_qw=S, T=T)
            material = stack.well
            state = make_carrier_state(material, n, T, gamma, well_width=layers.well_width, C_bgr=C_bgr)
            echo.update({
                ("qw", "well_width_A"): layers.well_width, ("qw", "barrier_width_A"): layers.barrier_width,
                ("qw", "well_material"): layers.well_material,
                ("qw", "barrier_material"): layers.barrier_material,
                ("qw", "cbo_eV"): layers.conduction_band_offset,
                ("qw", "vbo_eV"): layers.valence_band_offset, ("qw", "periods"): layers.num_periods,
                ("qw", "strain_shift_eV"): layers.strain_shift, ("qw", "sheet_area_cm2"): S,
            })
        else:
            material = lookup(g("carriers", "material", "GaAs"))
            state = make_carrier_state(material, n, T, gamma, C_bgr=C_bgr)
            echo[("carriers", "material")] = material.name
    except MaterialLookupError as exc:
        key = "material" if system == "bulk" else "well_material"
        raise _err(raw, "carriers" if system == "bulk" else "qw", key, str(exc)) from None
    except (DomainError, QWSolverError, ValueError) as exc:
        sec = "qw" if system == "qw" and raw.line("qw") else "carriers"
        raise _err(raw, sec, None, str(exc)) from None

    try:
        geom = CollectionGeometry(
            g("geometry", "solid_angle_fraction", 1.0),
            g("geometry", "optics_efficiency", 1.0),
            g("geometry", "volume_cm3", BULK_VOLUME_CM3) if system == "bulk" else None,
        )
    except ValueError as exc:
        raise _err(raw, "geometry", None, str(exc)) from None
    echo[("geometry", "solid_angle_fraction")] = geom.solid_angle_fraction
    echo[("geometry", "optics_efficiency")] = geom.optics_efficiency
    if system == "bulk":
        echo[("geometry", "volume_cm3")] = geom.volume_or_area

    kind = "onephoton" if command == "onephoton" else "tpe"
    d = DEFAULT_GRIDS[(system, kind)]
    grid = GridSpec(g("grid", "e_min", d[0]), g("grid", "e_max", d[1]), g("grid", "points", d[2]),
                    g("grid", "resolution_nm", d[3]))
    if grid.e_max <= grid.e_min or grid.points < 3:
        raise _err(raw, "grid", "e_max", "need e_max > e_min and at least 3 points")
    for k in ("e_min", "e_max", "points", "resolution_nm"):
        echo[("grid", k)] = getattr(grid, k)

    stims = ()
    budget = False
    sweep = None
    if command in ("stimulated", "sweep"):
        P_mW = g("stimulation", "power_mW", 0.2)
        P = P_mW * 1e-3
        A = g("stimulation", "mode_area_um2", 50.0)
        conf = g("stimulation", "confinement", 1.0)
        n_s = g("stimulation", "n_s", None)
        budget = g("stimulation", "carrier_budget", False)
        if command == "stimulated":
            if not raw.has("stimulation", "energies_eV"):
                raise ConfigError("missing required key", key="energies_eV", source=raw.source)
            energies = g("stimulation", "energies_eV")
        else:
            if not raw.has("sweep", "energy_eV"):
                raise ConfigError("missing required key", key="energy_eV", source=raw.source)
            energies = (g("sweep", "energy_eV"),)
            sweep = SweepSpec(
                g("sweep", "energy_eV"), g("sweep", "power_min_mW", 0.05), g("sweep", "power_max_mW", 2.0),
                g("sweep", "points", 20), g("sweep", "spacing", "linear"),
            )
            if sweep.power_max_mW <= sweep.power_min_mW:
                raise _err(raw, "sweep", "power_max_mW", "must exceed power_min_mW")
            for k in ("energy_eV", "power_min_mW", "power_max_mW", "points", "spacing"):
                echo[("sweep", k)] = getattr(sweep, k)
        try:
            stims = tuple(StimulationConfig(E, P, A, conf, n_s) for E in energies)
        except DomainError as exc:
            raise _err(raw, "stimulation", None, str(exc)) from None
        for E in energies:
            if not grid.e_min < E < grid.e_max:
                key = "energies_eV" if command == "stimulated" else "energy_eV"
                raise _err(raw, "stimulation" if command == "stimulated" else "sweep", key,
                           f"stimulating energy {E} eV outside the grid ({grid.e_min}, {grid.e_max})")
        if command == "stimulated":
            echo[("stimulation", "energies_eV")] = ", ".join(repr(float(e)) for e in energies)
        echo.update({("stimulation", "power_mW"): P_mW, ("stimulation", "mode_area_um2"): A,
                     ("stimulation", "confinement"): conf, ("stimulation", "carrier_budget"): budget})
        if n_s is not None:
            echo[("stimulation", "n_s")] = n_s

    return SimulationPlan(
        **plan, material=material, state=state, stack=stack, geometry=geom, grid=grid,
        stimulations=stims, carrier_budget=budget, sweep=sweep, echo=echo,
    )


def preset_path(name: str) -> Path:
    from importlib import resources

    p = resources.files("tpespec") / "presets" / f"{name}.cfg"
    if not p.is_file():
        avail = sorted(q.name[:-4] for q in (resources.files("tpespec") / "presets").iterdir()
                       if q.name.endswith(".cfg"))
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(avail)}")
    return Path(str(p))


def parse_config(path=None, command: str | None = None, seed: int | None = None,
                 output_dir=None, preset: str | None = None, text: str | None = None) -> SimulationPlan:
    """Resolve a config file (optionally layered over a preset) into a plan.

    Precedence: CLI arguments, then the config file, then the preset, then defaults.
    """
    raw = RawConfig()
    if preset:
        raw = read_raw_file(preset_path(preset))
    if path is not None:
        raw = raw.merged(read_raw_file(path))
    if text is not None:
        raw = raw.merged(read_raw(text, "<text>"))
    cmd = command or raw.get("run", "command")
    if cmd is None:
        raise ConfigError("no command given", key="command", source=raw.source)
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", key="command")
    return _build(raw, cmd, seed, output_dir)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def echo_text(plan: SimulationPlan) -> str:
    """Config text that re-parses to the same plan."""
    out = ["# resolved configuration; rerun with: tpespec <command> --config <this file>"]
    for sec in SCHEMA:
        keys = [(k, v) for (s, k), v in plan.echo.items() if s == sec]
        if not keys:
            continue
        out.append(f"\n[{sec}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in keys)
    return "\n".join(out) + "\n"
