"""Scenario configuration: typed fields, per-scenario defaults and the INI file format.

A config file is flat ``key = value`` text grouped under section headers.
Every key belongs to exactly one section (see :data:`SCHEMA`); unknown keys,
keys in the wrong section and malformed values are parse errors carrying the
line number.  Command-line overrides use the same keys (``key=value``).
"""

import configparser
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from ..errors import ConfigParseError, ValidationError
from ..wavecore import make_grid

SCENARIO_IDS = ("crossing", "fast_recorder", "spin_recorder", "protective")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "crossing"
    # ensemble
    seed: int = 20240601
    n_trajectories: int = 1000
    n_equilibrium: int = 10000
    ks_threshold: float = 0.02
    sample_from: str = "left"
    # grid
    x_points: int = 512
    x_min: float = -50.0
    x_max: float = 50.0
    y_points: int = 0
    y_min: float = 0.0
    y_max: float = 0.0
    offset: float = 0.0
    # time
    dt: float = 0.005
    t_final: float = 7.0
    frame_every: int = 1
    report_every: int = 10
    dump_times: tuple = ()
    # packets
    center_left: float = -10.0
    center_right: float = 10.0
    sigma: float = 1.0
    wavevector: float = 4.0
    weight_left: float = 1.0
    weight_right: float = 1.0
    transverse_offset: float = 0.0
    transverse_sigma: float = 1.0
    # recorder / coupling window
    coupling: float = 0.0
    window_center: float = 10.0
    window_width: float = 12.0
    window_edge: float = 0.5
    window_t_on: float = 0.0
    window_t_off: float = 0.25
    pointer_mass: float = 1.0
    pointer_sigma: float = 1.0
    pointer_center: float = 0.0
    min_pointer_separation: float = 5.0
    min_flip_weight: float = 0.99
    # protective
    box_left: float = 0.0
    box_right: float = 1.0
    box_height: float = 1e4
    point_a: float = 0.2
    ramp_duration: float = 10.0
    relax_tolerance: float = 1e-10
    adiabatic_min_fidelity: float = 0.99
    weak_max_error: float = 0.5
    displacement_fraction: float = 0.05

    @property
    def dims(self):
        return 2 if self.y_points else 1

    def grid(self):
        if self.dims == 1:
            return make_grid(1, self.x_points, [self.x_min + self.offset, self.x_max + self.offset])
        return make_grid(2, [self.x_points, self.y_points],
                         [[self.x_min + self.offset, self.x_max + self.offset], [self.y_min, self.y_max]])

    def updated(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        d = asdict(self)
        d["dump_times"] = list(self.dump_times)
        return d


SCHEMA = {
    "scenario": ("scenario",),
    "ensemble": ("seed", "n_trajectories", "n_equilibrium", "ks_threshold", "sample_from"),
    "grid": ("x_points", "x_min", "x_max", "y_points", "y_min", "y_max", "offset"),
    "time": ("dt", "t_final", "frame_every", "report_every", "dump_times"),
    "packets": ("center_left", "center_right", "sigma", "wavevector", "weight_left", "weight_right",
                "transverse_offset", "transverse_sigma"),
    "recorder": ("coupling", "window_center", "window_width", "window_edge", "window_t_on", "window_t_off",
                 "pointer_mass", "pointer_sigma", "pointer_center", "min_pointer_separation", "min_flip_weight"),
    "protective": ("box_left", "box_right", "box_height", "point_a", "ramp_duration", "relax_tolerance",
                   "adiabatic_min_fidelity", "weak_max_error", "displacement_fraction"),
}
SECTION_OF = {key: sec for sec, keys in SCHEMA.items() for key in keys}
FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}

DEFAULTS = {
    "crossing": dict(scenario="crossing", report_every=10, dump_times=(0.0, 2.5, 7.0)),
    "fast_recorder": dict(
        scenario="fast_recorder", x_points=256, x_min=-40.0, x_max=40.0,
        y_points=192, y_min=-28.0, y_max=36.0, dt=0.01, t_final=6.0, report_every=5,
        dump_times=(0.0, 2.5, 6.0), coupling=16.2, window_center=10.0, pointer_center=-8.0,
    ),
    "spin_recorder": dict(
        scenario="spin_recorder", report_every=10, dump_times=(0.0, 2.5, 7.0), coupling=4 * math.pi,
        window_center=10.0,
    ),
    "protective": dict(
        scenario="protective", n_trajectories=1, x_points=128, x_min=-0.25, x_max=1.25,
        y_points=32, y_min=-24.0, y_max=24.0, dt=4e-5, t_final=10.0, frame_every=100, report_every=10,
        dump_times=(0.0, 5.0, 10.0), coupling=0.5, window_center=0.7, window_width=0.1,
        window_edge=0.0, pointer_mass=10.0, pointer_sigma=4.0, pointer_center=0.0, ramp_duration=10.0,
    ),
}

DESCRIPTIONS = {
    "crossing": "two mirror packets meet head-on; trajectories leave with the formerly empty packet",
    "fast_recorder": "a pointer kicked on the empty path separates the branches; no trajectory swap",
    "spin_recorder": "an internal-level flip marks the empty path; trajectories swap and contradict the record",
    "protective": "slow weak coupling reads the box ground-state density at B while the particle stays at A",
}


def default_config(scenario):
    if scenario not in DEFAULTS:
        raise ValidationError(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIO_IDS)}",
                              "scenario")
    return ScenarioConfig(**DEFAULTS[scenario])


def _convert(key, text, line=None):
    kind = FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(float(v) for v in text.replace(",", " ").split())
        return text
    except ValueError:
        raise ConfigParseError(f"cannot read {text!r} as {kind.__name__} for {key}", line=line, field=key) from None


def _key_lines(text):
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif s and s[0] not in "#;" and "=" in s:
            lines[(section, s.split("=", 1)[0].strip())] = no
    return lines


def parse_config(text, source="<config>"):
    """Parse config text into a :class:`ScenarioConfig` (defaults of the named scenario fill gaps)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    values = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigParseError(f"unknown section [{sec}]", line=_section_line(text, sec))
        for key, raw in parser.items(sec):
            line = lines.get((sec, key))
            if key not in SECTION_OF:
                raise ConfigParseError(f"unknown key {key!r}", line=line, field=key)
            if SECTION_OF[key] != sec:
                raise ConfigParseError(f"key {key!r} belongs in [{SECTION_OF[key]}]", line=line, field=key)
            values[key] = _convert(key, raw, line)
    if "scenario" not in values:
        raise ConfigParseError("missing [scenario] scenario = <id>", field="scenario")
    base = default_config(values["scenario"])
    return replace(base, **values)


def _section_line(text, sec):
    for no, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{sec}]":
            return no
    return None


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


def apply_overrides(config, overrides):
    """Apply ``key=value`` strings."""
    changes = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigParseError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigParseError(f"unknown key {key!r} in override", field=key)
        changes[key] = _convert(key, value)
    if "scenario" in changes and changes["scenario"] != config.scenario:
        raise ConfigParseError("the scenario id cannot be overridden", field="scenario")
    return replace(config, **changes)


def config_from_dict(data):
    """Rebuild a config from :meth:`ScenarioConfig.as_dict` output (e.g. the echo in a report)."""
    unknown = set(data) - set(FIELD_TYPES)
    if unknown:
        raise ConfigParseError(f"unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
    values = {}
    for key, v in data.items():
        kind = FIELD_TYPES[key]
        values[key] = tuple(float(x) for x in v) if kind is tuple else kind(v)
    return ScenarioConfig(**values)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def format_config(config):
    """INI text that :func:`parse_config` reads back to an equal config."""
    out = []
    d = {f.name: getattr(config, f.name) for f in fields(config)}
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        out += [f"{k} = {_fmt(d[k])}" for k in keys]
        out.append("")
    return "\n".join(out)


def validate(config):
    """Raise :class:`ValidationError` naming the first offending field."""
    c = config
    if c.scenario not in SCENARIO_IDS:
        raise ValidationError(f"unknown scenario {c.scenario!r}", "scenario")
    positive = ["dt", "t_final", "sigma", "pointer_mass", "pointer_sigma", "transverse_sigma"]
    for name in positive:
        v = getattr(c, name)
        if not (math.isfinite(v) and v > 0):
            raise ValidationError(f"{name} must be positive and finite, got {v}", name)
    for name in ("n_trajectories", "frame_every", "report_every"):
        if getattr(c, name) < 1:
            raise ValidationError(f"{name} must be at least 1", name)
    if c.n_equilibrium < 0:
        raise ValidationError("n_equilibrium must be non-negative", "n_equilibrium")
    if c.sample_from not in ("left", "right"):
        raise ValidationError("sample_from must be 'left' or 'right'", "sample_from")
    for name in ("coupling", "window_center", "window_width", "offset", "wavevector", "center_left", "center_right"):
        if not math.isfinite(getattr(c, name)):
            raise ValidationError(f"{name} must be finite", name)
    if c.window_t_off <= c.window_t_on:
        raise ValidationError("window_t_off must exceed window_t_on", "window_t_off")
    if c.scenario == "crossing" and c.coupling != 0:
        raise ValidationError("the crossing scenario has no recorder; coupling must be 0", "coupling")
    if c.scenario in ("fast_recorder", "protective") and not c.y_points:
        raise ValidationError(f"{c.scenario} needs a pointer axis (y_points > 0)", "y_points")
    if c.scenario == "spin_recorder" and c.y_points:
        raise ValidationError("spin_recorder runs on a 1D grid (y_points = 0)", "y_points")
    if c.scenario == "crossing" and bool(c.transverse_offset) != bool(c.y_points):
        raise ValidationError("a transverse offset needs a transverse grid axis and vice versa", "transverse_offset")
    if c.scenario == "protective":
        if not c.box_left < c.point_a < c.box_right or not c.box_left < c.window_center < c.box_right:
            raise ValidationError("points A and B must lie inside the box", "point_a")
        if not c.ramp_duration > 0:
            raise ValidationError("ramp_duration must be positive", "ramp_duration")
    return c
