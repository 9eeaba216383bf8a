"""Config files, output tables and run manifests.

Config files are flat ``key = value`` text (UTF-8, ``#`` comments).  Angular
frequencies can be given either in rad/s (``detuning1``) or in Hz through
the ``_hz`` twin key (``detuning1_hz``); giving both forms of one quantity
is an error, as is any unknown or repeated key.  Omitted keys fall back to
the reference operating point, and ``omega0`` (the two-photon peak) derives
equal single-photon couplings sqrt(omega0 * (detuning1 + detuning2)) when
rabi1/rabi2 are not set explicitly.

Outputs are deterministic: floats are serialized with repr (shortest exact
round trip), column headers carry units as ``name[unit]``, and metadata
rides in leading ``# key = value`` comment lines.  Nothing time- or
host-dependent is written, so reruns of the same resolved config produce
byte-identical files.
"""

from __future__ import annotations

import io as _io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import (
    AtomSpec,
    ConfigError,
    GaussianPulse,
    LaserSpec,
    MomentumGrid,
    PlateSpec,
    PulseZone,
    RectPulse,
    RotationSpec,
    SequencePulse,
    SimConfig,
    TimeGrid,
    build_config,
    config_digest,
    config_payload,
)
from .constants import HBAR, TWO_PI

TOOL_NAME = "ramanci"

_FLOAT_KEYS = {
    "mass", "wavenumber", "rabi1", "rabi2", "detuning1", "detuning2",
    "phase1", "phase2", "omega0", "pulse_length", "pulse_duration",
    "plate_phase", "plate_offset", "rotation_rate", "velocity",
    "packet_width", "p_span_hbark", "t_start", "t_stop",
}
_HZ_KEYS = {"rabi1_hz", "rabi2_hz", "detuning1_hz", "detuning2_hz", "omega0_hz"}
_INT_KEYS = {"p_nodes", "t_steps"}
_LIST_KEYS = {"zone_areas", "zone_centers", "zone_widths"}
_STR_KEYS = {"pulse_shape"}
KNOWN_KEYS = _FLOAT_KEYS | _HZ_KEYS | _INT_KEYS | _LIST_KEYS | _STR_KEYS


def parse_items(text: str) -> dict[str, str]:
    """Split config text into an ordered key -> raw-value mapping."""

    items: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in items:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        items[key] = value
    return items


def _to_float(key: str, value: str) -> float:
    try:
        out = float(value)
    except ValueError as err:
        raise ConfigError(f"config key {key!r}: {value!r} is not a number") from err
    if not math.isfinite(out):
        raise ConfigError(f"config key {key!r} must be finite, got {value!r}")
    return out


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"config key {key!r}: {value!r} is not an integer") from err


def _to_list(key: str, value: str) -> tuple[float, ...]:
    return tuple(_to_float(key, part) for part in value.split(","))


def _angular(items: dict[str, str], key: str) -> float | None:
    """Value of an angular-frequency key, honoring the _hz twin."""

    hz_key = key + "_hz"
    if key in items and hz_key in items:
        raise ConfigError(f"give {key!r} (rad/s) or {hz_key!r} (Hz), not both")
    if key in items:
        return _to_float(key, items[key])
    if hz_key in items:
        return TWO_PI * _to_float(hz_key, items[hz_key])
    return None


def build_from_items(items: dict[str, str]) -> SimConfig:
    """Materialize a validated SimConfig from parsed key/value items."""

    for key in items:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")

    atom = AtomSpec(mass=_to_float("mass", items["mass"])) if "mass" in items else AtomSpec()

    base_laser = LaserSpec()
    det1 = _angular(items, "detuning1")
    det2 = _angular(items, "detuning2")
    det1 = base_laser.detuning1 if det1 is None else det1
    det2 = base_laser.detuning2 if det2 is None else det2
    omega0 = _angular(items, "omega0")
    rabi1 = _angular(items, "rabi1")
    rabi2 = _angular(items, "rabi2")
    if omega0 is not None and (rabi1 is not None or rabi2 is not None):
        raise ConfigError("omega0 fixes rabi1 and rabi2; do not give both forms")
    if omega0 is not None:
        product = omega0 * (det1 + det2)
        if product < 0.0:
            raise ConfigError("omega0 and detuning1 + detuning2 must have the same sign")
        rabi1 = rabi2 = math.sqrt(product)
    rabi1 = base_laser.rabi1 if rabi1 is None else rabi1
    rabi2 = base_laser.rabi2 if rabi2 is None else rabi2
    laser = LaserSpec(
        wavenumber=_to_float("wavenumber", items["wavenumber"]) if "wavenumber" in items else base_laser.wavenumber,
        rabi1=rabi1, rabi2=rabi2, detuning1=det1, detuning2=det2,
        phase1=_to_float("phase1", items["phase1"]) if "phase1" in items else 0.0,
        phase2=_to_float("phase2", items["phase2"]) if "phase2" in items else 0.0,
    )

    pulse = _build_pulse(items, laser, omega0)
    plate = PlateSpec(
        phase=_to_float("plate_phase", items["plate_phase"]) if "plate_phase" in items else 0.0,
        start_offset=_to_float("plate_offset", items["plate_offset"]) if "plate_offset" in items else 0.0,
    )
    rotation = RotationSpec(
        rate=_to_float("rotation_rate", items["rotation_rate"]) if "rotation_rate" in items else 0.0,
    )
    velocity = _to_float("velocity", items["velocity"]) if "velocity" in items else None
    packet_width = _to_float("packet_width", items["packet_width"]) if "packet_width" in items else None

    momentum_grid = None
    if "p_span_hbark" in items or "p_nodes" in items:
        span = _to_float("p_span_hbark", items.get("p_span_hbark", "8.0")) * HBAR * laser.wavenumber
        nodes = _to_int("p_nodes", items.get("p_nodes", "1024"))
        momentum_grid = MomentumGrid(-span, span, nodes)

    time_grid = None
    steps = _to_int("t_steps", items["t_steps"]) if "t_steps" in items else None
    if ("t_start" in items) != ("t_stop" in items):
        raise ConfigError("t_start and t_stop must be given together")
    if "t_start" in items:
        time_grid = TimeGrid(
            start=_to_float("t_start", items["t_start"]),
            stop=_to_float("t_stop", items["t_stop"]),
            steps=steps if steps is not None else 20000,
        )

    kwargs = dict(atom=atom, laser=laser, pulse=pulse, plate=plate, rotation=rotation,
                  velocity=velocity, packet_width=packet_width,
                  momentum_grid=momentum_grid, time_grid=time_grid)
    if time_grid is None and steps is not None:
        kwargs["time_steps"] = steps
    return build_config(**kwargs)


def _build_pulse(items: dict[str, str], laser: LaserSpec, omega0: float | None):
    shape = items.get("pulse_shape", "gaussian").strip().lower()
    if omega0 is None:
        omega0 = laser.rabi1 * laser.rabi2 / (laser.detuning1 + laser.detuning2)
    if shape == "gaussian":
        for key in ("pulse_duration", "zone_areas", "zone_centers", "zone_widths"):
            if key in items:
                raise ConfigError(f"config key {key!r} does not apply to a gaussian pulse")
        length = _to_float("pulse_length", items["pulse_length"]) if "pulse_length" in items else None
        return GaussianPulse(peak_rabi=omega0) if length is None else GaussianPulse(length=length, peak_rabi=omega0)
    if shape == "rect":
        if "pulse_duration" not in items:
            raise ConfigError("rect pulse needs pulse_duration")
        return RectPulse(duration=_to_float("pulse_duration", items["pulse_duration"]), rabi=omega0)
    if shape == "sequence":
        missing = [k for k in ("zone_areas", "zone_centers", "zone_widths") if k not in items]
        if missing:
            raise ConfigError(f"sequence pulse needs {', '.join(missing)}")
        areas = _to_list("zone_areas", items["zone_areas"])
        centers = _to_list("zone_centers", items["zone_centers"])
        widths = _to_list("zone_widths", items["zone_widths"])
        if not (len(areas) == len(centers) == len(widths)):
            raise ConfigError("zone_areas, zone_centers and zone_widths must have equal length")
        zones = tuple(PulseZone(area=a, center=c, width=w) for a, c, w in zip(areas, centers, widths))
        return SequencePulse(zones=zones)
    raise ConfigError(f"unknown pulse_shape {shape!r} (gaussian, rect or sequence)")


def parse_config(text: str) -> SimConfig:
    """Parse config text into a validated SimConfig."""

    return build_from_items(parse_items(text))


def load_config(path: str) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _span_units(p_max: float, wavenumber: float) -> float:
    """The float u that build_from_items turns back into exactly p_max.

    The parser computes u * HBAR * wavenumber; plain division can land an
    ulp off the preimage, which would make the emitted file parse into a
    different digest, so probe the neighbors too.
    """

    u = p_max / (HBAR * wavenumber)
    up1 = math.nextafter(u, math.inf)
    dn1 = math.nextafter(u, -math.inf)
    for candidate in (u, up1, dn1, math.nextafter(up1, math.inf), math.nextafter(dn1, -math.inf)):
        if candidate * HBAR * wavenumber == p_max:
            return candidate
    raise ConfigError(
        f"momentum bound {p_max!r} is not an exact multiple of hbar*k; "
        "it has no flat key = value representation"
    )


def resolved_config_lines(cfg: SimConfig) -> list[str]:
    """Flat key = value lines that parse back into an equal config."""

    lines = [
        f"mass = {cfg.atom.mass!r}",
        f"wavenumber = {cfg.laser.wavenumber!r}",
        f"rabi1 = {cfg.laser.rabi1!r}",
        f"rabi2 = {cfg.laser.rabi2!r}",
        f"detuning1 = {cfg.laser.detuning1!r}",
        f"detuning2 = {cfg.laser.detuning2!r}",
        f"phase1 = {cfg.laser.phase1!r}",
        f"phase2 = {cfg.laser.phase2!r}",
    ]
    pulse = cfg.pulse
    derived = cfg.laser.rabi1 * cfg.laser.rabi2 / (cfg.laser.detuning1 + cfg.laser.detuning2)
    if isinstance(pulse, (GaussianPulse, RectPulse)):
        # flat files carry no pulse-coupling key; the parser rebuilds it from
        # the laser, so emitting a config with a decoupled peak would round
        # trip into different physics
        peak = pulse.peak_rabi if isinstance(pulse, GaussianPulse) else pulse.rabi
        if peak != derived:
            raise ConfigError(
                f"pulse coupling {peak!r} is not rabi1*rabi2/(detuning1+detuning2) = {derived!r}; "
                "this config has no flat key = value representation"
            )
    if isinstance(pulse, GaussianPulse):
        lines += ["pulse_shape = gaussian", f"pulse_length = {pulse.length!r}"]
    elif isinstance(pulse, RectPulse):
        lines += ["pulse_shape = rect", f"pulse_duration = {pulse.duration!r}"]
    else:
        lines += [
            "pulse_shape = sequence",
            "zone_areas = " + ",".join(repr(z.area) for z in pulse.zones),
            "zone_centers = " + ",".join(repr(z.center) for z in pulse.zones),
            "zone_widths = " + ",".join(repr(z.width) for z in pulse.zones),
        ]
    grid = cfg.momentum_grid
    if grid.p_min != -grid.p_max:
        raise ConfigError(
            f"momentum grid [{grid.p_min!r}, {grid.p_max!r}] is not symmetric; "
            "it has no flat key = value representation"
        )
    lines += [
        f"plate_phase = {cfg.plate.phase!r}",
        f"plate_offset = {cfg.plate.start_offset!r}",
        f"rotation_rate = {cfg.rotation.rate!r}",
        f"velocity = {cfg.velocity!r}",
        f"packet_width = {cfg.packet_width!r}",
        f"p_span_hbark = {_span_units(grid.p_max, cfg.laser.wavenumber)!r}",
        f"p_nodes = {cfg.momentum_grid.nodes}",
        f"t_start = {cfg.time_grid.start!r}",
        f"t_stop = {cfg.time_grid.stop!r}",
        f"t_steps = {cfg.time_grid.steps}",
    ]
    return lines


@dataclass
class OutputTable:
    """Column-oriented numeric table with unit-tagged headers."""

    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    meta: dict[str, str] = field(default_factory=dict)

    def add_row(self, *values: float) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(tuple(float(v) for v in values))


def standard_meta(cfg: SimConfig | None, subcommand: str, extra: dict[str, str] | None = None) -> dict[str, str]:
    meta = {"tool": f"{TOOL_NAME} {__version__}", "subcommand": subcommand}
    if cfg is not None:
        meta["config_digest"] = config_digest(cfg)
    if extra:
        meta.update(extra)
    return meta


def format_float(x: float) -> str:
    """Shortest exact decimal form; nan stays literal 'nan'."""

    return repr(float(x))


def render_csv(table: OutputTable) -> str:
    out = _io.StringIO()
    for key, value in table.meta.items():
        out.write(f"# {key} = {value}\n")
    out.write(",".join(table.columns) + "\n")
    for row in table.rows:
        out.write(",".join(format_float(v) for v in row) + "\n")
    return out.getvalue()


def render_json(table: OutputTable) -> str:
    payload = {
        "meta": table.meta,
        "columns": list(table.columns),
        "rows": [[float(v) for v in row] for row in table.rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_table(table: OutputTable, fmt: str) -> str:
    if fmt == "csv":
        return render_csv(table)
    if fmt == "json":
        return render_json(table)
    raise ConfigError(f"unknown output format {fmt!r} (csv or json)")


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record for one tool invocation.

    Contains the resolved physics config, its digest and the argv that
    produced the run.  Deliberately hostless and timeless: rerunning the
    same invocation writes the same manifest, byte for byte.
    """

    subcommand: str
    argv: tuple[str, ...]
    digest: str
    config: dict

    def to_json(self) -> str:
        payload = {
            "tool": TOOL_NAME,
            "version": __version__,
            "subcommand": self.subcommand,
            "argv": list(self.argv),
            "config_digest": self.digest,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def make_manifest(cfg: SimConfig, subcommand: str, argv) -> RunManifest:
    return RunManifest(subcommand=subcommand, argv=tuple(str(a) for a in argv),
                       digest=config_digest(cfg), config=config_payload(cfg))


def parse_value_grid(text: str) -> np.ndarray:
    """Grid grammar for CLI flags: 'start:stop:count' or 'v1,v2,...'."""

    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {text!r} must be start:stop:count")
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
        if count < 1:
            raise ConfigError(f"grid spec {text!r}: count must be >= 1")
        return np.linspace(start, stop, count)
    return np.array([float(part) for part in text.split(",")], dtype=float)
