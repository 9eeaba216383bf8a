"""Configuration types for the Raman interferometer simulator.

All quantities are SI: masses in kg, wavenumbers in rad/m, angular
frequencies in rad/s, lengths in m, times in s.  A simulation is described
by a frozen :class:`SimConfig` tree; every run-level entry point takes one.

Geometry and conventions
------------------------
The atom moves along x with constant longitudinal velocity ``velocity`` and
crosses the (counter-propagating, z-directed) Raman beam pair.  Time is
measured from the crossing of the beam/pulse center, so the atom's
longitudinal position is x = velocity * t.  The transverse coordinate z is
resolved: internal state a pairs with transverse momentum p, internal state
b with p + 2*hbar*k (two photon recoils).

Laser detunings are stored as positive-red values ("resonance minus laser
frequency"), matching the sign convention in which the intermediate state
sits at -delta_1 in the rotating frame and the common light shift enters the
effective two-level diagonal as +omega_0/2.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace

from .constants import HBAR, TWO_PI


class ConfigError(ValueError):
    """A configuration violates one of its documented invariants."""


# Reference operating point: a thermal beam of 85Rb crossing a 3 mm Gaussian
# Raman beam pair at ~400 m/s, with a two-photon Rabi peak of 2*pi*70 kHz and
# both beams red-detuned 1.5 GHz from the intermediate state.
DEFAULT_MASS = 1.4100e-25               # kg
DEFAULT_WAVENUMBER = 8.0556e6           # rad/m (per beam)
DEFAULT_EFFECTIVE_RABI = TWO_PI * 7.0e4     # rad/s, peak two-photon Rabi
DEFAULT_DETUNING = TWO_PI * 1.5e9           # rad/s, single-photon (positive red)
DEFAULT_PULSE_LENGTH = 3.0e-3           # m, 1/e amplitude half-length of the beam
DEFAULT_PULSE_AREA_PARAMETER = 3.3      # dimensionless Omega0 * l / v_x
# Single-photon peak consistent with the two-photon peak at the default detunings.
DEFAULT_SINGLE_PHOTON_RABI = math.sqrt(DEFAULT_EFFECTIVE_RABI * 2.0 * DEFAULT_DETUNING)
DEFAULT_VELOCITY = DEFAULT_EFFECTIVE_RABI * DEFAULT_PULSE_LENGTH / DEFAULT_PULSE_AREA_PARAMETER

DEFAULT_MOMENTUM_HALF_SPAN_HBARK = 8.0  # grid reaches +-8 hbar*k by default
DEFAULT_MOMENTUM_NODES = 1024
DEFAULT_TIME_STEPS = 20000
ADIABATIC_RATIO_WARN = 0.1              # warn when |Omega_j / delta_j| exceeds this


@dataclass(frozen=True)
class AtomSpec:
    """The two long-lived internal states and the atomic mass."""

    mass: float = DEFAULT_MASS

    def validate(self) -> None:
        if not (self.mass > 0.0 and math.isfinite(self.mass)):
            raise ConfigError(f"atom mass must be finite and positive, got {self.mass!r}")


@dataclass(frozen=True)
class LaserSpec:
    """Counter-propagating Raman beam pair.

    ``wavenumber`` is the magnitude k of each beam's wavevector; the
    two-photon momentum transfer is 2*hbar*k.  ``detuning1``/``detuning2``
    are single-photon detunings from the intermediate state (positive-red
    convention, see module docstring); their sum must not vanish because the
    two-photon coupling is rabi1*rabi2/(detuning1+detuning2).
    """

    wavenumber: float = DEFAULT_WAVENUMBER
    rabi1: float = DEFAULT_SINGLE_PHOTON_RABI
    rabi2: float = DEFAULT_SINGLE_PHOTON_RABI
    detuning1: float = DEFAULT_DETUNING
    detuning2: float = DEFAULT_DETUNING
    phase1: float = 0.0
    phase2: float = 0.0

    def validate(self) -> None:
        if not (self.wavenumber > 0.0 and math.isfinite(self.wavenumber)):
            raise ConfigError(f"wavenumber must be positive, got {self.wavenumber!r}")
        if self.detuning1 + self.detuning2 == 0.0:
            raise ConfigError("detuning1 + detuning2 must not vanish (two-photon coupling diverges)")
        for name in ("rabi1", "rabi2", "detuning1", "detuning2", "phase1", "phase2"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"laser field {name} must be finite")
        for rabi, det, name in ((self.rabi1, self.detuning1, "1"), (self.rabi2, self.detuning2, "2")):
            if det != 0.0 and abs(rabi / det) > ADIABATIC_RATIO_WARN:
                warnings.warn(
                    f"|rabi{name}/detuning{name}| = {abs(rabi / det):.3g} exceeds "
                    f"{ADIABATIC_RATIO_WARN}; adiabatic elimination is unreliable here",
                    stacklevel=2,
                )


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian beam profile: Omega0(t) = peak * exp(-(v_x*t/length)**2).

    ``length`` is the 1/e amplitude half-length of the beam along x.
    """

    length: float = DEFAULT_PULSE_LENGTH
    peak_rabi: float = DEFAULT_EFFECTIVE_RABI

    def validate(self) -> None:
        if not (self.length > 0.0 and math.isfinite(self.length)):
            raise ConfigError(f"pulse length must be positive, got {self.length!r}")
        if not math.isfinite(self.peak_rabi):
            raise ConfigError("pulse peak rabi must be finite")


@dataclass(frozen=True)
class RectPulse:
    """Constant coupling of the given duration, centered on t = 0."""

    duration: float
    rabi: float

    def validate(self) -> None:
        if not (self.duration > 0.0 and math.isfinite(self.duration)):
            raise ConfigError(f"rect pulse duration must be positive, got {self.duration!r}")
        if not math.isfinite(self.rabi):
            raise ConfigError("rect pulse rabi must be finite")


@dataclass(frozen=True)
class PulseZone:
    """One zone of a multi-zone sequence: a narrow Gaussian sub-pulse.

    ``area`` is the time-integrated two-photon Rabi angle (rad), ``center``
    the zone position along x (m), ``width`` its 1/e amplitude half-length (m).
    """

    area: float
    center: float
    width: float


@dataclass(frozen=True)
class SequencePulse:
    """Superposition of spatially separated zones (e.g. pi/2 - pi - pi/2)."""

    zones: tuple[PulseZone, ...]

    def validate(self) -> None:
        if len(self.zones) < 1:
            raise ConfigError("sequence pulse needs at least one zone")
        centers = [z.center for z in self.zones]
        if any(c2 <= c1 for c1, c2 in zip(centers, centers[1:])):
            raise ConfigError(f"sequence zone centers must be strictly increasing, got {centers}")
        for z in self.zones:
            if not (z.width > 0.0 and math.isfinite(z.width)):
                raise ConfigError(f"zone width must be positive, got {z.width!r}")
            if not math.isfinite(z.area) or not math.isfinite(z.center):
                raise ConfigError("zone area and center must be finite")


PulseProfile = GaussianPulse | RectPulse | SequencePulse


@dataclass(frozen=True)
class PlateSpec:
    """Retardation plate covering the downstream part of the beam.

    The plate adds ``phase`` to the two-photon coupling phase while the atom
    is at x >= start_offset (x measured from the beam center, so
    start_offset is the plate edge position delta-l).
    """

    phase: float = 0.0
    start_offset: float = 0.0

    def validate(self) -> None:
        if not math.isfinite(self.phase) or not math.isfinite(self.start_offset):
            raise ConfigError("plate phase and start offset must be finite")


@dataclass(frozen=True)
class RotationSpec:
    """Uniform apparatus rotation about the y axis (rad/s).

    Positive ``rate`` is the sense that shifts the three-zone fringe minimum
    by +2*Omega*A0*m/hbar (see physics.rotation_phase).
    """

    rate: float = 0.0

    def validate(self) -> None:
        if not math.isfinite(self.rate):
            raise ConfigError("rotation rate must be finite")


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform transverse-momentum grid; nodes at p_min + (j + 0)*dp, endpoint excluded."""

    p_min: float
    p_max: float
    nodes: int

    @property
    def spacing(self) -> float:
        return (self.p_max - self.p_min) / self.nodes

    def values(self):
        import numpy as np

        return self.p_min + self.spacing * np.arange(self.nodes)

    def validate(self) -> None:
        if not (self.p_min < self.p_max):
            raise ConfigError(f"momentum grid needs p_min < p_max, got [{self.p_min!r}, {self.p_max!r}]")
        if self.nodes < 2 or self.nodes % 2 != 0:
            raise ConfigError(f"momentum node count must be even and >= 2, got {self.nodes}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid: ``steps`` steps from ``start`` to ``stop``."""

    start: float
    stop: float
    steps: int

    @property
    def dt(self) -> float:
        return (self.stop - self.start) / self.steps

    def validate(self) -> None:
        if not (self.start < self.stop):
            raise ConfigError(f"time grid needs start < stop, got [{self.start!r}, {self.stop!r}]")
        if self.steps < 1:
            raise ConfigError(f"time step count must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class SimConfig:
    """Complete, validated description of one simulation run."""

    atom: AtomSpec
    laser: LaserSpec
    pulse: PulseProfile
    plate: PlateSpec
    rotation: RotationSpec
    velocity: float
    packet_width: float
    momentum_grid: MomentumGrid
    time_grid: TimeGrid

    def validate(self) -> None:
        self.atom.validate()
        self.laser.validate()
        self.pulse.validate()
        self.plate.validate()
        self.rotation.validate()
        if not (self.velocity > 0.0 and math.isfinite(self.velocity)):
            raise ConfigError(f"longitudinal velocity must be positive, got {self.velocity!r}")
        if not (self.packet_width > 0.0 and math.isfinite(self.packet_width)):
            raise ConfigError(f"packet width must be positive, got {self.packet_width!r}")
        self.momentum_grid.validate()
        self.time_grid.validate()
        # The packet is centered at p=0 with momentum 1/e amplitude half-width
        # 2*hbar/w; the grid must reach at least +-6*hbar/w around it.
        reach = 6.0 * HBAR / self.packet_width
        if self.momentum_grid.p_min > -reach or self.momentum_grid.p_max < reach:
            raise ConfigError(
                f"momentum grid [{self.momentum_grid.p_min:.3e}, {self.momentum_grid.p_max:.3e}] "
                f"does not span +-6*hbar/w = +-{reach:.3e} kg*m/s around the packet"
            )
        self._validate_window()

    def _validate_window(self) -> None:
        t0, t1 = self.time_grid.start, self.time_grid.stop
        if isinstance(self.pulse, GaussianPulse):
            tau = self.pulse.length / self.velocity
            if t0 > -3.0 * tau or t1 < 3.0 * tau:
                raise ConfigError(
                    f"time window [{t0:.3e}, {t1:.3e}] s must cover +-3 pulse 1/e durations "
                    f"(+-{3.0 * tau:.3e} s) around the Gaussian pulse center"
                )
        elif isinstance(self.pulse, SequencePulse):
            lo = min(z.center - 3.0 * z.width for z in self.pulse.zones) / self.velocity
            hi = max(z.center + 3.0 * z.width for z in self.pulse.zones) / self.velocity
            if t0 > lo or t1 < hi:
                raise ConfigError(
                    f"time window [{t0:.3e}, {t1:.3e}] s must cover every zone +-3 widths "
                    f"([{lo:.3e}, {hi:.3e}] s)"
                )
        # Rect pulses may be clipped by the window on purpose (constant-coupling runs).


def _default_time_grid(pulse: PulseProfile, velocity: float, steps: int) -> TimeGrid:
    if isinstance(pulse, GaussianPulse):
        half = 3.0 * pulse.length / velocity
        return TimeGrid(-half, half, steps)
    if isinstance(pulse, RectPulse):
        return TimeGrid(-0.5 * pulse.duration, 0.5 * pulse.duration, steps)
    lo = min(z.center - 3.0 * z.width for z in pulse.zones) / velocity
    hi = max(z.center + 3.0 * z.width for z in pulse.zones) / velocity
    return TimeGrid(lo, hi, steps)


def build_config(
    atom: AtomSpec | None = None,
    laser: LaserSpec | None = None,
    pulse: PulseProfile | None = None,
    plate: PlateSpec | None = None,
    rotation: RotationSpec | None = None,
    velocity: float | None = None,
    packet_width: float | None = None,
    momentum_grid: MomentumGrid | None = None,
    time_grid: TimeGrid | None = None,
    time_steps: int = DEFAULT_TIME_STEPS,
) -> SimConfig:
    """Materialize a config, deriving grid defaults from the physics fields.

    Omitted pieces fall back to the documented reference operating point;
    the momentum grid defaults to +-8 hbar*k with 1024 nodes and the time
    grid to +-3 pulse durations with ``time_steps`` steps.
    """

    atom = atom or AtomSpec()
    laser = laser or LaserSpec()
    laser.validate()
    if pulse is None:
        # same arithmetic as the config-file path, so defaults round trip
        # through flat key = value files bit for bit
        pulse = GaussianPulse(peak_rabi=laser.rabi1 * laser.rabi2 / (laser.detuning1 + laser.detuning2))
    plate = plate or PlateSpec()
    rotation = rotation or RotationSpec()
    if velocity is None:
        velocity = DEFAULT_VELOCITY
    if packet_width is None:
        packet_width = 1.0 / laser.wavenumber
    if momentum_grid is None:
        half = DEFAULT_MOMENTUM_HALF_SPAN_HBARK * HBAR * laser.wavenumber
        momentum_grid = MomentumGrid(-half, half, DEFAULT_MOMENTUM_NODES)
    if time_grid is None:
        time_grid = _default_time_grid(pulse, velocity, time_steps)
    cfg = SimConfig(
        atom=atom,
        laser=laser,
        pulse=pulse,
        plate=plate,
        rotation=rotation,
        velocity=velocity,
        packet_width=packet_width,
        momentum_grid=momentum_grid,
        time_grid=time_grid,
    )
    cfg.validate()
    return cfg


def default_config(**overrides) -> SimConfig:
    """The reference operating point, optionally with field overrides."""

    return build_config(**overrides)


def config_payload(cfg: SimConfig) -> dict:
    """Nested plain-dict view of the physics fields, for digests and manifests.

    Floats are kept as floats; json.dumps renders them via repr, which round
    trips exactly in both directions.
    """

    pulse = cfg.pulse
    if isinstance(pulse, GaussianPulse):
        pulse_payload = {"shape": "gaussian", "length": pulse.length, "peak_rabi": pulse.peak_rabi}
    elif isinstance(pulse, RectPulse):
        pulse_payload = {"shape": "rect", "duration": pulse.duration, "rabi": pulse.rabi}
    else:
        pulse_payload = {
            "shape": "sequence",
            "zones": [{"area": z.area, "center": z.center, "width": z.width} for z in pulse.zones],
        }
    return {
        "atom": {"mass": cfg.atom.mass},
        "laser": {
            "wavenumber": cfg.laser.wavenumber,
            "rabi1": cfg.laser.rabi1,
            "rabi2": cfg.laser.rabi2,
            "detuning1": cfg.laser.detuning1,
            "detuning2": cfg.laser.detuning2,
            "phase1": cfg.laser.phase1,
            "phase2": cfg.laser.phase2,
        },
        "pulse": pulse_payload,
        "plate": {"phase": cfg.plate.phase, "start_offset": cfg.plate.start_offset},
        "rotation": {"rate": cfg.rotation.rate},
        "velocity": cfg.velocity,
        "packet_width": cfg.packet_width,
        "momentum_grid": {
            "p_min": cfg.momentum_grid.p_min,
            "p_max": cfg.momentum_grid.p_max,
            "nodes": cfg.momentum_grid.nodes,
        },
        "time_grid": {
            "start": cfg.time_grid.start,
            "stop": cfg.time_grid.stop,
            "steps": cfg.time_grid.steps,
        },
    }


def config_digest(cfg: SimConfig) -> str:
    """Hex digest identifying the physics content of a config.

    Depends only on the fields in :func:`config_payload`; run metadata such
    as timestamps or worker counts never enters.
    """

    canonical = json.dumps(config_payload(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def with_plate(cfg: SimConfig, phase: float, start_offset: float) -> SimConfig:
    out = replace(cfg, plate=PlateSpec(phase=phase, start_offset=start_offset))
    out.validate()
    return out


def with_rotation(cfg: SimConfig, rate: float) -> SimConfig:
    out = replace(cfg, rotation=RotationSpec(rate=rate))
    out.validate()
    return out
