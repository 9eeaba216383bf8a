"""Canned experiment drivers: trajectories, plate sweeps, three-zone runs.

Two interferometer geometries share the same engine:

* the continuously guided geometry, a single Gaussian beam crossed once,
  with a retardation plate covering its downstream part from offset dl; and
* the three-zone geometry of narrow pi/2, pi, pi/2 zones at x = -L, 0, +L,
  the plate covering only the final zone.

Sweep points and rate scans are independent jobs; with ``workers`` > 1 they
are distributed over a process pool and reassembled in parameter order, so
the output is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import observables, physics, propagator
from .config import (
    DEFAULT_MASS,
    ConfigError,
    LaserSpec,
    MomentumGrid,
    PlateSpec,
    PulseZone,
    RotationSpec,
    SequencePulse,
    SimConfig,
    build_config,
    config_digest,
    default_config,
    with_plate,
    with_rotation,
)
from .constants import HBAR
from .observables import (
    AreaEstimate,
    FringeFit,
    FringeFitError,
    FringeScan,
    LinearityError,
)
from .propagator import TrajectoryRecord

SWEEP_ROTATION_RATES = (-0.05, 0.0, 0.05)
DEFAULT_SWEEP_GRID = np.linspace(-1.0, 1.0, 41)
LINEARITY_RATE_GRID = (-0.05, -0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02, 0.05)


def run_trajectories(cfg: SimConfig | None = None, record_stride: int = 20,
                     workers: int = 1) -> TrajectoryRecord:
    """Propagate the defaults with no plate phase and no rotation.

    Returns the stride-sampled populations, centroids and spreads of both
    components over the beam crossing.
    """

    cfg = cfg if cfg is not None else default_config()
    cfg = replace(cfg, plate=PlateSpec(phase=0.0, start_offset=cfg.plate.start_offset),
                  rotation=RotationSpec(0.0))
    cfg.validate()
    return propagator.propagate(cfg, record_stride=record_stride, workers=workers).trajectory


def recoil_slope(trajectory: TrajectoryRecord, min_population: float = 0.2) -> float:
    """Linear slope of centroid_b over the window where P_b is substantial.

    Fits the contiguous sample window around the maximum of P_b in which
    P_b >= min_population; raises when fewer than four samples qualify.
    """

    pop = trajectory.pop_b
    peak = int(np.argmax(pop))
    lo = peak
    while lo > 0 and pop[lo - 1] >= min_population:
        lo -= 1
    hi = peak
    while hi + 1 < pop.size and pop[hi + 1] >= min_population:
        hi += 1
    if hi - lo + 1 < 4:
        raise LinearityError(
            f"only {hi - lo + 1} trajectory samples have P_b >= {min_population}; "
            "cannot measure the recoil slope"
        )
    t = trajectory.times[lo : hi + 1]
    z = trajectory.centroid_b[lo : hi + 1]
    if np.any(~np.isfinite(z)):
        raise LinearityError("centroid_b undefined inside the fit window")
    slope = np.polyfit(t, z, 1)[0]
    return float(slope)


@dataclass(frozen=True)
class SweepRow:
    dl_over_l: float
    amplitude: float
    visibility: float
    phi_min: float
    eta: float
    fit_ok: bool
    note: str


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    rates: tuple[float, ...]


def _sweep_point(args) -> SweepRow:
    cfg, ratio, rates, phi = args
    length = physics.pulse_length_scale(cfg)
    pointed = with_plate(cfg, cfg.plate.phase, ratio * length)
    try:
        est = observables.effective_area(pointed, rotation_rates=rates, phi_values=phi)
    except (FringeFitError, LinearityError) as err:
        # The area extraction failed (typically a vanishing linear response
        # near zero offset); keep the zero-rotation fringe numbers if those
        # are still measurable.
        try:
            fit = observables.fit_fringe(observables.scan_phase(
                replace(pointed, rotation=RotationSpec(0.0)), phi_values=phi))
        except FringeFitError:
            return SweepRow(dl_over_l=ratio, amplitude=math.nan, visibility=math.nan,
                            phi_min=math.nan, eta=math.nan, fit_ok=False, note=str(err))
        return SweepRow(dl_over_l=ratio, amplitude=fit.amplitude, visibility=fit.visibility,
                        phi_min=fit.phi_min, eta=math.nan, fit_ok=False, note=str(err))
    zero_idx = int(np.nonzero(est.rates == 0.0)[0][0])
    fit = est.fits[zero_idx]
    return SweepRow(dl_over_l=ratio, amplitude=fit.amplitude, visibility=fit.visibility,
                    phi_min=fit.phi_min, eta=est.eta, fit_ok=True, note="")


def sweep_plate_position(cfg: SimConfig | None = None, dl_over_l=None,
                         rotation_rates=SWEEP_ROTATION_RATES, phi_values=None,
                         workers: int = 1) -> SweepResult:
    """Fringe amplitude, visibility and area quality versus plate offset.

    ``dl_over_l`` values are plate offsets in units of the interaction
    half-length.  Rows whose fringe fit or rotation response fails are
    flagged (fit_ok False, NaN metrics) and kept in place.
    """

    cfg = cfg if cfg is not None else default_config()
    ratios = DEFAULT_SWEEP_GRID.copy() if dl_over_l is None else np.asarray(dl_over_l, dtype=float)
    if np.any(np.abs(ratios) > 1.5):
        raise ConfigError("plate offsets are limited to |dl/l| <= 1.5")
    jobs = [(cfg, float(r), tuple(rotation_rates), phi_values) for r in ratios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    return SweepResult(rows=tuple(rows), rates=tuple(float(r) for r in rotation_rates))


BCI_ZONE_WIDTH_FRACTION = 5.0e-4  # zone 1/e half-length over zone separation
BCI_PACKET_WIDTH_FACTOR = 200.0   # packet width over 1/k: momentum-narrow
BCI_ROTATION_RATES = (-0.1, -0.05, 0.0, 0.05, 0.1)


def bci_config(zone_separation: float = 3.0e-3, velocity: float | None = None,
               zone_width: float | None = None, nodes: int = 128,
               time_steps: int = 80000,
               packet_width: float | None = None) -> SimConfig:
    """Three-zone pi/2 - pi - pi/2 geometry with a momentum-narrow packet.

    The zones sit at x = -L, 0, +L; the plate covers x >= L/2, i.e. exactly
    the final zone.  The beam detunings carry a two-photon offset of
    2*hbar*k^2/m so the manifold is resonant at the packet center.  The
    default zone width is narrow enough that the finite-pulse timing
    correction (effective splitter times shift outward by about 0.65 of the
    zone crossing time) stays below the 1e-3 area tolerance.
    """

    base = LaserSpec()
    k = base.wavenumber
    width = zone_width if zone_width is not None else BCI_ZONE_WIDTH_FRACTION * zone_separation
    if packet_width is None:
        packet_width = BCI_PACKET_WIDTH_FACTOR / k
    recoil_offset = 2.0 * HBAR * k * k / DEFAULT_MASS
    laser = replace(base, detuning1=base.detuning1 + recoil_offset)
    zones = (
        PulseZone(area=math.pi / 2.0, center=-zone_separation, width=width),
        PulseZone(area=math.pi, center=0.0, width=width),
        PulseZone(area=math.pi / 2.0, center=+zone_separation, width=width),
    )
    # span as a units-of-hbar*k float times hbar*k, the same arithmetic the
    # flat-file parser uses, so the config survives emit/parse exactly
    span_units = 8.0 / (packet_width * k)
    half_span = span_units * HBAR * k
    return build_config(
        laser=laser,
        pulse=SequencePulse(zones=zones),
        plate=PlateSpec(phase=0.0, start_offset=0.5 * zone_separation),
        velocity=velocity,
        packet_width=packet_width,
        momentum_grid=MomentumGrid(-half_span, half_span, nodes),
        time_steps=time_steps,
    )


def no_mirror_config(cfg: SimConfig) -> SimConfig:
    """Zero the central zone's area, leaving the recoil paths unclosed.

    The two components then separate by (2 hbar k / m) * 2 L / v_x by the
    final zone.  Once the packet is narrower than that separation the
    overlap dies and the fringe collapses; a packet much wider (such as the
    momentum-narrow default of ``bci_config``) still overlaps itself and
    keeps near-unit Ramsey visibility.
    """

    if not isinstance(cfg.pulse, SequencePulse) or len(cfg.pulse.zones) != 3:
        raise ConfigError("no-mirror variant requires the three-zone sequence")
    mid = cfg.pulse.zones[1]
    zones = (cfg.pulse.zones[0],
             PulseZone(area=0.0, center=mid.center, width=mid.width),
             cfg.pulse.zones[2])
    out = replace(cfg, pulse=SequencePulse(zones=zones))
    out.validate()
    return out


@dataclass(frozen=True)
class BciResult:
    scan: FringeScan
    fit: FringeFit
    estimate: AreaEstimate


def run_bci(cfg: SimConfig | None = None, rotation_rates=BCI_ROTATION_RATES,
            phi_values=None, workers: int = 1) -> BciResult:
    """Three-zone fringe scan plus rotation response on the canned geometry."""

    cfg = cfg if cfg is not None else bci_config()
    est = observables.effective_area(cfg, rotation_rates=rotation_rates,
                                     phi_values=phi_values, workers=workers)
    zero_idx = int(np.nonzero(est.rates == 0.0)[0][0])
    phi = observables.DEFAULT_PHI_GRID.copy() if phi_values is None else np.asarray(phi_values, dtype=float)
    scan = observables.scan_phase(replace(cfg, rotation=RotationSpec(0.0)),
                                  phi_values=phi, workers=workers)
    return BciResult(scan=scan, fit=est.fits[zero_idx], estimate=est)


@dataclass(frozen=True)
class LinearityResult:
    rates: np.ndarray
    phase_shifts: np.ndarray
    reference_slope: float
    deviations: np.ndarray
    max_linear_rate: float


LINEARITY_PLATE_RATIO = 0.48  # default operating point: the amplitude maximum


def sagnac_linearity(cfg: SimConfig | None = None, rate_grid=LINEARITY_RATE_GRID,
                     phi_values=None, workers: int = 1) -> LinearityResult:
    """Fringe-minimum shift over a decade of rotation rates.

    The reference slope comes from the smallest +/- rate pair; deviations
    are relative to the through-origin line it defines.  ``max_linear_rate``
    is the largest magnitude whose deviation stays below 1%.

    With no explicit ``cfg`` the scan runs at the plate offset of maximum
    fringe amplitude.  At zero offset the leading fringe shift is quadratic
    in the rate (the half-covered pulse encloses no effective area), so a
    through-origin slope would be meaningless there.
    """

    if cfg is None:
        base = default_config()
        cfg = with_plate(base, base.plate.phase,
                         LINEARITY_PLATE_RATIO * physics.pulse_length_scale(base))
    rates = np.asarray(sorted(set(float(r) for r in rate_grid) | {0.0}), dtype=float)
    nonzero = np.abs(rates[rates != 0.0])
    if nonzero.size == 0 or nonzero.max() / nonzero.min() < 10.0 * (1.0 - 1e-9):
        raise ConfigError("linearity rate grid must span at least a decade")

    phi = observables.DEFAULT_PHI_GRID.copy() if phi_values is None else np.asarray(phi_values, dtype=float)
    combo_rates = np.repeat(rates, phi.size)
    combo_phis = np.tile(phi, rates.size)
    pb = propagator.final_populations_batch(cfg, combo_phis, combo_rates, workers=workers)
    pb = pb.reshape(rates.size, phi.size)
    fits = [observables.fit_fringe(FringeScan(phi=phi, pb=pb[i],
                                              config_digest=config_digest(with_rotation(cfg, float(r)))))
            for i, r in enumerate(rates)]
    zero_idx = int(np.nonzero(rates == 0.0)[0][0])
    ref = fits[zero_idx]
    shifts = np.array([observables._wrap_angle(f.phi_min - ref.phi_min) for f in fits])

    smallest = float(nonzero.min())
    up = shifts[np.nonzero(rates == smallest)[0][0]]
    dn = shifts[np.nonzero(rates == -smallest)[0][0]]
    slope = float((up - dn) / (2.0 * smallest))
    model = slope * rates
    with np.errstate(divide="ignore", invalid="ignore"):
        deviations = np.where(rates == 0.0, 0.0, np.abs(shifts - model) / np.abs(model))
    ok = np.abs(rates)[deviations <= MAX_LINEAR_DEVIATION]
    max_linear = float(ok.max()) if ok.size else 0.0
    return LinearityResult(rates=rates, phase_shifts=shifts, reference_slope=slope,
                           deviations=deviations, max_linear_rate=max_linear)


MAX_LINEAR_DEVIATION = 0.01
