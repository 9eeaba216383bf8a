"""Fringe scans, sinusoid fits, and rotation-response analysis.

A fringe scan varies the retardation-plate phase phi over at least one full
turn and records the final upper-state population.  The fitted model is the
first harmonic

    P_b(phi) = B - (C/2) * cos(phi - phi_min),          C >= 0,

so ``amplitude`` (= C) is the peak-to-peak excursion, ``visibility`` is
C / (2B), and ``phi_min`` locates the fringe minimum.  The model is linear
in (B, C cos(phi_min), C sin(phi_min)), so the fit is an exact least
squares on the basis [1, cos(phi), sin(phi)]: no iteration, no starting
point, and synthetic first-harmonic data comes back exactly.

The rotation response is measured by repeating the scan at several rotation
rates: the fringe-minimum shift delta-phi(rate) grows linearly through the
origin, and the effective Sagnac area follows from its slope,
A_eff = hbar * slope / (2 m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import physics, propagator
from .config import ConfigError, SimConfig, config_digest, with_rotation
from .constants import HBAR

# Re-exported convenience surface: these live with the state/transform code.
from .propagator import TrajectoryRecord, populations  # noqa: F401
from .wavepacket import PositionWavefunctions, centroid, reconstruct_position, spread  # noqa: F401

DEFAULT_PHI_GRID = np.linspace(0.0, 2.0 * math.pi, 17)
DEFAULT_ROTATION_RATES = (-0.2, -0.1, 0.0, 0.1, 0.2)
DEGENERATE_AMPLITUDE = 1e-9
MAX_RELATIVE_RESIDUAL = 0.05
MAX_LINEARITY_RESIDUAL = 1e-2
MAX_MINIMUM_SHIFT = math.pi / 4.0


class FringeFitError(RuntimeError):
    """The scan is not first-harmonic within the accepted residual."""

    def __init__(self, message: str, rms_residual: float):
        super().__init__(message)
        self.rms_residual = rms_residual


class LinearityError(RuntimeError):
    """The rotation response is outside the linear regime."""


@dataclass(frozen=True)
class FringeScan:
    """Final P_b versus plate phase, tagged with the generating config."""

    phi: np.ndarray
    pb: np.ndarray
    config_digest: str

    def validate(self) -> None:
        if self.phi.size < 8:
            raise ConfigError(f"fringe scan needs >= 8 phase samples, got {self.phi.size}")
        if np.any(np.diff(self.phi) <= 0.0):
            raise ConfigError("fringe scan phases must be strictly increasing")
        if float(self.phi[-1] - self.phi[0]) < 2.0 * math.pi - 1e-12:
            raise ConfigError("fringe scan must span at least 2*pi")


@dataclass(frozen=True)
class FringeFit:
    """First-harmonic fit of a fringe scan.

    ``phi_min`` is NaN for a degenerate (flat) scan; such fits are valid
    results, not errors.
    """

    offset: float
    amplitude: float
    visibility: float
    phi_min: float
    rms_residual: float

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.phi_min)


@dataclass(frozen=True)
class AreaEstimate:
    """Through-origin linear response of the fringe minimum to rotation."""

    rates: np.ndarray
    phase_shifts: np.ndarray
    slope: float
    area: float
    reference_area: float
    eta: float
    linearity_residual: float
    fits: tuple[FringeFit, ...]


def scan_phase(cfg: SimConfig, phi_values=None, workers: int = 1) -> FringeScan:
    """Run the final-population fringe scan over the plate-phase grid."""

    phi = DEFAULT_PHI_GRID.copy() if phi_values is None else np.asarray(phi_values, dtype=float)
    rates = np.full_like(phi, cfg.rotation.rate)
    scan = FringeScan(phi=phi, pb=np.empty_like(phi), config_digest=config_digest(cfg))
    scan.validate()
    pb = propagator.final_populations_batch(cfg, phi, rates, workers=workers)
    return FringeScan(phi=phi, pb=pb, config_digest=scan.config_digest)


def fit_fringe(scan: FringeScan) -> FringeFit:
    """Exact least-squares first-harmonic fit; see module docstring."""

    scan.validate()
    design = np.column_stack([np.ones_like(scan.phi), np.cos(scan.phi), np.sin(scan.phi)])
    coef, *_ = np.linalg.lstsq(design, scan.pb, rcond=None)
    offset, a, b = (float(c) for c in coef)
    amplitude = 2.0 * math.hypot(a, b)
    residual = scan.pb - design @ coef
    rms = float(np.sqrt(np.mean(residual**2)))
    if amplitude < DEGENERATE_AMPLITUDE:
        return FringeFit(offset=offset, amplitude=amplitude, visibility=0.0,
                         phi_min=math.nan, rms_residual=rms)
    # B - (C/2) cos(phi - phi_min) = B - (C/2)(cos phi cos phi_min + sin phi sin phi_min)
    phi_min = math.atan2(-b, -a) % (2.0 * math.pi)
    visibility = amplitude / (2.0 * offset) if offset != 0.0 else math.inf
    if rms > MAX_RELATIVE_RESIDUAL * amplitude:
        raise FringeFitError(
            f"fringe deviates from a first harmonic: rms residual {rms:.3e} exceeds "
            f"{MAX_RELATIVE_RESIDUAL:.0%} of the fitted amplitude {amplitude:.3e}",
            rms_residual=rms,
        )
    return FringeFit(offset=offset, amplitude=amplitude, visibility=visibility,
                     phi_min=phi_min, rms_residual=rms)


def bci_reference_area(cfg: SimConfig) -> float:
    """Geometric Sagnac area L^2 * 2 hbar k / (m v_x) of the ideal three-zone loop.

    L is the configured interaction half-length (the Gaussian 1/e length, or
    half the outer-zone separation for a zone sequence): the recoil splits
    the paths by (2 hbar k / m) * (L / v_x) over each of the two halves of
    the loop, enclosing L^2 * 2 hbar k / (m v_x).
    """

    length = physics.pulse_length_scale(cfg)
    return length * length * 2.0 * HBAR * cfg.laser.wavenumber / (cfg.atom.mass * cfg.velocity)


def _wrap_angle(x: float) -> float:
    """Map an angle difference into (-pi, pi]."""

    return -((-x + math.pi) % (2.0 * math.pi) - math.pi)


def effective_area(cfg: SimConfig, rotation_rates=None, phi_values=None,
                   workers: int = 1) -> AreaEstimate:
    """Measure the effective Sagnac area from fringe-minimum shifts.

    Runs one batched propagation over the (rate, phi) product grid, fits a
    fringe per rate, unwraps the minimum shifts relative to the zero-rate
    fringe, and fits the through-origin slope.  Raises LinearityError when a
    shift leaves the unambiguous window (|delta phi| >= pi/4) or the
    response is not linear within 1e-2 relative rms.
    """

    rates = np.asarray(DEFAULT_ROTATION_RATES if rotation_rates is None else rotation_rates, dtype=float)
    phi = DEFAULT_PHI_GRID.copy() if phi_values is None else np.asarray(phi_values, dtype=float)
    if rates.size < 3:
        raise ConfigError(f"need >= 3 rotation rates, got {rates.size}")
    if not np.any(rates == 0.0):
        raise ConfigError("rotation rates must include 0")
    nonzero = rates[rates != 0.0]
    if not any(-r in rates for r in nonzero):
        raise ConfigError("rotation rates must include at least one +/- pair")

    combo_rates = np.repeat(rates, phi.size)
    combo_phis = np.tile(phi, rates.size)
    pb = propagator.final_populations_batch(cfg, combo_phis, combo_rates, workers=workers)
    pb = pb.reshape(rates.size, phi.size)

    fits = []
    for i, rate in enumerate(rates):
        digest = config_digest(with_rotation(cfg, float(rate)))
        fits.append(fit_fringe(FringeScan(phi=phi, pb=pb[i], config_digest=digest)))
    zero_idx = int(np.nonzero(rates == 0.0)[0][0])
    ref = fits[zero_idx]
    if ref.degenerate:
        raise FringeFitError("zero-rate fringe is degenerate; no minimum to track", ref.rms_residual)

    shifts = np.empty_like(rates)
    for i, fit in enumerate(fits):
        if fit.degenerate:
            raise FringeFitError(f"fringe at rate {rates[i]:g} rad/s is degenerate", fit.rms_residual)
        shifts[i] = _wrap_angle(fit.phi_min - ref.phi_min)
    too_big = np.abs(shifts) >= MAX_MINIMUM_SHIFT
    if np.any(too_big):
        worst = float(np.max(np.abs(shifts)))
        raise LinearityError(
            f"fringe-minimum shift {worst:.3f} rad leaves the unambiguous window "
            f"(< {MAX_MINIMUM_SHIFT:.3f} rad); reduce the rotation rates"
        )

    denom = float(np.sum(rates * rates))
    slope = float(np.sum(rates * shifts)) / denom if denom > 0.0 else 0.0
    mask = rates != 0.0
    power = float(np.mean(shifts[mask] ** 2))
    if power > 0.0:
        resid = float(np.sqrt(np.mean((shifts[mask] - slope * rates[mask]) ** 2)))
        linearity = resid / math.sqrt(power)
    else:
        linearity = 0.0
    if linearity >= MAX_LINEARITY_RESIDUAL:
        raise LinearityError(
            f"rotation response is nonlinear: relative rms residual {linearity:.3e} "
            f"exceeds {MAX_LINEARITY_RESIDUAL:.0e}"
        )
    area = HBAR * slope / (2.0 * cfg.atom.mass)
    reference = bci_reference_area(cfg)
    return AreaEstimate(rates=rates, phase_shifts=shifts, slope=slope, area=area,
                        reference_area=reference, eta=area / reference,
                        linearity_residual=linearity, fits=tuple(fits))
