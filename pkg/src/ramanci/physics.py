"""Effective two-level couplings for the Raman manifold.

The long-lived pair (a at transverse momentum p, b at p + 2*hbar*k) forms a
closed manifold once the fast intermediate state is eliminated.  In the
frame where the mean kinetic phase has been removed, the generator for the
amplitude pair (alpha(p), beta(p + 2*hbar*k)) is

    H(p, t)/hbar = [[ Delta(p)/2 + Omega0(t)/2,  (Omega0(t)/2) e^{+i theta(t)} ],
                    [ (Omega0(t)/2) e^{-i theta(t)},  -Delta(p)/2 + Omega0(t)/2 ]]

with Delta(p) the full two-photon detuning of the manifold,

    Delta(p) = (delta1 - delta2) - 2*(k*p/m + hbar*k**2/m),

Omega0(t) the enveloped two-photon Rabi frequency, and theta(t) the coupling
phase: constant laser phase difference, plus the retardation-plate step,
plus the rotation-induced quadratic phase.  The common light shift
Omega0/2 sits on both diagonals and is physically unobservable here but is
kept so the propagated global phase matches the three-level reference.

The kinetic term above is the difference of the manifold kinetic energies,
(E_b(p+2hk) - E_a(p)) / hbar; the mean of the two is carried by the position
reconstruction, not by this generator (see wavepacket.reconstruct_position).
"""

from __future__ import annotations

import math

import numpy as np

from .config import ConfigError, GaussianPulse, RectPulse, SequencePulse, SimConfig
from .constants import HBAR


def effective_rabi(laser) -> float:
    """Peak two-photon Rabi frequency rabi1*rabi2/(detuning1+detuning2)."""

    total = laser.detuning1 + laser.detuning2
    if total == 0.0:
        raise ConfigError("detuning1 + detuning2 must not vanish")
    return laser.rabi1 * laser.rabi2 / total


def two_photon_detuning(p, cfg: SimConfig):
    """Full two-photon detuning Delta(p) of the (p, p+2hk) manifold.

    Affine in p with slope -2k/m; zero at the recoil-symmetric momentum
    p = -hbar*k when delta1 = delta2.  Accepts scalars or arrays.
    """

    k = cfg.laser.wavenumber
    m = cfg.atom.mass
    laser_part = cfg.laser.detuning1 - cfg.laser.detuning2
    return laser_part - 2.0 * (k * p / m + HBAR * k * k / m)


def envelope(t, cfg: SimConfig):
    """Instantaneous two-photon Rabi frequency Omega0(t).  Scalar or array."""

    pulse = cfg.pulse
    v = cfg.velocity
    if isinstance(pulse, GaussianPulse):
        arg = v * np.asarray(t, dtype=float) / pulse.length
        return pulse.peak_rabi * np.exp(-arg * arg)
    if isinstance(pulse, RectPulse):
        tt = np.asarray(t, dtype=float)
        return np.where(np.abs(tt) <= 0.5 * pulse.duration, pulse.rabi, 0.0)
    x = v * np.asarray(t, dtype=float)
    total = np.zeros_like(x)
    for zone in pulse.zones:
        peak = zone.area * v / (zone.width * math.sqrt(math.pi))
        arg = (x - zone.center) / zone.width
        total = total + peak * np.exp(-arg * arg)
    return total


def plate_phase(t, cfg: SimConfig):
    """Retardation phase: plate.phase once the atom is past the plate edge."""

    x = cfg.velocity * np.asarray(t, dtype=float)
    return np.where(x >= cfg.plate.start_offset, cfg.plate.phase, 0.0)


def rotation_phase(t, cfg: SimConfig):
    """Rotation-induced coupling phase, quadratic in time.

    A uniform rotation at ``rate`` displaces the beam wavefronts transversely
    by rate*t*x at the atom's position x = v_x*t; seen through the effective
    wavenumber 2k this is a coupling phase quadratic in t.  The sign fixes
    the orientation of the rotation axis: positive rate shifts the
    three-zone fringe minimum by +2*rate*A0*m/hbar.  The three-zone second
    difference theta(t0) - 2*theta(t0+T) + theta(t0+2T) has magnitude
    4*k*rate*v_x*T**2 independent of t0.
    """

    tt = np.asarray(t, dtype=float)
    return -2.0 * cfg.laser.wavenumber * cfg.rotation.rate * cfg.velocity * tt * tt


def coupling_phase(t, cfg: SimConfig):
    """Total coupling phase theta(t) entering the off-diagonal element."""

    return (cfg.laser.phase1 - cfg.laser.phase2) + plate_phase(t, cfg) + rotation_phase(t, cfg)


def effective_hamiltonian(p: float, t: float, cfg: SimConfig) -> np.ndarray:
    """The 2x2 manifold generator H/hbar at momentum p and time t.

    Reference implementation used by tests and by the documentation; the
    propagator inlines the same expressions for speed.
    """

    delta = two_photon_detuning(p, cfg)
    omega0 = float(envelope(t, cfg))
    theta = float(coupling_phase(t, cfg))
    half = 0.5 * omega0
    return np.array(
        [
            [0.5 * delta + half, half * np.exp(1j * theta)],
            [half * np.exp(-1j * theta), -0.5 * delta + half],
        ],
        dtype=complex,
    )


def pulse_length_scale(cfg: SimConfig) -> float:
    """Characteristic half-length L of the interaction region along x.

    Gaussian: the 1/e length.  Sequence: half the span between the outer
    zone centers.  Rect: half the swept length velocity*duration.
    """

    pulse = cfg.pulse
    if isinstance(pulse, GaussianPulse):
        return pulse.length
    if isinstance(pulse, SequencePulse):
        if len(pulse.zones) == 1:
            return 3.0 * pulse.zones[0].width
        return 0.5 * (pulse.zones[-1].center - pulse.zones[0].center)
    return 0.5 * cfg.velocity * pulse.duration
