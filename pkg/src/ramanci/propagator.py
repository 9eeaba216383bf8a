"""Momentum-space propagation of the Raman manifold.

Each momentum node p carries an independent amplitude pair
(alpha(p), beta(p+2hk)); the coupling never moves population between nodes,
so the whole grid advances under a family of decoupled 2x2 unitaries.  One
time step applies the exact exponential of the generator sampled at the
step midpoint:

    U = exp(-i Omega0 dt / 2) [ cos(w dt) I - i sin(w dt)/w * (n . sigma) ]

with n = (Omega0 cos(theta)/2, -Omega0 sin(theta)/2, Delta/2) and
w = |n| = sqrt(Delta^2 + Omega0^2)/2.  The step is norm-preserving to
rounding and second-order accurate in dt for time-dependent pulses.

The batched engine evolves a stack of (plate phase, rotation rate) variants
of one configuration in a single pass: the detuning array and the envelope
schedule are shared, only the per-step coupling phase differs.  Fringe
scans and rotation sweeps use this path.

Node parallelism: the momentum grid may be split into contiguous slices and
evolved by worker threads.  Per-element arithmetic does not depend on the
slicing and every reduction (populations, norms) runs over the reassembled
full-grid array, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import physics, wavepacket
from .config import ConfigError, GaussianPulse, RectPulse, SimConfig
from .constants import HBAR


class ResolutionError(ConfigError):
    """The time step is too coarse for the fastest configured scale."""


STEP_ANGLE_LIMIT = 0.1  # max allowed |dt| * max(|Omega0|, |Delta|), rad


@dataclass(frozen=True)
class ManifoldState:
    """Amplitude pair on the momentum grid at one instant."""

    p: np.ndarray
    dp: float
    alpha: np.ndarray
    beta: np.ndarray
    time: float

    def norm(self) -> float:
        return float((np.sum(np.abs(self.alpha) ** 2) + np.sum(np.abs(self.beta) ** 2)) * self.dp)

    def node_norms(self) -> np.ndarray:
        return (np.abs(self.alpha) ** 2 + np.abs(self.beta) ** 2) * self.dp


@dataclass(frozen=True)
class TrajectoryRecord:
    """Stride-sampled observables along one propagation."""

    times: np.ndarray
    pop_a: np.ndarray
    pop_b: np.ndarray
    centroid_a: np.ndarray
    centroid_b: np.ndarray
    spread_a: np.ndarray
    spread_b: np.ndarray


@dataclass(frozen=True)
class EvolutionResult:
    final_state: ManifoldState
    trajectory: TrajectoryRecord


def init_wavepacket(cfg: SimConfig) -> ManifoldState:
    """Gaussian packet in state a, centered at p = 0, defined at the grid start.

    The momentum amplitude exp(-(p w / 2 hbar)^2) is conjugate to the
    position packet exp(-(z/w)^2) (1/e amplitude half-widths 2*hbar/w and w).
    The amplitude is renormalized on the grid after checking that less than
    1e-6 of the continuum norm falls outside it.
    """

    grid = cfg.momentum_grid
    p = grid.values()
    sigma = HBAR / cfg.packet_width  # std of |alpha|^2
    inside = 0.5 * (math.erf(grid.p_max / (sigma * math.sqrt(2.0))) - math.erf(grid.p_min / (sigma * math.sqrt(2.0))))
    if 1.0 - inside > 1e-6:
        raise ConfigError(
            f"momentum grid too narrow: {1.0 - inside:.3e} of the packet norm lies outside "
            f"[{grid.p_min:.3e}, {grid.p_max:.3e}] kg*m/s"
        )
    alpha = np.exp(-((p * cfg.packet_width / (2.0 * HBAR)) ** 2)).astype(complex)
    alpha /= math.sqrt(float(np.sum(np.abs(alpha) ** 2)) * grid.spacing)
    beta = np.zeros_like(alpha)
    return ManifoldState(p=p, dp=grid.spacing, alpha=alpha, beta=beta, time=cfg.time_grid.start)


def populations(state: ManifoldState) -> tuple[float, float]:
    """(P_a, P_b): norm in each component, summed over the full grid."""

    pa = float(np.sum(np.abs(state.alpha) ** 2)) * state.dp
    pb = float(np.sum(np.abs(state.beta) ** 2)) * state.dp
    return pa, pb


def _max_detuning(cfg: SimConfig) -> float:
    p = cfg.momentum_grid
    d0 = physics.two_photon_detuning(p.p_min, cfg)
    d1 = physics.two_photon_detuning(p.p_max, cfg)
    return max(abs(float(d0)), abs(float(d1)))


def peak_envelope(cfg: SimConfig) -> float:
    pulse = cfg.pulse
    if isinstance(pulse, GaussianPulse):
        return abs(pulse.peak_rabi)
    if isinstance(pulse, RectPulse):
        return abs(pulse.rabi)
    return max(abs(z.area) * cfg.velocity / (z.width * math.sqrt(math.pi)) for z in pulse.zones)


def check_resolution(cfg: SimConfig, dt: float | None = None) -> None:
    """Raise ResolutionError unless |dt| resolves both Omega0 and Delta."""

    if dt is None:
        dt = cfg.time_grid.dt
    scale_env = peak_envelope(cfg)
    scale_det = _max_detuning(cfg)
    if abs(dt) * scale_env > STEP_ANGLE_LIMIT:
        raise ResolutionError(
            f"time step {dt:.3e} s too coarse for the peak coupling {scale_env:.3e} rad/s "
            f"(|dt*Omega0| = {abs(dt) * scale_env:.3f} > {STEP_ANGLE_LIMIT})"
        )
    if abs(dt) * scale_det > STEP_ANGLE_LIMIT:
        raise ResolutionError(
            f"time step {dt:.3e} s too coarse for the largest two-photon detuning "
            f"{scale_det:.3e} rad/s (|dt*Delta| = {abs(dt) * scale_det:.3f} > {STEP_ANGLE_LIMIT})"
        )


def _apply_step(alpha, beta, delta_half, omega0, theta, dt):
    """One midpoint unitary on amplitude arrays; broadcasts over leading axes.

    ``theta`` may be a scalar or an array broadcastable against the leading
    (batch) axes of alpha/beta; ``delta_half`` spans the trailing node axis.
    """

    half = 0.5 * omega0
    w = np.hypot(delta_half, half)
    c = np.cos(w * dt)
    s = dt * np.sinc(w * dt / np.pi)  # sin(w dt)/w, well-defined at w = 0
    diag = c - 1j * (s * delta_half)
    offmag = s * half
    phase = np.exp(1j * theta)
    glob = np.exp(-0.5j * omega0 * dt)
    new_alpha = glob * (diag * alpha - 1j * offmag * (phase * beta))
    new_beta = glob * (np.conj(diag) * beta - 1j * offmag * (np.conj(phase) * alpha))
    return new_alpha, new_beta


def step_manifold(state: ManifoldState, dt: float, cfg: SimConfig) -> ManifoldState:
    """Advance the state by one (possibly negative) time step of size dt."""

    t_mid = state.time + 0.5 * dt
    omega0 = float(physics.envelope(t_mid, cfg))
    scale = max(abs(omega0), _max_detuning(cfg))
    if abs(dt) * scale > STEP_ANGLE_LIMIT:
        raise ResolutionError(
            f"|dt| * max(|Omega0|, |Delta|) = {abs(dt) * scale:.3f} exceeds {STEP_ANGLE_LIMIT} rad "
            f"(dt = {dt:.3e} s, limiting scale {scale:.3e} rad/s)"
        )
    delta_half = 0.5 * physics.two_photon_detuning(state.p, cfg)
    theta = float(physics.coupling_phase(t_mid, cfg))
    alpha, beta = _apply_step(state.alpha, state.beta, delta_half, omega0, theta, dt)
    return ManifoldState(p=state.p, dp=state.dp, alpha=alpha, beta=beta, time=state.time + dt)


def _record_steps(total_steps: int, stride: int) -> np.ndarray:
    idx = np.arange(0, total_steps + 1, stride)
    if idx[-1] != total_steps:
        idx = np.append(idx, total_steps)
    return idx


def _evolve_slice(alpha, beta, delta_half, env_mid, theta_mid, dt, snap_at, snaps_a, snaps_b, col):
    """Time loop over one contiguous node slice; snapshots land in ``col``.

    ``theta_mid`` has shape (steps,) + broadcastable batch shape; the state
    arrays are (batch..., nodes).
    """

    pos = 0
    if snap_at.size and snap_at[0] == 0:
        snaps_a[0][..., col] = alpha
        snaps_b[0][..., col] = beta
        pos = 1
    for s in range(env_mid.size):
        alpha, beta = _apply_step(alpha, beta, delta_half, env_mid[s], theta_mid[s], dt)
        if pos < snap_at.size and snap_at[pos] == s + 1:
            snaps_a[pos][..., col] = alpha
            snaps_b[pos][..., col] = beta
            pos += 1
    return alpha, beta


def _evolve(cfg: SimConfig, plate_phases, rotation_rates, init: ManifoldState,
            record_stride: int | None = None, workers: int = 1):
    """Shared engine: evolve combo variants of one config over the full grid.

    ``plate_phases`` and ``rotation_rates`` are equal-length 1-D arrays (the
    combo axis); scalar inputs run the plain single-combo path.  Returns
    (alpha, beta, snapshots) with state arrays shaped (combos, nodes) or
    (nodes,) for scalar input, and snapshots None unless ``record_stride``.
    """

    check_resolution(cfg)
    tg = cfg.time_grid
    dt = tg.dt
    steps = tg.steps
    t_mid = tg.start + dt * (np.arange(steps) + 0.5)

    phases = np.asarray(plate_phases, dtype=float)
    rates = np.asarray(rotation_rates, dtype=float)
    scalar = phases.ndim == 0
    if phases.shape != rates.shape:
        raise ValueError("plate_phases and rotation_rates must have matching shapes")

    env_mid = np.asarray(physics.envelope(t_mid, cfg), dtype=float)
    base = cfg.laser.phase1 - cfg.laser.phase2
    plate_on = (cfg.velocity * t_mid >= cfg.plate.start_offset).astype(float)
    rot_quad = -2.0 * cfg.laser.wavenumber * cfg.velocity * t_mid * t_mid
    # theta[s] = base + plate_on[s] * phase_c + rot_quad[s] * rate_c
    if scalar:
        theta_mid = base + plate_on * float(phases) + rot_quad * float(rates)
        alpha0 = init.alpha.copy()
        beta0 = init.beta.copy()
    else:
        theta_mid = base + plate_on[:, None] * phases[None, :] + rot_quad[:, None] * rates[None, :]
        theta_mid = theta_mid[:, :, None]  # broadcast over the node axis
        alpha0 = np.broadcast_to(init.alpha, (phases.size, init.alpha.size)).copy()
        beta0 = np.broadcast_to(init.beta, (phases.size, init.beta.size)).copy()

    delta_half = 0.5 * physics.two_photon_detuning(init.p, cfg)

    snap_at = _record_steps(steps, record_stride) if record_stride else np.empty(0, dtype=int)
    snaps_a = [np.empty_like(alpha0) for _ in range(snap_at.size)]
    snaps_b = [np.empty_like(beta0) for _ in range(snap_at.size)]

    n = init.p.size
    workers = max(1, int(workers))
    if workers == 1 or n < 2 * workers:
        a_fin, b_fin = _evolve_slice(alpha0, beta0, delta_half, env_mid, theta_mid, dt,
                                     snap_at, snaps_a, snaps_b, slice(None))
        alpha_out, beta_out = a_fin, b_fin
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        cols = [slice(bounds[i], bounds[i + 1]) for i in range(workers)]
        alpha_out = np.empty_like(alpha0)
        beta_out = np.empty_like(beta0)

        def run(col):
            a_fin, b_fin = _evolve_slice(alpha0[..., col].copy(), beta0[..., col].copy(),
                                         delta_half[col], env_mid, theta_mid, dt,
                                         snap_at, snaps_a, snaps_b, col)
            alpha_out[..., col] = a_fin
            beta_out[..., col] = b_fin

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, cols))

    snap_times = tg.start + dt * snap_at if snap_at.size else None
    return alpha_out, beta_out, (snap_times, snaps_a, snaps_b)


def _trajectory(cfg: SimConfig, snap_times, snaps_a, snaps_b, dp: float) -> TrajectoryRecord:
    m = snap_times.size
    pop_a = np.empty(m)
    pop_b = np.empty(m)
    cen_a = np.empty(m)
    cen_b = np.empty(m)
    spr_a = np.empty(m)
    spr_b = np.empty(m)
    for i in range(m):
        a, b = snaps_a[i], snaps_b[i]
        pop_a[i] = float(np.sum(np.abs(a) ** 2)) * dp
        pop_b[i] = float(np.sum(np.abs(b) ** 2)) * dp
        waves = wavepacket.reconstruct_position(a, b, float(snap_times[i]), cfg)
        cen_a[i] = wavepacket.centroid(waves.z, waves.psi_a)
        cen_b[i] = wavepacket.centroid(waves.z, waves.psi_b)
        spr_a[i] = wavepacket.spread(waves.z, waves.psi_a)
        spr_b[i] = wavepacket.spread(waves.z, waves.psi_b)
    return TrajectoryRecord(times=snap_times, pop_a=pop_a, pop_b=pop_b,
                            centroid_a=cen_a, centroid_b=cen_b,
                            spread_a=spr_a, spread_b=spr_b)


def propagate(cfg: SimConfig, record_stride: int = 20, workers: int = 1,
              init: ManifoldState | None = None) -> EvolutionResult:
    """Evolve the wavepacket over the configured time grid.

    Observables are recorded every ``record_stride`` steps (plus the final
    step).  Identical inputs give bit-identical results for any ``workers``.
    """

    if record_stride < 1:
        raise ConfigError(f"record_stride must be >= 1, got {record_stride}")
    state0 = init if init is not None else init_wavepacket(cfg)
    alpha, beta, (snap_times, snaps_a, snaps_b) = _evolve(
        cfg, cfg.plate.phase, cfg.rotation.rate, state0,
        record_stride=record_stride, workers=workers,
    )
    trajectory = _trajectory(cfg, snap_times, snaps_a, snaps_b, state0.dp)
    final = ManifoldState(p=state0.p, dp=state0.dp, alpha=alpha, beta=beta, time=cfg.time_grid.stop)
    return EvolutionResult(final_state=final, trajectory=trajectory)


def final_populations_batch(cfg: SimConfig, plate_phases, rotation_rates,
                            workers: int = 1) -> np.ndarray:
    """Final P_b for each (plate phase, rotation rate) combo, one pass.

    The combo axis shares the initial packet, detuning array and envelope
    schedule; only the coupling phase differs.  Returns shape (combos,).
    """

    init = init_wavepacket(cfg)
    phases = np.atleast_1d(np.asarray(plate_phases, dtype=float))
    rates = np.atleast_1d(np.asarray(rotation_rates, dtype=float))
    alpha, beta, _ = _evolve(cfg, phases, rates, init, record_stride=None, workers=workers)
    return np.sum(np.abs(beta) ** 2, axis=-1) * init.dp
