"""Two-level manifold propagation: oracles, unitarity, reversibility."""

import math
from dataclasses import replace

import numpy as np
import pytest

from ramanci import (
    AtomSpec,
    ConfigError,
    RectPulse,
    ResolutionError,
    TimeGrid,
    default_config,
    init_wavepacket,
    populations,
    propagate,
    step_manifold,
    with_plate,
    with_rotation,
)
from ramanci import physics
from ramanci.config import MomentumGrid
from ramanci.constants import HBAR
from ramanci.propagator import final_populations_batch


def heavy_rabi_config(detuning_split: float = 0.0, steps: int = 4000):
    """Constant coupling on an effectively infinite-mass atom.

    With the kinetic terms suppressed by the huge mass, every momentum node
    sees the same constant Hamiltonian and the populations follow the
    two-level Rabi formula exactly.  ``detuning_split`` sets delta1 - delta2,
    i.e. the two-photon detuning, without moving the effective coupling.
    """

    base = default_config()
    om0 = physics.effective_rabi(base.laser)
    laser = replace(base.laser,
                    detuning1=base.laser.detuning1 + 0.5 * detuning_split,
                    detuning2=base.laser.detuning2 - 0.5 * detuning_split)
    duration = 4.0 * math.pi / om0  # two full cycles on resonance
    return default_config(
        atom=AtomSpec(mass=base.atom.mass * 1.0e9),
        laser=laser,
        pulse=RectPulse(duration=duration, rabi=om0),
        time_grid=TimeGrid(-0.5 * duration, 0.5 * duration, steps),
    )


def small_config(steps: int = 500, nodes: int = 16, **overrides):
    base = default_config()
    grid = MomentumGrid(base.momentum_grid.p_min, base.momentum_grid.p_max, nodes)
    return default_config(momentum_grid=grid, time_steps=steps, **overrides)


def test_init_wavepacket_normalization_and_width():
    cfg = default_config()
    state = init_wavepacket(cfg)
    assert state.time == cfg.time_grid.start
    assert np.all(state.beta == 0.0)
    assert state.norm() == pytest.approx(1.0, abs=1e-13)
    weights = np.abs(state.alpha) ** 2 * state.dp
    sigma_p = math.sqrt(float(np.sum(weights * state.p**2)))
    assert sigma_p == pytest.approx(HBAR / cfg.packet_width, rel=1e-6)


def test_populations_sum_to_norm():
    state = init_wavepacket(default_config())
    pa, pb = populations(state)
    assert pa + pb == pytest.approx(state.norm(), abs=1e-14)
    assert pb == 0.0


def test_resonant_rabi_oracle():
    cfg = heavy_rabi_config()
    om0 = cfg.pulse.rabi
    result = propagate(cfg, record_stride=10)
    tau = result.trajectory.times - cfg.time_grid.start
    oracle = np.sin(0.5 * om0 * tau) ** 2
    assert np.max(np.abs(result.trajectory.pop_b - oracle)) < 1e-8


def test_generalized_rabi_oracle():
    cfg = heavy_rabi_config(detuning_split=0.5 * physics.effective_rabi(default_config().laser))
    om0 = cfg.pulse.rabi
    delta = cfg.laser.detuning1 - cfg.laser.detuning2
    w = math.hypot(om0, delta)
    result = propagate(cfg, record_stride=10)
    tau = result.trajectory.times - cfg.time_grid.start
    oracle = (om0 / w) ** 2 * np.sin(0.5 * w * tau) ** 2
    assert np.max(np.abs(result.trajectory.pop_b - oracle)) < 1e-8


def test_norm_conservation_with_plate_and_rotation():
    cfg = small_config()
    L = physics.pulse_length_scale(cfg)
    cfg = with_rotation(with_plate(cfg, 0.8, 0.48 * L), 0.05)
    init = init_wavepacket(cfg)
    node0 = init.node_norms()
    result = propagate(cfg, record_stride=cfg.time_grid.steps, init=init)
    assert abs(result.final_state.norm() - init.norm()) < 1e-12
    assert np.max(np.abs(result.final_state.node_norms() - node0)) < 1e-13


def test_constant_coupling_phase_is_a_gauge():
    cfg = small_config()
    L = physics.pulse_length_scale(cfg)
    cfg = with_rotation(with_plate(cfg, 0.8, 0.48 * L), 0.05)
    shifted = replace(cfg, laser=replace(cfg.laser, phase1=cfg.laser.phase1 + 0.4))
    a = propagate(cfg, record_stride=cfg.time_grid.steps).final_state
    b = propagate(shifted, record_stride=cfg.time_grid.steps).final_state
    scale = float(np.max(np.abs(a.alpha)))
    assert np.max(np.abs(b.alpha - a.alpha)) < 1e-12 * scale
    assert np.max(np.abs(b.beta - a.beta * np.exp(-1j * 0.4))) < 1e-12 * scale


def test_step_manifold_time_reversal():
    cfg = small_config()
    L = physics.pulse_length_scale(cfg)
    cfg = with_rotation(with_plate(cfg, 0.8, 0.48 * L), 0.05)
    dt = (cfg.time_grid.stop - cfg.time_grid.start) / cfg.time_grid.steps
    state = init_wavepacket(cfg)
    start = state
    for _ in range(200):
        state = step_manifold(state, dt, cfg)
    for _ in range(200):
        state = step_manifold(state, -dt, cfg)
    assert state.time == pytest.approx(start.time, abs=1e-18)
    scale = float(np.max(np.abs(start.alpha)))
    assert np.max(np.abs(state.alpha - start.alpha)) < 1e-12 * scale
    assert np.max(np.abs(state.beta - start.beta)) < 1e-12 * scale


def test_step_size_guard():
    cfg = small_config()
    dt_bad = 0.2 / float(physics.envelope(0.0, cfg))
    state = init_wavepacket(cfg)
    state = replace(state, time=-0.5 * dt_bad)  # step centered on the pulse peak
    with pytest.raises(ResolutionError):
        step_manifold(state, dt_bad, cfg)
    with pytest.raises(ResolutionError):
        propagate(default_config(time_steps=50))


def test_record_stride_validation_and_endpoints():
    cfg = small_config()
    with pytest.raises(ConfigError):
        propagate(cfg, record_stride=0)
    traj = propagate(cfg, record_stride=151).trajectory
    assert traj.times[0] == pytest.approx(cfg.time_grid.start, abs=1e-18)
    assert traj.times[-1] == pytest.approx(cfg.time_grid.stop, rel=1e-12)
    assert np.all(np.diff(traj.times) > 0.0)


def test_second_order_convergence():
    def final_beta(steps):
        cfg = small_config(steps=steps, nodes=8)
        cfg = with_rotation(cfg, 0.03)
        return propagate(cfg, record_stride=steps).final_state.beta

    ref = final_beta(8000)
    err_coarse = np.max(np.abs(final_beta(500) - ref))
    err_fine = np.max(np.abs(final_beta(1000) - ref))
    ratio = err_coarse / err_fine
    assert 3.2 < ratio < 4.8, f"step-halving error ratio {ratio:.2f}, expected ~4"


def test_batch_matches_single_runs_and_worker_count():
    cfg = small_config()
    L = physics.pulse_length_scale(cfg)
    phases = np.array([0.0, 1.3, 2.6, 3.9])
    rates = np.array([0.05, -0.05, 0.0, 0.1])
    cfg = with_plate(cfg, 0.0, 0.48 * L)
    batch1 = final_populations_batch(cfg, phases, rates, workers=1)
    batch2 = final_populations_batch(cfg, phases, rates, workers=2)
    assert np.array_equal(batch1, batch2)
    for i in range(phases.size):
        single = with_rotation(with_plate(cfg, float(phases[i]), 0.48 * L), float(rates[i]))
        final = propagate(single, record_stride=single.time_grid.steps).final_state
        assert populations(final)[1] == pytest.approx(batch1[i], abs=1e-14)
