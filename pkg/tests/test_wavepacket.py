"""Position-space reconstruction: norms, moments, translation, dispersion."""

import math

import numpy as np
import pytest

from ramanci import (
    GaussianPulse,
    default_config,
    init_wavepacket,
    propagate,
)
from ramanci.constants import HBAR
from ramanci.wavepacket import (
    centroid,
    component_norm,
    position_grid,
    reconstruct_position,
    spread,
)


def test_initial_packet_reproduces_configured_widths():
    cfg = default_config()
    state = init_wavepacket(cfg)
    rec = reconstruct_position(state.alpha, state.beta, state.time, cfg)
    dz = float(rec.z[1] - rec.z[0])
    w = cfg.packet_width
    assert component_norm(rec.psi_a, dz) == pytest.approx(1.0, abs=1e-9)
    assert component_norm(rec.psi_b, dz) == 0.0
    assert abs(centroid(rec.z, rec.psi_a)) < 1e-6 * w
    # |psi|^2 has 1/e half-width w/sqrt(2), i.e. rms width w/2
    assert spread(rec.z, rec.psi_a) == pytest.approx(0.5 * w, rel=1e-6)


def test_position_norm_is_preserved_under_propagation():
    cfg = default_config(time_steps=2000)
    result = propagate(cfg, record_stride=cfg.time_grid.steps)
    state = result.final_state
    rec = reconstruct_position(state.alpha, state.beta, state.time, cfg)
    dz = float(rec.z[1] - rec.z[0])
    total = component_norm(rec.psi_a, dz) + component_norm(rec.psi_b, dz)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_momentum_phase_ramp_translates_the_packet():
    cfg = default_config()
    state = init_wavepacket(cfg)
    z0 = 20.0 * (position_grid(cfg)[1] - position_grid(cfg)[0])
    shifted = state.alpha * np.exp(-1j * state.p * z0 / HBAR)
    rec = reconstruct_position(shifted, state.beta, state.time, cfg)
    # the exp(-i p z / hbar) kernel maps a +z0 momentum ramp to a -z0 shift
    assert centroid(rec.z, rec.psi_a) == pytest.approx(-z0, rel=1e-9)
    assert spread(rec.z, rec.psi_a) == pytest.approx(0.5 * cfg.packet_width, rel=1e-6)


def test_free_evolution_disperses_without_drift():
    # no coupling: the a component stays centered and spreads like a free
    # Gaussian, sigma(T) = sigma0 * sqrt(1 + (hbar T / (2 m sigma0^2))^2)
    cfg = default_config(pulse=GaussianPulse(peak_rabi=0.0), time_steps=500)
    result = propagate(cfg, record_stride=cfg.time_grid.steps)
    state = result.final_state
    rec = reconstruct_position(state.alpha, state.beta, state.time, cfg)
    dz = float(rec.z[1] - rec.z[0])
    elapsed = cfg.time_grid.stop - cfg.time_grid.start
    sigma0 = 0.5 * cfg.packet_width
    zeta = HBAR * elapsed / (2.0 * cfg.atom.mass * sigma0 * sigma0)
    expected = sigma0 * math.sqrt(1.0 + zeta * zeta)
    assert expected > 4.0 * sigma0  # the window is long enough to matter
    assert abs(centroid(rec.z, rec.psi_a)) < 1e-4 * cfg.packet_width
    assert spread(rec.z, rec.psi_a) == pytest.approx(expected, rel=1e-6)
    assert component_norm(rec.psi_b, dz) == 0.0
    assert math.isnan(centroid(rec.z, rec.psi_b))


def test_moments_respect_the_norm_floor():
    z = np.linspace(-1.0, 1.0, 64)
    empty = np.zeros(64, dtype=complex)
    assert math.isnan(centroid(z, empty))
    assert math.isnan(spread(z, empty))


def test_moments_on_synthetic_samples():
    z = np.linspace(-6.0, 6.0, 4001)
    psi = np.exp(-((z - 0.7) ** 2)).astype(complex)  # |psi|^2 std = 0.5
    assert centroid(z, psi) == pytest.approx(0.7, rel=1e-9)
    assert spread(z, psi) == pytest.approx(0.5, rel=1e-9)
