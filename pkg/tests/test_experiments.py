"""Canned experiments: trajectories, plate sweep, three-zone geometry."""

import math

import numpy as np
import pytest

from ramanci import (
    ConfigError,
    LinearityError,
    bci_config,
    config_digest,
    default_config,
    no_mirror_config,
    recoil_slope,
    run_trajectories,
    sagnac_linearity,
    scan_phase,
    fit_fringe,
    sweep_plate_position,
    with_plate,
    with_rotation,
)
from ramanci import physics
from ramanci.config import MomentumGrid, SequencePulse
from ramanci.constants import HBAR
from ramanci.propagator import TrajectoryRecord


def reduced_config(**overrides):
    """Coarser grids for machinery tests; physics only approximately converged."""

    base = default_config()
    grid = MomentumGrid(base.momentum_grid.p_min, base.momentum_grid.p_max, 256)
    return default_config(momentum_grid=grid, time_steps=4000, **overrides)


def synthetic_trajectory(slope=3.0, peak=0.6):
    times = np.linspace(0.0, 1.0, 101)
    pop_b = peak * np.exp(-(((times - 0.5) / 0.25) ** 2))
    centroid_b = slope * times - 0.2
    nan = np.full_like(times, np.nan)
    return TrajectoryRecord(times=times, pop_a=1.0 - pop_b, pop_b=pop_b,
                            centroid_a=np.zeros_like(times), centroid_b=centroid_b,
                            spread_a=nan, spread_b=nan)


def test_run_trajectories_ignores_plate_phase_and_rotation():
    cfg = reduced_config()
    L = physics.pulse_length_scale(cfg)
    dressed = with_rotation(with_plate(cfg, 0.7, 0.48 * L), 0.1)
    plain = with_plate(cfg, 0.0, 0.48 * L)
    a = run_trajectories(dressed, record_stride=1000)
    b = run_trajectories(plain, record_stride=1000)
    assert np.array_equal(a.pop_b, b.pop_b)
    assert np.array_equal(a.centroid_b, b.centroid_b, equal_nan=True)


def test_recoil_slope_on_synthetic_trajectory():
    assert recoil_slope(synthetic_trajectory(slope=3.0)) == pytest.approx(3.0, rel=1e-9)
    assert recoil_slope(synthetic_trajectory(slope=-0.4)) == pytest.approx(-0.4, rel=1e-9)


def test_recoil_slope_needs_populated_window():
    with pytest.raises(LinearityError):
        recoil_slope(synthetic_trajectory(peak=0.1))  # never reaches 0.2
    with pytest.raises(LinearityError):
        recoil_slope(synthetic_trajectory(), min_population=0.599)  # 3 samples


def test_sweep_rejects_offsets_beyond_the_validated_range():
    with pytest.raises(ConfigError):
        sweep_plate_position(reduced_config(), dl_over_l=[0.0, 1.6])


def test_sweep_point_at_the_amplitude_maximum():
    result = sweep_plate_position(reduced_config(), dl_over_l=[0.45])
    row = result.rows[0]
    assert row.fit_ok
    assert row.note == ""
    assert math.isfinite(row.eta)
    assert 0.8 < row.amplitude < 1.05
    assert 0.85 < row.visibility <= 1.0


def test_sweep_zero_offset_keeps_fringe_numbers_without_area():
    # at zero offset the linear rotation response vanishes; the row keeps
    # the zero-rotation fringe fit and flags the failed area extraction
    result = sweep_plate_position(reduced_config(), dl_over_l=[0.0])
    row = result.rows[0]
    assert not row.fit_ok
    assert row.note != ""
    assert math.isnan(row.eta)
    assert 0.2 < row.amplitude < 0.7
    assert 0.8 < row.visibility <= 1.0


def test_bci_config_geometry():
    L = 3.0e-3
    cfg = bci_config()
    zones = cfg.pulse.zones
    assert isinstance(cfg.pulse, SequencePulse) and len(zones) == 3
    assert [z.center for z in zones] == [-L, 0.0, L]
    assert [z.area for z in zones] == [math.pi / 2, math.pi, math.pi / 2]
    assert all(z.width == pytest.approx(5.0e-4 * L) for z in zones)
    assert cfg.plate.start_offset == pytest.approx(0.5 * L)
    assert cfg.plate.phase == 0.0
    k = cfg.laser.wavenumber
    assert cfg.packet_width == pytest.approx(200.0 / k)
    # beams pre-shifted so the packet center sits on two-photon resonance
    assert float(physics.two_photon_detuning(0.0, cfg)) == pytest.approx(0.0, abs=1e-6)
    assert config_digest(bci_config()) == config_digest(cfg)


def test_no_mirror_config_zeroes_only_the_central_zone():
    cfg = bci_config()
    off = no_mirror_config(cfg)
    assert len(off.pulse.zones) == 3
    assert off.pulse.zones[1].area == 0.0
    assert off.pulse.zones[0] == cfg.pulse.zones[0]
    assert off.pulse.zones[2] == cfg.pulse.zones[2]
    assert config_digest(off) != config_digest(cfg)


def test_visibility_collapses_without_the_mirror_for_a_narrow_packet():
    # a position-narrow packet resolves the two displaced exit ports left
    # by the missing mirror zone, so the fringe contrast dies; the full
    # interferometer keeps it near unity
    k = default_config().laser.wavenumber
    cfg = bci_config(zone_width=3.0e-5, nodes=128, time_steps=4000,
                     packet_width=0.5 / k)
    on = fit_fringe(scan_phase(cfg))
    off = fit_fringe(scan_phase(no_mirror_config(cfg)))
    assert on.visibility > 0.95
    assert off.degenerate or off.visibility < 0.05


def test_linearity_rate_grid_must_span_a_decade():
    with pytest.raises(ConfigError):
        sagnac_linearity(reduced_config(), rate_grid=(-0.05, -0.02, 0.02, 0.05))
