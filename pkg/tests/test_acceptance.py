"""End-to-end acceptance battery.

One test per row of the acceptance table in README.md, each at the stated
tolerance.  Every test records a one-line verdict through acceptance_log;
conftest.py echoes the collected lines in the terminal summary, so the
pass/fail picture survives even when individual rows fail.

Two rows fail at the current operating point and are left failing on
purpose: the area-quality band far from the beam center (row 6b) and the
mid-pulse recoil slope of the continuously split packet (row 7b).  The
record lines and README's acceptance notes carry the measured numbers and
the analysis.

The heavy fixtures (plate sweep, three-zone run, default trajectory) are
module-scoped so each expensive simulation runs once.  Expect the full
battery to take roughly 20 minutes on one core; the plate sweep dominates.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from acceptance_log import record
from ramanci import observables, physics, propagator
from ramanci.config import (
    DEFAULT_PULSE_LENGTH,
    AtomSpec,
    LaserSpec,
    MomentumGrid,
    PlateSpec,
    PulseZone,
    RectPulse,
    SequencePulse,
    TimeGrid,
    config_digest,
    default_config,
    with_plate,
    with_rotation,
)
from ramanci.constants import HBAR, TWO_PI
from ramanci.experiments import (
    bci_config,
    recoil_slope,
    run_bci,
    run_trajectories,
    sagnac_linearity,
    sweep_plate_position,
)
from ramanci.three_level import compare_adiabatic, comparison_config


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# ---------------------------------------------------------------- row 1


def test_norm_conservation_over_full_default_run():
    base = default_config()
    cfg = with_rotation(
        with_plate(base, 0.8, 0.48 * physics.pulse_length_scale(base)), 0.05)
    node0 = propagator.init_wavepacket(cfg).node_norms()
    final = propagator.propagate(cfg).final_state
    total = abs(final.norm() - 1.0)
    node = float(np.max(np.abs(final.node_norms() - node0)))
    ok = cfg.time_grid.steps >= 20000 and total <= 1e-10 and node <= 1e-12
    record(f"[1] unitarity over {cfg.time_grid.steps} steps: total norm drift "
           f"{total:.2e} (tol 1e-10), worst node {node:.2e} (tol 1e-12) -> {_verdict(ok)}")
    assert cfg.time_grid.steps >= 20000
    assert total <= 1e-10
    assert node <= 1e-12


# ---------------------------------------------------------------- row 2


def _flat_top_config(detuning_split: float = 0.0):
    # constant coupling on an effectively infinite-mass atom: every node sees
    # the same Hamiltonian and the Rabi formula is exact
    base = default_config()
    om0 = physics.effective_rabi(base.laser)
    laser = replace(base.laser,
                    detuning1=base.laser.detuning1 + 0.5 * detuning_split,
                    detuning2=base.laser.detuning2 - 0.5 * detuning_split)
    duration = 4.0 * math.pi / om0
    return default_config(
        atom=AtomSpec(mass=base.atom.mass * 1.0e9),
        laser=laser,
        pulse=RectPulse(duration=duration, rabi=om0),
        time_grid=TimeGrid(-0.5 * duration, 0.5 * duration, 4000),
    )


def test_rabi_oscillation_oracles():
    t0 = time.perf_counter()
    om0 = physics.effective_rabi(default_config().laser)
    worst = {}
    for name, split in (("resonant", 0.0), ("detuned", 0.5 * om0)):
        cfg = _flat_top_config(split)
        tr = propagator.propagate(cfg, record_stride=10).trajectory
        elapsed = tr.times - cfg.time_grid.start
        delta = float(physics.two_photon_detuning(0.0, cfg))
        w = math.hypot(om0, delta)
        model = (om0 / w) ** 2 * np.sin(0.5 * w * elapsed) ** 2
        worst[name] = float(np.max(np.abs(tr.pop_b - model)))
    runtime = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and runtime < 1.0
    record(f"[2] Rabi oracle: max error {worst['resonant']:.1e} resonant / "
           f"{worst['detuned']:.1e} detuned (tol 1e-8), {runtime:.2f} s (tol 1 s) "
           f"-> {_verdict(ok)}")
    assert worst["resonant"] <= 1e-8
    assert worst["detuned"] <= 1e-8
    assert runtime < 1.0


# ---------------------------------------------------------------- row 3


def test_adiabatic_elimination_against_three_level_reference():
    t0 = time.perf_counter()
    comp = compare_adiabatic(comparison_config())
    gap = comp.max_population_deviation
    excited_ok = comp.max_excited_fraction <= comp.excited_bound

    # shrinking single-photon coupling at fixed two-photon coupling: the
    # scale multiplies both detunings, so the coupling-over-detuning ratio
    # spans one decade between scale 1 and scale 100
    scales = (1.0, 10.0, 100.0)
    devs = [compare_adiabatic(
        comparison_config(s, nodes=4, pulse_length=DEFAULT_PULSE_LENGTH / 8.0)
    ).max_population_deviation for s in scales]
    slope = float(np.polyfit(np.log10(scales), np.log10(devs), 1)[0])
    runtime = time.perf_counter() - t0

    ok = gap <= 0.02 and excited_ok and -1.2 <= slope <= -0.8
    record(f"[3] adiabatic elimination: population gap {gap:.2e} (tol 0.02), "
           f"excited fraction {comp.max_excited_fraction:.2e} <= bound "
           f"{comp.excited_bound:.2e}, deviation slope {slope:.3f} vs detuning scale "
           f"(tol -1 +/- 0.2) -> {_verdict(ok)} [{runtime:.0f} s]")
    assert gap <= 0.02
    assert excited_ok
    assert -1.2 <= slope <= -0.8


# ---------------------------------------------------------------- row 4


def test_three_zone_narrow_pulse_oracle():
    t0 = time.perf_counter()
    res = run_bci()
    runtime = time.perf_counter() - t0
    vis = res.fit.visibility
    # fitted minima live in [0, 2pi); measure the distance from zero
    phi0 = observables._wrap_angle(res.fit.phi_min)
    eta = res.estimate.eta
    ok = vis >= 0.999 and abs(phi0) <= 1e-3 and abs(eta - 1.0) <= 1e-3
    record(f"[4] three-zone oracle: visibility {vis:.7f} (tol >= 0.999), fringe "
           f"minimum at {phi0:+.1e} rad (tol 1e-3), area ratio off by "
           f"{abs(eta - 1.0):.1e} (tol 1e-3) -> {_verdict(ok)} [{runtime:.0f} s]")
    assert vis >= 0.999
    assert abs(phi0) <= 1e-3
    assert abs(eta - 1.0) <= 1e-3


# ---------------------------------------------------------------- row 5


def test_reference_area_value():
    cfg = bci_config(velocity=400.0)
    area = observables.bci_reference_area(cfg)
    rel = abs(area - 2.7e-10) / 2.7e-10
    ok = rel <= 0.01
    record(f"[5] reference area at 3 mm / 400 m/s: {area:.4e} m^2, off nominal "
           f"2.7e-10 by {100.0 * rel:.2f}% (tol 1%) -> {_verdict(ok)}")
    assert rel <= 0.01


# ---------------------------------------------------------------- row 6


@pytest.fixture(scope="module")
def plate_sweep():
    t0 = time.perf_counter()
    res = sweep_plate_position()
    return res, time.perf_counter() - t0


def test_plate_sweep_contrast_peak(plate_sweep):
    res, runtime = plate_sweep
    rows = [r for r in res.rows if r.fit_ok and math.isfinite(r.amplitude)]
    peak = max(rows, key=lambda r: r.amplitude)
    loc_ok = abs(abs(peak.dl_over_l) - 0.48) <= 0.05
    amp_ok = abs(peak.amplitude - 0.955) <= 0.03
    vis_ok = abs(peak.visibility - 0.955) <= 0.03
    which = {(True, True): "both, visibility closer",
             (True, False): "amplitude",
             (False, True): "visibility",
             (False, False): "neither"}[(amp_ok, vis_ok)]
    ok = loc_ok and (amp_ok or vis_ok)
    record(f"[6a] contrast peak at dl/l = {peak.dl_over_l:+.2f} (tol +/-0.48 +/- 0.05), "
           f"amplitude {peak.amplitude:.4f} / visibility {peak.visibility:.4f} "
           f"(tol 0.955 +/- 0.03, matched by: {which}) -> {_verdict(ok)} [{runtime:.0f} s]")
    assert loc_ok
    assert amp_ok or vis_ok


def test_plate_sweep_area_quality_band(plate_sweep):
    res, _ = plate_sweep
    band = [r for r in res.rows if r.fit_ok and 0.25 < abs(r.dl_over_l) < 0.8]
    assert band, "no usable sweep rows inside the quality band"
    # eta is signed (it flips with the covered side); the band claim is about
    # its magnitude
    devs = {r.dl_over_l: abs(abs(r.eta) - 1.0) for r in band}
    worst_at = max(devs, key=devs.get)
    worst = devs[worst_at]
    held_to = max((abs(r) for r, d in devs.items() if d <= 0.1), default=0.0)
    ok = worst <= 0.1
    note = "" if ok else (f"; |eta| stays within 10% only for |dl/l| <= {held_to:.2f} "
                          "and grows toward the beam edge, see README acceptance notes")
    record(f"[6b] area quality over 0.25 < |dl/l| < 0.8: worst | |eta| - 1 | = "
           f"{worst:.3f} at dl/l = {worst_at:+.2f} (tol 0.1) -> {_verdict(ok)}{note}")
    assert worst <= 0.1, (
        f"|eta| deviates from 1 by {worst:.3f} at dl/l = {worst_at:+.2f}; "
        "the 10% band holds only near the amplitude maximum")


# ---------------------------------------------------------------- row 7


@pytest.fixture(scope="module")
def default_trajectory():
    return run_trajectories()


def test_split_components_stay_overlapped(default_trajectory):
    tr = default_trajectory
    both = np.isfinite(tr.centroid_a) & np.isfinite(tr.centroid_b)
    sep = float(np.max(np.abs(tr.centroid_a[both] - tr.centroid_b[both])))
    w = default_config().packet_width
    ok = sep < 4.0 * w
    record(f"[7a] component separation: max {sep / w:.3f} w (tol < 4 w) -> {_verdict(ok)}")
    assert sep < 4.0 * w


def test_mid_pulse_recoil_slope(default_trajectory):
    cfg = default_config()
    slope = recoil_slope(default_trajectory)
    v_r = 2.0 * HBAR * cfg.laser.wavenumber / cfg.atom.mass
    dev = abs(abs(slope) - v_r) / v_r
    ok = dev <= 0.05
    note = "" if ok else ("; under continuous splitting the transferred component is "
                          "dragged by the ongoing exchange instead of ballistically "
                          "recoiling, see README acceptance notes and row 7c")
    record(f"[7b] mid-pulse transferred-centroid slope {slope:+.2e} m/s vs recoil "
           f"velocity {v_r:.2e} m/s (tol 5%) -> {_verdict(ok)}{note}")
    assert dev <= 0.05, (
        f"|slope| = {abs(slope):.2e} m/s is {100.0 * dev:.0f}% away from the "
        f"recoil velocity {v_r:.2e} m/s")


def test_impulsive_limit_recovers_recoil_slope():
    # kinematics cross-check for row 7b: once the splitter is a narrow zone
    # rather than the full beam, the transferred packet does drift at the
    # recoil velocity (negative axis by the mirrored position convention)
    base = LaserSpec()
    k = base.wavenumber
    mass = AtomSpec().mass
    recoil_offset = 2.0 * HBAR * k * k / mass
    zone = PulseZone(area=math.pi / 2.0, center=-1.0e-3, width=3.0e-5)
    probe = default_config(
        laser=replace(base, detuning1=base.detuning1 + recoil_offset),
        pulse=SequencePulse(zones=(zone,)),
        plate=PlateSpec(phase=0.0, start_offset=0.5e-3),
    )
    cfg = default_config(
        laser=probe.laser,
        pulse=probe.pulse,
        plate=probe.plate,
        momentum_grid=MomentumGrid(probe.momentum_grid.p_min,
                                   probe.momentum_grid.p_max, 512),
        time_grid=TimeGrid((-1.0e-3 - 6.0 * zone.width) / probe.velocity,
                           2.0e-3 / probe.velocity, 20000),
    )
    res = propagator.propagate(cfg, record_stride=20)
    slope = recoil_slope(res.trajectory)
    fin = res.final_state
    weight = np.abs(fin.beta) ** 2
    p_mean = float(np.sum(fin.p * weight) / np.sum(weight))
    v_r = 2.0 * HBAR * k / mass
    expected = -(p_mean + 2.0 * HBAR * k) / mass
    dev_vr = abs(slope + v_r) / v_r
    dev_kin = abs(slope - expected) / abs(expected)
    ok = dev_vr <= 5e-3 and dev_kin <= 1e-3
    record(f"[7c] impulsive-limit slope {slope:+.4e} m/s = {slope / v_r:+.4f} "
           f"recoil velocities (tol 0.5%), kinematic prediction matched to "
           f"{dev_kin:.1e} (tol 1e-3) -> {_verdict(ok)}")
    assert dev_vr <= 5e-3
    assert dev_kin <= 1e-3


# ---------------------------------------------------------------- row 8


def test_rotation_response_linear_and_antisymmetric():
    t0 = time.perf_counter()
    lin = sagnac_linearity()
    runtime = time.perf_counter() - t0
    worst_dev = float(np.max(lin.deviations))
    rates = lin.rates
    decade_ok = lin.max_linear_rate == float(np.max(np.abs(rates)))
    asym = 0.0
    for r in rates[rates > 0.0]:
        up = lin.phase_shifts[np.nonzero(rates == r)[0][0]]
        dn = lin.phase_shifts[np.nonzero(rates == -r)[0][0]]
        asym = max(asym, abs(up + dn) / (2.0 * abs(lin.reference_slope) * r))
    ok = worst_dev <= 0.01 and decade_ok and asym <= 0.01
    record(f"[8] rotation linearity over {np.min(np.abs(rates[rates != 0])):g}.."
           f"{np.max(np.abs(rates)):g} rad/s: worst deviation {worst_dev:.1e} "
           f"(tol 0.01), linear to {lin.max_linear_rate:g} rad/s, antisymmetry "
           f"residual {asym:.1e} (tol 0.01) -> {_verdict(ok)} [{runtime:.0f} s]")
    assert worst_dev <= 0.01
    assert decade_ok
    assert asym <= 0.01


# ---------------------------------------------------------------- row 9


def test_reruns_and_worker_counts_are_deterministic():
    base = default_config()
    digest_stable = config_digest(default_config()) == config_digest(base)

    small = default_config(
        momentum_grid=MomentumGrid(base.momentum_grid.p_min,
                                   base.momentum_grid.p_max, 128),
        time_steps=2000)
    phis = np.linspace(0.0, TWO_PI, 9)
    rates = np.full_like(phis, 0.02)
    one = propagator.final_populations_batch(small, phis, rates, workers=1)
    two = propagator.final_populations_batch(small, phis, rates, workers=2)
    batch_same = bool(np.array_equal(one, two))

    args = [sys.executable, "-m", "ramanci", "scan-phase",
            "--set", "t_steps=2000", "--set", "p_nodes=128",
            "--phi", f"0:{TWO_PI!r}:9"]
    outs = []
    for workers in ("1", "1", "2"):
        proc = subprocess.run(args + ["--workers", workers],
                              capture_output=True, timeout=600)
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append(proc.stdout)
    cli_same = len(outs[0]) > 0 and outs[0] == outs[1] == outs[2]

    ok = digest_stable and batch_same and cli_same
    record(f"[9] determinism: digest stable {digest_stable}, batch identical across "
           f"worker counts {batch_same}, CLI reruns byte-identical {cli_same} "
           f"-> {_verdict(ok)}")
    assert digest_stable
    assert batch_same
    assert cli_same
