"""Full three-level reference propagation and the adiabatic comparison.

The manifold that the 2x2 engine compresses to (alpha, beta) is really
|p, a> <-> |p + hk, e> <-> |p + 2hk, b>.  In the rotating frame anchored to
the a component the generator is, per momentum node,

    H(p, t)/hbar = [[0,            W1(t)/2 e^{i theta},  0          ],
                    [h.c.,        -d1(p),                W2(t)/2    ],
                    [0,            h.c.,                -Delta(p)   ]]

with d1(p) = delta1 - (k p / m + hbar k^2 / (2 m)) the intermediate-state
detuning and Delta(p) the usual two-photon detuning.  The single-photon
envelopes follow the square root of the configured effective envelope,
W_j(t) = rabi_j * sqrt(envelope(t) / effective_rabi), so their product
reproduces the effective coupling at every instant.

Numerics: the coupling phase is gauged onto the a amplitude, which leaves a
real symmetric tridiagonal step generator A = H dt.  Its eigenvalues come
from the trigonometric solution of the characteristic cubic plus one Newton
polish, and the step unitary exp(-iA) from the Newton divided-difference
form

    f(A) = f[l1] I + f[l1,l2] (A - l1) + f[l1,l2,l3] (A - l1)(A - l2)

where the first divided difference uses the exact identity
f[a,b] = -i exp(-i(a+b)/2) sin(d)/d, d = (a-b)/2, stable for any gap.  The
time loop is compiled (numba) and chunked so envelope and phase arrays never
hold more than ~10^6 steps at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit, prange

from . import physics, propagator
from .config import ConfigError, GaussianPulse, MomentumGrid, SimConfig, default_config
from .constants import HBAR

MAX_ORACLE_STEPS = 2_000_000_000
CHUNK_STEPS = 1 << 18


def intermediate_detuning(p, cfg: SimConfig):
    """Detuning d1(p) of the single-photon leg at momentum p (rad/s)."""

    k = cfg.laser.wavenumber
    m = cfg.atom.mass
    return cfg.laser.detuning1 - (k * np.asarray(p, dtype=float) / m + HBAR * k * k / (2.0 * m))


def single_photon_envelopes(t, cfg: SimConfig):
    """(W1(t), W2(t)): single-photon Rabi envelopes whose product matches
    the configured effective coupling."""

    env = np.asarray(physics.envelope(t, cfg), dtype=float)
    if np.any(env < 0.0):
        raise ConfigError("three-level propagation requires a non-negative envelope")
    scale = np.sqrt(env / physics.effective_rabi(cfg.laser))
    return cfg.laser.rabi1 * scale, cfg.laser.rabi2 * scale


def three_level_hamiltonian(p: float, t: float, cfg: SimConfig) -> np.ndarray:
    """Reference 3x3 generator H/hbar at one momentum node and instant."""

    w1, w2 = single_photon_envelopes(t, cfg)
    theta = float(physics.coupling_phase(t, cfg))
    d1 = float(intermediate_detuning(p, cfg))
    delta = float(physics.two_photon_detuning(p, cfg))
    coup = 0.5 * float(w1) * np.exp(1j * theta)
    h = np.array(
        [
            [0.0, coup, 0.0],
            [np.conj(coup), -d1, 0.5 * float(w2)],
            [0.0, 0.5 * float(w2), -delta],
        ],
        dtype=complex,
    )
    return h


@njit(cache=True, inline="always")
def _sincc(x):
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


@njit(cache=True, parallel=True)
def _advance_chunk(ca, ce, cb, a2, a3, sdt, phc, r1, r2, step0, rec_steps, pb_rows, pe_max):
    """Advance every node through one chunk of steps.

    ca/ce/cb: (nodes,) complex amplitudes, updated in place.
    a2, a3:   (nodes,) constant diagonal entries of A = H dt (rad).
    sdt:      (chunk,) 0.5 * dt * sqrt(envelope/effective_rabi) per step.
    phc:      (chunk,) exp(-i theta) per step.
    rec_steps: ascending global step indices at which |c_b|^2 is recorded
    into pb_rows (row index = position in rec_steps).  pe_max tracks the
    running per-node maximum of |c_e|^2.
    """

    n = ca.size
    m = sdt.size
    third = 2.0943951023931953  # 2 pi / 3
    for node in prange(n):
        xa = ca[node]
        xe = ce[node]
        xb = cb[node]
        d2 = a2[node]
        d3 = a3[node]
        pmax = pe_max[node]
        pos = np.searchsorted(rec_steps, step0 + 1)
        for i in range(m):
            w1 = r1 * sdt[i]
            w2 = r2 * sdt[i]
            ph = phc[i]
            ya = xa * ph  # gauge: coupling phase folded into the a amplitude

            # eigenvalues of A = [[0, w1, 0], [w1, d2, w2], [0, w2, d3]]
            c2 = d2 + d3
            c1 = d2 * d3 - w1 * w1 - w2 * w2
            c0 = -w1 * w1 * d3
            q = c2 / 3.0
            p1 = w1 * w1 + w2 * w2
            b11 = -q
            b22 = d2 - q
            b33 = d3 - q
            p2 = b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * p1
            pp = math.sqrt(p2 / 6.0)
            if pp < 1e-150:
                l1 = q
                l2 = q
                l3 = q
            else:
                detb = b11 * (b22 * b33 - w2 * w2) - w1 * w1 * b33
                r = detb / (2.0 * pp * pp * pp)
                if r > 1.0:
                    r = 1.0
                elif r < -1.0:
                    r = -1.0
                ang = math.acos(r) / 3.0
                l3 = q + 2.0 * pp * math.cos(ang)
                l1 = q + 2.0 * pp * math.cos(ang + third)
                l2 = c2 - l1 - l3
                # one Newton polish per root on the characteristic cubic
                for _ in range(1):
                    f = ((l1 - c2) * l1 + c1) * l1 - c0
                    g = (3.0 * l1 - 2.0 * c2) * l1 + c1
                    if g != 0.0:
                        l1 -= f / g
                    f = ((l2 - c2) * l2 + c1) * l2 - c0
                    g = (3.0 * l2 - 2.0 * c2) * l2 + c1
                    if g != 0.0:
                        l2 -= f / g
                    f = ((l3 - c2) * l3 + c1) * l3 - c0
                    g = (3.0 * l3 - 2.0 * c2) * l3 + c1
                    if g != 0.0:
                        l3 -= f / g
                if l1 > l2:
                    l1, l2 = l2, l1
                if l2 > l3:
                    l2, l3 = l3, l2
                if l1 > l2:
                    l1, l2 = l2, l1

            # f(x) = exp(-i x): value and stable divided differences
            f0 = complex(math.cos(l1), -math.sin(l1))
            mu01 = 0.5 * (l1 + l2)
            s01 = _sincc(0.5 * (l1 - l2))
            e01 = complex(math.cos(mu01), -math.sin(mu01))
            f01 = complex(0.0, -1.0) * e01 * s01
            mu12 = 0.5 * (l2 + l3)
            s12 = _sincc(0.5 * (l2 - l3))
            e12 = complex(math.cos(mu12), -math.sin(mu12))
            f12 = complex(0.0, -1.0) * e12 * s12
            gap = l1 - l3
            if abs(gap) > 1e-4:
                f012 = (f01 - f12) / gap
            else:
                mu = (l1 + l2 + l3) / 3.0
                f012 = -0.5 * complex(math.cos(mu), -math.sin(mu))

            # U = f0 I + f01 (A - l1) + f012 (A - l1)(A - l2), applied via
            # two tridiagonal products
            y1a = w1 * xe - l1 * ya
            y1e = w1 * ya + (d2 - l1) * xe + w2 * xb
            y1b = w2 * xe + (d3 - l1) * xb
            y2a = w1 * y1e - l2 * y1a
            y2e = w1 * y1a + (d2 - l2) * y1e + w2 * y1b
            y2b = w2 * y1e + (d3 - l2) * y1b
            za = f0 * ya + f01 * y1a + f012 * y2a
            xe = f0 * xe + f01 * y1e + f012 * y2e
            xb = f0 * xb + f01 * y1b + f012 * y2b
            xa = za * np.conj(ph)

            pe = xe.real * xe.real + xe.imag * xe.imag
            if pe > pmax:
                pmax = pe
            if pos < rec_steps.size and rec_steps[pos] == step0 + i + 1:
                pb_rows[pos, node] = xb.real * xb.real + xb.imag * xb.imag
                pos += 1
        ca[node] = xa
        ce[node] = xe
        cb[node] = xb
        pe_max[node] = pmax


@dataclass(frozen=True)
class ThreeLevelResult:
    """Per-node record of one three-level propagation."""

    times: np.ndarray       # (samples,) recorded instants
    pop_b: np.ndarray       # (samples, nodes) |c_b|^2 per node
    amp_a: np.ndarray       # final amplitudes, (nodes,)
    amp_e: np.ndarray
    amp_b: np.ndarray
    max_excited: np.ndarray  # (nodes,) running max of |c_e|^2
    steps: int
    substeps: int           # steps per engine step


def _substep_multiple(cfg: SimConfig) -> int:
    p = cfg.momentum_grid
    scales = [
        abs(float(intermediate_detuning(p.p_min, cfg))),
        abs(float(intermediate_detuning(p.p_max, cfg))),
        abs(float(physics.two_photon_detuning(p.p_min, cfg))),
        abs(float(physics.two_photon_detuning(p.p_max, cfg))),
    ]
    peak = propagator.peak_envelope(cfg)
    ratio = peak / physics.effective_rabi(cfg.laser)
    if ratio > 0.0:
        scales.append(abs(cfg.laser.rabi1) * math.sqrt(ratio))
        scales.append(abs(cfg.laser.rabi2) * math.sqrt(ratio))
    dt_max = propagator.STEP_ANGLE_LIMIT / max(scales)
    return max(1, int(math.ceil(cfg.time_grid.dt / dt_max)))


def propagate_three_level(cfg: SimConfig, record_stride: int | None = None) -> ThreeLevelResult:
    """Evolve the packet through the full three-level manifold.

    The step is the engine step divided by whatever multiple resolves the
    intermediate detuning; recordings land exactly on engine-step times so
    the result can be compared sample by sample.
    """

    cfg.validate()
    tg = cfg.time_grid
    mult = _substep_multiple(cfg)
    n3 = tg.steps * mult
    if n3 > MAX_ORACLE_STEPS:
        raise ConfigError(
            f"three-level run needs {n3:.2e} steps; shorten the window or lower the detuning"
        )
    dt = tg.dt / mult

    init = propagator.init_wavepacket(cfg)
    p = init.p
    ca = init.alpha.astype(np.complex128).copy()
    ce = np.zeros_like(ca)
    cb = np.zeros_like(ca)

    stride = record_stride if record_stride is not None else max(1, tg.steps // 200)
    rec2 = propagator._record_steps(tg.steps, stride)
    rec_steps = (rec2 * mult).astype(np.int64)
    times = tg.start + tg.dt * rec2

    a2 = (-intermediate_detuning(p, cfg) * dt).astype(np.float64)
    a3 = (-physics.two_photon_detuning(p, cfg) * dt).astype(np.float64)
    r1 = float(cfg.laser.rabi1)
    r2 = float(cfg.laser.rabi2)
    eff = physics.effective_rabi(cfg.laser)

    pb_rows = np.zeros((rec_steps.size, p.size))
    pe_max = np.zeros(p.size)
    if rec_steps[0] == 0:
        pb_rows[0] = np.abs(cb) ** 2

    step0 = 0
    while step0 < n3:
        m = min(CHUNK_STEPS, n3 - step0)
        idx = np.arange(step0, step0 + m)
        t_mid = tg.start + dt * (idx + 0.5)
        env = np.asarray(physics.envelope(t_mid, cfg), dtype=float)
        if np.any(env < 0.0):
            raise ConfigError("three-level propagation requires a non-negative envelope")
        sdt = 0.5 * dt * np.sqrt(env / eff)
        phc = np.exp(-1j * np.asarray(physics.coupling_phase(t_mid, cfg), dtype=float))
        _advance_chunk(ca, ce, cb, a2, a3, sdt, phc, r1, r2, step0, rec_steps, pb_rows, pe_max)
        step0 += m

    return ThreeLevelResult(times=times, pop_b=pb_rows, amp_a=ca, amp_e=ce, amp_b=cb,
                            max_excited=pe_max, steps=n3, substeps=mult)


@dataclass(frozen=True)
class AdiabaticComparison:
    """Agreement between the 2x2 engine and the three-level reference."""

    times: np.ndarray
    frac_b_two: np.ndarray       # (samples, nodes) per-node transfer fraction
    frac_b_three: np.ndarray
    max_population_deviation: float
    max_excited_fraction: float
    excited_bound: float
    min_final_fidelity: float
    substeps: int


def compare_adiabatic(cfg: SimConfig, record_stride: int | None = None) -> AdiabaticComparison:
    """Run both descriptions of one configuration and measure their gap.

    Per node the transfer fraction |c_b|^2 / norm is compared at shared
    sample times; the final two-level state is mapped into the three-level
    frame (an extra phase exp(+i Delta (t - t0) / 2) on both components)
    before the fidelity overlap.
    """

    cfg.validate()
    tg = cfg.time_grid
    stride = record_stride if record_stride is not None else max(1, tg.steps // 200)

    init = propagator.init_wavepacket(cfg)
    norm0 = np.abs(init.alpha) ** 2
    alpha_fin, beta_fin, (snap_times, snaps_a, snaps_b) = propagator._evolve(
        cfg, cfg.plate.phase, cfg.rotation.rate, init, record_stride=stride, workers=1
    )
    three = propagate_three_level(cfg, record_stride=stride)
    if snap_times.size != three.times.size:
        raise RuntimeError("sample grids of the two engines fell out of step")

    frac_two = np.stack([np.abs(b) ** 2 for b in snaps_b]) / norm0
    frac_three = three.pop_b / norm0
    max_dev = float(np.max(np.abs(frac_three - frac_two)))
    max_exc = float(np.max(three.max_excited / norm0))

    w1_pk, w2_pk = single_photon_envelopes_peak(cfg)
    d_min = min(abs(float(intermediate_detuning(cfg.momentum_grid.p_min, cfg))),
                abs(float(intermediate_detuning(cfg.momentum_grid.p_max, cfg))))
    bound = 2.0 * (w1_pk ** 2 + w2_pk ** 2) / (4.0 * d_min ** 2)

    elapsed = tg.stop - tg.start
    align = np.exp(0.5j * physics.two_photon_detuning(init.p, cfg) * elapsed)
    overlap = np.conj(three.amp_a) * (align * alpha_fin) + np.conj(three.amp_b) * (align * beta_fin)
    fidelity = float(np.min(np.abs(overlap) / norm0))

    return AdiabaticComparison(times=snap_times, frac_b_two=frac_two, frac_b_three=frac_three,
                               max_population_deviation=max_dev, max_excited_fraction=max_exc,
                               excited_bound=bound, min_final_fidelity=fidelity,
                               substeps=three.substeps)


def single_photon_envelopes_peak(cfg: SimConfig) -> tuple[float, float]:
    """Peak values of the single-photon envelopes over the pulse."""

    ratio = propagator.peak_envelope(cfg) / physics.effective_rabi(cfg.laser)
    scale = math.sqrt(max(ratio, 0.0))
    return abs(cfg.laser.rabi1) * scale, abs(cfg.laser.rabi2) * scale


def comparison_config(detuning_scale: float = 1.0, nodes: int = 8,
                      pulse_length: float | None = None, steps: int | None = None) -> SimConfig:
    """Reduced-grid configuration for engine-versus-reference checks.

    Raising ``detuning_scale`` multiplies both single-photon detunings while
    scaling the single-photon couplings by its square root, which holds the
    effective two-photon coupling fixed; residual deviations should fall off
    as 1/scale.  A shorter ``pulse_length`` shrinks the time window (and so
    the reference step count) without touching the coupling ratios.
    """

    if detuning_scale <= 0.0:
        raise ConfigError(f"detuning_scale must be positive, got {detuning_scale}")
    base = default_config()
    root = math.sqrt(detuning_scale)
    laser = replace(base.laser,
                    rabi1=base.laser.rabi1 * root, rabi2=base.laser.rabi2 * root,
                    detuning1=base.laser.detuning1 * detuning_scale,
                    detuning2=base.laser.detuning2 * detuning_scale)
    grid = MomentumGrid(base.momentum_grid.p_min, base.momentum_grid.p_max, nodes)
    pulse = base.pulse if pulse_length is None else GaussianPulse(
        length=pulse_length, peak_rabi=base.pulse.peak_rabi)
    length_ratio = pulse.length / base.pulse.length
    n2 = steps if steps is not None else max(2000, int(round(base.time_grid.steps * length_ratio)))
    return default_config(laser=laser, pulse=pulse, momentum_grid=grid, time_steps=n2)
