"""Simulator for continuously guided and three-zone Raman interferometers.

The package propagates a transverse momentum-space wavepacket through a
two-photon Raman coupling region, scans interference fringes against a
retardation-plate phase, and extracts rotation response and effective
Sagnac area for both the single-zone (continuously guided) and the
three-zone pi/2 - pi - pi/2 geometries.
"""

__version__ = "0.1.0"

from .config import (
    AtomSpec,
    ConfigError,
    GaussianPulse,
    LaserSpec,
    MomentumGrid,
    PlateSpec,
    PulseZone,
    RectPulse,
    RotationSpec,
    SequencePulse,
    SimConfig,
    TimeGrid,
    build_config,
    config_digest,
    default_config,
    with_plate,
    with_rotation,
)
from .experiments import (
    BciResult,
    LinearityResult,
    SweepResult,
    SweepRow,
    bci_config,
    no_mirror_config,
    recoil_slope,
    run_bci,
    run_trajectories,
    sagnac_linearity,
    sweep_plate_position,
)
from .observables import (
    AreaEstimate,
    FringeFit,
    FringeFitError,
    FringeScan,
    LinearityError,
    bci_reference_area,
    effective_area,
    fit_fringe,
    scan_phase,
)
from .propagator import (
    EvolutionResult,
    ManifoldState,
    ResolutionError,
    TrajectoryRecord,
    init_wavepacket,
    populations,
    propagate,
    step_manifold,
)
from .three_level import (
    AdiabaticComparison,
    ThreeLevelResult,
    compare_adiabatic,
    comparison_config,
    propagate_three_level,
    three_level_hamiltonian,
)
from .wavepacket import (
    PositionWavefunctions,
    centroid,
    position_grid,
    reconstruct_position,
    spread,
)

__all__ = [
    "__version__",
    "AtomSpec", "ConfigError", "GaussianPulse", "LaserSpec", "MomentumGrid",
    "PlateSpec", "PulseZone", "RectPulse", "RotationSpec", "SequencePulse",
    "SimConfig", "TimeGrid", "build_config", "config_digest", "default_config",
    "with_plate", "with_rotation",
    "BciResult", "LinearityResult", "SweepResult", "SweepRow", "bci_config",
    "no_mirror_config", "recoil_slope", "run_bci", "run_trajectories",
    "sagnac_linearity", "sweep_plate_position",
    "AreaEstimate", "FringeFit", "FringeFitError", "FringeScan", "LinearityError",
    "bci_reference_area", "effective_area", "fit_fringe", "scan_phase",
    "EvolutionResult", "ManifoldState", "ResolutionError", "TrajectoryRecord",
    "init_wavepacket", "populations", "propagate", "step_manifold",
    "AdiabaticComparison", "ThreeLevelResult", "compare_adiabatic",
    "comparison_config", "propagate_three_level", "three_level_hamiltonian",
    "PositionWavefunctions", "centroid", "position_grid", "reconstruct_position",
    "spread",
]
