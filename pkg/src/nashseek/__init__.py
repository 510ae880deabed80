"""Distributed Nash equilibrium seeking over switching digraphs.

Simulation and verification tools for N-player games whose actions are
driven by uncertain high-order nonlinear plants, including adaptive
parameter estimation and sign-based rejection of bounded disturbances.
"""

from nashseek.analysis import (
    AnalysisConfig,
    ConvergenceReport,
    Criterion,
    StabilityMap,
    delta_sweep,
    emit_report,
    fit_exponential_rate,
    theorem_verdict,
)
from nashseek.control import ControllerConfig, ExactSign, Law, Smoothed, delta_star_bound, sgn
from nashseek.errors import (
    CertificationError,
    ConfigurationError,
    ConstructionError,
    ConvergenceError,
    InputError,
    NashSeekError,
    OutputError,
    ParseError,
    SimulationDiverged,
    SolverError,
    ValidationError,
)
from nashseek.game import (
    ClosedForm,
    Custom,
    Exact,
    Flow,
    GameSpec,
    LinearQuadratic,
    MonotonicityCertificate,
    Sampled,
    certify,
    pseudogradient,
    solve_ne,
)
from nashseek.graphs import (
    GraphSnapshot,
    JSCReport,
    Periodic,
    Scripted,
    SwitchingSchedule,
    is_jointly_strongly_connected,
    snapshot,
)
from nashseek.io import load_scenario, read_trace, scenario_from_dict, scenario_to_dict, write_trace
from nashseek.plant import (
    BoundedRational,
    CustomRegressor,
    DisturbanceSpec,
    Exosystem,
    NoDisturbance,
    PiecewiseConstantRandom,
    PlantSpec,
    SinOfState,
    Sinusoid,
    SquareWave,
    ZeroRegressor,
    build_realization,
    fictitious_output,
)
from nashseek.sim import Integration, Scenario, SimTrace, integrate, reference_ne, validate

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "BoundedRational",
    "CertificationError",
    "ClosedForm",
    "ConfigurationError",
    "ConstructionError",
    "ControllerConfig",
    "ConvergenceError",
    "ConvergenceReport",
    "Criterion",
    "Custom",
    "CustomRegressor",
    "DisturbanceSpec",
    "Exact",
    "ExactSign",
    "Exosystem",
    "Flow",
    "GameSpec",
    "GraphSnapshot",
    "InputError",
    "Integration",
    "JSCReport",
    "Law",
    "LinearQuadratic",
    "MonotonicityCertificate",
    "NashSeekError",
    "NoDisturbance",
    "OutputError",
    "ParseError",
    "Periodic",
    "PiecewiseConstantRandom",
    "PlantSpec",
    "Sampled",
    "Scenario",
    "Scripted",
    "SimTrace",
    "SimulationDiverged",
    "SinOfState",
    "Sinusoid",
    "Smoothed",
    "SolverError",
    "SquareWave",
    "StabilityMap",
    "SwitchingSchedule",
    "ValidationError",
    "ZeroRegressor",
    "build_realization",
    "certify",
    "delta_star_bound",
    "delta_sweep",
    "emit_report",
    "fictitious_output",
    "fit_exponential_rate",
    "integrate",
    "is_jointly_strongly_connected",
    "load_scenario",
    "pseudogradient",
    "read_trace",
    "reference_ne",
    "scenario_from_dict",
    "scenario_to_dict",
    "sgn",
    "snapshot",
    "solve_ne",
    "theorem_verdict",
    "validate",
    "write_trace",
]
