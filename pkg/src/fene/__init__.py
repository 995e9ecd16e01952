"""FENE dumbbell micro-macro simulator with a Brownian-dynamics oracle and inequality checks."""
from .core import (
    ConfigGrid,
    PhaseDensity,
    PotentialParams,
    build_config_grid,
    equilibrium_cells,
    equilibrium_density,
    partition_function,
    potential_gradient,
    potential_value,
    quadrature,
)
from .errors import (
    BDStepError,
    ConfigError,
    DomainError,
    FeneError,
    FormatError,
    NumericalFailure,
    SchemeViolationError,
    StepSizeError,
)
from .fokker_planck import FokkerPlanckSolver, VelocityGradient, assemble_step_operator, get_solver, steady_state, step
from .macro_flow import FlowProtocol, MacroState, build_spectral_grid, couple_step, ns_step, protocol_kappa
from .stress import StressTensor, kramers_stress, stress_bound_check

__version__ = "0.1.0"
