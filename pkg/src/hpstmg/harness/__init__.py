"""Test problems, error norms, studies and the cavity demo."""
from .cavity import CavityTrace, cavity_demo_2d, write_cavity_csv
from .config import ConfigError, RunConfig, load_config
from .errors import ErrorReport, compute_errors, eoc
from .problems import CavityProblem, ManufacturedProblem, cavity_problem, manufactured_problem
from .studies import (
    ConvergenceRow,
    RobustnessRow,
    StudySettings,
    convergence_study,
    robustness_sweep,
    solve_manufactured,
    write_convergence_csv,
    write_robustness_csv,
)

__all__ = [
    "CavityProblem", "CavityTrace", "ConfigError", "ConvergenceRow", "ErrorReport",
    "ManufacturedProblem", "RobustnessRow", "RunConfig", "StudySettings", "cavity_demo_2d",
    "cavity_problem", "compute_errors", "convergence_study", "eoc", "load_config",
    "manufactured_problem", "robustness_sweep", "solve_manufactured", "write_cavity_csv",
    "write_convergence_csv", "write_robustness_csv",
]
