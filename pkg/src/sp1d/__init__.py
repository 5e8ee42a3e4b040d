"""Density/potential drift-diffusion systems in one dimension and their
reciprocal-density reformulation: solvers, change of variables and diagnostics."""
from .config import ScenarioConfig, parse_config
from .diagnostics import (
    Lambda_M,
    bump_initial_data,
    lyapunov_L,
    lyapunov_L1,
    theta_M,
    virial_Lq,
)
from .nonlinearity import DiffusionSpec
from .numerics import GridField
from .primal import primal_run
from .transform import f_to_u, u_to_f
from .transformed import transformed_run

__all__ = [
    "DiffusionSpec", "GridField", "Lambda_M", "ScenarioConfig", "bump_initial_data",
    "f_to_u", "lyapunov_L", "lyapunov_L1", "parse_config", "primal_run", "theta_M",
    "transformed_run", "u_to_f", "virial_Lq",
]
