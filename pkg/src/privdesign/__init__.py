"""Point-wise private mechanism design: closed-form chi-square designs for
invertible channels and linear-programming l1 designs for general ones."""

from .errors import *  # noqa: F401,F403
from .invertible import compute_w, design_invertible, sandwich_bounds
from .measures import chi_square, divergence, entropy, kl, l1, mutual_information
from .oracle import OracleConfig, brute_force
from .polytope import Mode, design_lp, enumerate_extreme_points
from .prob import (
    Divergence,
    MechanismDesign,
    ProblemInstance,
    instance_from_joint,
    make_budgets,
    make_channel,
    make_instance,
    make_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "compute_w", "design_invertible", "sandwich_bounds",
    "chi_square", "divergence", "entropy", "kl", "l1", "mutual_information",
    "OracleConfig", "brute_force",
    "Mode", "design_lp", "enumerate_extreme_points",
    "Divergence", "MechanismDesign", "ProblemInstance", "instance_from_joint",
    "make_budgets", "make_channel", "make_instance", "make_pmf",
]
