"""Interior-point solver for quadratic objectives over linear and second-order cones."""

from .cones import NonNegative, SecondOrder
from .ipm import SolverOptions, solve
from .program import ConicProgram, KKTResiduals, SolveResult, Status, kkt_residuals

__all__ = ["ConicProgram", "SolveResult", "Status", "SolverOptions", "KKTResiduals",
           "NonNegative", "SecondOrder", "solve", "kkt_residuals"]
