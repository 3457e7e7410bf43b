"""Conic programming: modeling layer and interior-point solver."""

from .cones import Dims, smat, svec
from .program import ConicProgram, ConicSolution, FeasibilityReport, PsdVar
from .solver import SolverOptions, Status, solve_conelp

__all__ = [
    "ConicProgram", "ConicSolution", "FeasibilityReport", "PsdVar",
    "SolverOptions", "Status", "solve_conelp", "Dims", "svec", "smat",
]
