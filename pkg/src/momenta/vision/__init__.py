"""Application adapters: rigid registration, Kruppa autocalibration, NRSfM quartics."""

from .autocalib import (Diac, FundamentalInput, IntrinsicBounds,
                        autocalib_consensus_problem, autocalib_problem,
                        calibration_errors, kruppa_polys, recover_K,
                        synth_fundamentals)
from .nrsfm import QuarticSystem, nrsfm_problem, nrsfm_solve, synth_quartic_system
from .rigid import (Correspondence3D, RigidEstimate, estimate_rigid,
                    fit_rigid_svd, rigid_consensus_problem, rigid_residuals,
                    synth_rigid)

__all__ = [
    "Correspondence3D", "RigidEstimate", "estimate_rigid", "fit_rigid_svd",
    "rigid_residuals", "rigid_consensus_problem", "synth_rigid",
    "Diac", "FundamentalInput", "IntrinsicBounds", "autocalib_problem",
    "autocalib_consensus_problem", "calibration_errors", "kruppa_polys",
    "recover_K", "synth_fundamentals",
    "QuarticSystem", "nrsfm_problem", "nrsfm_solve", "synth_quartic_system",
]
