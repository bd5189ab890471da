"""Spectral toolkit for a coupled thermoelastic plate system on a box.

The package simulates the first-order reformulation of the hinged
thermoelastic plate with a curvature nonlinearity, using a sine spectral
basis in which the linear physics is exact, and provides the diagnostic
machinery (weighted norms, hypothesis checks, decay fits, fixed-point
solvers) needed to probe its small-data exponential decay behaviour.
"""

from .errors import (BlowUp, ConfigError, GridMismatchError, InadmissibleParams,
                     InadmissiblePhi, NeumannDiverged, NonHurwitz,
                     NonPositiveSamples, OuterDiverged, PlateflowError,
                     RepresentationError, WindowTooSmall)
from .fixedpoint import PicardConfig, picard_solve, solve_frozen_coefficient
from .nonlinearity import (PhiModel, eval_quasilinear, eval_semilinear, phi_model,
                           validate_phi)
from .norms import (HypothesisParams, check_hypotheses, lp_norm, sobolev_norm,
                    state_norm, weighted_time_norm)
from .operators import (CouplingMatrix, ModeBlocks, SpectrumReport, eig_M,
                        phi_functions, semigroup_apply, spectral_bound)
from .spectral import (Grid, ScalarField, SpectralState, dealias, dst_forward,
                       dst_forward_direct, dst_inverse, dst_inverse_direct,
                       gradient_squared, laplacian_apply, laplacian_solve)
from .timestepping import (StepperConfig, Trajectory, integrate, step_etdrk2,
                           step_exp_euler)

__version__ = "0.1.0"

__all__ = [
    "BlowUp", "ConfigError", "CouplingMatrix", "Grid", "GridMismatchError",
    "HypothesisParams", "InadmissibleParams", "InadmissiblePhi", "ModeBlocks",
    "NeumannDiverged", "NonHurwitz", "NonPositiveSamples", "OuterDiverged",
    "PhiModel", "PicardConfig", "PlateflowError", "RepresentationError",
    "ScalarField", "SpectralState", "SpectrumReport", "StepperConfig",
    "Trajectory", "WindowTooSmall", "check_hypotheses", "dealias",
    "dst_forward", "dst_forward_direct", "dst_inverse", "dst_inverse_direct",
    "eig_M", "eval_quasilinear", "eval_semilinear", "gradient_squared",
    "integrate", "laplacian_apply", "laplacian_solve", "lp_norm", "phi_functions",
    "phi_model", "picard_solve", "semigroup_apply", "sobolev_norm",
    "solve_frozen_coefficient", "spectral_bound", "state_norm", "step_etdrk2",
    "step_exp_euler", "validate_phi", "weighted_time_norm",
]
