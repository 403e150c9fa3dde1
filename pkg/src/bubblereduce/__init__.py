"""Two-bubble concentration for critical Hardy-Sobolev type equations.

Bubble families and curvature models, the cylindrical quadrature they
need, the interaction constants, two-centre expansions, the reduced
finite-dimensional system and residual checks of the resulting ansatz.
"""

from .errors import (AdmissibilityError, BubbleReduceError, CertificateError, ConvergenceError,
                     DegenerateConfigError, DomainError, InconclusiveDegreeError,
                     SeparationError, ToleranceError)
from .model_core import (Bubble, ConstantModel, HeisenbergBubble, MaxPointModel,
                         PerturbativeLandscape, PerturbativeModel, SpaceDims, TwoBubbleConfig,
                         load_model)
from .quadrature import QuadratureSpec
from .constants import compute_constants, cross_check_table
from .reduction import (ConcentrationAnsatz, ReducedSystem, newton_solve, solve_theorem23,
                        solve_theorem24, winding_degree)
from .residual import energy, energy_gradient, strong_residual

__all__ = [
    "AdmissibilityError", "BubbleReduceError", "CertificateError", "ConvergenceError",
    "DegenerateConfigError", "DomainError", "InconclusiveDegreeError", "SeparationError",
    "ToleranceError", "Bubble", "ConstantModel", "HeisenbergBubble", "MaxPointModel",
    "PerturbativeLandscape", "PerturbativeModel", "SpaceDims", "TwoBubbleConfig", "load_model",
    "QuadratureSpec", "compute_constants", "cross_check_table", "ConcentrationAnsatz",
    "ReducedSystem", "newton_solve", "solve_theorem23", "solve_theorem24", "winding_degree",
    "energy", "energy_gradient", "strong_residual",
]
