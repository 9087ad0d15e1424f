"""Stability functional for small-BV hyperbolic systems and its numerical checks."""
__version__ = "0.1.0"

from .errors import (BadParameter, ConfigError, CriterionFailure, HypStabError, NonHyperbolic,
                     NumericalFailure, OutOfDomain)
from .flux_models import FluxModel, builtin, check_hyperbolicity, eigen_at
from .functionals_pcw import (PiecewiseConstantFn, StabilityConstants, glimm_total, interaction_potential,
                              linear_functional, stability_phi, stability_weight)
from .riemann import psi_compose, riemann_fan, shock_compose, solve_shock_strengths, solve_strengths
from .wave_measures import (BVFunction, approx_sequence, interaction_measure, upsilon_hat, wave_measures,
                            xi_hat)
from .front_tracking import ft_solve, phi_eps_compare, phi_timeline, snapshot
