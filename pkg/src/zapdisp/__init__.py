"""Multiscale dispersion laboratory for jump-and-remix channel transport."""

from .diagnostics import compare_micro_macro, defect_residual, shape_check, transient_decay
from .kernel import JumpKernel, apply, moment_exists, moment_operator
from .macro import MacroField, solve_fd, solve_spectral
from .micro import MicroField, MicroGrid, MicroSolver, exp_convolve, initial_condition, mass
from .particles import McConfig, fit_rates, histogram, simulate
from .polynomial import YPolynomial
from .profile import CrossSection, VelocityProfile, build_cross_section, cross_mean, eval_profile
from .slow_manifold import (SlowManifold, block_operator, closed_form_order2, derive,
                            zero_eigenspace)

__version__ = "0.1.0"
