"""Symplectic quotient classes, Weyl phases, and Fock implementers."""

from .elements import (ExtendedPhases, WeylElement,
                       advanced_shift_identity_defect, extended_phase,
                       linear_functional, perturbed_pairing, perturbed_weyl,
                       weyl_element, weyl_product, wrap_angle)
from .fock import (FockBasis, coherent_state, displacement_apply,
                   taylor_exp_apply)
from .implementer import (GaussianImplementer, MeasuredPhase,
                          adjoint_action_defect, bogoliubov_defects,
                          build_implementer, extract_mode_map, measure_alpha,
                          quadratic_generator)
from .onepspace import OneParticleSpace, SolutionClass

__all__ = [
    "ExtendedPhases", "WeylElement", "advanced_shift_identity_defect",
    "extended_phase", "linear_functional",
    "perturbed_pairing", "perturbed_weyl", "weyl_element", "weyl_product",
    "wrap_angle", "FockBasis", "coherent_state", "displacement_apply",
    "taylor_exp_apply", "GaussianImplementer", "MeasuredPhase",
    "adjoint_action_defect", "bogoliubov_defects", "build_implementer",
    "extract_mode_map", "measure_alpha", "quadratic_generator",
    "OneParticleSpace", "SolutionClass",
]
