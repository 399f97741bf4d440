"""causalfield: lattice-scale perturbed wave dynamics, scattering phases,
and their cohomological trivialization.

The package is organized by layer:

* ``geometry``   admissible kinetic perturbations, induced metrics,
                 lattice causal cones and certified relations;
* ``lattice``    divergence-form wave stencils and matrix-free
                 retarded/advanced Green operators with functional
                 calculus;
* ``scattering`` symplectic scattering maps, causal splits and the
                 factorization laws;
* ``weyl``       the one-particle mode space, Weyl phases, Gaussian
                 implementers on truncated Fock space, measured
                 factorization phases;
* ``cocycle``    the finite-universe phase-cohomology engine;
* ``harness``    campaign runner, reports, figures, CLI.
"""

from .geometry import (AdmissibilityClass, AdmissibilityReport,
                       GeneralFunctional, KineticPerturbation, MetricBlocks,
                       MinkowskiSpec, Region, causal_cone, check_admissible,
                       class_light_speed, light_speed_bound,
                       metric_from_perturbation, perturbation_from_templates,
                       relation, speed_field, succeeds)
from .grid import Box, LatticeField, LatticeSpec, inner
from .lattice import (GreenOperator, WaveOperator, action_variation,
                      apply_wave_operator, evaluate_functional,
                      free_wave_operator, functional_shift, green_apply,
                      green_operator, perturbation_operator,
                      perturbed_wave_operator, resolvent_defect)
from .scattering import (CausalSplit, ScatteringMap, apply_T, causal_split,
                         factorization_defect, symplectic_defect,
                         wave_times_green)

__version__ = "0.1.0"
