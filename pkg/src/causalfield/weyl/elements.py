"""Weyl elements: unit phases attached to solution classes.

An element is stored as (angle, class); the product accumulates the
angle -(1/2) <f, Delta g> computed from the exactly conserved slice
pairing, so the multiplication phases satisfy associativity to rounding.
Elements of the perturbed algebra are mapped onto free ones through
the advanced transport K Da^P, under which the perturbed pairing
<f, Delta^P g> becomes the free pairing of the transported classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import GeneralFunctional, KineticPerturbation
from ..grid import LatticeField, LatticeSpec, inner
from ..lattice import green_operator
from .onepspace import OneParticleSpace, SolutionClass


def wrap_angle(a: float) -> float:
    """Reduce to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True, eq=False)
class WeylElement:
    """Unit phase (stored as an angle, so unit modulus is structural)
    times the exponentiated field of a solution class."""

    angle: float
    sol: SolutionClass

    @property
    def phase(self) -> complex:
        return complex(np.exp(1j * self.angle))

    def inverse(self) -> "WeylElement":
        return WeylElement(wrap_angle(-self.angle), -self.sol)

    def is_identity(self, tol_class: float = 1e-9, tol_angle: float = 1e-9,
                    scale: float = 1.0) -> bool:
        return self.sol.norm() <= tol_class * max(scale, 1e-300) \
            and abs(wrap_angle(self.angle)) <= tol_angle


def weyl_element(space: OneParticleSpace, f: LatticeField) -> WeylElement:
    return WeylElement(0.0, space.class_of(f))


def weyl_product(space: OneParticleSpace, a: WeylElement,
                 b: WeylElement) -> WeylElement:
    """Product with the multiplication phase -(1/2) <f, Delta g>."""
    sigma = space.symplectic(a.sol, b.sol)
    return WeylElement(wrap_angle(a.angle + b.angle - 0.5 * sigma),
                       a.sol + b.sol)


def perturbed_weyl(space: OneParticleSpace, pert: KineticPerturbation | None,
                   f: LatticeField) -> WeylElement:
    """Element of the perturbed algebra, realized as the free element of
    the advanced-transported source."""
    return WeylElement(0.0, space.class_of_perturbed(pert, f))


def perturbed_pairing(space: OneParticleSpace,
                      pert: KineticPerturbation | None,
                      f: LatticeField, g: LatticeField) -> float:
    """<f, Delta^P g> via an independent direct solve."""
    dc = green_operator(space.lattice, pert, "commutator")
    return inner(f, dc.apply(g))


@dataclass(frozen=True)
class ExtendedPhases:
    """Explicit phase data of an extended operator product."""

    prefactor_angle: float   # c - (1/2) <f, Dirac_P f>
    causal_angle: float      # <f, Advanced_P g>

    @property
    def causal_phase(self) -> complex:
        return complex(np.exp(1j * self.causal_angle))


def extended_phase(lattice: LatticeSpec, const: float, f: LatticeField,
                   pert: KineticPerturbation | None,
                   g: LatticeField) -> ExtendedPhases:
    """Phases of the extended operators: the scalar prefactor of the
    element with constant part ``const`` and linear part f over the
    perturbed dynamics, and the causal product phase <f, Advanced_P g>
    for the ordered pair (f, g)."""
    dd = green_operator(lattice, pert, "dirac")
    da = green_operator(lattice, pert, "advanced")
    pre = const - 0.5 * inner(f, dd.apply(f))
    causal = inner(f, da.apply(g)) if g.support is not None else 0.0
    return ExtendedPhases(wrap_angle(pre), causal)


def linear_functional(lattice: LatticeSpec, pert: KineticPerturbation | None,
                      f: LatticeField) -> GeneralFunctional:
    """The functional with linear density f and the Dirac-propagator
    constant of the perturbed dynamics (quadratic part excluded)."""
    dd = green_operator(lattice, pert, "dirac")
    return GeneralFunctional(0.5 * inner(f, dd.apply(f)), f, None)


def advanced_shift_identity_defect(lattice: LatticeSpec,
                                   pert: KineticPerturbation,
                                   f: LatticeField,
                                   phis: list[LatticeField]) -> float:
    """Max deviation, over the probe fields, of the closed-form
    re-decomposition of the advanced-shifted functionals:

        F_f + quad^{shift by Da f}
          = L_{(K+P) Da f} + (1/2) <Da f, (K+P) Da f> + quad

    evaluated with both sides assembled independently."""
    from ..lattice import (evaluate_functional, functional_shift,
                           perturbation_operator)

    da = green_operator(lattice, None, "advanced")
    dd = green_operator(lattice, None, "dirac")
    da_f = da.apply(f)
    quad = GeneralFunctional(0.0, None, pert)
    lhs_quad = functional_shift(quad, da_f)
    lhs_const = 0.5 * inner(f, dd.apply(f)) + lhs_quad.const
    lhs_lin = f if lhs_quad.lin is None else f + lhs_quad.lin

    # (K+P) Da f in the localized equivalent form f + P (Da f)
    pop = perturbation_operator(lattice, pert)
    g = f + pop.apply(da_f)
    rhs_const = 0.5 * inner(da_f, g)
    lhs = GeneralFunctional(lhs_const, lhs_lin, pert)
    rhs = GeneralFunctional(rhs_const, g, pert)
    worst = 0.0
    for phi in phis:
        worst = max(worst, abs(evaluate_functional(lhs, phi)
                               - evaluate_functional(rhs, phi)))
    return worst
