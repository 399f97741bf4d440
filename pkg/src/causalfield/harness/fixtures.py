"""Standard desk-scale configurations used by the verification scenarios.

Geometry layouts (support boxes, slow-light slabs, probe placements) are
deliberately frozen here so campaign runs are reproducible; amplitudes
scale with the ``amp`` parameters.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..bumps import Bump, bump_in_cells
from ..geometry import KineticPerturbation, perturbation_from_templates
from ..grid import LatticeField, LatticeSpec


def window_1p1(n_t=48, n_x=160, dx=0.25, dt=0.08, m=1.0, c_max=2.0,
               boundary="zero") -> LatticeSpec:
    return LatticeSpec((n_t, n_x), dx, dt, m, c_max, boundary)


def box_perturbation(spec: LatticeSpec, t0, t1, x0, x1,
                     a00=0.0, avec=0.0, amat=0.0, aq=0.0) -> KineticPerturbation:
    tpl = {}
    if a00:
        tpl["p00"] = [bump_in_cells(spec, (t0, x0), (t1, x1), a00)]
    if avec:
        tpl["pvec"] = {0: [bump_in_cells(spec, (t0, x0), (t1, x1), avec)]}
    if amat:
        tpl["pmat"] = {(0, 0): [bump_in_cells(spec, (t0, x0), (t1, x1), amat)]}
    if aq:
        tpl["q"] = [bump_in_cells(spec, (t0, x0), (t1, x1), aq)]
    return perturbation_from_templates(spec, tpl)


def source(spec: LatticeSpec, t0, t1, x0, x1, amp=1.0) -> LatticeField:
    return LatticeField(spec, bump_in_cells(spec, (t0, x0), (t1, x1),
                                            amp).value(spec.axes()))


def centered_templates(spec: LatticeSpec, amp=1.0, cross=True) -> dict:
    """Mid-window smooth perturbation templates reusable across
    refinement levels (physical coordinates)."""
    t_mid = (spec.n_t // 2) * spec.dt
    x_mid = (spec.shape[1] // 2) * spec.dx
    tpl = {
        "p00": [Bump((t_mid, x_mid), (9 * spec.dt, 14 * spec.dx), 0.12 * amp)],
        "pmat": {(0, 0): [Bump((t_mid, x_mid - spec.dx),
                               (10 * spec.dt, 13 * spec.dx), 0.15 * amp)]},
        "q": [Bump((t_mid, x_mid), (8 * spec.dt, 12 * spec.dx), 0.3 * amp)],
        "pvec": {},
    }
    if cross:
        tpl["pvec"] = {0: [Bump((t_mid + spec.dt, x_mid),
                                (9 * spec.dt, 13 * spec.dx), 0.1 * amp)]}
    return tpl


def random_admissible_bump(rng: np.random.Generator, spec: LatticeSpec,
                           amp: float = 0.3, cross: bool = False
                           ) -> KineticPerturbation:
    lo_t = int(rng.integers(spec.n_t // 4, spec.n_t // 2))
    w_t = int(rng.integers(6, 12))
    lo_x = int(rng.integers(spec.shape[1] // 3, spec.shape[1] // 2))
    w_x = int(rng.integers(10, 18))
    a = lambda s: float(rng.uniform(0.3, 1.0)) * s * amp * \
        float(rng.choice([-1.0, 1.0]))
    return box_perturbation(spec, lo_t, lo_t + w_t, lo_x, lo_x + w_x,
                            a00=a(0.4), avec=a(0.3) if cross else 0.0,
                            amat=a(0.5), aq=a(1.0))


def minkowski_factorization_cases(spec: LatticeSpec, count: int = 5):
    """Timelike-stacked (P, Q) pairs with certified flat-cone order."""
    cases = []
    for k in range(count):
        shift = 4 * (k - count // 2)
        P = box_perturbation(spec, 26, 34, 70 + shift, 86 + shift,
                             0.12, 0.1 if k % 2 else 0.0, 0.15, 0.3)
        Q = box_perturbation(spec, 10, 16, 66 + shift, 82 + shift,
                             0.14, 0.0 if k % 2 else 0.1, 0.17, 0.35)
        cases.append((P, Q))
    return cases


def relative_factorization_case(k: int = 0):
    """Slow-light base N narrowing the cones between Q and the composite
    P = (late timelike piece) + (piece inside the flat past cone of Q
    but outside the g_N one).  The cases differ in amplitudes and
    support sizes, not just by translation."""
    spec = LatticeSpec((56, 256), 0.25, 0.08, 1.0, 2.0)
    shift = 6 * (k - 1)
    s = (1.0, 0.85, 1.1)[k % 3]
    w = (0, 2, -1)[k % 3]
    N = box_perturbation(spec, 2, 38, 90 + shift, 166 + shift + 2 * w,
                         1.2 * s, 0, -0.5 * s, 0)
    Q = box_perturbation(spec, 34, 40, 120 + shift, 132 + shift + w,
                         0.25 * s, 0.12 * s, 0.3 * s, 0.5 * s)
    Pa = box_perturbation(spec, 46, 52, 118 + shift, 134 + shift + w,
                          0.4 * s, 0.15 * s, 0.4 * s, 0.8 * s)
    Pb = box_perturbation(spec, 6, 10, 109 + shift, 111 + shift,
                          0.2 * s, 0.0, 0.2 * s, 0.4 * s)
    probes = [source(spec, 4, 8, 120 + shift + 10 * i, 128 + shift + 10 * i)
              for i in (-2, -1, 0)]
    return spec, N, Q, Pa + Pb, probes


def weyl_window(n_t=96, n_x=12) -> LatticeSpec:
    return LatticeSpec((n_t, n_x), 1.0, 0.4, 1.0, 2.0, boundary="periodic")


def weyl_demo_perturbation(spec: LatticeSpec, amp=1.0) -> KineticPerturbation:
    n_x = spec.shape[1]
    return box_perturbation(spec, 30, 44, 2, min(9, n_x - 3),
                            0.1 * amp, 0.06 * amp, 0.12 * amp, 0.25 * amp)


def measured_cocycle_setup(n_max: int = 5):
    """Cell universe over a periodic window, ready for measured runs."""
    from ..cocycle import CellUniverse, RegionPair
    from ..weyl import FockBasis, OneParticleSpace

    spec = LatticeSpec((64, 16), 1.0, 0.4, 1.0, 2.0, boundary="periodic")
    space = OneParticleSpace(spec, n_ref=4)
    basis = FockBasis(16, n_max)
    universe = CellUniverse(6, 4, components=4, bound=Fraction(1, 8), speed=3)
    pairs = [
        RegionPair(frozenset(universe.block(4, 5, 0, 1)),
                   frozenset(universe.block(0, 1, 0, 1))),
        RegionPair(frozenset(universe.block(4, 5, 2, 3)),
                   frozenset(universe.block(0, 1, 0, 1))),
    ]
    grid = {"t_offset": 8, "levels_per_cell": 8, "sites_per_cell": 4}
    return spec, space, basis, universe, pairs, grid
