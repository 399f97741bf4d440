import math

import numpy as np
import pytest

from causalfield.bumps import bump_in_cells
from causalfield.errors import NotCausallyOrdered
from causalfield.geometry import (Region, perturbation_from_templates,
                                  relation, speed_field)
from causalfield.grid import LatticeField, LatticeSpec, inner
from causalfield.lattice import (free_wave_operator, green_operator,
                                 perturbed_wave_operator)
from causalfield.weyl import (FockBasis, GaussianImplementer,
                              OneParticleSpace, adjoint_action_defect,
                              bogoliubov_defects, build_implementer,
                              coherent_state, extended_phase,
                              extract_mode_map, measure_alpha,
                              perturbed_pairing, perturbed_weyl,
                              quadratic_generator, weyl_element, weyl_product)
from causalfield.scattering import ScatteringMap

SPEC = LatticeSpec((96, 12), dx=1.0, dt=0.4, m=1.0, c_max=2.0,
                   boundary="periodic")
SPACE = OneParticleSpace(SPEC, n_ref=4)


def boxpert(spec, t0, t1, x0, x1, a00, avec, amat, aq):
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


def src(spec, t0, t1, x0, x1, amp=1.0):
    return LatticeField(spec, bump_in_cells(spec, (t0, x0), (t1, x1),
                                            amp).value(spec.axes()))


@pytest.fixture(scope="module")
def P():
    return boxpert(SPEC, 30, 44, 2, 9, 0.1, 0.06, 0.12, 0.25)


def random_source(rng, spec=SPEC, amp=1.0):
    t0 = int(rng.integers(10, spec.n_t - 14))
    x0 = int(rng.integers(0, spec.shape[1]))
    dt_c = int(rng.integers(4, 9))
    dx_c = int(rng.integers(3, min(7, spec.shape[1] - 1)))
    a = amp * float(rng.uniform(0.3, 1.0)) * float(rng.choice([-1, 1]))
    return src(spec, t0, t0 + dt_c, x0, min(x0 + dx_c, spec.shape[1] - 1), a)


class TestOneParticleSpace:
    def test_imaginary_part_is_commutator_pairing(self, rng):
        dc = green_operator(SPEC, None, "commutator")
        for _ in range(100):
            f = random_source(rng)
            g = random_source(rng)
            ip = SPACE.inner(SPACE.class_of(f), SPACE.class_of(g))
            ref = inner(f, dc.apply(g))
            scale = max(abs(ref), f.norm() * g.norm())
            assert abs(ip.imag - ref) <= 1e-7 * scale

    def test_amplitude_roundtrip(self, rng):
        f = random_source(rng)
        sol = SPACE.class_of(f)
        back = SPACE.solution_from_amplitudes(SPACE.amplitudes(sol))
        assert np.abs(back.u0 - sol.u0).max() <= 1e-12 * np.abs(sol.u0).max()
        assert np.abs(back.u1 - sol.u1).max() <= 1e-12 * np.abs(sol.u1).max()

    def test_test_function_roundtrip(self, rng):
        f = random_source(rng)
        sol = SPACE.class_of(f)
        f2 = SPACE.test_function(sol)
        sol2 = SPACE.class_of(f2)
        assert (sol2 - sol).norm() <= 1e-10 * sol.norm()

    def test_cauchy_data_reconstructs_solution(self, rng):
        f = random_source(rng)
        u = green_operator(SPEC, None, "commutator").apply(f).data
        sol = SPACE.class_of(f)
        assert np.abs(sol.evolve() - u).max() <= 1e-8 * np.abs(u).max()


class TestWeylAlgebra:
    def test_inverse_pair_is_identity(self, rng):
        f = random_source(rng)
        a = weyl_element(SPACE, f)
        prod = weyl_product(SPACE, a, a.inverse())
        assert prod.is_identity(scale=a.sol.norm())

    def test_wave_image_is_identity(self, rng):
        g = random_source(rng)
        kg = free_wave_operator(SPEC).apply(g)
        w = weyl_element(SPACE, kg)
        assert w.sol.norm() <= 1e-9 * g.norm()
        assert abs(w.angle) <= 1e-9

    def test_associativity_phase(self, rng):
        for _ in range(10):
            f, g, h = (random_source(rng) for _ in range(3))
            wf, wg, wh = (weyl_element(SPACE, x) for x in (f, g, h))
            left = weyl_product(SPACE, weyl_product(SPACE, wf, wg), wh)
            right = weyl_product(SPACE, wf, weyl_product(SPACE, wg, wh))
            assert abs(left.angle - right.angle) <= 1e-9
            assert (left.sol - right.sol).norm() <= 1e-12 * left.sol.norm()


class TestPerturbedWeyl:
    def test_zero_perturbation(self, rng):
        f = random_source(rng)
        w0 = perturbed_weyl(SPACE, None, f)
        w1 = weyl_element(SPACE, f)
        assert (w0.sol - w1.sol).norm() <= 1e-12 * w1.sol.norm()

    def test_equation_image_is_identity(self, P):
        phi0 = src(SPEC, 20, 30, 3, 9, 0.7)
        op_p = perturbed_wave_operator(SPEC, P)
        w = perturbed_weyl(SPACE, P, op_p.apply(phi0))
        assert w.sol.norm() <= 1e-8 * phi0.norm()

    def test_perturbed_weyl_relation(self, P, rng):
        for _ in range(5):
            f = random_source(rng, amp=0.8)
            g = random_source(rng, amp=0.8)
            wf = perturbed_weyl(SPACE, P, f)
            wg = perturbed_weyl(SPACE, P, g)
            prod = weyl_product(SPACE, wf, wg)
            expect = -0.5 * perturbed_pairing(SPACE, P, f, g)
            scale = max(abs(expect), 1.0)
            assert abs(prod.angle - expect) <= 1e-7 * scale
            sum_cls = SPACE.class_of_perturbed(P, f + g)
            assert (prod.sol - sum_cls).norm() <= 1e-9 * sum_cls.norm()


class TestExtendedPhases:
    def test_zero_partner_phase_one(self, P):
        f = src(SPEC, 30, 38, 2, 8)
        ph = extended_phase(SPEC, 0.4, f, P, LatticeField.zeros(SPEC))
        assert ph.causal_angle == 0.0
        assert ph.causal_phase == 1.0

    def test_causal_phase_one_when_ordered(self, P):
        # supp f succeeds supp g for the perturbed cones: the advanced
        # pairing vanishes
        f = src(SPEC, 60, 66, 2, 8)
        g = src(SPEC, 20, 26, 2, 8)
        spd = speed_field(P)
        assert relation(Region.of_support(f), Region.of_support(g), spd) \
            == "succeeds"
        ph = extended_phase(SPEC, 0.0, f, P, g)
        assert abs(ph.causal_angle) <= 1e-7

    def test_generic_phase_matches_independent_pairing(self, P):
        f = src(SPEC, 30, 40, 2, 8)
        g = src(SPEC, 34, 44, 4, 10, 0.7)
        ph = extended_phase(SPEC, 0.0, f, P, g)
        da = green_operator(SPEC, P, "advanced")
        direct = inner(f, da.apply(g))
        assert abs(ph.causal_angle - direct) <= 1e-8 * max(abs(direct), 1.0)
        # prefactor angle: c - (1/2) <f, Dirac f>
        dd = green_operator(SPEC, P, "dirac")
        pre = extended_phase(SPEC, 0.25, f, P, g).prefactor_angle
        expect = 0.25 - 0.5 * inner(f, dd.apply(f))
        assert abs(math.remainder(pre - expect, 2 * math.pi)) <= 1e-9


class TestImplementer:
    def test_identity_for_zero(self):
        basis = FockBasis(SPEC.shape[1], 3)
        impl = build_implementer(SPACE, None, basis)
        assert impl.is_identity()
        v = np.random.default_rng(0).normal(size=basis.dim) + 0j
        assert np.linalg.norm(impl.apply(v) - v) <= 1e-12 * np.linalg.norm(v)

    def test_bogoliubov_conditions(self, P):
        A, B = extract_mode_map(SPACE, ScatteringMap(SPEC, P))
        d = bogoliubov_defects(A, B)
        assert d["unitarity"] <= 1e-5
        assert d["symmetry"] <= 1e-5
        assert d["unitarity_dual"] <= 1e-5
        assert d["symmetry_dual"] <= 1e-5

    def test_hs_norm_monotone_under_scaling(self, P):
        norms = []
        for s in (1.0, 0.5, 0.25):
            A, B = extract_mode_map(SPACE, ScatteringMap(SPEC, P.scaled(s)))
            norms.append(bogoliubov_defects(A, B)["hs_norm"])
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] <= 0.3 * norms[0]

    def test_single_mode_squeeze_oracle(self):
        # reference: exp((r/2)(adag^2 - a^2)) has vacuum overlap
        # sech(r)^(1/2) and transforms adag -> cosh r adag - sinh r a
        r = 0.3
        A = np.array([[math.cosh(r)]], dtype=complex)
        B = np.array([[math.sinh(r)]], dtype=complex)
        h, g = quadratic_generator(A, B)
        assert abs(h[0, 0]) <= 1e-12
        assert abs(g[0, 0] - (-1j * r)) <= 1e-12
        basis = FockBasis(1, 8)
        impl = GaussianImplementer(basis, A, B, h, g, 1.0 + 0j)
        vac = basis.vacuum()
        overlap = complex(np.vdot(vac, impl.apply(vac)))
        assert abs(overlap - (1.0 / math.cosh(r)) ** 0.5) <= 1e-6

    def test_truncated_unitarity(self, P, rng):
        basis = FockBasis(SPEC.shape[1], 4)
        impl = build_implementer(SPACE, P, basis)
        psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        psi /= np.linalg.norm(psi)
        assert abs(np.linalg.norm(impl.apply(psi)) - 1.0) <= 1e-6
        back = impl.apply(impl.apply(psi), inverse=True)
        assert np.linalg.norm(back - psi) <= 1e-6

    def test_vacuum_gauge_positive(self, P):
        basis = FockBasis(SPEC.shape[1], 4)
        impl = build_implementer(SPACE, P, basis)
        overlap = complex(np.vdot(basis.vacuum(), impl.apply(basis.vacuum())))
        assert overlap.real > 0
        assert abs(overlap.imag) <= 1e-10 * overlap.real

    def test_adjoint_action_decreases_with_cutoff(self, P):
        f = src(SPEC, 20, 28, 3, 9, 0.12)
        vals = []
        for n_max in (3, 5):
            impl = build_implementer(SPACE, P, FockBasis(SPEC.shape[1], n_max))
            vals.append(adjoint_action_defect(SPACE, impl, P, f))
        assert vals[1] <= 0.5 * vals[0]


class TestMeasuredAlpha:
    def test_trivial_triple(self):
        basis = FockBasis(SPEC.shape[1], 3)
        zero = boxpert(SPEC, 30, 40, 2, 8, 0, 0, 0, 0)
        mp = measure_alpha(SPACE, basis, zero, zero, None,
                           require_certificate=False, check_stability=False)
        assert abs(mp.value - 1.0) <= 1e-12

    def test_refuses_entangled_triple(self, P):
        basis = FockBasis(SPEC.shape[1], 3)
        with pytest.raises(NotCausallyOrdered):
            measure_alpha(SPACE, basis, P, P, None)

    def test_alpha_wellposed_and_stable(self, P):
        Q = boxpert(SPEC, 10, 22, 3, 10, 0.12, -0.06, 0.14, 0.28)
        basis = FockBasis(SPEC.shape[1], 5)
        mp = measure_alpha(SPACE, basis, P, Q, None)
        assert 1.0 - 1e-6 <= mp.diagnostics["abs_raw"] <= 1.0 + 1e-12
        assert mp.err <= 1e-4
        assert abs(abs(mp.value) - 1.0) <= 1e-12

    def test_spacelike_symmetry(self):
        # thin-in-time supports on opposite sides of the ring, certified
        # spacelike for the base cones
        spec = LatticeSpec((96, 16), dx=1.0, dt=0.4, m=1.0, c_max=2.0,
                           boundary="periodic")
        space = OneParticleSpace(spec, n_ref=4)
        A = boxpert(spec, 40, 44, 0, 3, 0.15, 0.0, 0.18, 0.3)
        Bp = boxpert(spec, 40, 44, 8, 11, 0.14, 0.0, 0.16, 0.32)
        assert relation(Region.of_support(A), Region.of_support(Bp), 1.0) \
            == "spacelike"
        basis = FockBasis(16, 4)
        m1 = measure_alpha(space, basis, A, Bp, None, check_stability=False)
        m2 = measure_alpha(space, basis, Bp, A, None, check_stability=False)
        tol = 3.0 * max(m1.err + m2.err, 1e-9)
        assert abs(np.angle(m1.value * np.conj(m2.value))) <= max(tol, 1e-6)

    def test_sum_splitting_consistency(self):
        # alpha(N|P1+P2, Q) = alpha(N|P1, Q) alpha(N+P1|P2, Q)
        spec = LatticeSpec((96, 12), dx=1.0, dt=0.4, m=1.0, c_max=2.0,
                           boundary="periodic")
        space = OneParticleSpace(spec, n_ref=4)
        basis = FockBasis(12, 4)
        P1 = boxpert(spec, 56, 66, 2, 7, 0.1, 0.05, 0.12, 0.2)
        P2 = boxpert(spec, 58, 68, 6, 11, 0.09, -0.05, 0.1, 0.22)
        Q = boxpert(spec, 16, 26, 3, 10, 0.12, 0.06, 0.14, 0.25)
        lhs = measure_alpha(space, basis, P1 + P2, Q, None,
                            check_stability=False)
        r1 = measure_alpha(space, basis, P1, Q, None, check_stability=False)
        r2 = measure_alpha(space, basis, P2, Q, P1, check_stability=False)
        combo = r1.value * r2.value
        err = 3.0 * (lhs.err + r1.err + r2.err)
        assert abs(np.angle(lhs.value * np.conj(combo))) <= max(err, 1e-6)

    def test_alpha_nontrivial(self, P):
        # the phases feeding the cocycle runs must be resolvably nonzero
        Q = boxpert(SPEC, 10, 22, 3, 10, 0.12, -0.06, 0.14, 0.28)
        basis = FockBasis(SPEC.shape[1], 5)
        mp = measure_alpha(SPACE, basis, P, Q, None, check_stability=False)
        assert abs(mp.angle) >= 50 * mp.err


class TestShiftIdentity:
    def test_advanced_shift_identity(self, rng):
        from causalfield.weyl import advanced_shift_identity_defect
        spec = LatticeSpec((40, 96), 0.25, 0.08, 1.0, 2.0)
        P = boxpert(spec, 14, 26, 40, 56, 0.12, 0.1, 0.15, 0.3)
        f = src(spec, 28, 34, 44, 54, 0.8)
        phis = [LatticeField(spec, rng.normal(size=spec.shape))
                for _ in range(100)]
        assert advanced_shift_identity_defect(spec, P, f, phis) <= 1e-8
