from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalfield.cocycle import (CellUniverse, Coboundary, ConfigSampler,
                                 Phase, PhaseOracle, RegionPair,
                                 SiteFunctional, check_exchange_identity,
                                 check_extension_laws, check_sum_splitting,
                                 delta_beta, extend_phase, phase_distance,
                                 sample_pair_triples, spacelike_cells,
                                 succ_cells, trivialize)
from causalfield.errors import (DomainViolation, InadmissibleSum,
                                PersistenceFailure)

U = CellUniverse(8, 8, components=4, bound=Fraction(1, 2), speed=2)


def rng_sampler(seed=0):
    return ConfigSampler(U, seed=seed)


class TestPhases:
    def test_exact_arithmetic(self):
        a = Phase(Fraction(1, 3))
        b = Phase(Fraction(5, 6))
        assert (a * b).turns == Fraction(1, 6)
        assert (a * a.inverse()).is_one()
        assert a.exact

    def test_measured_combination(self):
        a = Phase.from_angle(0.3, err=1e-3)
        b = Phase.from_angle(-0.3, err=2e-3)
        c = a * b
        assert not c.exact
        assert c.defect_rad() <= 1e-12
        assert abs(c.err - 3e-3) <= 1e-12

    def test_distance(self):
        a = Phase(Fraction(1, 4))
        b = Phase(Fraction(3, 4))
        assert abs(phase_distance(a, b) - np.pi) <= 1e-12


class TestSiteFunctionals:
    def test_algebra_and_admissibility(self, rng):
        f = U.random_functional(rng, U.block(0, 1, 0, 2))
        g = U.random_functional(rng, U.block(4, 5, 3, 6))
        s = f + g
        assert s.support == f.support | g.support
        assert (f - f).is_zero()
        assert s.is_admissible()
        big = f.scaled(Fraction(100))
        assert not big.is_admissible()

    def test_inadmissible_sum_raises(self, rng):
        f = U.functional({(0, 0): (Fraction(2, 5), 0, 0, 0)})
        with pytest.raises(InadmissibleSum):
            delta_beta(Coboundary.random_rational(0), f, f, f)

    def test_convex_weights(self, rng):
        f = U.random_functional(rng, U.block(0, 1, 0, 3))
        w = {cell: Fraction(1, 3) for cell in f.support}
        part = f.weighted(w)
        rest = f - part
        assert (part + rest).key() == f.key()

    def test_causal_predicates(self):
        early = U.functional({(0, 3): (Fraction(1, 8), 0, 0, 0)})
        late = U.functional({(7, 3): (Fraction(1, 8), 0, 0, 0)})
        side = U.functional({(0, 7): (Fraction(1, 8), 0, 0, 0)})
        assert succ_cells(U, late, early)
        assert not succ_cells(U, early, late)
        # speed 2 over 7 steps reaches 14 cells: same-row distance 4 is
        # spacelike only at small separations in time
        assert spacelike_cells(U, early, side)


class TestCoboundaries:
    def test_trivial_beta(self):
        beta = Coboundary(lambda F: Phase.one(), "one")
        s = rng_sampler()
        N, P, Q = s.ordered_pair()
        assert delta_beta(beta, N, P, Q).is_one()

    def test_additive_beta_is_local(self, rng):
        beta = Coboundary.additive(3, U)
        s = rng_sampler(1)
        for _ in range(10):
            N, P, Q = s.ordered_pair()
            assert delta_beta(beta, N, P, Q).is_one()

    def test_bilinear_closed_form(self, rng):
        beta, bilin = Coboundary.diagonal_bilinear(5, U)
        s = rng_sampler(2)
        for _ in range(10):
            N, P, Q = s.ordered_pair()
            val = delta_beta(beta, N, P, Q)
            expect = Phase((2 * bilin(P, Q)) % 1)
            assert phase_distance(val, expect) == 0.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
    def test_random_beta_identities_exact(self, seed, cfg):
        beta = Coboundary.random_rational(seed)
        oracle = PhaseOracle.from_coboundary(beta, U)
        s = rng_sampler(cfg)
        rep = check_sum_splitting(oracle, s, cases=4)
        assert rep.checked > 0
        assert rep.max_defect_rad == 0.0


class TestIdentityChecks:
    def test_exchange_identity_exact(self):
        oracle = PhaseOracle.from_coboundary(Coboundary.random_rational(7), U)
        rep = check_exchange_identity(oracle, rng_sampler(3), cases=20)
        assert rep.checked >= 5
        assert rep.max_defect_rad == 0.0

    def test_corrupted_oracle_flagged(self):
        base = PhaseOracle.from_coboundary(Coboundary.random_rational(9), U)
        bad = base.corrupted(Fraction(1, 60))   # about 0.105 rad
        worst = 0.0
        for k in range(6):
            rep = check_sum_splitting(bad, rng_sampler(50 + k), cases=10)
            worst = max(worst, rep.max_defect_rad)
        assert worst >= 0.1

    def test_domain_violation_raises(self):
        oracle = PhaseOracle.from_coboundary(Coboundary.random_rational(1), U)
        late = U.functional({(7, 3): (Fraction(1, 8), 0, 0, 0)})
        early = U.functional({(0, 3): (Fraction(1, 8), 0, 0, 0)})
        with pytest.raises(DomainViolation):
            oracle(U.zero(), early, late)   # early does not succeed late


class TestExtension:
    def test_extension_equals_coboundary(self):
        beta = Coboundary.random_rational(11)
        restricted = PhaseOracle.from_coboundary(beta, U, domain="succ_c")
        ext = extend_phase(restricted)
        full = PhaseOracle.from_coboundary(beta, U, domain="disjoint")
        s = rng_sampler(4)
        for _ in range(10):
            N, P, Q = s.disjoint_pair()
            if not ext.in_domain(N, P, Q):
                continue
            assert phase_distance(ext(N, P, Q), full(N, P, Q)) == 0.0

    def test_extension_symmetric_and_splitting(self):
        beta = Coboundary.random_rational(13)
        ext = extend_phase(PhaseOracle.from_coboundary(beta, U))
        rep = check_extension_laws(ext, rng_sampler(5), cases=10)
        assert rep.checked >= 3
        assert rep.max_defect_rad == 0.0

    def test_extension_restricts_to_input(self):
        beta = Coboundary.random_rational(15)
        restricted = PhaseOracle.from_coboundary(beta, U)
        ext = extend_phase(restricted)
        s = rng_sampler(6)
        for _ in range(8):
            N, P, Q = s.ordered_pair()
            if not (restricted.in_domain(N, P, Q) and ext.in_domain(N, P, Q)):
                continue
            assert phase_distance(ext(N, P, Q), restricted(N, P, Q)) == 0.0

    def test_speed_class_independence(self):
        # extending inside a wider cone class agrees on common triples
        beta = Coboundary.random_rational(17)
        u_wide = CellUniverse(8, 8, components=4, bound=Fraction(1, 2),
                              speed=3)
        ext_narrow = extend_phase(PhaseOracle.from_coboundary(beta, U))
        ext_wide = extend_phase(PhaseOracle.from_coboundary(
            Coboundary.random_rational(17), u_wide))
        s = rng_sampler(7)
        for _ in range(8):
            N, P, Q = s.disjoint_pair()
            Nw = u_wide.functional(dict(N.items))
            Pw = u_wide.functional(dict(P.items))
            Qw = u_wide.functional(dict(Q.items))
            if not (ext_narrow.in_domain(N, P, Q)
                    and ext_wide.in_domain(Nw, Pw, Qw)):
                continue
            assert phase_distance(ext_narrow(N, P, Q),
                                  ext_wide(Nw, Pw, Qw)) == 0.0


def region_pairs():
    r1 = frozenset(U.block(5, 7, 0, 3))
    r2 = frozenset(U.block(0, 2, 0, 3))
    r3 = frozenset(U.block(5, 7, 4, 7))
    return [RegionPair(r1, r2), RegionPair(r3, r2)]


class TestTrivialization:
    def test_recovers_hidden_coboundary(self):
        beta_star = Coboundary.random_rational(21)
        ext = extend_phase(PhaseOracle.from_coboundary(beta_star, U))
        pairs = region_pairs()
        result = trivialize(ext, pairs, samples_per_pair=5, seed=6)
        assert max(result.report["residual_defects"], default=0.0) == 0.0
        assert max(result.report["persistence_defects"], default=0.0) == 0.0
        # residual oracle trivial on fresh samples from every pair
        rng = np.random.default_rng(99)
        for pair in pairs:
            for (N, P, Q) in sample_pair_triples(U, ext, pair, 4, rng):
                assert result.residual(N, P, Q).is_one()

    def test_gamma_ambiguity_is_local(self):
        beta_star = Coboundary.random_rational(23)
        ext = extend_phase(PhaseOracle.from_coboundary(beta_star, U))
        pairs = region_pairs()
        result = trivialize(ext, pairs, samples_per_pair=4, seed=8)
        rng = np.random.default_rng(7)
        triples = []
        for pair in pairs:
            triples += sample_pair_triples(U, ext, pair, 100, rng)
        assert len(triples) >= 150
        assert result.gamma_defect(beta_star, triples) == 0.0

    def test_idempotent(self):
        beta_star = Coboundary.random_rational(25)
        ext = extend_phase(PhaseOracle.from_coboundary(beta_star, U))
        pairs = region_pairs()
        first = trivialize(ext, pairs, samples_per_pair=4, seed=9)
        again = trivialize(first.residual, pairs, samples_per_pair=4, seed=10)
        rng = np.random.default_rng(12)
        for pair in pairs:
            for (N, P, Q) in sample_pair_triples(U, ext, pair, 3, rng):
                assert again.residual(N, P, Q).is_one()
            for F in (U.random_functional(rng, sorted(pair.first)),):
                assert again.beta(F).is_one()

    def test_overlap_term_invisible_on_disjoint_pairs(self):
        # an extra bilinear phase supported on overlapping supports only
        # never enters the disjoint-support domain
        beta_star = Coboundary.random_rational(27)
        _, bilin = Coboundary.diagonal_bilinear(29, U)

        def overlap_evaluator(N, P, Q):
            base = delta_beta(beta_star, N, P, Q)
            extra = bilin(P, Q)   # vanishes when supports are disjoint
            return base * Phase((2 * extra) % 1)

        oracle = PhaseOracle(U, overlap_evaluator, "succ_c", "overlap")
        ext = extend_phase(oracle)
        pairs = region_pairs()
        result = trivialize(ext, pairs, samples_per_pair=4, seed=11)
        assert max(result.report["residual_defects"], default=0.0) == 0.0

    def test_persistence_failure_detected(self):
        # an oracle violating the extension laws cannot be an input; a
        # corrupted extended oracle must trip the persistence check
        beta_star = Coboundary.random_rational(31)
        ext = extend_phase(PhaseOracle.from_coboundary(beta_star, U))
        bad = PhaseOracle(U, lambda N, P, Q: ext(N, P, Q) *
                          Phase(Fraction(1, 12)), "disjoint", "broken")
        with pytest.raises(PersistenceFailure):
            trivialize(bad, region_pairs(), samples_per_pair=4, seed=12)
