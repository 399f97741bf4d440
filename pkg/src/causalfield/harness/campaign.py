"""Campaign runner: named verification scenarios over frozen fixtures.

A campaign is a JSON config with a seed and a scenario list; every
scenario names a registered operation and gets an isolated RNG derived
from the campaign seed and its name, so reruns with the same config and
seed reproduce the report byte for byte (all volatile data lives under
the report's "timing" block).  A failing scenario never aborts the
campaign; scenarios whose causal certificates are absent report
"vacuous" and are never counted as passes.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import io as cfio
from ..errors import CausalFieldError, ConfigError, NotCausallyOrdered
from ..geometry import (KineticPerturbation, Region, causal_cone,
                        check_admissible, class_light_speed,
                        metric_from_perturbation, relation, speed_field,
                        succeeds)
from ..grid import LatticeField, LatticeSpec, inner
from ..lattice import (analytic_perturbed_apply, free_wave_operator,
                       green_operator, perturbed_wave_operator,
                       resolvent_defect)
from ..scattering import ScatteringMap, factorization_defect, symplectic_defect
from . import fixtures as fx

SCHEMA_VERSION = 1

OUT_OF_SCOPE_CLAIMS = [
    "continuum C*-algebra completion and its state space (desk-scale "
    "lattices represent objects only)",
    "trivialization over all admissible region-pair families (the "
    "compactness limit is nonconstructive; finite families only)",
    "massless fields in four spacetime dimensions (lattice runs use "
    "m > 0 in 1+1 and 2+1 dimensions)",
]


@dataclass
class ScenarioResult:
    status: str                 # pass | fail | vacuous | error
    metrics: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    message: str = ""


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# scenario implementations


def scenario_admissibility_exact(params, rng):
    eps_values = params.get("eps_values", [1.0, 0.5, 0.25])
    coeff = float(np.sqrt(2.0) + 1.0)
    exact = all(class_light_speed(e) == coeff / e ** 2 for e in eps_values)

    d = params.get("dimension", 4)
    side = params.get("side", 8)
    spec = LatticeSpec((side,) * d, 0.5, 0.1, 1.0, 2.0)
    ds = d - 1
    n_up = ds * (ds + 1) // 2
    amp = params.get("amplitude", 0.3)
    pert = KineticPerturbation(
        spec, amp * rng.uniform(-1, 1, spec.shape),
        amp * rng.uniform(-1, 1, spec.shape + (ds,)),
        amp * rng.uniform(-1, 1, spec.shape + (n_up,)),
        amp * rng.uniform(-1, 1, spec.shape))
    blocks = metric_from_perturbation(pert)
    g = np.zeros(spec.shape + (d, d))
    g[..., 0, 0] = blocks.g00
    g[..., 0, 1:] = blocks.gvec
    g[..., 1:, 0] = blocks.gvec
    g[..., 1:, 1:] = -blocks.Gmat
    ginv = np.linalg.inv(g)
    scale = max(np.abs(blocks.inv00).max(), np.abs(blocks.Hmat).max())
    dev = max(np.abs(ginv[..., 0, 0] - blocks.inv00).max(),
              np.abs(ginv[..., 0, 1:] - blocks.hvec).max(),
              np.abs(ginv[..., 1:, 1:] + blocks.Hmat).max()) / scale
    points = int(np.prod(spec.shape))
    tol = params.get("tol", 1e-12)
    ok = exact and dev <= tol and points >= params.get("min_points", 1000)
    return ScenarioResult(_status(ok), {
        "light_speed_exact": exact, "block_inverse_rel_dev": dev,
        "points": points, "roundtrip_defect": blocks.inverse_roundtrip_defect(),
    })


def scenario_propagator_identities(params, rng):
    # square periodic windows: the identities are boundary-agnostic and
    # the wrap removes any cone-margin demands on the spatial extent
    levels = params.get("levels", 3)
    tol = params.get("tol", 1e-7)
    base_n = params.get("base_n", 65)
    spec = LatticeSpec((base_n,) * 2, 16.0 / (base_n - 1),
                       6.4 / (base_n - 1), 1.0, 2.0, boundary="periodic")
    tpl = fx.centered_templates(spec)
    fb_t = (spec.n_t // 2) * spec.dt
    fb = fx.Bump((0.9, (spec.shape[1] // 2) * spec.dx), (0.8, 2.5), 1.0)
    ub = fx.Bump((fb_t, (spec.shape[1] // 2) * spec.dx),
                 (0.4 * fb_t, 0.3 * spec.shape[1] * spec.dx), 1.0)

    residuals, resolvents, manufactured, dxs, sols = [], [], [], [], []
    cur = spec
    for _ in range(levels):
        pert = fx.perturbation_from_templates(cur, tpl)
        op = perturbed_wave_operator(cur, pert)
        f = LatticeField(cur, fb.value(cur.axes()))
        worst = 0.0
        for kind in ("retarded", "advanced"):
            u = green_operator(cur, pert, kind).apply(f)
            res = op.apply(u).data - f.data
            worst = max(worst, float(np.linalg.norm(res[1:-1])
                                     / np.linalg.norm(f.data)))
            if kind == "retarded":
                sols.append(u.data)
        residuals.append(worst)
        resolvents.append(resolvent_defect(cur, pert, "retarded", f))
        num = op.apply(LatticeField(cur, ub.value(cur.axes()))).data
        ana = analytic_perturbed_apply(cur, tpl, ub, cur.m)
        manufactured.append(float(np.linalg.norm((num - ana)[1:-1])
                                  * np.sqrt(cur.measure)))
        dxs.append(cur.dx)
        cur = cur.refined(2)

    # compare consecutive levels on the common base grid
    restricted = [s[:: 2 ** k, :: 2 ** k] for k, s in enumerate(sols)]
    self_errors = [float(np.linalg.norm(restricted[k] - restricted[k + 1]))
                   for k in range(levels - 1)]
    if len(self_errors) >= 2:
        slope = float(np.log2(self_errors[0] / self_errors[1]))
    else:
        slope = float("nan")
    man_slope = float(np.log2(manufactured[-2] / manufactured[-1]))
    lo, hi = params.get("slope_window", (1.7, 2.3))
    slope_ok = (lo <= slope <= hi) if params.get("check_slope", True) else True
    ok = max(residuals) <= tol and max(resolvents) <= tol and slope_ok
    return ScenarioResult(_status(ok), {
        "max_identity_residual": max(residuals),
        "max_resolvent_defect": max(resolvents),
        "self_convergence_slope": slope,
        "manufactured_slope": man_slope,
    }, series={"dx": dxs, "identity_residual": residuals,
               "resolvent_defect": resolvents,
               "self_error": self_errors, "manufactured": manufactured})


def scenario_causal_support(params, rng):
    count = params.get("count", 10)
    tol = params.get("tol", 1e-10)
    spec = fx.window_1p1(40, 160)
    worst = 0.0
    cross_leak = 0.0
    cone_series = None
    for k in range(count):
        pert = fx.random_admissible_bump(rng, spec, amp=0.35, cross=False)
        rep = check_admissible(pert)
        f = fx.source(spec, 4, 8, 76, 84)
        u = green_operator(spec, pert, "retarded").apply(f)
        cone = causal_cone(Region.of_support(f), rep.c, "future", "over")
        total = float(np.sum(u.data ** 2))
        leak = float(np.sum(u.data[~cone.mask] ** 2)) / total
        worst = max(worst, leak)
        if cone_series is None:
            under = causal_cone(Region.of_support(f), speed_field(pert),
                                "future", "under")
            cone_series = {
                "over": _band_extents(cone.mask),
                "under": _band_extents(under.mask),
                "support": _band_extents(u.data != 0),
            }
    # informational: the implicit cross-term steps do leak; measure it
    pert = fx.random_admissible_bump(rng, spec, amp=0.3, cross=True)
    rep = check_admissible(pert)
    f = fx.source(spec, 4, 8, 76, 84)
    u = green_operator(spec, pert, "retarded").apply(f)
    cone = causal_cone(Region.of_support(f), rep.c, "future", "over")
    cross_leak = float(np.sum(u.data[~cone.mask] ** 2) / np.sum(u.data ** 2))
    ok = worst <= tol
    return ScenarioResult(_status(ok), {
        "max_leak": worst, "cross_term_leak": cross_leak, "count": count,
    }, series={"cones": cone_series})


def _band_extents(mask):
    out = []
    for row in mask:
        js = np.nonzero(row)[0]
        out.append([int(js.min()), int(js.max())] if js.size else None)
    return out


def scenario_scattering_laws(params, rng):
    spec = fx.window_1p1()
    P = fx.box_perturbation(spec, 26, 34, 70, 86, 0.12, 0.1, 0.15, 0.3)
    tp = ScatteringMap(spec, P)
    f = fx.source(spec, 6, 12, 72, 84)

    t0 = ScatteringMap(spec, None)
    identity_exact = t0.apply(f) is f

    k0 = free_wave_operator(spec)
    g = fx.source(spec, 18, 24, 60, 76, 0.7)
    kg = k0.apply(g)
    kd_defect = (tp.apply(kg) - kg).norm() / kg.norm()
    inv_defect = (tp.apply_inverse(tp.apply(f)) - f).norm() / f.norm()

    pairs = params.get("pairs", 50)
    worst_symp = 0.0
    for k in range(pairs):
        a = fx.source(spec, 6, 12, 36 + k, 46 + k, float(rng.uniform(0.5, 1)))
        b = fx.source(spec, 10, 16, 40 + k, 52 + k, float(rng.uniform(0.5, 1)))
        worst_symp = max(worst_symp, symplectic_defect(tp, a, b))

    diff = (tp.apply(f) - f).data
    cone = causal_cone(Region.of_support(P), speed_field(P), "future", "over")
    grown = cone.mask.copy()
    grown[1:] |= cone.mask[:-1]
    grown[:-1] |= cone.mask[1:]
    grown[:, 1:] |= grown[:, :-1].copy()
    grown[:, :-1] |= grown[:, 1:].copy()
    locality_leak = float(np.sum(diff[~grown] ** 2) / np.sum(diff ** 2))

    ok = identity_exact and kd_defect <= params.get("tol_kd", 1e-7) \
        and worst_symp <= params.get("tol_symp", 1e-6) \
        and inv_defect <= params.get("tol_inv", 1e-6) \
        and locality_leak <= 1e-9
    return ScenarioResult(_status(ok), {
        "zero_map_identity": identity_exact,
        "wave_image_defect": kd_defect,
        "inverse_defect": inv_defect,
        "max_symplectic_defect": worst_symp,
        "locality_leak": locality_leak,
        "pairs": pairs,
    })


def _probe_basis(spec, rng, count):
    """Random smooth bumps near a mid slab plus bumps elsewhere."""
    probes = []
    mid = spec.n_t // 2
    for k in range(count):
        if k % 2 == 0:
            t0 = mid - 3 + int(rng.integers(-2, 3))
        else:
            t0 = int(rng.integers(3, 10))
        x0 = int(rng.integers(40, spec.shape[1] - 50))
        probes.append(fx.source(spec, t0, t0 + 4, x0, x0 + 9,
                                float(rng.uniform(0.5, 1.0))))
    return probes


def scenario_minkowski_factorization(params, rng):
    spec = fx.window_1p1()
    cases = fx.minkowski_factorization_cases(spec, params.get("cases", 5))
    probes = _probe_basis(spec, rng, params.get("probes", 20))
    tol = params.get("tol", 1e-5)
    defects = []
    for (P, Q) in cases:
        if not succeeds(Region.of_support(P), Region.of_support(Q), 1.0):
            return ScenarioResult("vacuous", message="certificate missing")
        defects.append(factorization_defect(spec, P, Q, None, probes))
    # negative control: the swapped order must fail loudly
    P, Q = cases[0]
    Pn = fx.box_perturbation(spec, 26, 34, 70, 86, 0.3, 0.2, 0.45, 0.9)
    Qn = fx.box_perturbation(spec, 10, 16, 66, 82, 0.35, 0.0, 0.5, 1.0)
    refused = False
    try:
        factorization_defect(spec, Qn, Pn, None, probes[:5])
    except NotCausallyOrdered:
        refused = True
    neg = factorization_defect(spec, Qn, Pn, None, probes[:5],
                               require_certificate=False)
    ok = max(defects) <= tol and refused and neg >= params.get("neg_tol", 1e-2)
    return ScenarioResult(_status(ok), {
        "max_defect": max(defects), "defects": defects,
        "wrong_order_defect": neg, "refuses_unordered": refused,
    })


def scenario_relative_factorization(params, rng):
    tol = params.get("tol", 1e-5)
    cases = params.get("cases", 3)
    defects, negs = [], []
    for k in range(cases):
        spec, N, Q, P, probes = fx.relative_factorization_case(k)
        spd_n = speed_field(N)
        rp, rq = Region.of_support(P), Region.of_support(Q)
        if not succeeds(rp, rq, spd_n, tight=True):
            return ScenarioResult("vacuous", message="base-cone certificate missing")
        if succeeds(rp, rq, 1.0, tight=True):
            return ScenarioResult("vacuous",
                                  message="flat order holds; case degenerate")
        defects.append(factorization_defect(spec, P, Q, N, probes))
        if k == 0:
            negs.append(factorization_defect(spec, Q, P, N, probes,
                                             require_certificate=False))
    ok = max(defects) <= tol and min(negs) >= params.get("neg_tol", 1e-2)
    return ScenarioResult(_status(ok), {
        "max_defect": max(defects), "defects": defects,
        "wrong_order_defect": min(negs), "cases": cases,
    })


def scenario_weyl_layer(params, rng):
    from ..weyl import (OneParticleSpace, extended_phase, perturbed_pairing,
                        perturbed_weyl, weyl_product)
    from ..lattice import action_variation, evaluate_functional, \
        functional_shift
    from ..geometry import GeneralFunctional

    spec = fx.weyl_window()
    space = OneParticleSpace(spec, n_ref=4)
    P = fx.weyl_demo_perturbation(spec)
    dc = green_operator(spec, None, "commutator")

    def rand_src(amp=1.0):
        t0 = int(rng.integers(10, spec.n_t - 14))
        x0 = int(rng.integers(0, spec.shape[1]))
        return fx.source(spec, t0, t0 + int(rng.integers(4, 9)), x0,
                         min(x0 + int(rng.integers(3, 7)), spec.shape[1] - 1),
                         amp * float(rng.uniform(0.3, 1.0)))

    worst_im = 0.0
    for _ in range(params.get("pairs", 100)):
        f, g = rand_src(), rand_src()
        ip = space.inner(space.class_of(f), space.class_of(g))
        ref = inner(f, dc.apply(g))
        worst_im = max(worst_im, abs(ip.imag - ref)
                       / max(abs(ref), f.norm() * g.norm()))

    worst_rel = 0.0
    for _ in range(params.get("weyl_pairs", 10)):
        f, g = rand_src(0.8), rand_src(0.8)
        prod = weyl_product(space, perturbed_weyl(space, P, f),
                            perturbed_weyl(space, P, g))
        expect = -0.5 * perturbed_pairing(space, P, f, g)
        worst_rel = max(worst_rel, abs(prod.angle - expect)
                        / max(abs(expect), 1.0))

    f_late = fx.source(spec, 60, 66, 2, 8)
    g_early = fx.source(spec, 20, 26, 2, 8)
    spd = speed_field(P)
    if relation(Region.of_support(f_late), Region.of_support(g_early), spd) \
            != "succeeds":
        return ScenarioResult("vacuous", message="extended-phase certificate missing")
    causal = abs(extended_phase(spec, 0.0, f_late, P, g_early).causal_angle)

    # dynamical identity through the functional shift
    zspec = fx.window_1p1(40, 96, 0.25, 0.08)
    zP = fx.box_perturbation(zspec, 14, 26, 40, 56, 0.12, 0.1, 0.15, 0.3)
    f = fx.source(zspec, 10, 14, 30, 38, 0.8)
    phi0 = fx.source(zspec, 18, 24, 46, 56, 0.6)
    op_p = perturbed_wave_operator(zspec, zP)
    dd = green_operator(zspec, zP, "dirac")
    f_p = GeneralFunctional(0.5 * inner(f, dd.apply(f)), f, zP)
    lhs = functional_shift(f_p, phi0)
    dl0 = action_variation(free_wave_operator(zspec), phi0)
    gg = f + op_p.apply(phi0)
    rhs = GeneralFunctional(0.5 * inner(gg, dd.apply(gg)), gg, zP)
    worst_dyn = 0.0
    phis = []
    for _ in range(params.get("phis", 100)):
        phi = LatticeField(zspec, rng.normal(size=zspec.shape))
        phis.append(phi)
        val = evaluate_functional(lhs, phi) + evaluate_functional(dl0, phi) \
            - evaluate_functional(rhs, phi)
        worst_dyn = max(worst_dyn, abs(val))

    from ..weyl import advanced_shift_identity_defect
    shift_defect = advanced_shift_identity_defect(zspec, zP, f, phis)

    ok = worst_im <= params.get("tol_im", 1e-7) \
        and worst_rel <= params.get("tol_weyl", 1e-7) \
        and causal <= params.get("tol_causal", 1e-7) \
        and worst_dyn <= params.get("tol_dyn", 1e-8) \
        and shift_defect <= params.get("tol_shift", 1e-8)
    return ScenarioResult(_status(ok), {
        "max_im_pairing_defect": worst_im,
        "max_weyl_phase_defect": worst_rel,
        "causal_phase_defect": causal,
        "max_dynamical_defect": worst_dyn,
        "shift_identity_defect": shift_defect,
    })


def scenario_implementer_suite(params, rng):
    from ..weyl import (FockBasis, OneParticleSpace, bogoliubov_defects,
                        build_implementer, extract_mode_map, measure_alpha)

    modes = params.get("modes", 16)
    cutoff = params.get("cutoff", 6)
    spec = fx.weyl_window(96, modes)
    space = OneParticleSpace(spec, n_ref=4)
    basis = FockBasis(modes, cutoff)
    cache = params.get("cache_dir")

    P = fx.box_perturbation(spec, 56, 68, 2, modes - 3, 0.12, 0.08, 0.15, 0.3)
    Q = fx.box_perturbation(spec, 22, 34, 3, modes - 2, 0.12, -0.06, 0.14, 0.28)

    A, B = extract_mode_map(space, ScatteringMap(spec, P))
    bd = bogoliubov_defects(A, B)
    impl = build_implementer(space, P, basis, cache_dir=cache)
    psi = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    psi /= np.linalg.norm(psi)
    unit = abs(float(np.linalg.norm(impl.apply(psi))) - 1.0)
    back = float(np.linalg.norm(impl.apply(impl.apply(psi), inverse=True) - psi))

    mp = measure_alpha(space, basis, P, Q, None, cache_dir=cache, n_probes=1)
    abs_ok = 1.0 - 1e-6 <= mp.diagnostics["abs_raw"] <= 1.0 + 1e-12

    # spacelike symmetry with thin supports on opposite sides
    sA = fx.box_perturbation(spec, 40, 44, 0, 3, 0.15, 0.0, 0.18, 0.3)
    sB = fx.box_perturbation(spec, 40, 44, modes // 2, modes // 2 + 3,
                             0.14, 0.0, 0.16, 0.32)
    if relation(Region.of_support(sA), Region.of_support(sB), 1.0) \
            != "spacelike":
        return ScenarioResult("vacuous", message="spacelike certificate missing")
    m1 = measure_alpha(space, basis, sA, sB, None, cache_dir=cache,
                       check_stability=False)
    m2 = measure_alpha(space, basis, sB, sA, None, cache_dir=cache,
                       check_stability=False)
    sym_defect = abs(float(np.angle(m1.value * np.conj(m2.value))))
    sym_tol = 3.0 * (m1.err + m2.err)

    # splitting consistency
    P1 = fx.box_perturbation(spec, 56, 66, 2, 7, 0.1, 0.05, 0.12, 0.2)
    P2 = fx.box_perturbation(spec, 58, 68, 6, modes - 4, 0.09, -0.05, 0.1, 0.22)
    Qs = fx.box_perturbation(spec, 16, 26, 3, modes - 4, 0.12, 0.06, 0.14, 0.25)
    lhs = measure_alpha(space, basis, P1 + P2, Qs, None, cache_dir=cache,
                        check_stability=False)
    r1 = measure_alpha(space, basis, P1, Qs, None, cache_dir=cache,
                       check_stability=False)
    r2 = measure_alpha(space, basis, P2, Qs, P1, cache_dir=cache,
                       check_stability=False)
    split_defect = abs(float(np.angle(lhs.value
                                      * np.conj(r1.value * r2.value))))
    split_tol = 3.0 * (lhs.err + r1.err + r2.err)
    trunc_err = max(mp.err, m1.err, m2.err, lhs.err, r1.err, r2.err)

    ok = max(bd["unitarity"], bd["symmetry"]) <= 1e-5 and unit <= 1e-6 \
        and back <= 1e-6 and abs_ok \
        and sym_defect <= max(sym_tol, 1e-6) \
        and split_defect <= max(split_tol, 1e-6) \
        and trunc_err <= params.get("tol_trunc", 1e-2)
    return ScenarioResult(_status(ok), {
        "bogoliubov_unitarity": bd["unitarity"],
        "bogoliubov_symmetry": bd["symmetry"],
        "hs_norm": bd["hs_norm"],
        "truncated_unitarity": max(unit, back),
        "abs_alpha_raw": mp.diagnostics["abs_raw"],
        "alpha_angle": mp.angle,
        "spacelike_symmetry_defect": sym_defect,
        "splitting_defect": split_defect,
        "combined_truncation_error": trunc_err,
        "modes": modes, "cutoff": cutoff,
    }, series={"alphas": [[mp.value.real, mp.value.imag],
                          [m1.value.real, m1.value.imag],
                          [m2.value.real, m2.value.imag],
                          [lhs.value.real, lhs.value.imag],
                          [r1.value.real, r1.value.imag],
                          [r2.value.real, r2.value.imag]]})


def scenario_cocycle_synthetic(params, rng):
    from ..cocycle import (CellUniverse, Coboundary, ConfigSampler,
                           PhaseOracle, RegionPair, check_exchange_identity,
                           check_extension_laws, check_sum_splitting,
                           extend_phase, sample_pair_triples, trivialize)

    seed = int(rng.integers(0, 2 ** 31))
    u = CellUniverse(8, 8, components=4, bound=Fraction(1, 2), speed=2)
    beta_star = Coboundary.random_rational(seed)
    oracle = PhaseOracle.from_coboundary(beta_star, u)
    sampler = ConfigSampler(u, seed=seed + 1)

    rep_split = check_sum_splitting(oracle, sampler, cases=params.get("cases", 20))
    rep_exch = check_exchange_identity(oracle, sampler,
                                       cases=params.get("cases", 20))
    ext = extend_phase(oracle, verify_alternatives=3)
    rep_ext = check_extension_laws(ext, ConfigSampler(u, seed=seed + 2),
                                   cases=params.get("ext_cases", 10))

    pairs = [RegionPair(frozenset(u.block(5, 7, 0, 3)),
                        frozenset(u.block(0, 2, 0, 3))),
             RegionPair(frozenset(u.block(5, 7, 4, 7)),
                        frozenset(u.block(0, 2, 0, 3)))]
    result = trivialize(ext, pairs, samples_per_pair=5, seed=seed + 3)
    rng2 = np.random.default_rng(seed + 4)
    triples = []
    for pair in pairs:
        triples += sample_pair_triples(u, ext, pair,
                                       params.get("gamma_samples", 110), rng2)
    gamma = result.gamma_defect(beta_star, triples)

    corrupted = oracle.corrupted(Fraction(1, 60))
    worst_bad = 0.0
    for k in range(6):
        rep_bad = check_sum_splitting(corrupted, ConfigSampler(u, seed + 10 + k),
                                      cases=10)
        worst_bad = max(worst_bad, rep_bad.max_defect_rad)

    min_gamma = params.get("min_gamma_samples", 200)
    ok = rep_split.max_defect_rad == 0.0 and rep_exch.max_defect_rad == 0.0 \
        and rep_ext.max_defect_rad == 0.0 \
        and max(result.report["residual_defects"]) == 0.0 \
        and max(result.report["persistence_defects"], default=0.0) == 0.0 \
        and gamma == 0.0 and len(triples) >= min_gamma and worst_bad >= 0.1 \
        and min(rep_split.checked, rep_exch.checked, rep_ext.checked) > 0
    return ScenarioResult(_status(ok), {
        "splitting_defect": rep_split.max_defect_rad,
        "exchange_defect": rep_exch.max_defect_rad,
        "extension_defect": rep_ext.max_defect_rad,
        "residual_defects": result.report["residual_defects"],
        "persistence_defects": result.report["persistence_defects"],
        "gamma_defect": gamma,
        "gamma_samples": len(triples),
        "corrupted_detected": worst_bad,
        "checked": [rep_split.checked, rep_exch.checked, rep_ext.checked],
    })


def scenario_cocycle_measured(params, rng):
    from ..cocycle import extend_phase, measured_oracle, trivialize

    n_max = params.get("cutoff", 5)
    spec, space, basis, universe, pairs, grid = fx.measured_cocycle_setup(n_max)
    oracle = measured_oracle(universe, space, basis, cache_dir=params.get("cache_dir"),
                             n_probes=1, **grid)
    ext = extend_phase(oracle, verify_alternatives=1)
    result = trivialize(ext, pairs,
                        samples_per_pair=params.get("samples", 2),
                        seed=int(rng.integers(0, 2 ** 31)),
                        scale=Fraction(1, 10))
    worst = max(result.report["residual_defects"])
    tol = max(result.report["tolerances"])
    worst_pers = max(result.report["persistence_defects"], default=0.0)
    ok = worst <= tol and worst_pers <= tol \
        and min(result.report["checked"]) > 0
    return ScenarioResult(_status(ok), {
        "residual_defects": result.report["residual_defects"],
        "tolerances": result.report["tolerances"],
        "persistence_defects": result.report["persistence_defects"],
        "checked": result.report["checked"],
        "pairs": len(pairs), "modes": basis.M, "cutoff": basis.n_max,
    })


def scenario_out_of_scope(params, rng):
    return ScenarioResult("pass", {"claims": OUT_OF_SCOPE_CLAIMS})


REGISTRY = {
    "admissibility_exact": scenario_admissibility_exact,
    "propagator_identities": scenario_propagator_identities,
    "causal_support": scenario_causal_support,
    "scattering_laws": scenario_scattering_laws,
    "minkowski_factorization": scenario_minkowski_factorization,
    "relative_factorization": scenario_relative_factorization,
    "weyl_layer": scenario_weyl_layer,
    "implementer_suite": scenario_implementer_suite,
    "cocycle_synthetic": scenario_cocycle_synthetic,
    "cocycle_measured": scenario_cocycle_measured,
    "out_of_scope": scenario_out_of_scope,
}


# ---------------------------------------------------------------------------
# campaign driver


@dataclass
class Campaign:
    seed: int
    scenarios: list
    plots: list = field(default_factory=list)

    @staticmethod
    def from_config(cfg: dict) -> "Campaign":
        if not isinstance(cfg, dict):
            raise ConfigError("campaign config must be a JSON object")
        if cfg.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema {cfg.get('schema')}")
        scenarios = cfg.get("scenarios", [])
        seen = set()
        for sc in scenarios:
            if "name" not in sc or "operation" not in sc:
                raise ConfigError("scenario entries need name and operation")
            if sc["operation"] not in REGISTRY:
                raise ConfigError(f"unknown operation {sc['operation']!r}")
            if sc["name"] in seen:
                raise ConfigError(f"duplicate scenario name {sc['name']!r}")
            seen.add(sc["name"])
        return Campaign(int(cfg.get("seed", 0)), scenarios,
                        cfg.get("plots", []))


def _scenario_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def _run_one(entry, seed):
    name = entry["name"]
    fn = REGISTRY[entry["operation"]]
    params = dict(entry.get("params", {}))
    t0 = time.perf_counter()
    try:
        result = fn(params, _scenario_rng(seed, name))
    except NotCausallyOrdered as exc:
        result = ScenarioResult("vacuous", message=str(exc))
    except CausalFieldError as exc:
        result = ScenarioResult("error", message=f"{type(exc).__name__}: {exc}")
    except Exception as exc:   # isolation: a broken scenario never aborts
        result = ScenarioResult("error", message=f"{type(exc).__name__}: {exc}")
    return name, entry["operation"], result, time.perf_counter() - t0


def run_campaign(config, out_dir=None, seed: int | None = None,
                 threads: int = 1, strict_vacuous: bool = False) -> dict:
    """Execute a campaign config (dict or path) and return the report
    dict; when out_dir is given, write report.json, report.csv and the
    configured plots there."""
    if not isinstance(config, dict):
        config = cfio.load_json(config)
    campaign = Campaign.from_config(config)
    if seed is not None:
        campaign.seed = int(seed)

    rows = []
    if threads > 1 and len(campaign.scenarios) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_run_one, e, campaign.seed)
                    for e in campaign.scenarios]
            rows = [f.result() for f in futs]
    else:
        rows = [_run_one(e, campaign.seed) for e in campaign.scenarios]

    scenarios = []
    timing = {}
    counts = {"pass": 0, "fail": 0, "vacuous": 0, "error": 0}
    out_of_scope = list(OUT_OF_SCOPE_CLAIMS)
    for name, op, result, wall in rows:
        counts[result.status] += 1
        timing[name] = round(wall, 3)
        scenarios.append({
            "name": name, "operation": op, "status": result.status,
            "metrics": _jsonable(result.metrics),
            "series": _jsonable(result.series),
            "message": result.message,
        })
    failed = counts["fail"] + counts["error"] \
        + (counts["vacuous"] if strict_vacuous else 0)
    report = {
        "schema": SCHEMA_VERSION,
        "seed": campaign.seed,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "platform": sys.platform,
            "threads": threads,
        },
        "scenarios": scenarios,
        "summary": dict(counts, failed=failed),
        "out_of_scope": out_of_scope,
        "timing": {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                   "wall_time_s": timing},
    }
    if out_dir is not None:
        write_report(report, out_dir, campaign.plots)
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):    # before int: bool is an int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def canonical_report_bytes(report: dict) -> bytes:
    """Report serialization with the volatile timing block stripped;
    reruns with equal config and seed are byte-identical in this form."""
    clean = {k: v for k, v in report.items() if k != "timing"}
    return json.dumps(clean, sort_keys=True, indent=1).encode("utf-8")


def write_report(report: dict, out_dir, plots=()):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "operation", "status", "metric", "value"])
        for sc in report["scenarios"]:
            writer.writerow([sc["name"], sc["operation"], sc["status"],
                             "", ""])
            for key, val in sorted(sc["metrics"].items()):
                writer.writerow([sc["name"], "", "", key, val])
    from .plots import emit_plot
    for spec in plots:
        emit_plot(report, spec["kind"], out / spec["file"],
                  scenario=spec.get("scenario"))
    return out / "report.json"
