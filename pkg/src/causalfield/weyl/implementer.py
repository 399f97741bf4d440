"""Gaussian implementers of scattering maps on truncated Fock space.

The mode-space action of a scattering map is extracted by applying it to
the test functions of the real and imaginary unit-amplitude solutions of
every mode and reading the output amplitudes back at the reference
slice.  The resulting real-linear map a -> A a + B conj(a) must satisfy
the block conditions

    A A^dag - B B^dag = 1,      A B^T = B A^T

(transpose conventions as printed; the dual pair with daggers on the
left holds as well for the inverse).  The implementer is realized as
exp(i H) with the quadratic H read off the real matrix logarithm of the
symplectic map, and its free phase is fixed by the vacuum-overlap gauge:
the vacuum expectation value is rotated to the positive real axis (with
a deterministic first-nonzero-entry fallback).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import (BogoliubovViolation, CutoffUnstable, NotCausallyOrdered)
from ..geometry import KineticPerturbation, Region, relation, speed_field
from ..grid import LatticeField
from ..scattering import ScatteringMap
from .fock import FockBasis, coherent_state, displacement_apply, taylor_exp_apply
from .onepspace import OneParticleSpace

CACHE_ENV = "CAUSALFIELD_CACHE"
DEFAULT_MODE_BUDGET = 24
DEFAULT_CUTOFF_BUDGET = 8


def _complex_parts(X: np.ndarray):
    """Complex-linear / antilinear parts of a real-linear map given in
    the (Re, Im) block representation."""
    M = X.shape[0] // 2
    X11, X12 = X[:M, :M], X[:M, M:]
    X21, X22 = X[M:, :M], X[M:, M:]
    lin = 0.5 * (X11 + X22) + 0.5j * (X21 - X12)
    anti = 0.5 * (X11 - X22) + 0.5j * (X21 + X12)
    return lin, anti


def _real_form(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Ar, Ai = A.real, A.imag
    Br, Bi = B.real, B.imag
    top = np.hstack([Ar + Br, -Ai + Bi])
    bot = np.hstack([Ai + Bi, Ar - Br])
    return np.vstack([top, bot])


def extract_mode_map(space: OneParticleSpace, tmap: ScatteringMap):
    """Apply the scattering map to every mode's real/imaginary unit
    solutions and assemble the (A, B) blocks."""
    M = space.n_modes
    A = np.zeros((M, M), dtype=complex)
    B = np.zeros((M, M), dtype=complex)
    for j in range(M):
        cols = []
        for unit in (1.0, 1.0j):
            a_in = np.zeros(M, dtype=complex)
            a_in[j] = unit
            f = space.test_function(space.solution_from_amplitudes(a_in))
            out = tmap.apply(f)
            cols.append(space.amplitudes(space.class_of(out)))
        wc, ws = cols
        A[:, j] = 0.5 * (wc - 1j * ws)
        B[:, j] = 0.5 * (wc + 1j * ws)
    return A, B


def bogoliubov_defects(A: np.ndarray, B: np.ndarray) -> dict:
    eye = np.eye(A.shape[0])
    return {
        "unitarity": float(np.linalg.norm(A @ A.conj().T - B @ B.conj().T - eye)),
        "symmetry": float(np.linalg.norm(A @ B.T - B @ A.T)),
        "unitarity_dual": float(np.linalg.norm(
            A.conj().T @ A - B.T @ B.conj() - eye)),
        "symmetry_dual": float(np.linalg.norm(
            A.conj().T @ B - B.T @ A.conj())),
        "hs_norm": float(np.linalg.norm(B)),
    }


def quadratic_generator(A: np.ndarray, B: np.ndarray,
                        tol: float = 1e-5):
    """One-body block h (Hermitian) and pair block g (symmetric) with
    exp of the induced flow reproducing (A, B)."""
    R = _real_form(A, B)
    X = scipy.linalg.logm(R)
    if np.abs(X.imag).max() > 1e-8:
        raise BogoliubovViolation("matrix logarithm of the mode map left "
                                  "the real symplectic algebra")
    lin, anti = _complex_parts(X.real)
    h = -1j * lin
    g = -1j * anti
    scale = max(np.linalg.norm(h), np.linalg.norm(g), 1e-300)
    herm = np.linalg.norm(h - h.conj().T)
    symm = np.linalg.norm(g - g.T)
    if herm > tol * max(scale, 1.0) or symm > tol * max(scale, 1.0):
        raise BogoliubovViolation(
            f"generator blocks violate their symmetries "
            f"(hermiticity {herm:.2e}, symmetry {symm:.2e})")
    h = 0.5 * (h + h.conj().T)
    g = 0.5 * (g + g.T)
    return h, g


_SPARSE_CACHE_LIMIT = 25000   # keep the assembled H resident below this dim


@dataclass(eq=False)
class GaussianImplementer:
    """exp(i H) with quadratic H, in the vacuum-overlap phase gauge."""

    basis: FockBasis
    A: np.ndarray
    B: np.ndarray
    h: np.ndarray
    g: np.ndarray
    phase: complex
    diagnostics: dict = field(default_factory=dict)
    _hmat: object = field(default=None, repr=False)

    def _norm_hint(self) -> float:
        nb = self.basis.n_max + 2.0
        return float((np.linalg.norm(self.h) + np.linalg.norm(self.g)) * nb)

    def _hamiltonian(self):
        if self._hmat is not None:
            return self._hmat, False
        mat = self.basis.quad_hamiltonian_sparse(self.h, self.g)
        if self.basis.dim <= _SPARSE_CACHE_LIMIT:
            self._hmat = mat
        return mat, self.basis.dim > _SPARSE_CACHE_LIMIT

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        sgn = -1.0 if inverse else 1.0
        mat, _transient = self._hamiltonian()
        out = taylor_exp_apply(lambda w: (1j * sgn) * (mat @ w),
                               v, self._norm_hint())
        lam = np.conj(self.phase) if inverse else self.phase
        return lam * out

    def is_identity(self) -> bool:
        return bool(self.diagnostics.get("identity", False))

    def transform_amplitudes(self, z: np.ndarray) -> np.ndarray:
        return self.A @ z + self.B @ np.conj(z)


def _identity_implementer(basis: FockBasis) -> GaussianImplementer:
    M = basis.M
    eye = np.eye(M, dtype=complex)
    zero = np.zeros((M, M), dtype=complex)
    return GaussianImplementer(basis, eye, zero.copy(), zero.copy(),
                               zero.copy(), 1.0 + 0j,
                               {"identity": True, "hs_norm": 0.0,
                                "unitarity": 0.0, "symmetry": 0.0})


def _fix_vacuum_gauge(impl: GaussianImplementer):
    v = impl.apply(impl.basis.vacuum())
    ref = v[0]
    if abs(ref) < 1e-12:
        # deterministic fallback: first entry in the basis order
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        ref = v[nz[0]]
    impl.phase = np.conj(ref) / abs(ref)


def _mode_key(space, pert) -> str:
    hsh = hashlib.sha256()
    lat = space.lattice
    hsh.update(json.dumps([lat.shape, lat.dx, lat.dt, lat.m, lat.boundary,
                           space.n_ref]).encode())
    for arr in (pert.p00, pert.pvec, pert.pupper, pert.q):
        hsh.update(np.ascontiguousarray(arr).tobytes())
    return hsh.hexdigest()


_MODE_MEMO: dict = {}


def _mode_data(space, pert, bog_tol: float, cache_dir: str | None):
    """(A, B, h, g) of the scattering map; in-process memo plus an
    optional binary disk cache keyed by content hash."""
    key = _mode_key(space, pert)
    if key in _MODE_MEMO:
        return key, _MODE_MEMO[key]
    cache_file = os.path.join(cache_dir, key + ".npz") if cache_dir else None
    if cache_file and os.path.exists(cache_file):
        with np.load(cache_file) as data:
            entry = (data["A"], data["B"], data["h"], data["g"])
        _MODE_MEMO[key] = entry
        return key, entry
    A, B = extract_mode_map(space, ScatteringMap(space.lattice, pert))
    diags = bogoliubov_defects(A, B)
    worst = max(diags["unitarity"], diags["symmetry"])
    if worst > bog_tol:
        raise BogoliubovViolation(
            f"mode map violates the block conditions by {worst:.2e} "
            f"(tolerance {bog_tol:.1e}); refine the grid")
    h, g = quadratic_generator(A, B)
    entry = (A, B, h, g)
    _MODE_MEMO[key] = entry
    if cache_file:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez(cache_file, A=A, B=B, h=h, g=g)
    return key, entry


_PHASE_MEMO: dict = {}


def build_implementer(space: OneParticleSpace,
                      pert: KineticPerturbation | None,
                      basis: FockBasis,
                      bog_tol: float = 1e-5,
                      cache_dir: str | None = None) -> GaussianImplementer:
    """Assemble the Fock implementer of the scattering map of ``pert``.

    The lattice-level mode data is cached (in process and, when a cache
    directory is configured through CAUSALFIELD_CACHE or the argument,
    on disk keyed by content hash); the gauge phase is memoized per
    cutoff pair.
    """
    if basis.M > DEFAULT_MODE_BUDGET or basis.n_max > DEFAULT_CUTOFF_BUDGET:
        raise ValueError("mode/cutoff budget exceeded")
    if basis.M != space.n_modes:
        raise ValueError("the implementer needs the full mode set of the "
                         "slice (truncated mode subsets break the block "
                         "conditions)")
    if pert is None or pert.is_zero():
        return _identity_implementer(basis)
    box = pert.support
    if box.lo[0] < space.n_ref + 3 or box.hi[0] > space.lattice.n_t - 3:
        raise ValueError("perturbation support must sit above the reference "
                         "slice and below the window top")

    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    key, (A, B, h, g) = _mode_data(space, pert, bog_tol, cache_dir)
    diags = bogoliubov_defects(A, B)
    impl = GaussianImplementer(basis, A, B, h, g, 1.0 + 0j, diags)
    phase_key = (key, basis.M, basis.n_max)
    if phase_key in _PHASE_MEMO:
        impl.phase = _PHASE_MEMO[phase_key]
    else:
        _fix_vacuum_gauge(impl)
        _PHASE_MEMO[phase_key] = impl.phase
    return impl


# ---------------------------------------------------------------------------
# adjoint action


def adjoint_action_defect(space: OneParticleSpace,
                          impl: GaussianImplementer,
                          pert: KineticPerturbation,
                          f: LatticeField,
                          n_probes: int = 2,
                          seed: int = 0) -> float:
    """Defect of S W(f) S^{-1} = W(T f) on probe states: the left side
    conjugates the displacement of f by the implementer, the right side
    displaces by the lattice-transported amplitudes."""
    basis = impl.basis
    z_in = space.amplitudes(space.class_of(f)) / np.sqrt(2.0)
    out = ScatteringMap(space.lattice, pert).apply(f)
    z_out = space.amplitudes(space.class_of(out)) / np.sqrt(2.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    probes = [basis.vacuum()]
    for _ in range(n_probes - 1):
        zp = 0.2 * (rng.normal(size=basis.M) + 1j * rng.normal(size=basis.M)) \
            / np.sqrt(basis.M)
        probes.append(coherent_state(basis, zp))
    for psi in probes:
        lhs = impl.apply(displacement_apply(basis, z_in,
                                            impl.apply(psi, inverse=True)))
        rhs = displacement_apply(basis, z_out, psi)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


# ---------------------------------------------------------------------------
# measured factorization phases


@dataclass(frozen=True, eq=False)
class MeasuredPhase:
    """Measured factorization phase of an ordered triple, with its
    truncation diagnostics."""

    value: complex
    err: float
    diagnostics: dict

    @property
    def angle(self) -> float:
        return float(np.angle(self.value))


def measure_alpha(space: OneParticleSpace,
                  basis: FockBasis,
                  P: KineticPerturbation,
                  Q: KineticPerturbation,
                  N: KineticPerturbation | None,
                  cache_dir: str | None = None,
                  n_probes: int = 1,
                  check_stability: bool = True,
                  require_certificate: bool = True,
                  max_err: float | None = None) -> MeasuredPhase:
    """Vacuum-overlap phase of S(P+N) S(N)^{-1} S(Q+N) S(P+Q+N)^{-1},
    normalized to unit modulus, plus the operator-proportionality defect
    on probe states and a cutoff-stability estimate."""
    lat = space.lattice
    if require_certificate:
        spd = 1.0 if N is None or N.is_zero() else speed_field(N)
        rel = relation(Region.of_support(P), Region.of_support(Q), spd)
        if rel not in ("succeeds", "spacelike"):
            raise NotCausallyOrdered(
                f"triple is {rel}; the factorization phase is undefined")

    def total(*perts):
        out = None
        for p in perts:
            if p is None or p.is_zero():
                continue
            out = p if out is None else out + p
        return out

    def build(b):
        return {
            "PN": build_implementer(space, total(P, N), b, cache_dir=cache_dir),
            "N": build_implementer(space, N, b, cache_dir=cache_dir),
            "QN": build_implementer(space, total(Q, N), b, cache_dir=cache_dir),
            "PQN": build_implementer(space, total(P, Q, N), b,
                                     cache_dir=cache_dir),
        }

    def chain(imp, psi):
        out = imp["PQN"].apply(psi, inverse=True)
        out = imp["QN"].apply(out)
        out = imp["N"].apply(out, inverse=True)
        return imp["PN"].apply(out)

    imps = build(basis)
    vac = basis.vacuum()
    w = chain(imps, vac)
    raw = complex(np.vdot(vac, w))
    absval = abs(raw)
    if absval < 0.5:
        raise CutoffUnstable(f"vacuum overlap collapsed (|raw| = {absval:.3f}); "
                             "raise the cutoffs")
    alpha = raw / absval
    leak = basis.top_shell_mass(w)

    rng = np.random.default_rng(11)
    defect = float(np.linalg.norm(w - raw * vac))
    op_defect = 0.0
    for _ in range(n_probes):
        zp = 0.15 * (rng.normal(size=basis.M) + 1j * rng.normal(size=basis.M)) \
            / np.sqrt(basis.M)
        psi = coherent_state(basis, zp)
        lhs = imps["PN"].apply(imps["N"].apply(imps["QN"].apply(psi),
                                               inverse=True))
        rhs = alpha * imps["PQN"].apply(psi)
        op_defect = max(op_defect, float(np.linalg.norm(lhs - rhs)))

    delta_cut = 0.0
    if check_stability and basis.n_max >= 3:
        low = FockBasis(basis.M, basis.n_max - 2)
        w_low = chain(build(low), low.vacuum())
        raw_low = complex(np.vdot(low.vacuum(), w_low))
        if abs(raw_low) > 1e-12:
            delta_cut = float(abs(np.angle(alpha * np.conj(raw_low / abs(raw_low)))))

    err = max(1.0 - absval, delta_cut, leak)
    diagnostics = {
        "abs_raw": absval,
        "cutoff_delta": delta_cut,
        "op_defect": op_defect,
        "top_shell_mass": leak,
        "vector_defect": defect,
        "M": basis.M,
        "n_max": basis.n_max,
    }
    if max_err is not None and err > max_err:
        raise CutoffUnstable(
            f"combined truncation error {err:.2e} exceeds {max_err:.1e}")
    return MeasuredPhase(alpha, err, diagnostics)
