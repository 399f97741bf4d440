"""Discrete wave operators and matrix-free Green operators.

The perturbed operator is discretized in divergence form through a
quadratic action: every term of

    B(u, v) = sum  ct*(Dt u)(Dt v) + cx_i*[(Dt u)(Di v) + (Di u)(Dt v)]
             - cd_i*(Di u)(Di v) - cs_ij*[(Di u)(Dj v) + (Dj u)(Di v)]
             - cm*u*v

is sampled at staggered positions (links for equal-axis differences,
plaquette centers for mixed ones) with coefficients averaged from the
site fields.  The operator is the gradient of B divided by the cell
measure, so <u, K v> = B(u, v) = <K u, v> holds to rounding for any
coefficients, which is what every propagator identity downstream rests
on.

The retarded Green operator marches the window forward in time with
homogeneous past data; each step inverts the (diagonal, or tridiagonal
when time-space cross coefficients are present) coupling of the new
level.  The advanced operator is the exact time mirror (cross
coefficients flip sign under time reversal).  Both invert the same
symmetric form, which makes <Dr f, g> = <f, Da g> exact as well.

Spatial boundaries follow the window's ``boundary`` mode: "zero" windows
must keep supports away from the frame (solutions touching a spatial
edge raise WindowOverflow), "periodic" windows wrap the spatial axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .bumps import Bump
from .errors import CFLViolation, WindowOverflow
from .geometry import (GeneralFunctional, KineticPerturbation, _upper_pairs,
                       check_admissible, speed_field)
from .grid import Box, LatticeField, LatticeSpec, inner, rel_norm  # noqa: F401

__all__ = [
    "LatticeSpec", "LatticeField", "inner", "rel_norm", "Box",
    "WaveOperator", "GreenOperator", "free_wave_operator",
    "perturbed_wave_operator", "perturbation_operator", "green_operator",
    "apply_wave_operator", "green_apply", "resolvent_defect",
    "action_variation", "functional_shift", "evaluate_functional",
    "analytic_perturbed_apply",
]


# ---------------------------------------------------------------------------
# staggered helpers


def _link_diff(u, axis, h, periodic):
    """Forward difference along one axis, on links."""
    if periodic:
        return (np.roll(u, -1, axis) - u) / h
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return (u[tuple(hi)] - u[tuple(lo)]) / h


def _link_avg(a, axis, periodic):
    if periodic:
        return 0.5 * (a + np.roll(a, -1, axis))
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (a[tuple(hi)] + a[tuple(lo)])


def _link_diff_t(w, axis, h, periodic, out):
    """Adjoint of _link_diff: out[n] += (w[n-1] - w[n]) / h."""
    if periodic:
        out += (np.roll(w, 1, axis) - w) / h
        return
    lo = [slice(None)] * out.ndim
    hi = [slice(None)] * out.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] += w / h
    out[tuple(lo)] -= w / h


def _center_diff(u, axis_d, axis_a, h, per_d, per_a):
    """Forward difference along axis_d averaged along axis_a, on the
    plaquette centers of the (axis_d, axis_a) plane."""
    return _link_avg(_link_diff(u, axis_d, h, per_d), axis_a, per_a)


def _center_diff_t(w, axis_d, axis_a, h, per_d, per_a, out):
    """Adjoint of _center_diff into site-shaped ``out``."""
    tmp = np.zeros(_avg_t_shape(w.shape, axis_a, per_a, out.shape))
    _avg_t(w, axis_a, per_a, tmp)
    _link_diff_t(tmp, axis_d, h, per_d, out)


def _avg_t_shape(wshape, axis, periodic, site_shape):
    s = list(wshape)
    if not periodic:
        s[axis] += 1
    return tuple(s)


def _avg_t(w, axis, periodic, out):
    """Adjoint of _link_avg: out[n] += (w[n-1] + w[n]) / 2."""
    if periodic:
        out += 0.5 * (np.roll(w, 1, axis) + w)
        return
    lo = [slice(None)] * out.ndim
    hi = [slice(None)] * out.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] += 0.5 * w
    out[tuple(lo)] += 0.5 * w


# ---------------------------------------------------------------------------
# the operator


@dataclass(frozen=True, eq=False)
class WaveOperator:
    """Divergence-form stencil with staggered coefficient arrays.

    ``ct`` sits on time links, ``cd[i]`` on links of spatial axis i,
    ``cx[i]`` (optional) on (time, axis-i) plaquette centers, ``cs`` on
    spatial plaquette centers (d = 3 only), ``cm`` on sites.
    """

    lattice: LatticeSpec
    ct: np.ndarray
    cd: tuple
    cx: tuple
    cs: dict
    cm: np.ndarray

    @property
    def has_cross(self) -> bool:
        return any(c is not None for c in self.cx)

    def apply_array(self, u: np.ndarray) -> np.ndarray:
        lat = self.lattice
        per = lat.boundary == "periodic"
        dt, dx = lat.dt, lat.dx
        out = np.zeros_like(u)

        w = self.ct * _link_diff(u, 0, dt, False)
        _link_diff_t(w, 0, dt, False, out)

        for i, cdi in enumerate(self.cd):
            ax = 1 + i
            w = cdi * _link_diff(u, ax, dx, per)
            neg = np.zeros_like(out)
            _link_diff_t(w, ax, dx, per, neg)
            out -= neg

        for i, cxi in enumerate(self.cx):
            if cxi is None:
                continue
            ax = 1 + i
            wt = cxi * _center_diff(u, 0, ax, dt, False, per)
            wx = cxi * _center_diff(u, ax, 0, dx, per, False)
            _center_diff_t(wt, ax, 0, dx, per, False, out)
            _center_diff_t(wx, 0, ax, dt, False, per, out)

        for (i, j), csij in self.cs.items():
            axi, axj = 1 + i, 1 + j
            wi = csij * _center_diff(u, axi, axj, dx, per, per)
            wj = csij * _center_diff(u, axj, axi, dx, per, per)
            neg = np.zeros_like(out)
            _center_diff_t(wi, axj, axi, dx, per, per, neg)
            _center_diff_t(wj, axi, axj, dx, per, per, neg)
            out -= neg

        out -= self.cm * u
        return out

    def apply(self, f: LatticeField) -> LatticeField:
        return LatticeField(self.lattice, self.apply_array(f.data))

    def time_mirror(self) -> "WaveOperator":
        flip = lambda a: None if a is None else np.ascontiguousarray(a[::-1])
        return WaveOperator(
            self.lattice,
            flip(self.ct),
            tuple(flip(c) for c in self.cd),
            tuple(None if c is None else -flip(c) for c in self.cx),
            {k: flip(v) for k, v in self.cs.items()},
            flip(self.cm))

    def __add__(self, other: "WaveOperator") -> "WaveOperator":
        if other.lattice != self.lattice:
            raise ValueError("operators live on different windows")

        def addn(a, b):
            if a is None:
                return None if b is None else b.copy()
            return a if b is None else a + b

        cs = dict(self.cs)
        for k, v in other.cs.items():
            cs[k] = cs[k] + v if k in cs else v
        return WaveOperator(self.lattice, self.ct + other.ct,
                            tuple(a + b for a, b in zip(self.cd, other.cd)),
                            tuple(addn(a, b) for a, b in zip(self.cx, other.cx)),
                            cs, self.cm + other.cm)


def _coeffs_from_fields(lattice, p00, pvec, pupper, q, base_time, base_diag, base_mass):
    per = lattice.boundary == "periodic"
    ds = lattice.d - 1
    ct = base_time + _link_avg(p00, 0, False)
    cd, cx = [], []
    pairs = _upper_pairs(ds)
    pidx = {pr: k for k, pr in enumerate(pairs)}
    for i in range(ds):
        cd.append(base_diag + _link_avg(pupper[..., pidx[(i, i)]], 1 + i, per))
        comp = pvec[..., i]
        if np.any(comp != 0):
            cx.append(_link_avg(_link_avg(comp, 0, False), 1 + i, per))
        else:
            cx.append(None)
    cs = {}
    for (i, j) in pairs:
        if i == j:
            continue
        comp = pupper[..., pidx[(i, j)]]
        if np.any(comp != 0):
            cs[(i, j)] = _link_avg(_link_avg(comp, 1 + i, per), 1 + j, per)
    cm = base_mass + q
    return WaveOperator(lattice, ct, tuple(cd), tuple(cx), cs, cm)


def free_wave_operator(lattice: LatticeSpec) -> WaveOperator:
    ds = lattice.d - 1
    z = np.zeros(lattice.shape)
    zv = np.zeros(lattice.shape + (ds,))
    zu = np.zeros(lattice.shape + (len(_upper_pairs(ds)),))
    return _coeffs_from_fields(lattice, z, zv, zu, z, 1.0, 1.0, lattice.m ** 2)


def perturbed_wave_operator(lattice: LatticeSpec,
                            pert: KineticPerturbation | None) -> WaveOperator:
    """Operator of the perturbed equation; validates admissibility and
    that the perturbed light speed fits the window's c_max budget."""
    if pert is None or pert.is_zero():
        return free_wave_operator(lattice)
    if pert.lattice != lattice:
        raise ValueError("perturbation realized on a different window")
    rep = check_admissible(pert)
    if not rep.passed:
        raise CFLViolation("perturbation is not admissible; no stable step exists")
    cmax = float(speed_field(pert).max())
    if cmax > lattice.c_max * (1 + 1e-9):
        raise CFLViolation(
            f"perturbed light speed {cmax:.4g} exceeds window budget "
            f"c_max={lattice.c_max}")
    return _coeffs_from_fields(lattice, pert.p00, pert.pvec, pert.pupper,
                               pert.q, 1.0, 1.0, lattice.m ** 2)


def perturbation_operator(lattice: LatticeSpec,
                          pert: KineticPerturbation) -> WaveOperator:
    """The local difference (K+P) - K; maps fields into fields supported
    within one stencil cell of supp P."""
    return _coeffs_from_fields(lattice, pert.p00, pert.pvec, pert.pupper,
                               pert.q, 0.0, 0.0, 0.0)


def apply_wave_operator(op: WaveOperator, f: LatticeField) -> LatticeField:
    """Public stencil application; rejects fields without a one-cell
    margin (the window form is truncated on the frame)."""
    f.require_margin(1, time_only=(op.lattice.boundary == "periodic"))
    return op.apply(f)


# ---------------------------------------------------------------------------
# time marching


def _row_apply(op: WaveOperator, n: int, u: np.ndarray) -> np.ndarray:
    """Row n of (K u) with u[n+1] taken as zero, via a three-level window
    of the same kernel (single source of truth for the stencil)."""
    lat = op.lattice
    S = lat.spatial_shape
    u3 = np.zeros((3,) + S)
    if n >= 1:
        u3[0] = u[n - 1]
    u3[1] = u[n]

    def tslice(a):
        if a is None:
            return None
        out = np.zeros((2,) + a.shape[1:])
        if n >= 1:
            out[0] = a[n - 1]
        out[1] = a[n]
        return out

    mini = WaveOperator(
        lat, tslice(op.ct),
        tuple(np.broadcast_to(c[n], (3,) + c[n].shape) for c in op.cd),
        tuple(tslice(c) for c in op.cx),
        {k: np.broadcast_to(v[n], (3,) + v[n].shape) for k, v in op.cs.items()},
        np.broadcast_to(op.cm[n], (3,) + S))
    return mini.apply_array(u3)[1]


def _step_solve(op: WaveOperator, n: int, b: np.ndarray) -> np.ndarray:
    """Solve the level-(n+1) coupling B_n x = b of the marching scheme."""
    lat = op.lattice
    dt, dx = lat.dt, lat.dx
    per = lat.boundary == "periodic"
    diag = -op.ct[n] / dt ** 2
    cross = [(i, c[n]) for i, c in enumerate(op.cx)
             if c is not None and np.any(c[n] != 0)]
    if not cross:
        return b / diag
    scale = 1.0 / (2.0 * dt * dx)
    if lat.d == 2:
        cxr = cross[0][1]
        n_x = lat.shape[1]
        if not per:
            ab = np.zeros((3, n_x))
            ab[1] = diag
            ab[0, 1:] = -cxr * scale          # column j+1 in row j
            ab[2, :-1] = cxr * scale          # column j in row j+1
            return solve_banded((1, 1), ab, b)
        A = np.zeros((n_x, n_x))
        A[np.arange(n_x), np.arange(n_x)] = diag
        cols = (np.arange(n_x) + 1) % n_x
        A[np.arange(n_x), cols] += -cxr * scale
        A[cols, np.arange(n_x)] += cxr * scale
        return np.linalg.solve(A, b)
    # d == 3 with cross terms: sparse 2-d coupling
    S = lat.spatial_shape
    size = int(np.prod(S))
    idx = np.arange(size).reshape(S)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    for i, cxr in cross:
        ax = i
        nbr = np.roll(idx, -1, axis=ax)
        if per:
            src, dst, c = idx.ravel(), nbr.ravel(), cxr.ravel()
        else:
            sl = [slice(None)] * len(S)
            sl[ax] = slice(0, -1)
            src = idx[tuple(sl)].ravel()
            dst = np.roll(idx, -1, axis=ax)[tuple(sl)].ravel()
            c = cxr.ravel()
        rows += [src, dst]
        cols += [dst, src]
        vals += [-c * scale, c * scale]
    A = coo_matrix((np.concatenate(vals),
                    (np.concatenate(rows), np.concatenate(cols))),
                   shape=(size, size)).tocsr()
    return spsolve(A, b.ravel()).reshape(S)


def _march_forward(op: WaveOperator, rhs: np.ndarray) -> np.ndarray:
    lat = op.lattice
    u = np.zeros(lat.shape)
    active = np.nonzero(np.any(rhs != 0, axis=tuple(range(1, lat.d))))[0]
    if active.size == 0:
        return u
    for n in range(int(active[0]), lat.n_t - 1):
        r = _row_apply(op, n, u)
        u[n + 1] = _step_solve(op, n, rhs[n] - r)
    return u


def _check_spatial_escape(lat: LatticeSpec, u: np.ndarray):
    # implicit cross-term steps carry sub-machine tails everywhere, so the
    # edge test is relative; pure divergence steps keep exact zeros
    if lat.boundary == "periodic":
        return
    tol = 1e-12 * max(float(np.abs(u).max()), 1e-300)
    for ax in range(1, lat.d):
        sl = [slice(None)] * lat.d
        for edge in (0, -1):
            sl[ax] = edge
            if np.any(np.abs(u[tuple(sl)]) > tol):
                raise WindowOverflow(
                    f"solution reached the spatial window edge on axis {ax}; "
                    "enlarge the window")


@dataclass(frozen=True, eq=False)
class GreenOperator:
    """Matrix-free retarded / advanced / commutator / dirac inverse of a
    wave operator."""

    kind: str
    op: WaveOperator

    def __post_init__(self):
        if self.kind not in ("retarded", "advanced", "commutator", "dirac"):
            raise ValueError(f"unknown Green kind {self.kind!r}")

    def apply_array(self, f: np.ndarray) -> np.ndarray:
        if self.kind == "retarded":
            u = _march_forward(self.op, f)
        elif self.kind == "advanced":
            mirrored = _march_forward(self.op.time_mirror(),
                                      np.ascontiguousarray(f[::-1]))
            u = np.ascontiguousarray(mirrored[::-1])
        elif self.kind == "commutator":
            u = GreenOperator("retarded", self.op).apply_array(f) \
                - GreenOperator("advanced", self.op).apply_array(f)
        else:
            u = 0.5 * (GreenOperator("retarded", self.op).apply_array(f)
                       + GreenOperator("advanced", self.op).apply_array(f))
        _check_spatial_escape(self.op.lattice, u)
        return u

    def apply(self, f: LatticeField) -> LatticeField:
        f.require_margin(1, time_only=(self.op.lattice.boundary == "periodic"))
        return LatticeField(self.op.lattice, self.apply_array(f.data))


def green_operator(lattice: LatticeSpec, pert: KineticPerturbation | None,
                   kind: str) -> GreenOperator:
    return GreenOperator(kind, perturbed_wave_operator(lattice, pert))


def green_apply(g: GreenOperator, f: LatticeField) -> LatticeField:
    return g.apply(f)


def resolvent_defect(lattice: LatticeSpec, pert: KineticPerturbation,
                     kind: str, f: LatticeField) -> float:
    """Relative size of (Dp - D) f + Dp (P D f) and of
    (Dp - D) f + D (P Dp f), maximum of the two (both sides solved
    independently)."""
    if kind not in ("retarded", "advanced"):
        raise ValueError("resolvent defect is defined for retarded/advanced")
    gp = green_operator(lattice, pert, kind)
    g0 = green_operator(lattice, None, kind)
    pop = perturbation_operator(lattice, pert)
    up = gp.apply(f)
    u0 = g0.apply(f)
    diff = up - u0
    lhs1 = diff + gp.apply(pop.apply(u0))
    lhs2 = diff + g0.apply(pop.apply(up))
    scale = max(up.norm(), u0.norm(), 1e-300)
    return max(lhs1.norm(), lhs2.norm()) / scale


# ---------------------------------------------------------------------------
# functionals of the field


def evaluate_functional(F: GeneralFunctional, phi: LatticeField) -> float:
    """F[phi] = const + <lin, phi> + (1/2) <phi, P phi>."""
    val = F.const
    if F.lin is not None:
        val += inner(F.lin, phi)
    if F.quad is not None and not F.quad.is_zero():
        pop = perturbation_operator(phi.lattice, F.quad)
        val += 0.5 * inner(phi, pop.apply(phi))
    return val


def functional_shift(F: GeneralFunctional, phi0: LatticeField) -> GeneralFunctional:
    """Closed-form re-decomposition of phi -> F[phi + phi0]: the
    quadratic part is unchanged, the linear part gains P phi0 and the
    constant absorbs the evaluation at phi0."""
    const = F.const
    lin = F.lin
    if F.lin is not None:
        const += inner(F.lin, phi0)
    if F.quad is not None and not F.quad.is_zero():
        pop = perturbation_operator(phi0.lattice, F.quad)
        pphi0 = pop.apply(phi0)
        const += 0.5 * inner(phi0, pphi0)
        lin = pphi0 if lin is None else lin + pphi0
    return GeneralFunctional(const, lin, F.quad)


def action_variation(op: WaveOperator, phi0: LatticeField) -> GeneralFunctional:
    """Exact decomposition of the action shift phi -> phi + phi0 for the
    quadratic action (1/2)<phi, K phi>:

        delta(phi0)[phi] = <phi, K phi0> + (1/2)<phi0, K phi0>.

    Returned as constant + linear data; evaluate with
    ``evaluate_functional``.
    """
    kphi0 = op.apply(phi0)
    return GeneralFunctional(0.5 * inner(phi0, kphi0), kphi0, None)


# ---------------------------------------------------------------------------
# closed-form residual oracle


def analytic_perturbed_apply(lattice: LatticeSpec, tpl: dict, u: Bump,
                             m: float) -> np.ndarray:
    """(K+P) applied to a smooth bump, evaluated from closed-form
    derivatives of the templates (no stencils involved):

        (K+P)u = -a^{mn} d_m d_n u - (d_m a^{mn}) d_n u - (m^2 + q) u

    with a the perturbed principal symbol in block convention.
    """
    axes = lattice.axes()
    d = lattice.d
    shape = lattice.shape

    def tot(bs, fn):
        out = np.zeros(shape)
        for b in bs:
            out = out + fn(b)
        return out

    # symbol components a^{mu nu} and their mu-derivatives
    a = {}
    da = {}
    for mu in range(d):
        for nu in range(d):
            a[(mu, nu)] = np.zeros(shape)
            for rho in range(d):
                da[(rho, mu, nu)] = np.zeros(shape)
    a[(0, 0)] += 1.0 + tot(tpl.get("p00", []), lambda b: b.value(axes))
    for rho in range(d):
        da[(rho, 0, 0)] += tot(tpl.get("p00", []), lambda b: b.partial(axes, rho))
    for i, bs in tpl.get("pvec", {}).items():
        val = tot(bs, lambda b: b.value(axes))
        a[(0, 1 + i)] += val
        a[(1 + i, 0)] += val
        for rho in range(d):
            dv = tot(bs, lambda b: b.partial(axes, rho))
            da[(rho, 0, 1 + i)] += dv
            da[(rho, 1 + i, 0)] += dv
    for i in range(d - 1):
        a[(1 + i, 1 + i)] -= 1.0
    for (i, j), bs in tpl.get("pmat", {}).items():
        val = tot(bs, lambda b: b.value(axes))
        a[(1 + i, 1 + j)] -= val
        if i != j:
            a[(1 + j, 1 + i)] -= val
        for rho in range(d):
            dv = tot(bs, lambda b: b.partial(axes, rho))
            da[(rho, 1 + i, 1 + j)] -= dv
            if i != j:
                da[(rho, 1 + j, 1 + i)] -= dv

    out = np.zeros(shape)
    for mu in range(d):
        for nu in range(d):
            out -= a[(mu, nu)] * u.second(axes, mu, nu)
            out -= da[(mu, mu, nu)] * u.partial(axes, nu)
    qv = tot(tpl.get("q", []), lambda b: b.value(axes))
    out -= (m * m + qv) * u.value(axes)
    return out
