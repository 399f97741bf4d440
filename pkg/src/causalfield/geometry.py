"""Admissible kinetic perturbations, induced metrics, and causal relations.

A kinetic perturbation modifies the principal symbol of the wave
operator.  In the fixed time/space split the perturbed symbol is the
block matrix

    [[1 + p00,      pvec  ],
     [pvec^T, -(1 + pmat) ]]

with p00 a scalar field, pvec a (d-1)-vector field and pmat a symmetric
(d-1)x(d-1) field (only its upper triangle is stored, so symmetry is
exact by construction).  Admissibility means 1 + p00 > 0 and 1 + pmat
positive definite pointwise; the tightest eps with

    eps <= 1 + p00 <= 1/eps,   eps <= eig(1 + pmat) <= 1/eps,
    |pvec| <= 1/eps

classifies the perturbation, and every metric in the eps class is
dominated by a Minkowski-type cone with light speed
c(eps) = (sqrt(2) + 1) / eps^2.

Causal cones are computed as lattice masks marched one time level at a
step: mode "over" expands each occupied cell by ceil(c * dt/dx) cells (a
certified superset), mode "under" by floor(c * dt/dx) (a certified
subset).  All causal certificates downstream use the "over" masks, so a
positive "succeeds" answer is sound and borderline cases come back as
"entangled".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bumps import Bump
from .errors import SingularPrincipalSymbol, WindowOverflow
from .grid import Box, LatticeField, LatticeSpec, support_box

LIGHT_SPEED_COEFF = math.sqrt(2.0) + 1.0


def class_light_speed(epsilon: float) -> float:
    """Dominating Minkowski light speed c(eps) = (sqrt(2)+1) / eps^2."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    return LIGHT_SPEED_COEFF / (epsilon * epsilon)


@dataclass(frozen=True)
class MinkowskiSpec:
    """Flat background: dimension, mass and the fixed time axis (index 0)."""

    d: int
    m: float
    time_axis: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("spacetime dimension must be >= 2")
        if self.time_axis != 0:
            raise ValueError("the time axis is fixed to coordinate 0")
        if self.m <= 0:
            raise ValueError("lattice runs require m > 0")


def _upper_pairs(ds: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(ds) for j in range(i, ds)]


@dataclass(frozen=True, eq=False)
class KineticPerturbation:
    """Coefficient fields of a compactly supported kinetic perturbation.

    ``pupper`` stores the upper triangle of the spatial block in the
    row-major order of ``_upper_pairs``; ``q`` is the scalar potential.
    ``templates`` optionally carries the smooth closed forms the fields
    were sampled from, so the same perturbation can be realized on a
    refined grid.
    """

    lattice: LatticeSpec
    p00: np.ndarray
    pvec: np.ndarray       # shape W + (d-1,)
    pupper: np.ndarray     # shape W + (ds*(ds+1)//2,)
    q: np.ndarray
    support: Box | None = None
    templates: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        ds = self.lattice.d - 1
        w = self.lattice.shape
        if self.p00.shape != w or self.q.shape != w:
            raise ValueError("scalar component shape mismatch")
        if self.pvec.shape != w + (ds,):
            raise ValueError("pvec shape mismatch")
        if self.pupper.shape != w + (len(_upper_pairs(ds)),):
            raise ValueError("pupper shape mismatch")
        for a in (self.p00, self.pvec, self.pupper, self.q):
            if not np.all(np.isfinite(a)):
                raise ValueError("perturbation fields must be finite")
        if self.support is None:
            object.__setattr__(self, "support", self._compute_support())

    def _compute_support(self) -> Box | None:
        mask = self.support_mask()
        return support_box(mask.astype(float))

    def support_mask(self) -> np.ndarray:
        mask = (self.p00 != 0) | (self.q != 0)
        mask |= np.any(self.pvec != 0, axis=-1)
        mask |= np.any(self.pupper != 0, axis=-1)
        return mask

    @property
    def ds(self) -> int:
        return self.lattice.d - 1

    @property
    def pmat(self) -> np.ndarray:
        """Full symmetric spatial block, shape W + (ds, ds)."""
        ds = self.ds
        out = np.zeros(self.lattice.shape + (ds, ds))
        for k, (i, j) in enumerate(_upper_pairs(ds)):
            out[..., i, j] = self.pupper[..., k]
            if i != j:
                out[..., j, i] = self.pupper[..., k]
        return out

    def is_zero(self) -> bool:
        return self.support is None

    def scaled(self, s: float) -> "KineticPerturbation":
        tpl = None
        if self.templates is not None:
            tpl = _scale_templates(self.templates, s)
        return KineticPerturbation(self.lattice, s * self.p00, s * self.pvec,
                                   s * self.pupper, s * self.q, templates=tpl)

    def __add__(self, other: "KineticPerturbation") -> "KineticPerturbation":
        if other.lattice != self.lattice:
            raise ValueError("perturbations live on different windows")
        tpl = None
        if self.templates is not None and other.templates is not None:
            tpl = _merge_templates(self.templates, other.templates)
        return KineticPerturbation(
            self.lattice, self.p00 + other.p00, self.pvec + other.pvec,
            self.pupper + other.pupper, self.q + other.q, templates=tpl)

    def realized_on(self, lattice: LatticeSpec) -> "KineticPerturbation":
        if self.templates is None:
            raise ValueError("perturbation carries no templates to resample")
        return perturbation_from_templates(lattice, self.templates)

    @staticmethod
    def zero(lattice: LatticeSpec) -> "KineticPerturbation":
        return perturbation_from_templates(lattice, _empty_templates())


def _empty_templates() -> dict:
    return {"p00": [], "pvec": {}, "pmat": {}, "q": []}


def _scale_templates(tpl: dict, s: float) -> dict:
    def sc(bs):
        return [Bump(b.center, b.radius, s * b.amplitude) for b in bs]
    return {"p00": sc(tpl["p00"]),
            "pvec": {k: sc(v) for k, v in tpl["pvec"].items()},
            "pmat": {k: sc(v) for k, v in tpl["pmat"].items()},
            "q": sc(tpl["q"])}


def _merge_templates(a: dict, b: dict) -> dict:
    out = {"p00": a["p00"] + b["p00"], "q": a["q"] + b["q"],
           "pvec": dict(a["pvec"]), "pmat": dict(a["pmat"])}
    for k, v in b["pvec"].items():
        out["pvec"][k] = out["pvec"].get(k, []) + v
    for k, v in b["pmat"].items():
        out["pmat"][k] = out["pmat"].get(k, []) + v
    return out


def perturbation_from_templates(lattice: LatticeSpec, tpl: dict) -> KineticPerturbation:
    ds = lattice.d - 1
    axes = lattice.axes()
    w = lattice.shape

    def total(bs):
        out = np.zeros(w)
        for b in bs:
            out += b.value(axes)
        return out

    p00 = total(tpl.get("p00", []))
    q = total(tpl.get("q", []))
    pvec = np.zeros(w + (ds,))
    for i, bs in tpl.get("pvec", {}).items():
        pvec[..., i] = total(bs)
    pairs = _upper_pairs(ds)
    pupper = np.zeros(w + (len(pairs),))
    for k, (i, j) in enumerate(pairs):
        bs = tpl.get("pmat", {}).get((i, j), [])
        pupper[..., k] = total(bs)
    return KineticPerturbation(lattice, p00, pvec, pupper, q,
                               templates={"p00": list(tpl.get("p00", [])),
                                          "pvec": {k: list(v) for k, v in tpl.get("pvec", {}).items()},
                                          "pmat": {k: list(v) for k, v in tpl.get("pmat", {}).items()},
                                          "q": list(tpl.get("q", []))})


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class AdmissibilityClass:
    """Compact convex class of principal symbols with dominating speed
    c = (sqrt(2)+1) / eps^2."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")

    @property
    def c(self) -> float:
        return class_light_speed(self.epsilon)


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    epsilon: float
    min_time_coeff: float    # min over points of 1 + p00
    min_spatial_eig: float   # min eigenvalue of 1 + pmat
    max_spatial_eig: float
    max_shift: float         # max |pvec|

    @property
    def admissibility_class(self) -> AdmissibilityClass:
        if not self.passed:
            raise ValueError("perturbation is not admissible")
        return AdmissibilityClass(self.epsilon)

    @property
    def c(self) -> float:
        return class_light_speed(self.epsilon) if self.passed else math.inf


def _spatial_eigs(pert: KineticPerturbation) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise (min, max) eigenvalues of 1 + pmat."""
    if pert.ds == 1:
        v = 1.0 + pert.pupper[..., 0]
        return v, v
    mats = pert.pmat + np.eye(pert.ds)
    eigs = np.linalg.eigvalsh(mats)
    return eigs[..., 0], eigs[..., -1]


def check_admissible(pert: KineticPerturbation) -> AdmissibilityReport:
    """Pass/fail plus the tightest eps for which the class bounds hold."""
    e1 = 1.0 + pert.p00
    lo, hi = _spatial_eigs(pert)
    shift = np.sqrt(np.sum(pert.pvec ** 2, axis=-1))
    mins = (float(e1.min()), float(lo.min()))
    maxs = (float(e1.max()), float(hi.max()), float(shift.max()))
    if mins[0] <= 0.0 or mins[1] <= 0.0:
        return AdmissibilityReport(False, 0.0, mins[0], mins[1], maxs[1], maxs[2])
    eps = min(1.0, mins[0], 1.0 / maxs[0], mins[1], 1.0 / maxs[1])
    if maxs[2] > 1.0:
        eps = min(eps, 1.0 / maxs[2])
    return AdmissibilityReport(True, eps, mins[0], mins[1], maxs[1], maxs[2])


# ---------------------------------------------------------------------------
# induced metric


@dataclass(frozen=True, eq=False)
class MetricBlocks:
    """Covariant blocks (g00, gvec, Gmat) and contravariant blocks
    (inv00, hvec, Hmat) of the induced metric, pointwise over the window.

    For d = 2 there is no canonical volume normalization; the stored
    representative is the plain inverse of the principal symbol and
    ``conformal_only`` is set.  Cones, which are all that downstream
    code consumes, do not depend on the representative.
    """

    lattice: LatticeSpec
    g00: np.ndarray
    gvec: np.ndarray
    Gmat: np.ndarray
    inv00: np.ndarray
    hvec: np.ndarray
    Hmat: np.ndarray
    conformal_only: bool = False

    def inverse_roundtrip_defect(self) -> float:
        """Max relative deviation of the block-inversion identities."""
        i00, hv, Hm = _invert_blocks(self.g00, self.gvec, self.Gmat)
        num = max(np.abs(i00 - self.inv00).max(),
                  np.abs(hv - self.hvec).max(),
                  np.abs(Hm - self.Hmat).max())
        den = max(np.abs(self.inv00).max(), np.abs(self.Hmat).max(), 1e-300)
        return float(num / den)


def _invert_blocks(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Blocks of [[a, b], [b^T, -C]]^{-1} in the same convention:
    a' = (a + <b, C^{-1} b>)^{-1},  b' = a' C^{-1} b,
    C' = C^{-1} - (a')^{-1} |b'><b'|."""
    Cinv = np.linalg.inv(C)
    Cb = np.einsum("...ij,...j->...i", Cinv, b)
    ap = 1.0 / (a + np.einsum("...i,...i->...", b, Cb))
    bp = ap[..., None] * Cb
    Cp = Cinv - np.einsum("...,...i,...j->...ij", 1.0 / ap, bp, bp)
    return ap, bp, Cp


def metric_from_perturbation(pert: KineticPerturbation) -> MetricBlocks:
    """Metric blocks induced by the perturbed principal symbol.

    For d > 2 the conformal factor |det(symbol)|^(1/(d-2)) fixes the
    volume normalization; for d = 2 the inverse symbol itself is
    returned and flagged as a conformal representative only.
    """
    d = pert.lattice.d
    e1 = 1.0 + pert.p00
    lo, _ = _spatial_eigs(pert)
    if e1.min() <= 0.0 or lo.min() <= 0.0:
        raise SingularPrincipalSymbol(
            "perturbed symbol is not hyperbolic at some point "
            f"(min 1+p00 = {e1.min():.3g}, min eig(1+pmat) = {lo.min():.3g})")
    Cmat = pert.pmat + np.eye(pert.ds)
    if d > 2:
        # |det symbol| = (1+p00 + <pvec, C^{-1} pvec>) * det C for this block form
        Cinv_b = np.einsum("...ij,...j->...i", np.linalg.inv(Cmat), pert.pvec)
        absdet = (e1 + np.einsum("...i,...i->...", pert.pvec, Cinv_b)) \
            * np.linalg.det(Cmat)
        s = absdet ** (1.0 / (d - 2))
    else:
        s = np.ones_like(e1)
    inv00 = e1 / s
    hvec = pert.pvec / s[..., None]
    Hmat = Cmat / s[..., None, None]
    g00, gvec, Gmat = _invert_blocks(inv00, hvec, Hmat)
    return MetricBlocks(pert.lattice, g00, gvec, Gmat, inv00, hvec, Hmat,
                        conformal_only=(d == 2))


def light_speed_bound(blocks: MetricBlocks) -> np.ndarray:
    """Pointwise speed c_g with all lightlike velocities |v| <= c_g(x):
    c_g = (sqrt(g00 / |G^{-1}| + |gvec|^2) + |gvec|) * |G^{-1}|, where
    |G^{-1}| is the spectral norm of the inverse spatial block."""
    if blocks.Gmat.shape[-1] == 1:
        lam_min = blocks.Gmat[..., 0, 0]
    else:
        lam_min = np.linalg.eigvalsh(blocks.Gmat)[..., 0]
    norm_ginv = 1.0 / lam_min
    gn = np.sqrt(np.sum(blocks.gvec ** 2, axis=-1))
    return (np.sqrt(blocks.g00 / norm_ginv + gn * gn) + gn) * norm_ginv


def speed_field(pert: KineticPerturbation) -> np.ndarray:
    return light_speed_bound(metric_from_perturbation(pert))


# ---------------------------------------------------------------------------
# regions and cones


@dataclass(frozen=True, eq=False)
class Region:
    """Boolean mask over a lattice window."""

    lattice: LatticeSpec
    mask: np.ndarray

    def __post_init__(self):
        if self.mask.shape != self.lattice.shape:
            raise ValueError("mask shape mismatch")
        if self.mask.dtype != bool:
            object.__setattr__(self, "mask", self.mask.astype(bool))

    @staticmethod
    def from_box(lattice: LatticeSpec, box: Box) -> "Region":
        mask = np.zeros(lattice.shape, dtype=bool)
        mask[box.slices()] = True
        return Region(lattice, mask)

    @staticmethod
    def of_support(obj) -> "Region":
        """Exact support region of a field or perturbation."""
        if isinstance(obj, KineticPerturbation):
            return Region(obj.lattice, obj.support_mask())
        if isinstance(obj, LatticeField):
            return Region(obj.lattice, obj.data != 0)
        raise TypeError(f"no support notion for {type(obj)!r}")

    def is_empty(self) -> bool:
        return not self.mask.any()

    def cells(self) -> int:
        return int(self.mask.sum())

    def union(self, other: "Region") -> "Region":
        return Region(self.lattice, self.mask | other.mask)

    def intersect(self, other: "Region") -> "Region":
        return Region(self.lattice, self.mask & other.mask)

    def disjoint_from(self, other: "Region") -> bool:
        return not np.any(self.mask & other.mask)

    def contains(self, other: "Region") -> bool:
        return not np.any(other.mask & ~self.mask)

    def hull(self) -> Box | None:
        return support_box(self.mask.astype(float))


def _shift_union(mask: np.ndarray, offsets, periodic: bool) -> np.ndarray:
    """Union of the mask shifted by every spatial offset in the list."""
    out = mask.copy()
    for off in offsets:
        shifted = mask
        for ax, s in enumerate(off):
            if s == 0:
                continue
            if periodic:
                shifted = np.roll(shifted, s, axis=ax)
            else:
                z = np.zeros_like(shifted)
                src = [slice(None)] * shifted.ndim
                dst = [slice(None)] * shifted.ndim
                if s > 0:
                    src[ax] = slice(0, shifted.shape[ax] - s)
                    dst[ax] = slice(s, None)
                else:
                    src[ax] = slice(-s, None)
                    dst[ax] = slice(0, shifted.shape[ax] + s)
                z[tuple(dst)] = shifted[tuple(src)]
                shifted = z
        out |= shifted
    return out


def _offsets(r: int, ds: int, mode: str):
    if r <= 0:
        return []
    if ds == 1:
        return [(s,) for s in range(-r, r + 1) if s != 0]
    out = []
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if di == 0 and dj == 0:
                continue
            if mode == "over" or di * di + dj * dj <= r * r:
                out.append((di, dj))
    return out


def causal_cone(region: Region, speed, direction: str = "future",
                mode: str = "over") -> Region:
    """Lattice approximation of the causal cone of a region.

    ``speed`` is a per-point bound field (or scalar) on the light speed.
    Each occupied cell is expanded per time step by ceil(speed*dt/dx)
    cells for mode "over" (certified superset; Chebyshev ball in d=3)
    and floor(speed*dt/dx) (Euclidean ball) for mode "under".  Raises
    WindowOverflow when an over-cone reaches the spatial edge of a
    non-periodic window.
    """
    if direction not in ("future", "past"):
        raise ValueError(f"unknown direction {direction!r}")
    if mode in ("over_tight", "under_tight"):
        return _interval_front_cone(region, speed, direction, mode)
    if mode not in ("over", "under"):
        raise ValueError(f"unknown mode {mode!r}")
    lat = region.lattice
    src = region.mask
    spd = np.broadcast_to(np.asarray(speed, dtype=float), lat.shape)
    if direction == "past":
        src = src[::-1]
        spd = spd[::-1]
    ds = lat.d - 1
    periodic = lat.boundary == "periodic"
    ratio = lat.dt / lat.dx
    out = np.zeros(lat.shape, dtype=bool)
    acc = src[0].copy()
    out[0] = acc
    for n in range(1, lat.n_t):
        radii = spd[n - 1] * ratio
        # round with a whisker of slack so exact integer speeds stay exact
        rint = np.ceil(radii - 1e-12) if mode == "over" else np.floor(radii + 1e-12)
        rint = rint.astype(int)
        grown = np.zeros_like(acc)
        for r in np.unique(rint[acc]) if acc.any() else []:
            layer = acc & (rint == r)
            grown |= _shift_union(layer, _offsets(int(r), ds, mode), periodic)
        acc = grown | src[n]
        out[n] = acc
    if direction == "past":
        out = out[::-1]
    if mode == "over" and not periodic and out.any():
        edge = np.zeros(lat.shape, dtype=bool)
        for ax in range(1, lat.d):
            sl = [slice(None)] * lat.d
            sl[ax] = 0
            edge[tuple(sl)] = True
            sl[ax] = -1
            edge[tuple(sl)] = True
        if np.any(out & edge):
            raise WindowOverflow(
                "over-approximated cone reached the spatial window edge")
    return Region(lat, np.ascontiguousarray(out))


def _interval_front_cone(region: Region, speed, direction: str,
                         mode: str) -> Region:
    """Tight cone tracking for 1+1D zero-boundary windows.

    The cone at each level is kept as a union of real intervals in cell
    coordinates; the endpoints advance per step by speed * dt/dx with
    the speed majorized (over) or minorized (under) over the cells the
    front can traverse.  Unlike the per-step cell rounding this resolves
    sub-light speeds, which is what distinguishes the cones of a slow
    metric from the Minkowski ones on a CFL-limited grid.
    """
    lat = region.lattice
    if lat.d != 2 or lat.boundary != "zero":
        raise ValueError("tight cones are implemented for 1+1D zero-boundary "
                         "windows only")
    over = mode == "over_tight"
    src = region.mask
    spd = np.broadcast_to(np.asarray(speed, dtype=float), lat.shape)
    if direction == "past":
        src = src[::-1]
        spd = spd[::-1]
    ratio = lat.dt / lat.dx
    n_t, n_x = lat.shape
    out = np.zeros(lat.shape, dtype=bool)

    def source_intervals(row):
        iv = []
        j = 0
        while j < n_x:
            if row[j]:
                j0 = j
                while j < n_x and row[j]:
                    j += 1
                iv.append((j0 - 0.5, j - 1 + 0.5))
            else:
                j += 1
        return iv

    def merge(iv):
        iv = sorted(iv)
        out_iv = []
        for L, R in iv:
            if out_iv and L <= out_iv[-1][1]:
                out_iv[-1] = (out_iv[-1][0], max(out_iv[-1][1], R))
            else:
                out_iv.append((L, R))
        return out_iv

    def local_speed(n, pos, lo_cell, hi_cell):
        cells = slice(max(0, lo_cell), min(n_x, hi_cell + 1))
        block = spd[max(0, n - 1):n + 1, cells]
        return float(block.max() if over else block.min())

    def rasterize(iv):
        row = np.zeros(n_x, dtype=bool)
        for L, R in iv:
            if over:
                # cell x overlaps (L, R) iff x+0.5 > L and x-0.5 < R
                lo = int(np.floor(L - 0.5)) + 1
                hi = int(np.ceil(R + 0.5)) - 1
                if L < -0.5 or R > n_x - 1 + 0.5:
                    raise WindowOverflow(
                        "tight over-cone reached the spatial window edge")
            else:
                # cell x inside [L, R] iff x-0.5 >= L and x+0.5 <= R
                lo = int(np.ceil(L + 0.5))
                hi = int(np.floor(R - 0.5))
            if hi < lo:
                continue
            row[max(0, lo):min(n_x, hi + 1)] = True
        return row

    intervals = merge(source_intervals(src[0]))
    out[0] = rasterize(intervals)
    for n in range(1, n_t):
        moved = []
        for L, R in intervals:
            cl = local_speed(n, L, int(np.floor(L)) - 1, int(np.ceil(L)) + 1)
            cr = local_speed(n, R, int(np.floor(R)) - 1, int(np.ceil(R)) + 1)
            moved.append((L - ratio * cl, R + ratio * cr))
        intervals = merge(moved + source_intervals(src[n]))
        out[n] = rasterize(intervals)
    if direction == "past":
        out = out[::-1]
    return Region(lat, np.ascontiguousarray(out))


def relation(P: Region, Q: Region, speed, tight: bool = False) -> str:
    """Certified causal relation of P against Q under the given speed
    bound: "succeeds" / "preceded" are certified via over-approximated
    past cones, "spacelike" via both cones; otherwise "entangled".
    ``tight`` switches to the interval-front over-cones (1+1D)."""
    mode = "over_tight" if tight else "over"
    past_q = causal_cone(Q, speed, "past", mode)
    fut_q = causal_cone(Q, speed, "future", mode)
    if P.disjoint_from(past_q) and P.disjoint_from(fut_q):
        return "spacelike"
    if P.disjoint_from(past_q):
        return "succeeds"
    past_p = causal_cone(P, speed, "past", mode)
    if Q.disjoint_from(past_p):
        return "preceded"
    return "entangled"


def succeeds(P: Region, Q: Region, speed, tight: bool = False) -> bool:
    """Certificate that supp P avoids the over-approximated past of supp Q."""
    mode = "over_tight" if tight else "over"
    return P.disjoint_from(causal_cone(Q, speed, "past", mode))


# ---------------------------------------------------------------------------
# general functionals (constant + linear + quadratic)


@dataclass(frozen=True, eq=False)
class GeneralFunctional:
    """Triple (constant, linear density, kinetic perturbation).

    The quadratic part acts through the divergence-form operator built
    in the lattice module; evaluation and shifting live there.
    """

    const: float
    lin: LatticeField | None
    quad: KineticPerturbation | None

    @property
    def support(self) -> Box | None:
        boxes = []
        if self.lin is not None and self.lin.support is not None:
            boxes.append(self.lin.support)
        if self.quad is not None and self.quad.support is not None:
            boxes.append(self.quad.support)
        if not boxes:
            return None
        out = boxes[0]
        for b in boxes[1:]:
            out = Box.hull(out, b)
        return out
