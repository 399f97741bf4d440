"""Classical scattering maps and their causal factorization laws.

The map attached to a perturbation acts on sources through the factored
composition

    T f = (1 - P Dr^{B+P}) (1 + P Da^{B}) f

where B is an optional base perturbation (B = 0 gives the absolute map)
and P the increment; only Green solves and local multiplications by the
perturbation stencil enter, so T f - f is supported within one cell of
supp P.  The inverse swaps retarded and advanced solves.  Relative maps
with base N are handled by composing absolute maps, which mirrors the
similarity-transformed form used in the factorization argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoCutoffRoom, NotCausallyOrdered
from .geometry import (KineticPerturbation, Region, causal_cone,
                       check_admissible, speed_field, succeeds)
from .grid import LatticeField, LatticeSpec, inner
from .lattice import (GreenOperator, WaveOperator, green_operator,
                      perturbation_operator, perturbed_wave_operator)


@dataclass(frozen=True, eq=False)
class ScatteringMap:
    """Symplectic scattering map of a perturbation over an optional base.

    ``base=None`` gives the absolute map; with a base N the object
    realizes the base-relative form (the map of the shifted dynamics),
    i.e. the similarity-conjugated relative map.
    """

    lattice: LatticeSpec
    pert: KineticPerturbation | None
    base: KineticPerturbation | None = None

    def _total(self) -> KineticPerturbation | None:
        if self.base is None:
            return self.pert
        if self.pert is None:
            return self.base
        return self.base + self.pert

    def is_identity(self) -> bool:
        return self.pert is None or self.pert.is_zero()

    def apply(self, f: LatticeField) -> LatticeField:
        if self.is_identity():
            return f
        pop = perturbation_operator(self.lattice, self.pert)
        da = green_operator(self.lattice, self.base, "advanced")
        dr = green_operator(self.lattice, self._total(), "retarded")
        b = f + pop.apply(da.apply(f))
        return b - pop.apply(dr.apply(b))

    def apply_inverse(self, f: LatticeField) -> LatticeField:
        if self.is_identity():
            return f
        pop = perturbation_operator(self.lattice, self.pert)
        dr = green_operator(self.lattice, self.base, "retarded")
        da = green_operator(self.lattice, self._total(), "advanced")
        b = f + pop.apply(dr.apply(f))
        return b - pop.apply(da.apply(b))

    def reference_commutator(self) -> GreenOperator:
        """Commutator Green operator of the base dynamics; it is the
        symplectic form this map preserves."""
        return green_operator(self.lattice, self.base, "commutator")


def apply_T(tmap: ScatteringMap, f: LatticeField) -> LatticeField:
    return tmap.apply(f)


def wave_times_green(lattice: LatticeSpec, pert: KineticPerturbation | None,
                     kind: str, f: LatticeField) -> LatticeField:
    """The composition (free wave operator) o (perturbed Green inverse)
    in its localized equivalent form f - P (G^P f); exact on the window
    interior and compactly supported, unlike the literal composition."""
    if pert is None or pert.is_zero():
        return f
    pop = perturbation_operator(lattice, pert)
    return f - pop.apply(green_operator(lattice, pert, kind).apply(f))


def symplectic_defect(tmap: ScatteringMap, f: LatticeField,
                      g: LatticeField) -> float:
    """|sigma(Tf, Tg) - sigma(f, g)| relative to the pairing scale, with
    sigma the base commutator pairing."""
    comm = tmap.reference_commutator()
    tf, tg = tmap.apply(f), tmap.apply(g)
    before = inner(f, comm.apply(g))
    after = inner(tf, comm.apply(tg))
    scale = max(abs(before), f.norm() * g.norm(), 1e-300)
    return abs(after - before) / scale


@dataclass(frozen=True, eq=False)
class CausalSplit:
    """Decomposition g = g_causal + (K+Q) h with the mass of g_causal on
    the past cone of supp Q certified negligible."""

    g: LatticeField
    g_causal: LatticeField
    h: LatticeField
    cutoff: np.ndarray
    past_cone: Region

    def reconstruction_residual(self, op_q: WaveOperator) -> float:
        back = self.g_causal + op_q.apply(self.h)
        return (back - self.g).norm() / max(self.g.norm(), 1e-300)

    def cone_mass_fraction(self) -> float:
        """Relative mass of g_causal inside the over-approximated past
        cone of supp Q (cancellation there is exact up to rounding)."""
        num = float(np.sum(self.g_causal.data[self.past_cone.mask] ** 2))
        den = float(np.sum(self.g_causal.data ** 2))
        return num / max(den, 1e-300)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    y = np.clip(x, 0.0, 1.0)
    return y * y * (3.0 - 2.0 * y)


def causal_split(g: LatticeField, Q: KineticPerturbation,
                 ramp_cells: int = 4) -> CausalSplit:
    """Split g = g_causal + (K+Q) h with h = (1-chi) Dr^Q g, where chi
    vanishes on a neighborhood of the past cone of supp Q and equals 1
    outside a slightly larger one.

    g_causal equals (K+Q)(chi Dr^Q g) on the window interior; it is
    assembled in the boundary-safe form g - (K+Q) h, which requires h to
    be compactly supported inside the window (NoCutoffRoom otherwise).
    """
    lat = g.lattice
    if Q.is_zero():
        raise ValueError("split needs a nonzero perturbation")
    spd = speed_field(Q)
    past = causal_cone(Region.of_support(Q), spd, "past", "over")
    # one extra cell so that (K+Q) applied to chi*u stays off the cone
    guard = past.mask.copy()
    for ax in range(lat.d):
        grown = guard.copy()
        sl_lo = [slice(None)] * lat.d
        sl_hi = [slice(None)] * lat.d
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        grown[tuple(sl_hi)] |= guard[tuple(sl_lo)]
        grown[tuple(sl_lo)] |= guard[tuple(sl_hi)]
        guard = grown
    # distance-based ramp measured in cells (Chebyshev, separable passes)
    dist = np.full(lat.shape, np.inf)
    dist[guard] = 0.0
    for _ in range(ramp_cells + 1):
        for ax in range(lat.d):
            sl_lo = [slice(None)] * lat.d
            sl_hi = [slice(None)] * lat.d
            sl_lo[ax] = slice(0, -1)
            sl_hi[ax] = slice(1, None)
            nxt = dist.copy()
            nxt[tuple(sl_hi)] = np.minimum(nxt[tuple(sl_hi)], dist[tuple(sl_lo)] + 1)
            nxt[tuple(sl_lo)] = np.minimum(nxt[tuple(sl_lo)], dist[tuple(sl_hi)] + 1)
            dist = nxt
    chi = _smoothstep((np.where(np.isfinite(dist), dist, ramp_cells + 1.0) - 1.0)
                      / ramp_cells)
    band = (chi > 0) & (chi < 1)
    if lat.boundary == "zero" and band.any():
        for ax in range(1, lat.d):
            sl = [slice(None)] * lat.d
            for edge in (0, -1):
                sl[ax] = edge
                if np.any(band[tuple(sl)]):
                    raise NoCutoffRoom(
                        "cutoff ramp collides with the spatial window edge")
    op_q = perturbed_wave_operator(lat, Q)
    u = green_operator(lat, Q, "retarded").apply(g)
    h = LatticeField(lat, (1.0 - chi) * u.data)
    try:
        h.require_margin(1, time_only=(lat.boundary == "periodic"))
    except Exception as exc:
        raise NoCutoffRoom(
            "the compact part of the split reaches the window frame; "
            "enlarge the window or move the source") from exc
    g_causal = g - op_q.apply(h)
    return CausalSplit(g, g_causal, h, chi, past)


def _as_map(lattice, pert) -> ScatteringMap:
    return ScatteringMap(lattice, pert)


def factorization_defect(lattice: LatticeSpec,
                         P: KineticPerturbation,
                         Q: KineticPerturbation,
                         N: KineticPerturbation | None,
                         probes: list[LatticeField],
                         require_certificate: bool = True) -> float:
    """Sup over probes of || T_{P+N} T_N^{-1} T_{Q+N} f - T_{P+Q+N} f ||
    / ||f||.  Refuses to run unless geometry certifies that P succeeds Q
    for the cones of the base metric g_N (tight interval-front cones on
    1+1D windows, so that sub-light base metrics are resolved)."""
    for pert in (P, Q):
        if not check_admissible(pert).passed:
            raise ValueError("inadmissible perturbation")
    base_speed = 1.0 if N is None or N.is_zero() else speed_field(N)
    if require_certificate:
        tight = lattice.d == 2 and lattice.boundary == "zero"
        if not succeeds(Region.of_support(P), Region.of_support(Q),
                        base_speed, tight=tight):
            raise NotCausallyOrdered(
                "no certificate that P succeeds Q for the base cones; "
                "the factorization check would be vacuous")
    t_pn = _as_map(lattice, P if N is None else P + N)
    t_qn = _as_map(lattice, Q if N is None else Q + N)
    t_n = None if N is None or N.is_zero() else _as_map(lattice, N)
    pq = P + Q
    t_pqn = _as_map(lattice, pq if N is None else pq + N)
    worst = 0.0
    for f in probes:
        lhs = t_qn.apply(f)
        if t_n is not None:
            lhs = t_n.apply_inverse(lhs)
        lhs = t_pn.apply(lhs)
        rhs = t_pqn.apply(f)
        worst = max(worst, (lhs - rhs).norm() / max(f.norm(), 1e-300))
    return worst
