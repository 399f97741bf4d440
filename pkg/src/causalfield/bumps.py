"""Smooth compactly supported coefficient templates.

All coefficient fields and sources in the toolkit are sampled from
products of one-dimensional mollifier profiles

    b(s) = exp(1 - 1/(1 - s^2))   for |s| < 1,   b(s) = 0 otherwise,

which are C-infinity with support exactly [-1, 1].  Closed forms for the
first and second derivatives are provided so that manufactured-solution
residuals can be computed without numerical differentiation, and so that
the same template can be realized on every refinement level of a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Box, LatticeSpec


def _profile(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


def _profile_d1(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 / (1.0 - si * si)
    out[inside] = np.exp(1.0 - w) * (-2.0 * si * w * w)
    return out


def _profile_d2(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 / (1.0 - si * si)
    dw = 2.0 * si * w * w
    # d/ds of (-2 s w^2) = -2 w^2 - 8 s^2 w^3; chain rule adds (+dw)^2 term
    out[inside] = np.exp(1.0 - w) * (dw * dw - 2.0 * w * w - 8.0 * si * si * w ** 3)
    return out


@dataclass(frozen=True)
class Bump:
    """Separable mollifier bump ``A * prod_k b((x_k - c_k)/r_k)``."""

    center: tuple[float, ...]
    radius: tuple[float, ...]
    amplitude: float = 1.0

    def __post_init__(self):
        if len(self.center) != len(self.radius):
            raise ValueError("center/radius rank mismatch")
        if any(r <= 0 for r in self.radius):
            raise ValueError("radii must be positive")

    @property
    def rank(self) -> int:
        return len(self.center)

    def _axis_factors(self, axes: list[np.ndarray], order: dict[int, int]):
        """Per-axis profile arrays; order[k] in {0,1,2} selects b, b', b''."""
        funcs = (_profile, _profile_d1, _profile_d2)
        factors = []
        for k, x in enumerate(axes):
            s = (x - self.center[k]) / self.radius[k]
            deg = order.get(k, 0)
            f = funcs[deg](s) / self.radius[k] ** deg
            shape = [1] * len(axes)
            shape[k] = x.size
            factors.append(f.reshape(shape))
        return factors

    def _assemble(self, axes, order):
        out = np.full([1] * len(axes), self.amplitude)
        for f in self._axis_factors(axes, order):
            out = out * f
        return out

    def value(self, axes: list[np.ndarray]) -> np.ndarray:
        return self._assemble(axes, {})

    def partial(self, axes: list[np.ndarray], mu: int) -> np.ndarray:
        return self._assemble(axes, {mu: 1})

    def second(self, axes: list[np.ndarray], mu: int, nu: int) -> np.ndarray:
        if mu == nu:
            return self._assemble(axes, {mu: 2})
        return self._assemble(axes, {mu: 1, nu: 1})

    def sample(self, lattice: LatticeSpec) -> np.ndarray:
        return self.value(lattice.axes())

    def support_box(self, lattice: LatticeSpec) -> Box:
        """Index hull of the open support on the given grid."""
        steps = (lattice.dt,) + (lattice.dx,) * (lattice.d - 1)
        lo, hi = [], []
        for k, (n, s) in enumerate(zip(lattice.shape, steps)):
            a = int(np.floor((self.center[k] - self.radius[k]) / s))
            b = int(np.ceil((self.center[k] + self.radius[k]) / s))
            lo.append(max(0, a))
            hi.append(min(n - 1, b))
        return Box(tuple(lo), tuple(hi))


def bump_in_cells(lattice: LatticeSpec, lo: tuple[int, ...], hi: tuple[int, ...],
                  amplitude: float = 1.0, shrink: float = 1.0) -> Bump:
    """Bump whose support is the index box lo..hi (inclusive), optionally
    shrunk toward its center by ``shrink`` < 1."""
    steps = (lattice.dt,) + (lattice.dx,) * (lattice.d - 1)
    center = tuple(0.5 * (l + h) * s for l, h, s in zip(lo, hi, steps))
    radius = tuple(max(0.5 * (h - l) * s * shrink, 0.51 * s)
                   for l, h, s in zip(lo, hi, steps))
    return Bump(center, radius, amplitude)


def random_bump(rng: np.random.Generator, lattice: LatticeSpec,
                amplitude: float = 1.0, margin: int = 4,
                min_cells: int = 3, max_cells: int = 8) -> Bump:
    """Random bump with support strictly inside the window margins."""
    lo, hi = [], []
    for n in lattice.shape:
        w = int(rng.integers(min_cells, max_cells + 1))
        w = min(w, n - 2 * margin - 1)
        a = int(rng.integers(margin, n - margin - w))
        lo.append(a)
        hi.append(a + w)
    amp = amplitude * float(rng.uniform(0.4, 1.0)) * float(rng.choice([-1.0, 1.0]))
    return bump_in_cells(lattice, tuple(lo), tuple(hi), amp)


def sample_sum(bumps: list[Bump], lattice: LatticeSpec) -> np.ndarray:
    out = np.zeros(lattice.shape)
    for b in bumps:
        out += b.sample(lattice)
    return out
