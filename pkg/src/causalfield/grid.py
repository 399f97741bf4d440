"""Spacetime lattice windows and fields living on them.

Conventions used everywhere in the package:

* arrays are indexed ``[n, j, ...]`` with the time level ``n`` first;
* coordinates are ``t_n = n*dt``, ``x_j = j*dx`` (cubic spatial cells);
* the spacetime pairing is the full quadrature
  ``<f, g> = sum(f*g) * dt * dx**(d-1)``;
* boundary ``"zero"`` means fields must vanish near the spatial edges,
  ``"periodic"`` wraps the spatial axes (time is never wrapped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CFLViolation, MarginViolation


@dataclass(frozen=True)
class Box:
    """Axis-aligned inclusive index box ``lo[k] <= i_k <= hi[k]``."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box corner ranks differ")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo}..{self.hi}")

    @staticmethod
    def hull(a: "Box", b: "Box") -> "Box":
        return Box(tuple(min(x, y) for x, y in zip(a.lo, b.lo)),
                   tuple(max(x, y) for x, y in zip(a.hi, b.hi)))

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(l, h + 1) for l, h in zip(self.lo, self.hi))

    def dilated(self, margin: int, shape: tuple[int, ...]) -> "Box":
        return Box(tuple(max(0, l - margin) for l in self.lo),
                   tuple(min(s - 1, h + margin) for h, s in zip(self.hi, shape)))

    def contains(self, other: "Box") -> bool:
        return all(sl <= ol and oh <= sh
                   for sl, ol, oh, sh in zip(self.lo, other.lo, other.hi, self.hi))


def support_box(data: np.ndarray) -> Box | None:
    """Exact index hull of the nonzero entries, or None for the zero field."""
    idx = np.nonzero(data)
    if idx[0].size == 0:
        return None
    return Box(tuple(int(ax.min()) for ax in idx),
               tuple(int(ax.max()) for ax in idx))


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a finite spacetime window.

    ``c_max`` is the signal-speed budget the window is sized for; the
    CFL bound ``dt <= dx / (c_max * sqrt(d-1))`` is enforced on
    construction, as is the minimal extent of 8 cells per axis.
    """

    shape: tuple[int, ...]          # (n_t, n_x[, n_y])
    dx: float
    dt: float
    m: float
    c_max: float = 1.0
    boundary: str = "zero"          # spatial boundary: "zero" | "periodic"

    def __post_init__(self):
        if len(self.shape) < 2:
            raise ValueError("need at least one time and one space axis")
        if any(n < 8 for n in self.shape):
            raise ValueError(f"window extents must be >= 8 cells, got {self.shape}")
        if self.boundary not in ("zero", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.m <= 0:
            raise ValueError("shipped configurations require m > 0")
        limit = self.dx / (self.c_max * math.sqrt(self.d - 1))
        if self.dt > limit * (1 + 1e-12):
            raise CFLViolation(
                f"dt={self.dt} exceeds dx/(c_max*sqrt(d-1))={limit:.6g}")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def n_t(self) -> int:
        return self.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.shape[1:]

    @property
    def measure(self) -> float:
        """Cell volume dt * dx**(d-1) of the spacetime quadrature."""
        return self.dt * self.dx ** (self.d - 1)

    def axes(self) -> list[np.ndarray]:
        """Coordinate arrays, time axis first."""
        steps = (self.dt,) + (self.dx,) * (self.d - 1)
        return [np.arange(n) * s for n, s in zip(self.shape, steps)]

    def refined(self, factor: int = 2) -> "LatticeSpec":
        """Same physical window with spacings divided by ``factor``.

        Endpoints are preserved: n -> factor*(n-1)+1 per axis, so every
        coarse site coincides with a fine site at stride ``factor``.
        """
        shape = tuple(factor * (n - 1) + 1 for n in self.shape)
        return replace(self, shape=shape, dx=self.dx / factor, dt=self.dt / factor)

    def coarse_index(self, factor: int = 2) -> tuple[slice, ...]:
        """Slices picking the coarse sites out of ``refined(factor)``."""
        return tuple(slice(0, None, factor) for _ in self.shape)


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Real (or complex) scalar sample over a lattice window.

    The array is treated as immutable; ``support`` is the exact index
    hull of the nonzero entries (None for the zero field).
    """

    lattice: LatticeSpec
    data: np.ndarray
    support: Box | None = field(default=None)

    def __post_init__(self):
        if self.data.shape != self.lattice.shape:
            raise ValueError(
                f"field shape {self.data.shape} != window {self.lattice.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite entries")
        if self.support is None:
            object.__setattr__(self, "support", support_box(self.data))

    @staticmethod
    def zeros(lattice: LatticeSpec) -> "LatticeField":
        return LatticeField(lattice, np.zeros(lattice.shape))

    @staticmethod
    def from_array(lattice: LatticeSpec, data: np.ndarray) -> "LatticeField":
        return LatticeField(lattice, np.asarray(data, dtype=float))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2) * self.lattice.measure))

    def require_margin(self, margin: int, time_only: bool = False):
        """Raise MarginViolation if the support enters the window frame."""
        if self.support is None:
            return
        axes = range(1) if time_only else range(self.lattice.d)
        for k in axes:
            if k > 0 and self.lattice.boundary == "periodic":
                continue
            if self.support.lo[k] < margin or \
                    self.support.hi[k] > self.lattice.shape[k] - 1 - margin:
                raise MarginViolation(
                    f"support {self.support.lo}..{self.support.hi} within "
                    f"{margin} cells of the window edge on axis {k}")

    def __add__(self, other: "LatticeField") -> "LatticeField":
        self._check_same(other)
        return LatticeField(self.lattice, self.data + other.data)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        self._check_same(other)
        return LatticeField(self.lattice, self.data - other.data)

    def __mul__(self, s: float) -> "LatticeField":
        return LatticeField(self.lattice, self.data * s)

    __rmul__ = __mul__

    def __neg__(self) -> "LatticeField":
        return LatticeField(self.lattice, -self.data)

    def _check_same(self, other: "LatticeField"):
        if other.lattice != self.lattice:
            raise ValueError("fields live on different windows")


def inner(f: LatticeField, g: LatticeField) -> float:
    """Spacetime quadrature pairing <f, g> = sum(f*g) dt dx^(d-1)."""
    f._check_same(g)
    return float(np.sum(f.data * g.data) * f.lattice.measure)


def rel_norm(num: LatticeField | np.ndarray, den: LatticeField | np.ndarray,
             floor: float = 1e-300) -> float:
    """||num|| / max(||den||, floor), on fields or raw arrays."""
    a = num.data if isinstance(num, LatticeField) else np.asarray(num)
    b = den.data if isinstance(den, LatticeField) else np.asarray(den)
    return float(np.linalg.norm(a.ravel()) / max(np.linalg.norm(b.ravel()), floor))
