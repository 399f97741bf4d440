"""Solution classes and the one-particle mode space.

A source class is represented by two consecutive Cauchy levels of its
commutator solution at a fixed reference slice; two levels are the
natural discrete Cauchy data of the leapfrog evolution, and re-solving
from them reproduces the solution exactly.

On a spatially periodic window the free evolution diagonalizes in
discrete Fourier modes with the lattice dispersion

    cos(omega_k dt) = 1 - (dt^2 / 2) (m^2 + 4 sin^2(k dx / 2) / dx^2),

and every class maps to a vector of complex mode amplitudes.  The mode
weights are chosen so that the imaginary part of the amplitude inner
product reproduces the lattice commutator pairing <f, Delta g> exactly;
this is the only freedom the quantization below relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import CFLViolation
from ..geometry import KineticPerturbation
from ..grid import LatticeField, LatticeSpec
from ..lattice import free_wave_operator, green_operator


def _require_periodic(lattice: LatticeSpec):
    if lattice.d != 2 or lattice.boundary != "periodic":
        raise ValueError("the mode space needs a 1+1D spatially periodic window")


@dataclass(frozen=True, eq=False)
class SolutionClass:
    """Two-level Cauchy data (levels n_ref, n_ref+1) of a free solution."""

    lattice: LatticeSpec
    n_ref: int
    u0: np.ndarray
    u1: np.ndarray

    def __add__(self, other: "SolutionClass") -> "SolutionClass":
        self._check(other)
        return SolutionClass(self.lattice, self.n_ref,
                             self.u0 + other.u0, self.u1 + other.u1)

    def __sub__(self, other: "SolutionClass") -> "SolutionClass":
        self._check(other)
        return SolutionClass(self.lattice, self.n_ref,
                             self.u0 - other.u0, self.u1 - other.u1)

    def __neg__(self) -> "SolutionClass":
        return SolutionClass(self.lattice, self.n_ref, -self.u0, -self.u1)

    def scaled(self, s: float) -> "SolutionClass":
        return SolutionClass(self.lattice, self.n_ref, s * self.u0, s * self.u1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.u0 ** 2 + self.u1 ** 2)))

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def _check(self, other: "SolutionClass"):
        if other.lattice != self.lattice or other.n_ref != self.n_ref:
            raise ValueError("classes live on different slices")

    def evolve(self) -> np.ndarray:
        """Full-window free solution through the data (exact leapfrog)."""
        lat = self.lattice
        _require_periodic(lat)
        dt2, dx2, m2 = lat.dt ** 2, lat.dx ** 2, lat.m ** 2
        u = np.zeros(lat.shape)
        u[self.n_ref] = self.u0
        u[self.n_ref + 1] = self.u1

        def step(cur, prev):
            lap = (np.roll(cur, -1) - 2 * cur + np.roll(cur, 1)) / dx2
            return 2 * cur - prev + dt2 * (lap - m2 * cur)

        for n in range(self.n_ref + 1, lat.n_t - 1):
            u[n + 1] = step(u[n], u[n - 1])
        for n in range(self.n_ref, 0, -1):
            u[n - 1] = step(u[n], u[n + 1])
        return u


@dataclass(frozen=True, eq=False)
class OneParticleSpace:
    """Mode decomposition of solution classes on the periodic slice."""

    lattice: LatticeSpec
    n_ref: int = 4

    def __post_init__(self):
        _require_periodic(self.lattice)
        if not 1 <= self.n_ref < self.lattice.n_t - 2:
            raise ValueError("reference slice needs one level of margin")
        if self._cos_theta().min() <= -1.0:
            raise CFLViolation("time step too large for the mass shell "
                               "(dispersion leaves the principal branch)")

    @property
    def n_modes(self) -> int:
        return self.lattice.shape[1]

    def _cos_theta(self) -> np.ndarray:
        lat = self.lattice
        n_x = lat.shape[1]
        k = 2.0 * np.pi * np.fft.fftfreq(n_x)
        ksq = 4.0 * np.sin(k / 2.0) ** 2 / lat.dx ** 2
        return 1.0 - 0.5 * lat.dt ** 2 * (lat.m ** 2 + ksq)

    def theta(self) -> np.ndarray:
        """Per-mode time-step phase omega_k * dt, in (0, pi)."""
        return np.arccos(self._cos_theta())

    def frequencies(self) -> np.ndarray:
        return self.theta() / self.lattice.dt

    def weights(self) -> np.ndarray:
        """Mode weights making Im(f, g) = <f, Delta g> exact."""
        lat = self.lattice
        L = lat.shape[1] * lat.dx
        return 4.0 * np.sin(self.theta()) / (lat.dt * L)

    # -- class <-> amplitudes -------------------------------------------

    def class_of(self, f: LatticeField) -> SolutionClass:
        """Cauchy data of the commutator solution of a test function."""
        u = green_operator(self.lattice, None, "commutator").apply(f)
        return SolutionClass(self.lattice, self.n_ref,
                             u.data[self.n_ref].copy(),
                             u.data[self.n_ref + 1].copy())

    def class_of_perturbed(self, pert: KineticPerturbation | None,
                           f: LatticeField) -> SolutionClass:
        """Class of (K Da^P f), the perturbed-to-free transported source,
        computed in its localized equivalent form."""
        from ..scattering import wave_times_green
        return self.class_of(wave_times_green(self.lattice, pert, "advanced", f))

    def raw_amplitudes(self, sol: SolutionClass) -> np.ndarray:
        lat = self.lattice
        th = self.theta()
        f0 = np.fft.fft(sol.u0) * lat.dx
        f1 = np.fft.fft(sol.u1) * lat.dx
        return (f0 * np.exp(1j * th) - f1) / (2j * np.sin(th))

    def amplitudes(self, sol: SolutionClass) -> np.ndarray:
        """Weight-normalized amplitudes: (f, g) = sum conj(a_f) a_g."""
        return np.sqrt(self.weights()) * self.raw_amplitudes(sol)

    def solution_from_amplitudes(self, a: np.ndarray) -> SolutionClass:
        lat = self.lattice
        z = np.asarray(a, dtype=complex) / np.sqrt(self.weights())
        th = self.theta()
        # conj(z_{-k}) in fft index order: index l -> (n - l) mod n
        zbar_rev = np.conj(np.roll(z[::-1], 1))
        f0 = z + zbar_rev
        f1 = z * np.exp(-1j * th) + zbar_rev * np.exp(1j * th)
        u0 = np.real(np.fft.ifft(f0)) / lat.dx
        u1 = np.real(np.fft.ifft(f1)) / lat.dx
        return SolutionClass(lat, self.n_ref, u0, u1)

    def inner(self, f: SolutionClass | np.ndarray,
              g: SolutionClass | np.ndarray) -> complex:
        af = f if isinstance(f, np.ndarray) else self.amplitudes(f)
        ag = g if isinstance(g, np.ndarray) else self.amplitudes(g)
        return complex(np.vdot(af, ag))

    def symplectic(self, f: SolutionClass, g: SolutionClass) -> float:
        """Slice form of <f, Delta g>, conserved exactly by the leapfrog."""
        lat = self.lattice
        val = np.sum(f.u0 * g.u1 - f.u1 * g.u0)
        return float(val * lat.dx / lat.dt)

    def test_function(self, sol: SolutionClass) -> LatticeField:
        """A source whose commutator solution has the given data: apply
        the free operator to the sharply cut future part of the solution
        (supported on the two levels at the cut)."""
        lat = self.lattice
        u = sol.evolve()
        w = np.zeros(lat.shape)
        w[self.n_ref + 1:] = u[self.n_ref + 1:]
        out = free_wave_operator(lat).apply_array(w)
        # rows away from the cut vanish identically; drop rounding dust
        keep = np.zeros(lat.shape, dtype=bool)
        keep[self.n_ref:self.n_ref + 2] = True
        out[~keep] = 0.0
        return LatticeField(lat, out)
