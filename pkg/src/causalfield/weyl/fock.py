"""Bosonic Fock space truncated by total occupation number.

The basis enumerates occupation tuples of M modes with total <= n_max.
Quadratic Hamiltonians and displacement generators are applied matrix
free through per-mode-pair transition tables (source index, target
index, amplitude) that depend only on the basis and are cached on it;
exponentials are evaluated by scaled Taylor summation, which is accurate
to rounding for the small generator norms used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np


def _enumerate_states(M: int, n_max: int) -> np.ndarray:
    """All occupation tuples with total <= n_max, vacuum first."""
    states = []
    occ = [0] * M

    def rec(mode, budget):
        if mode == M:
            states.append(tuple(occ))
            return
        for n in range(budget + 1):
            occ[mode] = n
            rec(mode + 1, budget - n)
        occ[mode] = 0

    rec(0, n_max)
    # vacuum first, truncation shells contiguous
    states.sort(key=lambda s: (sum(s), s))
    return np.array(states, dtype=np.int64)


@dataclass(eq=False)
class FockBasis:
    M: int
    n_max: int
    occ: np.ndarray = field(init=False)
    totals: np.ndarray = field(init=False)
    _keys: np.ndarray = field(init=False)
    _order: np.ndarray = field(init=False)
    _hop_tables: dict = field(init=False, default_factory=dict)
    _pair_tables: dict = field(init=False, default_factory=dict)
    _raise_tables: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        if self.M < 1 or self.n_max < 1:
            raise ValueError("need at least one mode and one quantum")
        self.occ = _enumerate_states(self.M, self.n_max)
        self.totals = self.occ.sum(axis=1)
        self._keys = self._encode(self.occ)
        self._order = np.argsort(self._keys)

    @property
    def dim(self) -> int:
        return self.occ.shape[0]

    def expected_dim(self) -> int:
        return comb(self.M + self.n_max, self.M)

    def _encode(self, occ: np.ndarray) -> np.ndarray:
        base = self.n_max + 1
        key = np.zeros(occ.shape[0], dtype=np.int64)
        for k in range(self.M):
            key = key * base + occ[:, k]
        return key

    def index_of(self, occ: np.ndarray) -> np.ndarray:
        keys = self._encode(occ)
        pos = np.searchsorted(self._keys[self._order], keys)
        return self._order[pos]

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    # -- transition tables ------------------------------------------------

    def hop_table(self, k: int, l: int):
        """a_k^dag a_l: (src, tgt, amp); total occupation is conserved."""
        key = (k, l)
        if key not in self._hop_tables:
            occ = self.occ
            src = np.nonzero(occ[:, l] > 0)[0]
            if k == l:
                self._hop_tables[key] = (src, src, occ[src, l].astype(float))
            else:
                new = occ[src].copy()
                new[:, l] -= 1
                new[:, k] += 1
                amp = np.sqrt(occ[src, l] * (occ[src, k] + 1.0))
                self._hop_tables[key] = (src, self.index_of(new), amp)
        return self._hop_tables[key]

    def pair_table(self, k: int, l: int):
        """a_k^dag a_l^dag (k <= l): (src, tgt, amp); raises total by 2."""
        if k > l:
            k, l = l, k
        key = (k, l)
        if key not in self._pair_tables:
            occ = self.occ
            src = np.nonzero(self.totals <= self.n_max - 2)[0]
            new = occ[src].copy()
            new[:, k] += 1
            new[:, l] += 1
            if k == l:
                amp = np.sqrt((occ[src, k] + 1.0) * (occ[src, k] + 2.0))
            else:
                amp = np.sqrt((occ[src, k] + 1.0) * (occ[src, l] + 1.0))
            self._pair_tables[key] = (src, self.index_of(new), amp)
        return self._pair_tables[key]

    def raise_table(self, k: int):
        """a_k^dag: (src, tgt, amp); raises total by 1."""
        if k not in self._raise_tables:
            occ = self.occ
            src = np.nonzero(self.totals <= self.n_max - 1)[0]
            new = occ[src].copy()
            new[:, k] += 1
            amp = np.sqrt(occ[src, k] + 1.0)
            self._raise_tables[k] = (src, self.index_of(new), amp)
        return self._raise_tables[k]

    # -- generator actions -------------------------------------------------

    def _scatter(self, out, tgt, vals):
        out += np.bincount(tgt, weights=vals.real, minlength=self.dim)
        out_i = np.bincount(tgt, weights=vals.imag, minlength=self.dim)
        return out + 1j * out_i

    def quad_hamiltonian_matvec(self, h: np.ndarray, g: np.ndarray,
                                v: np.ndarray) -> np.ndarray:
        """(sum h_kl a^dag_k a_l + (1/2) sum g_kl a^dag a^dag + h.c.) v."""
        out = np.zeros(self.dim, dtype=complex)
        M = self.M
        tol = 1e-16 * max(np.abs(h).max(initial=0.0), np.abs(g).max(initial=0.0), 1e-300)
        for k in range(M):
            for l in range(M):
                c = h[k, l]
                if abs(c) <= tol:
                    continue
                src, tgt, amp = self.hop_table(k, l)
                out = self._scatter(out, tgt, c * amp * v[src])
        for k in range(M):
            for l in range(k, M):
                # g symmetric: the (1/2) sum over ordered pairs collapses
                # to full weight off the diagonal, half weight on it
                w = 0.5 * g[k, l] if k == l else g[k, l]
                if abs(w) <= tol:
                    continue
                src, tgt, amp = self.pair_table(k, l)
                out = self._scatter(out, tgt, w * amp * v[src])
                out = self._scatter(out, src, np.conj(w) * amp * v[tgt])
        return out

    def quad_hamiltonian_sparse(self, h: np.ndarray, g: np.ndarray,
                                rel_threshold: float = 1e-14):
        """Assembled sparse matrix of the quadratic Hamiltonian; entries
        of h, g below rel_threshold of the largest are dropped."""
        from scipy.sparse import coo_matrix
        M = self.M
        tol = rel_threshold * max(np.abs(h).max(initial=0.0),
                                  np.abs(g).max(initial=0.0), 1e-300)
        rows, cols, vals = [], [], []
        for k in range(M):
            for l in range(M):
                c = h[k, l]
                if abs(c) <= tol:
                    continue
                src, tgt, amp = self.hop_table(k, l)
                rows.append(tgt)
                cols.append(src)
                vals.append(c * amp)
        for k in range(M):
            for l in range(k, M):
                w = 0.5 * g[k, l] if k == l else g[k, l]
                if abs(w) <= tol:
                    continue
                src, tgt, amp = self.pair_table(k, l)
                rows.append(tgt)
                cols.append(src)
                vals.append(w * amp)
                rows.append(src)
                cols.append(tgt)
                vals.append(np.conj(w) * amp)
        if not rows:
            return coo_matrix((self.dim, self.dim), dtype=complex).tocsr()
        mat = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows).astype(np.int32),
              np.concatenate(cols).astype(np.int32))),
            shape=(self.dim, self.dim))
        return mat.tocsr()

    def displacement_matvec(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(sum z_k a^dag_k - conj(z_k) a_k) v."""
        out = np.zeros(self.dim, dtype=complex)
        for k in range(self.M):
            if z[k] == 0:
                continue
            src, tgt, amp = self.raise_table(k)
            out = self._scatter(out, tgt, z[k] * amp * v[src])
            out = self._scatter(out, src, -np.conj(z[k]) * amp * v[tgt])
        return out

    def top_shell_mass(self, v: np.ndarray, depth: int = 1) -> float:
        """Probability mass in the outermost occupation shells, the
        cheap proxy for truncation pressure."""
        sel = self.totals >= self.n_max - depth + 1
        return float(np.sum(np.abs(v[sel]) ** 2))


def taylor_exp_apply(matvec, v: np.ndarray, norm_hint: float,
                     tol: float = 1e-15, max_terms: int = 80) -> np.ndarray:
    """exp(G) v by scaled Taylor summation, splitting the exponential
    into 2^s factors so each Taylor series stays short."""
    s = 0
    nh = max(norm_hint, 0.0)
    while nh > 0.5 and s < 40:
        nh *= 0.5
        s += 1
    scale = 0.5 ** s
    out = v.astype(complex)
    for _ in range(2 ** s):
        term = out
        acc = out.copy()
        for n in range(1, max_terms + 1):
            term = matvec(term) * (scale / n)
            acc += term
            if np.linalg.norm(term) <= tol * max(np.linalg.norm(acc), 1e-300):
                break
        else:
            raise RuntimeError("Taylor series for the exponential did not "
                               "converge; generator norm too large")
        out = acc
    return out


def displacement_apply(basis: FockBasis, z: np.ndarray,
                       v: np.ndarray) -> np.ndarray:
    nrm = 2.0 * float(np.linalg.norm(z)) * np.sqrt(basis.n_max + 1.0)
    return taylor_exp_apply(lambda w: basis.displacement_matvec(z, w), v, nrm)


def coherent_state(basis: FockBasis, z: np.ndarray) -> np.ndarray:
    return displacement_apply(basis, z, basis.vacuum())
