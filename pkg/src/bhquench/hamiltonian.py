"""Open-chain Bose-Hubbard Hamiltonian in a fixed-N Fock sector.

    H = -J sum_i (a_i^dag a_{i+1} + h.c.) + (U/2) sum_i n_i (n_i - 1)

Energies are in units with hbar = 1; with ``J = 1`` times are measured in 1/J.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .fock import MultiSectorBasis, SectorBasis


@dataclass(frozen=True)
class HubbardParams:
    L: int
    N: int
    J: float = 1.0
    U: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 1 or self.N < 0:
            raise ValueError(f"need L >= 1 and N >= 0, got L={self.L}, N={self.N}")
        if not self.J >= 0 or not math.isfinite(self.J):
            raise ValueError(f"J must be finite and non-negative, got {self.J}")
        if not math.isfinite(self.U):
            raise ValueError(f"U must be finite, got {self.U}")
        if self.boundary != "open":
            raise ValueError("only open boundaries are supported")

    @classmethod
    def from_ratio(cls, L: int, N: int, J_over_U: float, J: float = 1.0) -> "HubbardParams":
        """Parameters at fixed ``J/U`` with energies measured in units of ``J``."""
        if J_over_U <= 0:
            raise ValueError("J/U must be positive")
        return cls(L, N, J, J / J_over_U)

    def with_N(self, N: int) -> "HubbardParams":
        return HubbardParams(self.L, N, self.J, self.U, self.boundary)


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Real symmetric matrix stored as upper-triangle coordinate triples."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not (len(self.rows) == len(self.cols) == len(self.values)):
            raise ValueError("rows, cols and values must have equal length")
        if np.any(self.rows > self.cols):
            raise ValueError("entries must satisfy row <= col")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("matrix entries must be finite")

    @property
    def nnz(self) -> int:
        """Stored entries (upper triangle including the diagonal)."""
        return len(self.values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        out[self.rows, self.cols] = self.values
        off = self.rows != self.cols
        out[self.cols[off], self.rows[off]] = self.values[off]
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dim)
        on = self.rows == self.cols
        d[self.rows[on]] = self.values[on]
        return d

    def dump(self, fh: TextIO) -> None:
        """Write ``row col value`` lines, 17 significant digits."""
        for r, c, v in zip(self.rows, self.cols, self.values):
            fh.write(f"{r} {c} {v:.17g}\n")


def matvec(H: SparseSymMatrix, v: np.ndarray) -> np.ndarray:
    """``H @ v`` using the symmetric completion; ``v`` may be a vector or a stack of columns."""
    v = np.asarray(v)
    if v.shape[0] != H.dim:
        raise ValueError(f"vector length {v.shape[0]} does not match matrix dim {H.dim}")
    dtype = np.result_type(v.dtype, np.float64)
    out = np.zeros(v.shape, dtype=dtype)
    vals = H.values.reshape((-1,) + (1,) * (v.ndim - 1))
    np.add.at(out, H.rows, vals * v[H.cols])
    off = H.rows != H.cols
    np.add.at(out, H.cols[off], vals[off] * v[H.rows[off]])
    return out


def build_number_operator(basis: SectorBasis, site: int) -> np.ndarray:
    """Diagonal of ``n_site`` in ``basis``."""
    if not 0 <= site < basis.L:
        raise IndexError(f"site {site} out of range for L={basis.L}")
    return basis.states[:, site].astype(float)


def build_interaction(basis: SectorBasis, U: float) -> np.ndarray:
    """Diagonal of ``(U/2) sum_i n_i (n_i - 1)``."""
    n = basis.states.astype(float)
    return 0.5 * U * (n * (n - 1)).sum(axis=1)


def _hopping(basis: SectorBasis, J: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols, vals = [], [], []
    states = basis.states
    for i in range(basis.L - 1):
        # hop i+1 -> i; the reverse hop is the transposed entry
        src = np.flatnonzero(states[:, i + 1] > 0)
        if not len(src):
            continue
        moved = states[src].copy()
        n_from = moved[:, i + 1].astype(float)
        n_to = moved[:, i].astype(float)
        moved[:, i + 1] -= 1
        moved[:, i] += 1
        if basis.max_occupation is not None:
            ok = moved[:, i] <= basis.max_occupation
            src, moved, n_from, n_to = src[ok], moved[ok], n_from[ok], n_to[ok]
        dst = basis.rank(moved)
        amp = -J * np.sqrt(n_from * (n_to + 1))
        rows.append(np.minimum(src, dst))
        cols.append(np.maximum(src, dst))
        vals.append(amp)
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def build_hamiltonian(params: HubbardParams, basis: SectorBasis) -> SparseSymMatrix:
    if (params.L, params.N) != (basis.L, basis.N):
        raise ValueError(f"basis (L={basis.L}, N={basis.N}) does not match params (L={params.L}, N={params.N})")
    diag = build_interaction(basis, params.U)
    r, c, v = _hopping(basis, params.J)
    if params.J != 0:
        # two hops can never link the same pair of states, but guard the invariant anyway
        keys = r * basis.dim + c
        if len(np.unique(keys)) != len(keys):
            raise AssertionError("duplicate hopping entries")
    else:
        r, c, v = r[:0], c[:0], v[:0]
    idx = np.arange(basis.dim, dtype=np.int64)
    rows = np.concatenate([idx, r])
    cols = np.concatenate([idx, c])
    vals = np.concatenate([diag, v])
    order = np.lexsort((cols, rows))
    return SparseSymMatrix(basis.dim, rows[order], cols[order], vals[order])


def build_sector_hamiltonians(params: HubbardParams, multi: MultiSectorBasis) -> list[SparseSymMatrix]:
    """One block per particle-number sector; ``H`` never couples different N."""
    if params.L != multi.L:
        raise ValueError("site count mismatch")
    return [build_hamiltonian(params.with_N(s.N), s) for s in multi.sectors]
