"""Occupation-number bases for bosons on a chain.

States of a fixed-N sector are stored as rows of an integer array, ordered by
descending lexicographic occupation tuple, so ``(N, 0, ..., 0)`` has rank 0 and
``(0, ..., 0, N)`` is last. Ranking uses cumulative counting tables, which
makes it vectorizable over many states at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

import numpy as np

INDEX_LIMIT = np.iinfo(np.int64).max
DEFAULT_MAX_DIM = 20_000_000


def dimension(L: int, N: int) -> int:
    """Number of ways to place ``N`` bosons on ``L`` sites, C(N+L-1, L-1)."""
    if L < 1 or N < 0:
        raise ValueError(f"need L >= 1 and N >= 0, got L={L}, N={N}")
    d = comb(N + L - 1, L - 1)
    if d > INDEX_LIMIT:
        raise OverflowError(f"dimension C({N + L - 1}, {L - 1}) exceeds the int64 index range")
    return d


@lru_cache(maxsize=None)
def count_states(L: int, N: int, cap: int | None = None) -> int:
    """Like :func:`dimension`, but with an optional per-site occupation cap.

    Also defined for ``L == 0`` (one empty configuration iff ``N == 0``).
    """
    if N < 0:
        return 0
    if L == 0:
        return 1 if N == 0 else 0
    if cap is None or cap >= N:
        return dimension(L, N)
    return sum(count_states(L - 1, N - v, cap) for v in range(min(cap, N) + 1))


def _enumerate(L: int, N: int, cap: int | None, dtype) -> np.ndarray:
    # descending lex: first-site value from high to low, recurse on the rest
    memo: dict[tuple[int, int], np.ndarray] = {}

    def build(m: int, n: int) -> np.ndarray:
        key = (m, n)
        if key in memo:
            return memo[key]
        if m == 1:
            out = np.array([[n]], dtype=dtype) if cap is None or n <= cap else np.zeros((0, 1), dtype)
        else:
            top = n if cap is None else min(cap, n)
            parts = []
            for v in range(top, -1, -1):
                rest = build(m - 1, n - v)
                if len(rest):
                    head = np.full((len(rest), 1), v, dtype=dtype)
                    parts.append(np.hstack([head, rest]))
            out = np.vstack(parts) if parts else np.zeros((0, m), dtype)
        memo[key] = out
        return out

    return build(L, N)


class _RankTable:
    """Cumulative counts for vectorized ranking in descending-lex order.

    ``table[j, r, n]`` is the number of sector states that agree with a state
    on sites ``< j``, have ``r`` particles left for sites ``>= j``, and put
    more than ``n`` particles on site ``j``.
    """

    def __init__(self, L: int, N: int, cap: int | None = None):
        self.L, self.N, self.cap = L, N, cap
        table = np.zeros((L, N + 1, N + 1), dtype=np.int64)
        for j in range(L):
            rest = L - j - 1
            for r in range(N + 1):
                top = r if cap is None else min(cap, r)
                acc = 0
                # walk n downward so acc holds sum over v in (n, top]
                for n in range(top, -1, -1):
                    table[j, r, n] = acc
                    acc += count_states(rest, r - n, cap)
        self.table = table

    def rank(self, occ: np.ndarray) -> np.ndarray:
        occ = np.asarray(occ)
        single = occ.ndim == 1
        occ = np.atleast_2d(occ).astype(np.int64, copy=False)
        remaining = self.N - np.cumsum(occ, axis=1) + occ  # particles left before site j
        j = np.arange(self.L)[None, :]
        ranks = self.table[j, remaining, occ].sum(axis=1)
        return ranks[0] if single else ranks


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """All Fock states of ``N`` bosons on ``L`` sites, ranked."""

    L: int
    N: int
    states: np.ndarray
    max_occupation: int | None = None
    _ranker: _RankTable = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def rank(self, occ) -> int | np.ndarray:
        """Ordinal of one state (1-D input) or many states (2-D input)."""
        occ = np.asarray(occ)
        if occ.shape[-1] != self.L:
            raise ValueError(f"occupation length {occ.shape[-1]} != L={self.L}")
        return self._ranker.rank(occ)

    def unrank(self, i: int) -> tuple[int, ...]:
        return tuple(int(n) for n in self.states[i])

    def index_of(self, occ: Sequence[int]) -> int:
        """Rank with validation; raises ``KeyError`` for states outside the sector."""
        occ = tuple(int(n) for n in occ)
        if len(occ) != self.L or sum(occ) != self.N or min(occ) < 0:
            raise KeyError(occ)
        if self.max_occupation is not None and max(occ) > self.max_occupation:
            raise KeyError(occ)
        return int(self.rank(np.array(occ)))


def enumerate_basis(L: int, N: int, *, max_occupation: int | None = None,
                    max_dim: int = DEFAULT_MAX_DIM, dtype=np.int64) -> SectorBasis:
    """Enumerate the ``(L, N)`` sector in descending lexicographic order."""
    d = dimension(L, N) if max_occupation is None else count_states(L, N, max_occupation)
    if d > max_dim:
        raise MemoryError(f"sector dimension {d} exceeds max_dim={max_dim}")
    states = _enumerate(L, N, max_occupation, dtype)
    states.setflags(write=False)
    return SectorBasis(L, N, states, max_occupation, _RankTable(L, N, max_occupation))


@lru_cache(maxsize=64)
def cached_basis(L: int, N: int, max_occupation: int | None = None) -> SectorBasis:
    return enumerate_basis(L, N, max_occupation=max_occupation)


@dataclass(frozen=True, eq=False)
class MultiSectorBasis:
    """Direct sum of the sectors ``N = 0..N_max`` on ``L`` sites."""

    L: int
    N_max: int
    sectors: tuple[SectorBasis, ...]
    offsets: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.offsets[-1] + self.sectors[-1].dim)

    def sector_of(self, index: int) -> tuple[int, int]:
        """Map a global index to ``(N, local index)``."""
        n = int(np.searchsorted(self.offsets, index, side="right") - 1)
        return n, index - int(self.offsets[n])


def multi_sector_basis(L: int, N_max: int, *, max_occupation: int | None = None) -> MultiSectorBasis:
    sectors = tuple(cached_basis(L, n, max_occupation) for n in range(N_max + 1))
    dims = np.array([s.dim for s in sectors], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(dims)[:-1]])
    return MultiSectorBasis(L, N_max, sectors, offsets)


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Per-state split of a sector basis into a subsystem ``A`` and its complement ``B``.

    For full-basis index ``i``: ``n_A[i]`` particles sit in ``A``,
    ``rank_A[i]`` is the index in ``A``'s ``n_A``-sector and ``rank_B[i]`` the
    index in ``B``'s ``(N - n_A)``-sector.
    """

    subsystem: tuple[int, ...]
    complement: tuple[int, ...]
    n_A: np.ndarray
    rank_A: np.ndarray
    rank_B: np.ndarray
    dims_A: dict[int, int]
    dims_B: dict[int, int]
    sector_N: int

    def blocks(self) -> Iterable[tuple[int, np.ndarray]]:
        """Yield ``(n_A, full-basis indices with that n_A)`` for every populated n_A."""
        for n in sorted(self.dims_A):
            sel = np.flatnonzero(self.n_A == n)
            if len(sel):
                yield n, sel


def _check_sites(sites: Iterable[int], L: int) -> tuple[int, ...]:
    A = tuple(sorted(set(int(s) for s in sites)))
    if any(s < 0 or s >= L for s in A):
        raise ValueError(f"subsystem {A} is not a subset of sites 0..{L - 1}")
    return A


def build_partition_map(basis: SectorBasis, A: Iterable[int]) -> PartitionMap:
    A = _check_sites(A, basis.L)
    if not A:
        raise ValueError("subsystem must be nonempty")
    B = tuple(s for s in range(basis.L) if s not in A)
    cap = basis.max_occupation
    occ_A = basis.states[:, A]
    n_A = occ_A.sum(axis=1)
    rank_A = np.zeros(basis.dim, dtype=np.int64)
    rank_B = np.zeros(basis.dim, dtype=np.int64)
    dims_A: dict[int, int] = {}
    dims_B: dict[int, int] = {}
    for n in np.unique(n_A):
        n = int(n)
        sel = n_A == n
        sub_A = cached_basis(len(A), n, cap)
        rank_A[sel] = sub_A.rank(occ_A[sel])
        dims_A[n] = sub_A.dim
        if B:
            sub_B = cached_basis(len(B), basis.N - n, cap)
            rank_B[sel] = sub_B.rank(basis.states[sel][:, B])
            dims_B[n] = sub_B.dim
        else:
            dims_B[n] = 1
    for arr in (n_A, rank_A, rank_B):
        arr.setflags(write=False)
    return PartitionMap(A, B, n_A, rank_A, rank_B, dims_A, dims_B, basis.N)


@lru_cache(maxsize=512)
def _cached_partition_map(basis_key: tuple[int, int, int | None], A: tuple[int, ...]) -> PartitionMap:
    return build_partition_map(cached_basis(*basis_key), A)


def partition_map_for(basis: SectorBasis, A: Iterable[int]) -> PartitionMap:
    """Memoized :func:`build_partition_map` keyed on ``(L, N, cap, A)``."""
    A = _check_sites(A, basis.L)
    return _cached_partition_map((basis.L, basis.N, basis.max_occupation), A)
