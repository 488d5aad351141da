"""Two-copy many-body interference and parity-based purity estimation.

Two identical copies of an ``L``-site chain are stored as one ``2L``-mode
state, modes ordered ``(copy 1 sites 0..L-1, copy 2 sites 0..L-1)``. A 50:50
beam splitter then acts on every column ``(x, x + L)``:

    b1^dag = (a1^dag + a2^dag)/sqrt(2),   b2^dag = (a1^dag - a2^dag)/sqrt(2)

After it, the mean of the product of site parities on any site set of either
copy equals ``Tr(rho_1 rho_2)`` for that set. The identity does not depend on
the beam splitter's phase convention.

The beam splitter changes the particle number of each copy, so the state
lives in the full ``2N``-particle sector of ``2L`` modes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np

from .fock import SectorBasis, cached_basis, dimension, enumerate_basis

DEFAULT_BOOTSTRAP = 1000
PURITY_FLOOR = 1e-6


def bs_element(n1: int, n2: int, m1: int, m2: int) -> float:
    """``<m1, m2| U_BS |n1, n2>``; zero unless particle numbers agree."""
    if n1 + n2 != m1 + m2 or min(n1, n2, m1, m2) < 0:
        return 0.0
    s = n1 + n2
    total = 0
    # m1 particles in the output come from j of the n1 and m1 - j of the n2 inputs
    for j in range(max(0, m1 - n2), min(n1, m1) + 1):
        k = m1 - j
        total += math.comb(n1, j) * math.comb(n2, k) * (-1) ** (n2 - k)
    norm = math.sqrt(math.factorial(m1) * math.factorial(m2) / (math.factorial(n1) * math.factorial(n2)))
    return total * norm / 2 ** (s / 2)


@lru_cache(maxsize=None)
def bs_block(s: int) -> np.ndarray:
    """Beam splitter on the ``n1 + n2 = s`` block, indexed by the first-mode count."""
    B = np.array([[bs_element(n, s - n, m, s - m) for n in range(s + 1)] for m in range(s + 1)])
    B.setflags(write=False)
    return B


class TwoCopyBasis:
    """The ``(2L, 2N)`` sector plus the index tables the interference pipeline needs."""

    def __init__(self, L: int, N: int):
        self.L, self.N = L, N
        self.sector: SectorBasis = cached_basis(L, N)
        self.basis = enumerate_basis(2 * L, 2 * N, dtype=np.int8, max_dim=dimension(2 * L, 2 * N))
        d = self.sector.dim
        pairs = np.hstack([np.repeat(self.sector.states, d, axis=0), np.tile(self.sector.states, (d, 1))])
        self.embed_index = self._rank(pairs).reshape(d, d)
        self._columns: dict[int, list[np.ndarray]] = {}

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def states(self) -> np.ndarray:
        return self.basis.states

    def _rank(self, occ: np.ndarray, chunk: int = 250_000) -> np.ndarray:
        out = np.empty(len(occ), dtype=np.int64)
        for a in range(0, len(occ), chunk):
            out[a:a + chunk] = self.basis.rank(occ[a:a + chunk])
        return out

    def column_groups(self, x: int) -> list[np.ndarray]:
        """For column ``x``: per pair total ``s``, an ``(r, s + 1)`` index table.

        Row ``g`` lists the basis indices of states that agree outside the
        column and have ``(k, s - k)`` on the column, ``k = 0..s``.
        """
        if x in self._columns:
            return self._columns[x]
        st = self.states
        a, b = x, x + self.L
        groups = []
        for s in range(2 * self.N + 1):
            reps = np.flatnonzero((st[:, b] == 0) & (st[:, a] == s))
            occ = st[reps].astype(np.int64)
            table = np.empty((len(reps), s + 1), dtype=np.int64)
            for k in range(s + 1):
                occ[:, a] = k
                occ[:, b] = s - k
                table[:, k] = self._rank(occ)
            groups.append(table)
        self._columns[x] = groups
        return groups


@lru_cache(maxsize=4)
def two_copy_basis(L: int, N: int) -> TwoCopyBasis:
    return TwoCopyBasis(L, N)


@dataclass(frozen=True, eq=False)
class TwoCopyState:
    amplitudes: np.ndarray
    basis: TwoCopyBasis

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def embed_product(psi, basis: SectorBasis, psi2=None) -> TwoCopyState:
    """``|psi> (x) |psi>`` (or ``|psi> (x) |psi2>``) in the two-copy sector."""
    a1 = np.asarray(getattr(psi, "amplitudes", psi), dtype=complex)
    a2 = a1 if psi2 is None else np.asarray(getattr(psi2, "amplitudes", psi2), dtype=complex)
    tb = two_copy_basis(basis.L, basis.N)
    if len(a1) != tb.sector.dim or len(a2) != tb.sector.dim:
        raise ValueError("state length does not match the sector dimension")
    out = np.zeros(tb.dim, dtype=complex)
    out[tb.embed_index.ravel()] = np.outer(a1, a2).ravel()
    return TwoCopyState(out, tb)


def apply_beamsplitter(state: TwoCopyState) -> TwoCopyState:
    """50:50 beam splitter on every column ``(x, x + L)``."""
    tb = state.basis
    amps = state.amplitudes.copy()
    out = np.empty_like(amps)
    for x in range(tb.L):
        for s, table in enumerate(tb.column_groups(x)):
            if not len(table):
                continue
            out[table] = amps[table] @ bs_block(s).T
        amps, out = out, amps
    return TwoCopyState(amps, tb)


def _parity_columns(L: int, sites: Iterable[int], copy: int) -> list[int]:
    if copy not in (1, 2):
        raise ValueError("copy must be 1 or 2")
    sites = sorted(set(int(s) for s in sites))
    if any(s < 0 or s >= L for s in sites):
        raise ValueError(f"sites {sites} outside 0..{L - 1}")
    return [s + (copy - 1) * L for s in sites]


def parity_of(occupations: np.ndarray, cols: list[int]) -> np.ndarray:
    if not cols:
        return np.ones(len(occupations), dtype=np.int8)
    odd = occupations[:, cols].astype(np.int64).sum(axis=1) & 1
    return (1 - 2 * odd).astype(np.int8)


def exact_parity(state: TwoCopyState, A: Iterable[int], copy: int = 1) -> float:
    """Expected product of site parities on sites ``A`` of one copy."""
    cols = _parity_columns(state.basis.L, A, copy)
    return float(state.probabilities() @ parity_of(state.basis.states, cols))


@dataclass(frozen=True, eq=False)
class ShotRecord:
    """A batch of sampled ``2L``-site occupation snapshots, one row per shot."""

    occupations: np.ndarray
    L: int
    noise: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.occupations)

    def parities(self, A: Iterable[int], copy: int = 1) -> np.ndarray:
        return parity_of(self.occupations, _parity_columns(self.L, A, copy))

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shot_id"] + [f"n_{i + 1}" for i in range(2 * self.L)])
        for k, row in enumerate(self.occupations):
            w.writerow([k] + [int(v) for v in row])


def sample_shots(state: TwoCopyState, n_shots: int, seed) -> ShotRecord:
    """Independent draws of occupation snapshots from ``|amplitude|^2``."""
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(state.probabilities())
    u = rng.random(n_shots) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    occ = state.basis.states[idx].astype(np.int16)
    return ShotRecord(occ, state.basis.L, meta={"seed": seed, "n_shots": n_shots})


def purity_estimator(shots: ShotRecord, A: Iterable[int], copy: int = 1) -> tuple[float, float]:
    """Mean parity on ``A`` and its standard error."""
    if len(shots) < 2:
        raise ValueError("need at least 2 shots")
    p = shots.parities(A, copy).astype(float)
    return float(p.mean()), float(p.std(ddof=1) / math.sqrt(len(p)))


def entropy_from_shots(shots: ShotRecord, A: Iterable[int], n_bootstrap: int = DEFAULT_BOOTSTRAP,
                       seed=0, copy: int = 1, floor: float = PURITY_FLOOR, level: float = 0.95
                       ) -> tuple[float, tuple[float, float]]:
    """Renyi-2 entropy from parity shots with a bootstrap percentile interval.

    When resampled purities reach zero or below, the upper entropy bound is
    unbounded and reported as ``inf``.
    """
    p = shots.parities(A, copy).astype(float)
    est = p.mean()
    S = -math.log(max(est, floor)) + 0.0
    rng = np.random.default_rng(seed)
    n = len(p)
    boots = np.empty(n_bootstrap)
    step = max(1, 5_000_000 // max(n, 1))
    for a in range(0, n_bootstrap, step):
        k = min(step, n_bootstrap - a)
        boots[a:a + k] = p[rng.integers(0, n, size=(k, n))].mean(axis=1)
    q_lo, q_hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    S_lo = max(-math.log(q_hi), 0.0) if q_hi > 0 else math.inf
    S_hi = -math.log(q_lo) + 0.0 if q_lo > 0 else math.inf
    return S, (S_lo, S_hi)


def apply_parity_noise(shots: ShotRecord, epsilon: float, seed) -> ShotRecord:
    """Independently flip each site's parity with probability ``epsilon``.

    A flip adds or removes one atom (adds on empty sites), so noisy shots no
    longer conserve the total count.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon == 0.0:
        return shots
    rng = np.random.default_rng(seed)
    occ = shots.occupations.astype(np.int16).copy()
    flip = rng.random(occ.shape) < epsilon
    step = np.where(rng.random(occ.shape) < 0.5, -1, 1)
    step[occ == 0] = 1
    occ += np.where(flip, step, 0).astype(np.int16)
    return ShotRecord(occ, shots.L, epsilon, {**shots.meta, "noise_seed": seed})
