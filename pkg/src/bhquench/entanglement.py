"""Subsystem density matrices and entanglement measures.

Particle-number conservation makes every reduced density matrix block
diagonal in the subsystem particle number ``n_A``, so reductions are done
block by block: for a pure state, the amplitudes with a given ``n_A`` form a
``dim_A x dim_B`` matrix ``M`` and the block is ``M M^dag``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NumericalError
from .fock import PartitionMap, SectorBasis, partition_map_for

TRACE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BlockDensityMatrix:
    sites: tuple[int, ...]
    blocks: Mapping[int, np.ndarray]

    @property
    def weights(self) -> dict[int, float]:
        return {n: float(np.real(np.trace(b))) for n, b in self.blocks.items()}

    def trace(self) -> float:
        return sum(self.weights.values())

    def to_dense(self) -> np.ndarray:
        """Block-diagonal assembly, blocks in increasing ``n_A``."""
        dims = [b.shape[0] for _, b in sorted(self.blocks.items())]
        out = np.zeros((sum(dims), sum(dims)), dtype=complex)
        k = 0
        for _, b in sorted(self.blocks.items()):
            d = b.shape[0]
            out[k:k + d, k:k + d] = b
            k += d
        return out

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.linalg.eigvalsh(b) for _, b in sorted(self.blocks.items())])

    def validate(self, tol: float = TRACE_TOL) -> None:
        tr = self.trace()
        if abs(tr - 1.0) > tol:
            raise NumericalError(f"density matrix trace {tr!r} != 1", abs(tr - 1.0))
        for n, b in self.blocks.items():
            herm = float(np.max(np.abs(b - b.conj().T))) if b.size else 0.0
            if herm > HERMITIAN_TOL:
                raise NumericalError(f"block n_A={n} not Hermitian", herm)
            if b.size:
                lo = float(np.linalg.eigvalsh(b).min())
                if lo < -PSD_TOL:
                    raise NumericalError(f"block n_A={n} has negative eigenvalue", lo)


def _block_from_columns(cols: np.ndarray, pmap: PartitionMap, n: int, sel: np.ndarray) -> np.ndarray:
    # cols: (len(sel), K) amplitudes of K pure components on the selected states
    dA, dB = pmap.dims_A[n], pmap.dims_B[n]
    K = cols.shape[1]
    M = np.zeros((dA, dB, K), dtype=complex)
    M[pmap.rank_A[sel], pmap.rank_B[sel], :] = cols
    M = M.reshape(dA, dB * K)
    b = M @ M.conj().T
    return 0.5 * (b + b.conj().T)


def reduce_columns(columns: np.ndarray, pmap: PartitionMap, weights: np.ndarray | None = None
                   ) -> dict[int, np.ndarray]:
    """Blocks of ``sum_k w_k Tr_B |v_k><v_k|`` for the columns ``v_k`` of ``columns``.

    Identically zero blocks (sectors ``n_A`` the state never visits) are omitted.
    """
    columns = np.asarray(columns)
    if columns.ndim == 1:
        columns = columns[:, None]
    if weights is not None:
        keep = weights > 0
        columns = columns[:, keep] * np.sqrt(weights[keep])
    blocks = {}
    for n in sorted(pmap.dims_A):
        sel = np.flatnonzero(pmap.n_A == n)
        if not len(sel):
            continue
        block = _block_from_columns(columns[sel], pmap, n, sel)
        if np.any(block):
            blocks[n] = block
    return blocks


def reduce_pure(psi: np.ndarray, basis: SectorBasis, A: Iterable[int],
                pmap: PartitionMap | None = None) -> BlockDensityMatrix:
    """``Tr_B |psi><psi|`` for an amplitude vector in ``basis``."""
    pmap = pmap or partition_map_for(basis, A)
    A = tuple(sorted(set(A)))
    if pmap.subsystem != A:
        raise ValueError(f"partition map is for sites {pmap.subsystem}, not {A}")
    return BlockDensityMatrix(A, reduce_columns(np.asarray(psi, dtype=complex), pmap))


def reduce(state, A: Iterable[int], basis: SectorBasis | None = None,
           pmap: PartitionMap | None = None) -> BlockDensityMatrix:
    """Reduced density matrix of a pure state or an ensemble on sites ``A``.

    Pure states (``QuenchState`` or raw amplitude vectors) need ``basis``;
    ensembles carry their own bases.
    """
    A = tuple(sorted(set(int(a) for a in A)))
    if hasattr(state, "reduced"):
        return state.reduced(A)
    if basis is None:
        raise ValueError("a basis is required to reduce a pure state")
    amps = getattr(state, "amplitudes", state)
    return reduce_pure(amps, basis, A, pmap)


def purity(rho: BlockDensityMatrix) -> float:
    """``Tr rho^2``, summed over blocks."""
    return float(sum(np.real(np.vdot(b, b)) for b in rho.blocks.values()))


def renyi2(rho: BlockDensityMatrix) -> float:
    """Second Renyi entropy ``-ln Tr rho^2`` (natural log)."""
    p = purity(rho)
    if p <= 0:
        raise NumericalError(f"non-positive purity {p!r}")
    return float(max(-np.log(p), 0.0))


def von_neumann(rho: BlockDensityMatrix) -> float:
    lam = rho.eigenvalues()
    lam = lam[lam > 1e-300]
    return float(-(lam * np.log(lam)).sum())


def extensive_correction(S: float, volume: int, s0: float = 0.0) -> float:
    """Remove a per-site entropy offset ``s0`` from a measured entropy."""
    return S - volume * s0


def mutual_information(state, A: Iterable[int], B: Iterable[int], basis: SectorBasis | None = None) -> float:
    """``S_A + S_B - S_AB`` with Renyi-2 entropies."""
    A = tuple(sorted(set(A)))
    B = tuple(sorted(set(B)))
    if set(A) & set(B):
        raise ValueError(f"subsystems {A} and {B} overlap")
    AB = tuple(sorted(A + B))
    return (renyi2(reduce(state, A, basis)) + renyi2(reduce(state, B, basis))
            - renyi2(reduce(state, AB, basis)))


def partition_family(L: int, volume: int, mode: str = "contiguous") -> list[tuple[int, ...]]:
    """Site sets of the given volume: contiguous blocks or all subsets."""
    if not 1 <= volume <= L:
        raise ValueError(f"volume must be in 1..{L}, got {volume}")
    if mode == "contiguous":
        return [tuple(range(a, a + volume)) for a in range(L - volume + 1)]
    if mode == "all-subsets":
        return list(itertools.combinations(range(L), volume))
    raise ValueError(f"unknown partition mode {mode!r}")


def partition_average(state, volume: int, mode: str = "contiguous", basis: SectorBasis | None = None,
                      L: int | None = None, s0: float = 0.0) -> tuple[float, float]:
    """Mean and standard deviation of Renyi-2 entropy over a partition family."""
    if L is None:
        L = basis.L if basis is not None else state.L
    vals = [extensive_correction(renyi2(reduce(state, A, basis)), volume, s0)
            for A in partition_family(L, volume, mode)]
    return float(np.mean(vals)), float(np.std(vals))


@dataclass(frozen=True)
class PiecewiseFit:
    slope: float
    breakpoint: float
    plateau: float
    origin: float = 0.0

    def __iter__(self):
        return iter((self.slope, self.breakpoint, self.plateau))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        y0 = self.plateau - self.slope * (self.breakpoint - self.origin)
        return y0 + self.slope * (np.minimum(t, self.breakpoint) - self.origin)


def piecewise_linear_fit(times: Sequence[float], values: Sequence[float]) -> PiecewiseFit:
    """Continuous ramp-then-plateau least-squares fit.

    The ramp starts at the first data point ``(t_0, S_0)`` and the plateau
    continues the ramp's end value, so the free parameters are the slope and
    the break time. The break time is optimized within every interval
    between samples; the slope has a closed form for a given break.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(t) < 4 or len(t) != len(y):
        raise ValueError("need at least 4 (time, value) pairs")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    t0, y0 = t[0], y[0]
    dy = y - y0
    if np.allclose(dy, 0.0, atol=0.0):
        return PiecewiseFit(0.0, float(t0), float(y0), float(t0))

    def solve(tb: float) -> tuple[float, float]:
        m = np.minimum(t, tb) - t0
        mm = m @ m
        slope = (m @ dy) / mm if mm > 0 else 0.0
        r = dy - slope * m
        return r @ r, slope

    best = (np.inf, 0.0, t[-1])
    for a, b in zip(t[:-1], t[1:]):
        res = minimize_scalar(lambda tb: solve(tb)[0], bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(b))})
        for tb in (a, b, float(res.x)):
            sse, slope = solve(tb)
            if sse < best[0] - 1e-15:
                best = (sse, slope, tb)
    sse, slope, tb = best
    return PiecewiseFit(float(slope), float(tb), float(y0 + slope * (tb - t0)), float(t0))
