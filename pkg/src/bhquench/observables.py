"""Local and global observables, and distances between subsystem states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .entanglement import BlockDensityMatrix, reduce
from .ensembles import EnsembleState
from .fock import SectorBasis
from .hamiltonian import build_interaction


@dataclass(frozen=True)
class NumberDistribution:
    sites: tuple[int, ...]
    probabilities: np.ndarray  # P(n) for n = 0..N

    def mean(self) -> float:
        return float(np.arange(len(self.probabilities)) @ self.probabilities)


def _fock_weights(state, basis: SectorBasis | None) -> list[tuple[SectorBasis, np.ndarray]]:
    """(basis, probability over basis states) per sector, for pure states and ensembles alike."""
    if isinstance(state, EnsembleState):
        return [(s.basis, p) for s, p in zip(state.sectors, state.fock_probabilities())]
    if basis is None:
        raise ValueError("a basis is required for a pure state")
    amps = np.asarray(getattr(state, "amplitudes", state))
    return [(basis, np.abs(amps) ** 2)]


def site_density(state, basis: SectorBasis | None = None) -> np.ndarray:
    """``<n_i>`` for every site."""
    return sum(p @ b.states.astype(float) for b, p in _fock_weights(state, basis))


def interaction_energy(state, U: float, basis: SectorBasis | None = None) -> float:
    """``(U/2) sum_i <n_i (n_i - 1)>``."""
    return float(sum(p @ build_interaction(b, U) for b, p in _fock_weights(state, basis)))


def number_distribution(state, A: Iterable[int], basis: SectorBasis | None = None,
                        rho: BlockDensityMatrix | None = None) -> NumberDistribution:
    """Probability of finding ``n`` particles on the sites ``A``: the block weights of ``rho_A``."""
    A = tuple(sorted(set(int(a) for a in A)))
    rho = rho if rho is not None else reduce(state, A, basis)
    if rho.sites != A:
        raise ValueError(f"density matrix is on sites {rho.sites}, not {A}")
    if isinstance(state, EnsembleState):
        n_max = max(s.N for s in state.sectors)
    else:
        n_max = basis.N
    P = np.zeros(n_max + 1)
    for n, w in rho.weights.items():
        P[n] = w
    return NumberDistribution(A, P)


def _aligned_blocks(rho: BlockDensityMatrix, sigma: BlockDensityMatrix):
    if rho.sites != sigma.sites:
        raise ValueError(f"subsystems differ: {rho.sites} vs {sigma.sites}")
    for n in sorted(set(rho.blocks) | set(sigma.blocks)):
        a = rho.blocks.get(n)
        b = sigma.blocks.get(n)
        if a is None:
            a = np.zeros_like(b)
        if b is None:
            b = np.zeros_like(a)
        if a.shape != b.shape:
            raise ValueError(f"block n_A={n} has shapes {a.shape} and {b.shape}")
        yield a, b


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(m)
    return (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T


def trace_distance(rho: BlockDensityMatrix, sigma: BlockDensityMatrix) -> float:
    """``(1/2) Tr|rho - sigma|`` via block eigenvalues."""
    total = 0.0
    for a, b in _aligned_blocks(rho, sigma):
        if a.size:
            total += np.abs(np.linalg.eigvalsh(a - b)).sum()
    return float(min(0.5 * total, 1.0))


def fidelity(rho: BlockDensityMatrix, sigma: BlockDensityMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(sigma) rho sqrt(sigma))`` (not squared)."""
    total = 0.0
    for a, b in _aligned_blocks(rho, sigma):
        if not a.size:
            continue
        sb = _psd_sqrt(b)
        inner = sb @ a @ sb
        lam = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
        total += np.sqrt(np.clip(lam, 0.0, None)).sum()
    return float(min(total, 1.0))


def window_statistics(values: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation over the leading (time) axis."""
    v = np.asarray(values, dtype=float)
    return v.mean(axis=0), v.std(axis=0)
