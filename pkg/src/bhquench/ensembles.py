"""Statistical ensembles built from exact eigenstates.

Every ensemble is a probability vector over energy eigenstates, possibly
spanning several particle-number sectors (truncated grand-canonical case).
Boltzmann weights are computed with a log-sum-exp shift so very low
temperatures do not underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, root

from .entanglement import BlockDensityMatrix, partition_family, reduce_columns, renyi2
from .errors import NumericalError
from .fock import partition_map_for
from .spectral import QuenchState, SectorSpectrum

KINDS = ("canonical", "microcanonical", "grand-canonical", "diagonal", "single-eigenstate")
DEFAULT_WINDOW = 1.0
WEIGHT_CUTOFF = 1e-300


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Mixed state ``sum_k w_k |k><k|`` over eigenstates of one or more sectors.

    ``weights`` is the concatenation of per-sector weight vectors in the order
    of ``sectors``.
    """

    kind: str
    weights: np.ndarray
    sectors: tuple[SectorSpectrum, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        w = self.weights
        if len(w) != sum(s.decomp.dim for s in self.sectors):
            raise ValueError("weight vector length does not match the sectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise NumericalError("ensemble weights are not a probability vector", abs(w.sum() - 1.0))

    @property
    def L(self) -> int:
        return self.sectors[0].basis.L

    def sector_weights(self) -> list[np.ndarray]:
        out, k = [], 0
        for s in self.sectors:
            out.append(self.weights[k:k + s.decomp.dim])
            k += s.decomp.dim
        return out

    def particle_distribution(self) -> dict[int, float]:
        return {s.N: float(w.sum()) for s, w in zip(self.sectors, self.sector_weights())}

    def energy(self) -> float:
        return float(sum(w @ s.decomp.eigenvalues for s, w in zip(self.sectors, self.sector_weights())))

    def mean_particle_number(self) -> float:
        return float(sum(w.sum() * s.N for s, w in zip(self.sectors, self.sector_weights())))

    def fock_probabilities(self) -> list[np.ndarray]:
        """Diagonal of the ensemble density matrix in each sector's Fock basis."""
        return [(s.decomp.eigenvectors ** 2) @ w for s, w in zip(self.sectors, self.sector_weights())]

    def reduced(self, A: Iterable[int]) -> BlockDensityMatrix:
        A = tuple(sorted(set(int(a) for a in A)))
        blocks: dict[int, np.ndarray] = {}
        for s, w in zip(self.sectors, self.sector_weights()):
            if not np.any(w > WEIGHT_CUTOFF):
                continue
            pmap = partition_map_for(s.basis, A)
            for n, b in reduce_columns(s.decomp.eigenvectors, pmap, w).items():
                blocks[n] = blocks[n] + b if n in blocks else b
        return BlockDensityMatrix(A, blocks)


def _softmax(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    return w / w.sum()


def boltzmann_weights(energies: np.ndarray, T: float) -> np.ndarray:
    energies = np.asarray(energies, dtype=float)
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if math.isinf(T):
        return np.full(len(energies), 1.0 / len(energies))
    logw = -(energies - energies.min()) / T
    return _softmax(logw)


def thermal_energy(energies: np.ndarray, T: float) -> float:
    return float(boltzmann_weights(energies, T) @ energies)


def canonical(sector: SectorSpectrum, T: float) -> EnsembleState:
    w = boltzmann_weights(sector.decomp.eigenvalues, T)
    return EnsembleState("canonical", w, (sector,), {"T": T})


def match_canonical_temperature(sector: SectorSpectrum, E_target: float, rtol: float = 1e-8) -> float:
    """Temperature at which the canonical energy equals ``E_target``.

    The canonical energy rises monotonically from the ground energy to the
    spectral mean, so the target must lie strictly between those.
    """
    E = sector.decomp.eigenvalues
    lo_E, hi_E = float(E[0]), float(E.mean())
    if not lo_E < E_target < hi_E:
        raise ValueError(f"target energy {E_target} outside the attainable bracket ({lo_E}, {hi_E})")
    scale = max(float(E[-1] - E[0]), 1e-300)
    tol = rtol * max(abs(E_target), scale)

    def f(logT: float) -> float:
        return thermal_energy(E, math.exp(logT)) - E_target

    a, b = math.log(scale) - 3.0, math.log(scale) + 3.0
    while f(a) > 0:
        a -= 2.0
        if a < math.log(scale) - 700:
            raise ValueError("target energy too close to the ground state to bracket")
    while f(b) < 0:
        b += 2.0
        if b > math.log(scale) + 700:
            raise ValueError("target energy too close to the spectral mean to bracket")
    logT = brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(logT)) > tol:
        raise NumericalError("canonical temperature match missed tolerance", abs(f(logT)))
    return math.exp(logT)


def microcanonical(sector: SectorSpectrum, E_target: float, window: float = DEFAULT_WINDOW) -> EnsembleState:
    E = sector.decomp.eigenvalues
    inside = np.abs(E - E_target) <= window
    if not inside.any():
        raise ValueError(f"no eigenvalue within {window} of {E_target}; use a larger window")
    w = inside / inside.sum()
    return EnsembleState("microcanonical", w.astype(float), (sector,),
                         {"E_target": E_target, "window": window, "members": int(inside.sum())})


def diagonal_ensemble(sector: SectorSpectrum, state: QuenchState | np.ndarray) -> EnsembleState:
    """Weights ``|c_n|^2`` from eigenbasis overlaps (or from a ``QuenchState``)."""
    c = state.overlaps if isinstance(state, QuenchState) else np.asarray(state)
    w = np.abs(c) ** 2
    norm = w.sum()
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"overlap vector is not normalized (|c|^2 sums to {norm})")
    w = w / norm
    return EnsembleState("diagonal", w, (sector,), {"participation_ratio": float(1.0 / (w @ w))})


def single_eigenstate(sector: SectorSpectrum, E_target: float) -> EnsembleState:
    """The eigenstate closest in energy to ``E_target``; ties go to the lower index."""
    E = sector.decomp.eigenvalues
    k = int(np.argmin(np.abs(E - E_target)))
    w = np.zeros(len(E))
    w[k] = 1.0
    return EnsembleState("single-eigenstate", w, (sector,),
                         {"E_target": E_target, "index": k, "energy": float(E[k]), "tie_break": "lowest index"})


def _gc_log_weights(sectors: Sequence[SectorSpectrum], T: float, mu: float) -> np.ndarray:
    E = np.concatenate([s.decomp.eigenvalues for s in sectors])
    n = np.concatenate([np.full(s.decomp.dim, s.N, dtype=float) for s in sectors])
    return -(E - mu * n) / T


def grand_canonical(sectors: Sequence[SectorSpectrum], T: float, mu: float) -> EnsembleState:
    """Boltzmann weights ``exp(-(E - mu n)/T)`` across all supplied sectors."""
    sectors = tuple(sectors)
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if math.isinf(T):
        total = sum(s.decomp.dim for s in sectors)
        w = np.full(total, 1.0 / total)
    else:
        logw = _gc_log_weights(sectors, T, mu)
        w = _softmax(logw)
    return EnsembleState("grand-canonical", w, sectors, {"T": T, "mu": mu})


def match_grand_canonical(sectors: Sequence[SectorSpectrum], E_target: float, N_target: float,
                          T_guess: float | None = None, max_iter: int = 400, rtol: float = 1e-6
                          ) -> tuple[float, float]:
    """Solve ``<H> = E_target`` and ``<N> = N_target`` for ``(T, mu)``."""
    sectors = tuple(sectors)
    E_all = np.concatenate([s.decomp.eigenvalues for s in sectors])
    n_all = np.concatenate([np.full(s.decomp.dim, s.N, dtype=float) for s in sectors])
    E_scale = max(abs(E_target), float(E_all.max() - E_all.min()))
    if T_guess is None:
        T_guess = 0.25 * E_scale

    def moments(logT: float, mu: float) -> tuple[float, float]:
        with np.errstate(over="ignore", invalid="ignore"):
            logw = -(E_all - mu * n_all) / math.exp(min(max(logT, -700.0), 700.0))
        if not np.all(np.isfinite(logw)):
            return math.nan, math.nan
        w = _softmax(logw)
        return float(w @ E_all), float(w @ n_all)

    def residual(x):
        E, n = moments(x[0], x[1])
        if math.isnan(E):
            return [1e3, 1e3]  # steer the solver back from overflowing trial points
        return [(E - E_target) / E_scale, (n - N_target) / max(abs(N_target), 1.0)]

    best = None
    for mu0 in (0.0, E_scale / 4, -E_scale / 4, E_scale, -E_scale):
        sol = root(residual, [math.log(T_guess), mu0], method="hybr", options={"maxfev": max_iter})
        r = float(np.max(np.abs(residual(sol.x))))
        if best is None or r < best[0]:
            best = (r, sol.x)
        if r < rtol:
            break
    r, x = best
    if r >= rtol:
        raise NumericalError("grand-canonical match did not converge", r)
    return math.exp(x[0]), float(x[1])


def ensemble_rdm(ensemble: EnsembleState, A: Iterable[int]) -> BlockDensityMatrix:
    return ensemble.reduced(A)


def thermal_renyi(ensemble: EnsembleState, volume: int, mode: str = "contiguous") -> float:
    """Renyi-2 entropy of the ensemble's subsystem matrices, averaged over a partition family."""
    vals = [renyi2(ensemble.reduced(A)) for A in partition_family(ensemble.L, volume, mode)]
    return float(np.mean(vals))
