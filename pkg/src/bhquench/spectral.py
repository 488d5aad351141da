"""Dense symmetric eigensolver and exact quench propagation.

The solver is the classic two-stage scheme: Householder reduction to
tridiagonal form, then implicit-shift QL iteration with eigenvector
accumulation. Sector dimensions here are a few hundred, so the full spectrum
is cheap and propagation is done exactly in the eigenbasis.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy.linalg.blas import drot

from .errors import NumericalError
from .hamiltonian import SparseSymMatrix

if TYPE_CHECKING:
    from .fock import SectorBasis
    from .hamiltonian import HubbardParams

DENSE_CAP = 5000
MAX_QL_ITER = 60
GAP_TOL = 1e-10


class DegenerateGroundStateWarning(UserWarning):
    pass


def householder_tridiagonal(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce symmetric ``A`` to tridiagonal form ``Q^T A Q``.

    Returns ``(d, e, Q)`` with diagonal ``d``, subdiagonal ``e`` (``e[k]``
    couples ``k`` and ``k+1``; ``e[-1] == 0``) and orthogonal ``Q``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        sub = A[k + 1:, k + 1:]
        p = beta * (sub @ v)
        w = p - 0.5 * beta * (v @ p) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
        A[k + 1, k] = A[k, k + 1] = alpha
        Qs = Q[:, k + 1:]
        Qs -= beta * np.outer(Qs @ v, v)
    d = np.diag(A).copy()
    e = np.zeros(n)
    if n > 1:
        e[:-1] = np.diag(A, -1)
    return d, e, Q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, Z: np.ndarray | None = None,
                   max_iter: int = MAX_QL_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``d`` is the diagonal and ``e[i]`` couples ``i`` and ``i+1``. If ``Z`` is
    given (e.g. the Householder ``Q``) its columns are rotated along, so the
    returned columns are eigenvectors of the original matrix. Output is
    unsorted.
    """
    d = np.array(d, dtype=float)
    e = np.array(e, dtype=float)
    n = len(d)
    # rows of Zt are the eigenvector columns; contiguous rows keep rotations cheap
    Zt = np.eye(n) if Z is None else np.array(Z, dtype=float).T.copy()
    dl = d.tolist()
    el = e.tolist()
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(dl[m]) + abs(dl[m + 1])
                if abs(el[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise NumericalError(f"QL iteration did not converge for eigenvalue {l}", abs(el[l]))
            it += 1
            g = (dl[l + 1] - dl[l]) / (2.0 * el[l])
            r = math.hypot(g, 1.0)
            g = dl[m] - dl[l] + el[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * el[i]
                b = c * el[i]
                r = math.hypot(f, g)
                el[i + 1] = r
                if r == 0.0:
                    dl[i + 1] -= p
                    el[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = dl[i + 1] - p
                r = (dl[i] - g) * s + 2.0 * c * b
                p = s * r
                dl[i + 1] = g + p
                g = c * r - b
                drot(Zt[i + 1], Zt[i], c, s, overwrite_x=1, overwrite_y=1)
                i -= 1
            if underflow:
                continue
            dl[l] -= p
            el[l] = g
            el[m] = 0.0
    return np.array(dl), Zt.T


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def _fix_phases(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigh(H: SparseSymMatrix | np.ndarray, *, dense_cap: int = DENSE_CAP,
         method: str = "householder-ql", check: bool = True) -> SpectralDecomposition:
    """Full eigensystem, eigenvalues ascending, eigenvector signs fixed.

    ``method="lapack"`` swaps in ``numpy.linalg.eigh`` for the same contract.
    """
    A = H.to_dense() if isinstance(H, SparseSymMatrix) else np.asarray(H, dtype=float)
    n = A.shape[0]
    if n > dense_cap:
        raise ValueError(f"dimension {n} exceeds the dense eigensolver cap {dense_cap}")
    if method == "householder-ql":
        d, e, Q = householder_tridiagonal(A)
        w, V = tridiagonal_ql(d, e, Q)
    elif method == "lapack":
        w, V = np.linalg.eigh(A)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    order = np.argsort(w, kind="stable")
    w, V = w[order], _fix_phases(V[:, order])
    if check and n:
        scale = max(float(np.max(np.abs(w))), 1.0)
        resid = float(np.max(np.abs(A @ V - V * w)))
        if resid > 1e-9 * scale:
            raise NumericalError("eigensolver residual above tolerance", resid)
        ortho = float(np.max(np.abs(V.T @ V - np.eye(n))))
        if ortho > 1e-10:
            raise NumericalError("eigenvectors lost orthonormality", ortho)
    w.setflags(write=False)
    V.setflags(write=False)
    return SpectralDecomposition(w, V)


@dataclass(frozen=True, eq=False)
class QuenchState:
    """Pure state in a sector Fock basis, with its eigenbasis overlaps ``c_n``."""

    amplitudes: np.ndarray
    time: float
    overlaps: np.ndarray
    degenerate: bool = False

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def state_from_vector(decomp: SpectralDecomposition, psi: np.ndarray, time: float = 0.0) -> QuenchState:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (decomp.dim,):
        raise ValueError(f"state length {psi.shape} does not match dimension {decomp.dim}")
    return QuenchState(psi, time, decomp.eigenvectors.T @ psi)


def fock_state(decomp: SpectralDecomposition, index: int) -> QuenchState:
    psi = np.zeros(decomp.dim, dtype=complex)
    psi[index] = 1.0
    return state_from_vector(decomp, psi)


def ground_state(decomp: SpectralDecomposition) -> QuenchState:
    """Lowest eigenvector; sign convention already fixed by :func:`eigh`."""
    degenerate = decomp.dim > 1 and decomp.eigenvalues[1] - decomp.eigenvalues[0] < GAP_TOL
    if degenerate:
        warnings.warn("ground level is degenerate; returned vector is one member of the manifold",
                      DegenerateGroundStateWarning, stacklevel=2)
    c = np.zeros(decomp.dim, dtype=complex)
    c[0] = 1.0
    return QuenchState(decomp.eigenvectors[:, 0].astype(complex), 0.0, c, degenerate)


def evolve(decomp: SpectralDecomposition, psi0: QuenchState, t: float) -> QuenchState:
    """Propagate by ``t`` (in 1/J units) under the decomposed Hamiltonian."""
    if t == 0:
        return QuenchState(psi0.amplitudes.copy(), psi0.time, psi0.overlaps.copy(), psi0.degenerate)
    c_t = np.exp(-1j * decomp.eigenvalues * t) * psi0.overlaps
    return QuenchState(decomp.eigenvectors @ c_t, psi0.time + t, c_t, psi0.degenerate)


def trajectory(decomp: SpectralDecomposition, psi0: QuenchState, times: Iterable[float]) -> list[QuenchState]:
    return [evolve(decomp, psi0, float(t)) for t in times]


def expectation(H: SparseSymMatrix | np.ndarray, state: QuenchState) -> float:
    from .hamiltonian import matvec

    psi = state.amplitudes
    Hpsi = matvec(H, psi) if isinstance(H, SparseSymMatrix) else H @ psi
    return float(np.real(np.vdot(psi, Hpsi)))


@dataclass(frozen=True, eq=False)
class SectorSpectrum:
    """Basis, Hamiltonian and eigensystem of one particle-number sector."""

    params: HubbardParams
    basis: SectorBasis
    hamiltonian: SparseSymMatrix
    decomp: SpectralDecomposition

    @property
    def N(self) -> int:
        return self.basis.N


@lru_cache(maxsize=32)
def solve_sector(params: HubbardParams, method: str = "householder-ql") -> SectorSpectrum:
    """Build and diagonalize the ``(L, N)`` sector; memoized on the parameters."""
    from .fock import cached_basis
    from .hamiltonian import build_hamiltonian

    basis = cached_basis(params.L, params.N)
    H = build_hamiltonian(params, basis)
    return SectorSpectrum(params, basis, H, eigh(H, method=method))


def solve_sectors(params: HubbardParams, N_max: int | None = None,
                  method: str = "householder-ql") -> tuple[SectorSpectrum, ...]:
    """Sectors ``N = 0..N_max`` (default ``params.N``) for truncated grand-canonical work."""
    N_max = params.N if N_max is None else N_max
    return tuple(solve_sector(params.with_N(n), method) for n in range(N_max + 1))
