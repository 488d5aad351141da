"""End-to-end acceptance criteria, each checked at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are repeated
in the terminal summary (see ``conftest.py``).
"""
import time

import numpy as np
import pytest

from bhquench.ensembles import canonical, match_canonical_temperature, thermal_renyi
from bhquench.entanglement import (
    BlockDensityMatrix,
    partition_average,
    partition_family,
    piecewise_linear_fit,
    purity,
    reduce,
    renyi2,
)
from bhquench.fock import dimension, enumerate_basis
from bhquench.hamiltonian import HubbardParams, build_hamiltonian
from bhquench.interference import apply_beamsplitter, embed_product, exact_parity, sample_shots
from bhquench.observables import fidelity, interaction_energy, number_distribution, trace_distance
from bhquench.runner.config import convert_time
from bhquench.runner.pipeline import mutual_information_profile
from bhquench.spectral import eigh, evolve, expectation, fock_state, ground_state, solve_sector, state_from_vector

from conftest import SATURATED, random_state
from oracles import brute_basis, brute_two_copy_interference, dense_bose_hubbard, dense_partial_trace, product_index

RESULTS = []

# the default experiment time grid: 0-20 ms at J/(2 pi) = 66 Hz, 81 points
GRID = convert_time(np.linspace(0, 20, 81), 66.0)


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def site_averaged(rhos):
    keys = sorted(set().union(*(r.blocks for r in rhos)))
    blocks = {n: sum(r.blocks.get(n, np.zeros((1, 1))) for r in rhos) / len(rhos) for n in keys}
    return BlockDensityMatrix(rhos[0].sites, blocks)


def test_criterion_01_dimension():
    t0 = time.perf_counter()
    d = dimension(6, 6)
    dt = time.perf_counter() - t0
    report(1, d == 462 and dt < 1e-3, f"dimension(6,6) = {d} in {dt * 1e6:.1f} us")


def test_criterion_02_temperatures():
    parts, ok = [], True
    for ratio, target, tol in [(0.64, 3.8, 0.4), (2.6, 11.0, 1.5)]:
        t0 = time.perf_counter()
        params = HubbardParams.from_ratio(6, 6, ratio)
        basis = enumerate_basis(6, 6)
        H = build_hamiltonian(params, basis)
        from bhquench.spectral import SectorSpectrum
        sector = SectorSpectrum(params, basis, H, eigh(H))
        T = match_canonical_temperature(sector, 0.0)
        dt = time.perf_counter() - t0
        ok &= abs(T - target) <= tol and dt < 5.0
        parts.append(f"J/U={ratio}: T/J={T:.4f} (want {target}+-{tol}, {dt:.2f} s)")
    report(2, ok, "; ".join(parts))


def test_criterion_03_local_thermalization(q064):
    # single-site density matrix averaged over the six sites, compared with the
    # same average of the matched canonical ensemble
    t0 = time.perf_counter()
    c = canonical(q064.sector, q064.T)
    thermal = site_averaged([reduce(c, [x]) for x in range(6)])
    F, D = [], []
    for t in SATURATED:
        s = q064.at(t)
        rho = site_averaged([reduce(s, [x], q064.basis) for x in range(6)])
        F.append(fidelity(rho, thermal))
        D.append(trace_distance(rho, thermal))
    dt = time.perf_counter() - t0
    ok = min(F) > 0.99 and 0 <= min(D) and max(D) <= 0.1 and dt < 30
    report(3, ok, f"min fidelity {min(F):.4f} (> 0.99), trace distance in [{min(D):.4f}, {max(D):.4f}] "
                  f"(want [0, 0.1]), window mean {np.mean(D):.4f}, {dt:.1f} s")


def test_criterion_04_parity_purity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    b = enumerate_basis(6, 6)
    max_err, hits, trials = 0.0, 0, 0
    seeds = range(5)
    for k in range(20):
        ratio = rng.uniform(0.3, 3.0)
        sec = solve_sector(HubbardParams.from_ratio(6, 6, float(ratio)))
        occ = tuple(rng.multinomial(6, np.ones(6) / 6))
        psi0 = fock_state(sec.decomp, b.index_of(occ)) if k % 2 else state_from_vector(
            sec.decomp, random_state(rng, b.dim))
        psi = evolve(sec.decomp, psi0, float(rng.uniform(0.5, 10.0))).amplitudes
        out = apply_beamsplitter(embed_product(psi, b))
        exact = {}
        for v in range(1, 7):
            for A in partition_family(6, v):
                exact[A] = exact_parity(out, A)
                max_err = max(max_err, abs(exact[A] - purity(reduce(psi, A, b))))
        for seed in seeds:
            shots = sample_shots(out, 10_000, seed=(k, seed))
            for A, p in exact.items():
                par = shots.parities(A).astype(float)
                est, se = par.mean(), par.std(ddof=1) / np.sqrt(len(par))
                hits += abs(est - p) <= 3 * se + 1e-12
                trials += 1
    dt = time.perf_counter() - t0
    rate = hits / trials
    ok = max_err < 1e-8 and rate >= 0.99 and dt < 600
    report(4, ok, f"max |parity - purity| = {max_err:.2e} (< 1e-8); within 3 SE: {hits}/{trials} = "
                  f"{rate:.4f} (>= 0.99); {dt:.0f} s")


def test_criterion_05_entropy_dynamics(q064):
    t0 = time.perf_counter()
    curves = {v: np.array([partition_average(q064.at(t), v, basis=q064.basis)[0] for t in GRID]) for v in (1, 2, 3)}
    S_full = max(renyi2(reduce(q064.at(t), range(6), q064.basis)) for t in GRID)
    window = GRID >= SATURATED[0] - 1e-9
    fits = {v: piecewise_linear_fit(GRID, S) for v, S in curves.items()}
    slopes = np.array([f.slope for f in fits.values()])
    spread = np.max(np.abs(slopes - slopes.mean()) / slopes.mean())
    rises = all(S[0] < 1e-12 and fits[v].slope > 0 for v, S in curves.items())
    saturates = all(fits[v].breakpoint < GRID[-1] / 2 and S[window].std() < 0.1 * S[window].mean()
                    for v, S in curves.items())
    dt = time.perf_counter() - t0
    ok = S_full < 1e-10 and rises and saturates and spread <= 0.2 and dt < 60
    report(5, ok, f"max S_full {S_full:.1e}; slopes {np.round(slopes, 3).tolist()} (max rel. deviation "
                  f"{spread:.3f} <= 0.2); breakpoints {[round(f.breakpoint, 2) for f in fits.values()]}; {dt:.1f} s")


def test_criterion_06_volume_law(q064):
    t0 = time.perf_counter()
    c = canonical(q064.sector, q064.T)
    g = ground_state(q064.decomp)
    states = [q064.at(t) for t in SATURATED]
    quench = {v: np.mean([partition_average(s, v, basis=q064.basis)[0] for s in states]) for v in range(1, 7)}
    thermal = {v: thermal_renyi(c, v) for v in (1, 2, 3)}
    ground = {v: partition_average(g, v, basis=q064.basis)[0] for v in (1, 2, 3)}
    gaps = {v: abs(quench[v] - thermal[v]) for v in (1, 2, 3)}
    dt = time.perf_counter() - t0
    ok = (all(x <= 0.25 for x in gaps.values()) and quench[6] < 1e-10
          and all(ground[v] < quench[v] for v in (1, 2, 3)) and dt < 120)
    rows = ", ".join(f"v={v}: {quench[v]:.3f} vs thermal {thermal[v]:.3f} (gap {gaps[v]:.3f}), ground {ground[v]:.3f}"
                     for v in (1, 2, 3))
    report(6, ok, f"{rows}; S(6) = {quench[6]:.1e}; {dt:.1f} s")


def test_criterion_07_mutual_information(q064):
    t0 = time.perf_counter()
    g = ground_state(q064.decomp)
    states = [q064.at(t) for t in SATURATED]
    I = {v: (np.mean([mutual_information_profile(s, 6, v, q064.basis) for s in states]),
             mutual_information_profile(g, 6, v, q064.basis)) for v in (2, 6)}
    dt = time.perf_counter() - t0
    ok = I[2][0] < I[2][1] and I[6][0] > I[6][1] and dt < 60
    report(7, ok, f"|AB|=2: quench {I[2][0]:.3f} < ground {I[2][1]:.3f}; "
                  f"|AB|=6: quench {I[6][0]:.3f} > ground {I[6][1]:.3f}; {dt:.1f} s")


def test_criterion_08_interaction_energy(q064):
    t0 = time.perf_counter()
    U = q064.params.U
    start = interaction_energy(q064.psi0, U, q064.basis)
    avg = np.mean([interaction_energy(q064.at(t), U, q064.basis) for t in SATURATED])
    ref = interaction_energy(canonical(q064.sector, q064.T), U)
    rel = abs(avg - ref) / ref
    dt = time.perf_counter() - t0
    report(8, start == 0.0 and rel <= 0.05 and dt < 60,
           f"H_int(0) = {start}; window mean {avg:.4f} vs canonical {ref:.4f} at T/J={q064.T:.3f} "
           f"(rel. diff {rel:.4f} <= 0.05); {dt:.1f} s")


def test_criterion_09_small_oracles():
    from scipy.linalg import expm

    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    err = {"partial trace": 0.0, "evolution": 0.0, "two-copy": 0.0}
    for L in (2, 3, 4):
        N = L
        b = enumerate_basis(L, N)
        states = brute_basis(L, N)
        H, _ = dense_bose_hubbard(L, N, 1.0, 1.7)
        sec = solve_sector(HubbardParams(L, N, 1.0, 1.7))
        psi0 = state_from_vector(sec.decomp, random_state(rng, b.dim))
        for t in (0.4, 2.9):
            psi = evolve(sec.decomp, psi0, t).amplitudes
            err["evolution"] = max(err["evolution"], np.abs(psi - expm(-1j * t * H) @ psi0.amplitudes).max())
            for v in range(1, L):
                for A in partition_family(L, v, "all-subsets"):
                    rho = reduce(psi, A, b)
                    dense, _ = dense_partial_trace(psi, states, L, N, A)
                    for n, block in rho.blocks.items():
                        sub = [product_index(s, N) for s in brute_basis(len(A), n)]
                        err["partial trace"] = max(err["partial trace"], np.abs(block - dense[np.ix_(sub, sub)]).max())
            out = apply_beamsplitter(embed_product(psi, b))
            ref = np.zeros(out.basis.dim, dtype=complex)
            for occ, a in brute_two_copy_interference(psi, states, L, N).items():
                ref[out.basis.basis.index_of(occ)] = a
            err["two-copy"] = max(err["two-copy"], np.abs(out.amplitudes - ref).max())
    dt = time.perf_counter() - t0
    ok = max(err.values()) < 1e-10 and dt < 60
    report(9, ok, ", ".join(f"{k} {v:.1e}" for k, v in err.items()) + f" (< 1e-10); {dt:.1f} s")


def test_criterion_10_hygiene(q064, q26):
    t0 = time.perf_counter()
    checks = {}
    for q in (q064, q26):
        H = q.sector.hamiltonian.to_dense()
        d = q.decomp
        radius = np.abs(d.eigenvalues).max()
        checks.setdefault("eigen residual", []).append(
            np.abs(H @ d.eigenvectors - d.eigenvectors * d.eigenvalues).max() / radius < 1e-9)
        checks.setdefault("reconstruction", []).append(np.abs(d.reconstruct() - H).max() < 1e-9 * radius)
        E0 = expectation(q.sector.hamiltonian, q.psi0)
        for t in GRID[::8]:
            s = q.at(t)
            checks.setdefault("unitarity", []).append(abs(s.norm - 1) < 1e-12)
            checks.setdefault("energy", []).append(abs(expectation(q.sector.hamiltonian, s) - E0) < 1e-10)
        c = canonical(q.sector, q.T)
        checks.setdefault("ensemble weights", []).append(abs(c.weights.sum() - 1) < 1e-12 and c.weights.min() >= 0)
        for t in SATURATED[::5]:
            s = q.at(t)
            for A in [(0,), (2, 3), (0, 1, 2)]:
                rho, sigma = reduce(s, A, q.basis), reduce(c, A)
                rho.validate()
                sigma.validate()
                F, D = fidelity(rho, sigma), trace_distance(rho, sigma)
                checks.setdefault("Fuchs-van de Graaf", []).append(1 - F <= D + 1e-12 and D <= np.sqrt(1 - F ** 2) + 1e-12)
                P = number_distribution(s, A, q.basis).probabilities
                checks.setdefault("P(n) normalization", []).append(abs(P.sum() - 1) < 1e-12 and P.min() >= 0)
    b = enumerate_basis(3, 3)
    out = apply_beamsplitter(embed_product(random_state(np.random.default_rng(1), b.dim), b))
    checks["two-copy norm"] = [abs(out.norm - 1) < 1e-10]
    dt = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not all(v)]
    report(10, not failed and dt < 900,
           f"{sum(len(v) for v in checks.values())} checks over {len(checks)} invariants, "
           f"failed: {failed or 'none'}; {dt:.1f} s")
