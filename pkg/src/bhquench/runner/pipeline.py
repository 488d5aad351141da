"""Experiment orchestration: build the model once, evaluate, write tables."""
from __future__ import annotations

import json
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .. import __version__
from ..ensembles import (canonical, diagonal_ensemble, grand_canonical, match_canonical_temperature,
                         match_grand_canonical, microcanonical, single_eigenstate, thermal_renyi)
from ..entanglement import (mutual_information, partition_average, partition_family, piecewise_linear_fit,
                            purity, reduce, renyi2)
from ..hamiltonian import HubbardParams
from ..interference import (apply_beamsplitter, apply_parity_noise, embed_product, entropy_from_shots,
                            exact_parity, purity_estimator, sample_shots)
from ..observables import fidelity, interaction_energy, number_distribution, site_density, trace_distance
from ..spectral import QuenchState, evolve, fock_state, ground_state, solve_sector, solve_sectors
from .config import ExperimentConfig, convert_time
from .io import OutputWriter, git_blob_hash

TOLERANCES = {
    "eigensolver_residual_rel": 1e-9,
    "eigenvector_orthonormality": 1e-10,
    "rdm_trace": 1e-12,
    "canonical_match_rel": 1e-8,
    "grand_canonical_match_rel": 1e-6,
}


def parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Order-preserving map; results are identical for any thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class Quench:
    """A quench from a Fock state into the chain at one ``J/U``."""

    cfg: ExperimentConfig
    ratio: float

    @cached_property
    def params(self) -> HubbardParams:
        return HubbardParams.from_ratio(self.cfg.L, self.cfg.N, self.ratio)

    @cached_property
    def sector(self):
        return solve_sector(self.params, self.cfg.eigensolver)

    @property
    def basis(self):
        return self.sector.basis

    @property
    def decomp(self):
        return self.sector.decomp

    @cached_property
    def psi0(self) -> QuenchState:
        return fock_state(self.decomp, self.basis.index_of(self.cfg.initial))

    @cached_property
    def energy(self) -> float:
        return float(np.abs(self.psi0.overlaps) ** 2 @ self.decomp.eigenvalues)

    @cached_property
    def ground(self) -> QuenchState:
        return ground_state(self.decomp)

    @cached_property
    def temperature(self) -> float:
        E = self.cfg.ensembles.E_target
        return match_canonical_temperature(self.sector, self.energy if E is None else E)

    @cached_property
    def canonical(self):
        return canonical(self.sector, self.temperature)

    def at(self, t: float) -> QuenchState:
        return evolve(self.decomp, self.psi0, float(t))

    def states(self, times: Iterable[float]) -> list[QuenchState]:
        return [self.at(t) for t in times]

    def ensemble(self, kind: str, results: dict | None = None):
        E = self.cfg.ensembles.E_target
        E = self.energy if E is None else E
        if kind == "canonical":
            return self.canonical
        if kind == "microcanonical":
            return microcanonical(self.sector, E, self.cfg.ensembles.window)
        if kind == "diagonal":
            return diagonal_ensemble(self.sector, self.psi0)
        if kind == "single-eigenstate":
            return single_eigenstate(self.sector, E)
        if kind == "grand-canonical":
            sectors = solve_sectors(self.params, self.cfg.N, self.cfg.eigensolver)
            N_target = self.cfg.ensembles.N_target
            N_target = self.cfg.N - 0.5 if N_target is None else N_target
            T, mu = match_grand_canonical(sectors, E, N_target, T_guess=self.temperature)
            if results is not None:
                results.setdefault("grand_canonical", {})[str(self.ratio)] = {
                    "T": T, "mu": mu, "N_target": N_target, "E_target": E}
            return grand_canonical(sectors, T, mu)
        raise ValueError(kind)


def time_columns(cfg: ExperimentConfig, tJ: np.ndarray) -> tuple[list[str], list[list[float]]]:
    if cfg.time.unit == "ms":
        return ["t_ms", "tJ"], [[a, b] for a, b in zip(cfg.time.raw(), tJ)]
    return ["tJ"], [[b] for b in tJ]


def mutual_information_profile(state, L: int, volume: int, basis=None) -> float:
    """Average of ``I(A:B)`` over contiguous ``AB`` of the given volume and every cut inside it."""
    vals = []
    for AB in partition_family(L, volume, "contiguous"):
        for cut in range(1, volume):
            vals.append(mutual_information(state, AB[:cut], AB[cut:], basis))
    return float(np.mean(vals))


# --- subcommands -----------------------------------------------------------------------------

def cmd_spectrum(cfg, out: OutputWriter, results: dict):
    q = Quench(cfg, cfg.J_over_U)
    E = q.decomp.eigenvalues
    w = np.abs(q.psi0.overlaps) ** 2
    out.table("spectrum.csv", ["index", "energy", "quench_weight"], [[i, e, x] for i, (e, x) in enumerate(zip(E, w))])
    results.update({"dimension": q.basis.dim, "ground_energy": float(E[0]), "quench_energy": q.energy,
                    "T_canonical": q.temperature, "participation_ratio": float(1 / (w @ w))})


def cmd_quench(cfg, out: OutputWriter, results: dict):
    q = Quench(cfg, cfg.J_over_U)
    tJ = cfg.times()
    head, tcols = time_columns(cfg, tJ)
    from ..spectral import expectation

    def row(t):
        s = q.at(t)
        return [s.norm, expectation(q.sector.hamiltonian, s), float(abs(s.amplitudes[q.basis.index_of(cfg.initial)]) ** 2),
                interaction_energy(s, q.params.U, q.basis), *site_density(s, q.basis)]

    rows = parallel_map(row, list(tJ), cfg.threads)
    header = head + ["norm", "energy", "return_probability", "interaction_energy"] + [f"n_{i}" for i in range(cfg.L)]
    out.table("quench.csv", header, [a + b for a, b in zip(tcols, rows)])
    results["quench_energy"] = q.energy


def _entropy_curves(cfg, q: Quench, tJ):
    vols = sorted(set(cfg.subsystems.volumes) | {cfg.L})

    def row(t):
        s = q.at(t)
        return [partition_average(s, v, cfg.subsystems.mode, q.basis, s0=cfg.subsystems.s0) for v in vols]

    return vols, parallel_map(row, list(tJ), cfg.threads)


def cmd_entropy(cfg, out: OutputWriter, results: dict, name: str = "entropy"):
    q = Quench(cfg, cfg.J_over_U)
    tJ = cfg.times()
    head, tcols = time_columns(cfg, tJ)
    vols, rows = _entropy_curves(cfg, q, tJ)
    header = head + [f"S_v{v}{'_full' if v == cfg.L else ''}_{k}" for v in vols for k in ("mean", "std")]
    out.table(f"{name}.csv", header, [tc + [x for pair in r for x in pair] for tc, r in zip(tcols, rows)])
    fits = []
    for j, v in enumerate(vols):
        if v == cfg.L:
            continue
        f = piecewise_linear_fit(tJ, [r[j][0] for r in rows])
        fits.append([v, f.slope, f.breakpoint, f.plateau])
    out.table(f"{name}_slopes.csv", ["volume", "slope", "breakpoint_tJ", "plateau"], fits)
    slopes = [f[1] for f in fits]
    results["slopes"] = {str(f[0]): f[1] for f in fits}
    results["mean_slope"] = float(np.mean(slopes)) if slopes else None
    results["max_full_entropy"] = float(max(r[vols.index(cfg.L)][0] for r in rows))


def cmd_ensembles(cfg, out: OutputWriter, results: dict, name: str = "ensembles"):
    summary, stats = [], []
    for ratio in cfg.ensembles.ratios:
        q = Quench(cfg, ratio)
        sat = q.states(cfg.saturation_times())
        for A in cfg.subsystems.sites:
            P = np.array([number_distribution(s, A, q.basis).probabilities for s in sat])
            mean, std = P.mean(axis=0), P.std(axis=0)
            ens_P = {}
            for kind in cfg.ensembles.kinds:
                ens = q.ensemble(kind, results)
                ens_P[kind] = number_distribution(ens, A).probabilities
            for n in range(cfg.N + 1):
                stats.append([ratio, q.temperature, " ".join(map(str, A)), n, mean[n], std[n],
                              *[ens_P[k][n] for k in cfg.ensembles.kinds]])
        for kind in cfg.ensembles.kinds:
            ens = q.ensemble(kind, results)
            p = ens.params
            summary.append([ratio, kind, p.get("T", q.temperature if kind == "canonical" else float("nan")),
                            p.get("mu", float("nan")), p.get("window", float("nan")), p.get("members", 0),
                            ens.energy(), ens.mean_particle_number(), purity(ens.reduced(range(cfg.L)))])
        results.setdefault("temperatures", {})[str(ratio)] = q.temperature
        results.setdefault("quench_energies", {})[str(ratio)] = q.energy
    out.table(f"{name}.csv", ["J_over_U", "kind", "T", "mu", "window", "members", "energy", "mean_N", "global_purity"],
              summary)
    out.table(f"{name}_number_stats.csv",
              ["J_over_U", "T", "sites", "n", "quench_mean", "quench_std"] + [k.replace("-", "_") for k in cfg.ensembles.kinds],
              stats)


def cmd_observables(cfg, out: OutputWriter, results: dict, name: str = "observables"):
    q = Quench(cfg, cfg.J_over_U)
    tJ = cfg.times()
    head, tcols = time_columns(cfg, tJ)
    thermal = [q.canonical.reduced((i,)) for i in range(cfg.L)]
    thermal_avg = _site_average(thermal)
    E_int_can = interaction_energy(q.canonical, q.params.U)

    def row(t):
        s = q.at(t)
        rhos = [reduce(s, (i,), q.basis) for i in range(cfg.L)]
        per = [(trace_distance(r, th), fidelity(r, th)) for r, th in zip(rhos, thermal)]
        avg = _site_average(rhos)
        return [trace_distance(avg, thermal_avg), fidelity(avg, thermal_avg),
                *[x for p in per for x in p], interaction_energy(s, q.params.U, q.basis)]

    rows = parallel_map(row, list(tJ), cfg.threads)
    header = head + ["trace_distance_avg", "fidelity_avg"] + \
        [f"{k}_{i}" for i in range(cfg.L) for k in ("trace_distance", "fidelity")] + ["interaction_energy"]
    out.table(f"{name}.csv", header, [a + b for a, b in zip(tcols, rows)])
    results["canonical_interaction_energy"] = E_int_can
    results["T_canonical"] = q.temperature


def _site_average(rhos):
    from ..entanglement import BlockDensityMatrix

    keys = sorted(set().union(*[r.blocks for r in rhos]))
    blocks = {n: sum(r.blocks[n] for r in rhos if n in r.blocks) / len(rhos) for n in keys}
    return BlockDensityMatrix((0,), blocks)


def cmd_interfere(cfg, out: OutputWriter, results: dict):
    itf = cfg.interference
    q = Quench(cfg, cfg.J_over_U)
    if itf.times is not None:
        raw = np.asarray(itf.times, dtype=float)
        tJ = raw if cfg.time.unit == "tJ" else convert_time(raw, cfg.J_hz)
    else:
        tJ = cfg.times()[:: max(1, len(cfg.times()) // 4)][:5]
    seq = np.random.SeedSequence(itf.seed)
    children = seq.spawn(len(tJ))
    subsystems = [tuple(A) for v in sorted(set(cfg.subsystems.volumes) | {cfg.L})
                  for A in partition_family(cfg.L, v, "contiguous")]
    rows = []
    for k, (t, child) in enumerate(zip(tJ, children)):
        s = q.at(t)
        after = apply_beamsplitter(embed_product(s, q.basis))
        shot_seed, noise_seed, boot_seed = child.spawn(3)
        shots = sample_shots(after, itf.shots, shot_seed)
        shots = apply_parity_noise(shots, itf.epsilon, noise_seed)
        with (out.root / f"shots_{k:03d}.csv").open("w", encoding="utf-8", newline="") as fh:
            shots.write_csv(fh)
        out.files[f"shots_{k:03d}.csv"] = git_blob_hash((out.root / f"shots_{k:03d}.csv").read_bytes())
        for A in subsystems:
            est, se = purity_estimator(shots, A)
            S, (lo, hi) = entropy_from_shots(shots, A, itf.bootstrap, boot_seed)
            rows.append([k, t, " ".join(map(str, A)), exact_parity(after, A), purity(reduce(s, A, q.basis)),
                         est, se, S, lo, hi])
    out.table("interfere.csv", ["time_index", "tJ", "sites", "exact_parity", "purity", "estimate", "std_error",
                                "entropy", "entropy_lo", "entropy_hi"], rows)
    results["interference"] = {"times_tJ": list(map(float, tJ)), "shots": itf.shots, "seed": itf.seed,
                               "epsilon": itf.epsilon, "bootstrap": itf.bootstrap}


# --- figures ---------------------------------------------------------------------------------

def fig2b(cfg, out: OutputWriter, results: dict):
    q = Quench(cfg, cfg.J_over_U)
    sat = q.states(cfg.saturation_times())
    rows = []
    for A in cfg.subsystems.sites:
        P0 = number_distribution(q.psi0, A, q.basis).probabilities
        P = np.array([number_distribution(s, A, q.basis).probabilities for s in sat])
        Pc = number_distribution(q.canonical, A).probabilities
        for n in range(cfg.N + 1):
            rows.append([" ".join(map(str, A)), n, P0[n], P[:, n].mean(), P[:, n].std(), Pc[n]])
    out.table("fig2b_number_stats.csv", ["sites", "n", "P_initial", "P_saturated_mean", "P_saturated_std", "P_canonical"],
              rows)
    tJ = cfg.times()
    head, tcols = time_columns(cfg, tJ)
    full = tuple(range(cfg.L))
    can = purity(q.canonical.reduced(full))
    prow = parallel_map(lambda t: purity(reduce(q.at(t), full, q.basis)), list(tJ), cfg.threads)
    out.table("fig2b_global_purity.csv", head + ["purity_quench", "purity_canonical"],
              [tc + [p, can] for tc, p in zip(tcols, prow)])
    results["T_canonical"] = q.temperature
    results["canonical_global_purity"] = can


def fig3(cfg, out, results):
    cmd_entropy(cfg, out, results, name="fig3_entropy")


def fig4(cfg, out, results):
    q = Quench(cfg, cfg.J_over_U)
    sat = q.states(cfg.saturation_times())
    mode = cfg.subsystems.mode
    rows, mi_rows = [], []
    for v in range(1, cfg.L + 1):
        S = np.array([partition_average(s, v, mode, q.basis, s0=cfg.subsystems.s0)[0] for s in sat])
        Sg = partition_average(q.ground, v, mode, q.basis)[0]
        St = thermal_renyi(q.canonical, v, mode)
        rows.append([v, S.mean(), S.std(), Sg, St])
        if v >= 2:
            I = np.array([mutual_information_profile(s, cfg.L, v, q.basis) for s in sat])
            mi_rows.append([v, I.mean(), I.std(), mutual_information_profile(q.ground, cfg.L, v, q.basis)])
    out.table("fig4_volume_law.csv", ["volume", "S_quench_mean", "S_quench_std", "S_ground", "S_thermal"], rows)
    out.table("fig4_mutual_information.csv", ["volume_AB", "I_quench_mean", "I_quench_std", "I_ground"], mi_rows)
    results["T_canonical"] = q.temperature


def fig5(cfg, out, results):
    ratio = 2.6 if 2.6 in cfg.ensembles.ratios else cfg.ensembles.ratios[-1]
    q = Quench(cfg, ratio)
    sat = q.states(cfg.saturation_times())
    dens = np.array([site_density(s, q.basis) for s in sat])
    gden = site_density(q.ground, q.basis)
    out.table("fig5_density.csv", ["site", "quench_mean", "quench_std", "ground"],
              [[i, dens[:, i].mean(), dens[:, i].std(), gden[i]] for i in range(cfg.L)])
    results["density_ratio"] = ratio
    cmd_observables(cfg, out, results, name="fig5_distance")


def fig6(cfg, out, results):
    cmd_ensembles(cfg, out, results, name="fig6_ensembles")
    q = Quench(cfg, cfg.J_over_U)
    tJ = cfg.times()
    head, tcols = time_columns(cfg, tJ)
    can = interaction_energy(q.canonical, q.params.U)
    vals = parallel_map(lambda t: interaction_energy(q.at(t), q.params.U, q.basis), list(tJ), cfg.threads)
    out.table("fig6_interaction.csv", head + ["interaction_energy", "canonical"],
              [tc + [v, can] for tc, v in zip(tcols, vals)])
    results["canonical_interaction_energy"] = can


COMMANDS: dict[str, Callable] = {
    "spectrum": cmd_spectrum, "quench": cmd_quench, "entropy": cmd_entropy, "ensembles": cmd_ensembles,
    "observables": cmd_observables, "interfere": cmd_interfere,
    "fig2b": fig2b, "fig3": fig3, "fig4": fig4, "fig5": fig5, "fig6": fig6,
}


def defaulted_keys(raw: dict, resolved: dict, prefix: str = "") -> list[str]:
    """Dotted paths of resolved values that were not given explicitly."""
    out = []
    for key, value in resolved.items():
        path = f"{prefix}{key}"
        if key not in raw:
            out.append(path)
        elif isinstance(value, dict) and isinstance(raw.get(key), dict):
            out.extend(defaulted_keys(raw[key], value, path + "."))
    return out


def run_experiment(cfg: ExperimentConfig, command: str, out_dir: str | None = None,
                   raw: dict | None = None) -> dict[str, Any]:
    """Run one subcommand or figure and write its tables plus ``manifest.json``."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    out = OutputWriter(out_dir or cfg.output)
    results: dict[str, Any] = {}
    t0 = _time.perf_counter()
    COMMANDS[command](cfg, out, results)
    elapsed = _time.perf_counter() - t0
    resolved = cfg.resolved()
    config_blob = json.dumps(resolved, sort_keys=True).encode()
    manifest = {
        "package": "bhquench",
        "version": __version__,
        "command": command,
        "config": resolved,
        "config_hash": git_blob_hash(config_blob),
        "defaults_filled": defaulted_keys(raw or {}, resolved),
        "seed": cfg.interference.seed,
        "tolerances": TOLERANCES,
        "units": {"energy": "J (hbar = 1)", "time": "dimensionless tJ; tJ = 2 pi J_hz t_ms / 1000"},
        "results": results,
    }
    out.manifest(manifest)
    return {"manifest": str(out.root / "manifest.json"), "outputs": dict(out.files), "results": results,
            "elapsed_s": elapsed}
