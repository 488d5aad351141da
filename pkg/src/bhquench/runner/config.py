"""Experiment configuration: YAML in, validated dataclasses out.

Every field has a default; :meth:`ExperimentConfig.resolved` reports the
complete set of values actually used so it can be written to the manifest.
Validation errors carry the dotted key path of the offending entry.
"""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..ensembles import KINDS
from ..errors import ConfigError

FIGURES = ("fig2b", "fig3", "fig4", "fig5", "fig6")
ENV_OUT = "BHQUENCH_OUT"
ENV_THREADS = "BHQUENCH_THREADS"


def convert_time(t_ms, J_hz: float):
    """Lab time in ms to dimensionless ``t J`` for ``J/(2 pi) = J_hz``."""
    if J_hz <= 0:
        raise ValueError("J_hz must be positive")
    return 2.0 * math.pi * J_hz * np.asarray(t_ms, dtype=float) / 1000.0


@dataclass
class TimeGrid:
    unit: str = "ms"  # "ms" or "tJ"
    start: float = 0.0
    stop: float = 20.0
    points: int = 81
    values: list[float] | None = None

    def raw(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.points)

    def tJ(self, J_hz: float | None) -> np.ndarray:
        raw = self.raw()
        return raw if self.unit == "tJ" else convert_time(raw, J_hz)


@dataclass
class SubsystemSpec:
    volumes: list[int] = field(default_factory=lambda: [1, 2, 3])
    sites: list[list[int]] = field(default_factory=lambda: [[2], [0, 1, 2]])
    mode: str = "contiguous"
    s0: float = 0.0


@dataclass
class EnsembleSpec:
    kinds: list[str] = field(default_factory=lambda: list(KINDS))
    window: float = 1.0
    E_target: float | None = None  # None: energy of the quenched state
    N_target: float | None = None  # None: N - 0.5
    ratios: list[float] = field(default_factory=lambda: [0.64, 2.6])


@dataclass
class InterferenceSpec:
    shots: int = 10_000
    seed: int | None = None
    epsilon: float = 0.0
    bootstrap: int = 1000
    times: list[float] | None = None  # same unit as the time grid; None: 5 grid points


@dataclass
class ExperimentConfig:
    L: int = 6
    N: int = 6
    J_over_U: float = 0.64
    J_hz: float | None = 66.0
    initial_state: list[int] | None = None
    time: TimeGrid = field(default_factory=TimeGrid)
    saturation: TimeGrid = field(default_factory=lambda: TimeGrid("ms", 10.0, 20.0, 21))
    subsystems: SubsystemSpec = field(default_factory=SubsystemSpec)
    ensembles: EnsembleSpec = field(default_factory=EnsembleSpec)
    interference: InterferenceSpec = field(default_factory=InterferenceSpec)
    eigensolver: str = "householder-ql"
    output: str = "out"
    threads: int = 1

    @property
    def initial(self) -> tuple[int, ...]:
        return tuple(self.initial_state) if self.initial_state is not None else (1,) * self.L

    def times(self) -> np.ndarray:
        return self.time.tJ(self.J_hz)

    def saturation_times(self) -> np.ndarray:
        return self.saturation.tJ(self.J_hz)

    def resolved(self) -> dict[str, Any]:
        d = asdict(self)
        d["initial_state"] = list(self.initial)
        return d


_SECTIONS = {"time": TimeGrid, "saturation": TimeGrid, "subsystems": SubsystemSpec,
             "ensembles": EnsembleSpec, "interference": InterferenceSpec}


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(where or "<root>", f"expected a mapping, got {type(data).__name__}")
    known = {f for f in cls.__dataclass_fields__}
    for key in data:
        if key not in known:
            raise ConfigError(f"{where}.{key}".lstrip("."), "unknown key")
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}".lstrip(".")
        if cls is ExperimentConfig and key in _SECTIONS:
            value = _build(_SECTIONS[key], value or {}, path)
        kwargs[key] = value
    return cls(**kwargs)


def _require(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigError(where, msg)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _validate_grid(g: TimeGrid, where: str, J_hz):
    _require(g.unit in ("ms", "tJ"), f"{where}.unit", "must be 'ms' or 'tJ'")
    if g.unit == "ms":
        _require(J_hz is not None, f"{where}.unit", "'ms' needs J_hz for unit conversion")
    if g.values is not None:
        _require(isinstance(g.values, list) and len(g.values) > 0 and all(_is_num(v) for v in g.values),
                 f"{where}.values", "must be a nonempty list of numbers")
    else:
        _require(_is_num(g.start) and _is_num(g.stop), f"{where}.start", "start/stop must be numbers")
        _require(_is_int(g.points) and g.points >= 1, f"{where}.points", "must be a positive integer")


def validate(cfg: ExperimentConfig, *, needs_seed: bool = False) -> ExperimentConfig:
    _require(_is_int(cfg.L) and cfg.L >= 1, "L", "must be a positive integer")
    _require(_is_int(cfg.N) and cfg.N >= 0, "N", "must be a non-negative integer")
    _require(_is_num(cfg.J_over_U) and cfg.J_over_U > 0, "J_over_U", "must be a positive number")
    if cfg.J_hz is not None:
        _require(_is_num(cfg.J_hz) and cfg.J_hz > 0, "J_hz", "must be a positive number")
    if cfg.initial_state is None:
        _require(cfg.N == cfg.L, "initial_state", "required unless N == L (unit filling default)")
    else:
        s = cfg.initial_state
        _require(isinstance(s, list) and len(s) == cfg.L and all(_is_int(n) and n >= 0 for n in s),
                 "initial_state", f"must be {cfg.L} non-negative integers")
        _require(sum(s) == cfg.N, "initial_state", f"occupations must sum to N={cfg.N}")
    _validate_grid(cfg.time, "time", cfg.J_hz)
    _validate_grid(cfg.saturation, "saturation", cfg.J_hz)
    sub = cfg.subsystems
    _require(isinstance(sub.volumes, list) and all(_is_int(v) and 1 <= v <= cfg.L for v in sub.volumes),
             "subsystems.volumes", f"volumes must be integers in 1..{cfg.L}")
    for i, A in enumerate(sub.sites):
        _require(isinstance(A, list) and A and all(_is_int(a) and 0 <= a < cfg.L for a in A),
                 f"subsystems.sites[{i}]", f"must be a nonempty list of sites in 0..{cfg.L - 1}")
    _require(sub.mode in ("contiguous", "all-subsets"), "subsystems.mode", "must be 'contiguous' or 'all-subsets'")
    _require(_is_num(sub.s0), "subsystems.s0", "must be a number")
    ens = cfg.ensembles
    for i, k in enumerate(ens.kinds):
        _require(k in KINDS, f"ensembles.kinds[{i}]", f"unknown kind {k!r}; expected one of {KINDS}")
    _require(_is_num(ens.window) and ens.window > 0, "ensembles.window", "must be a positive number")
    _require(isinstance(ens.ratios, list) and ens.ratios and all(_is_num(r) and r > 0 for r in ens.ratios),
             "ensembles.ratios", "must be a nonempty list of positive J/U values")
    if ens.N_target is not None:
        _require(_is_num(ens.N_target) and 0 < ens.N_target < cfg.N, "ensembles.N_target",
                 f"must lie strictly between 0 and N={cfg.N}")
    itf = cfg.interference
    _require(_is_int(itf.shots) and itf.shots >= 2, "interference.shots", "must be an integer >= 2")
    _require(_is_int(itf.bootstrap) and itf.bootstrap >= 1, "interference.bootstrap", "must be a positive integer")
    _require(_is_num(itf.epsilon) and 0 <= itf.epsilon <= 1, "interference.epsilon", "must be in [0, 1]")
    if needs_seed:
        _require(_is_int(itf.seed), "interference.seed", "a seed is mandatory when sampling shots")
    _require(cfg.eigensolver in ("householder-ql", "lapack"), "eigensolver", "must be 'householder-ql' or 'lapack'")
    _require(_is_int(cfg.threads) and cfg.threads >= 1, "threads", "must be a positive integer")
    return cfg


def load_config(path: str | os.PathLike | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Read a YAML config (or defaults), then apply CLI and environment overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "<file>"
            raise ConfigError(where, f"YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    cfg = _build(ExperimentConfig, data, "")
    cfg.raw = data
    if ENV_OUT in os.environ:
        cfg.output = os.environ[ENV_OUT]
    if ENV_THREADS in os.environ:
        try:
            cfg.threads = int(os.environ[ENV_THREADS])
        except ValueError:
            raise ConfigError(ENV_THREADS, "must be an integer") from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            cfg.interference.seed = value
        else:
            setattr(cfg, key, value)
    return validate(cfg)
