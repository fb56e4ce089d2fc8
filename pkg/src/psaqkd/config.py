"""Run configuration: a YAML file with sections ``channel``, ``detector``,
``protocol``, ``sweep``, ``mc`` and ``output``. Every default reproduces the
distance-figure scenario (excess noise 0.01, V = 40, eta_e = 0.9,
eta_d = 0.6, beta = 0.956, 0.2 dB/km).
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml


class ConfigError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class ChannelSection:
    excess_noise: float = 0.01
    distance_km: float = 30.0
    alpha_db_per_km: float = 0.2
    transmittance: typing.Optional[float] = None


@dataclass
class DetectorSection:
    eta_d: float = 0.6
    eta_e: float = 0.9


@dataclass
class ProtocolSection:
    epr_variance: float = 40.0
    beta: float = 0.956
    gain: float = 1.0


@dataclass
class SweepSection:
    distance_start_km: float = 0.0
    distance_stop_km: float = 100.0
    distance_step_km: float = 1.0
    gains: typing.List[float] = field(default_factory=lambda: [1.0, 3.0, 10.0])
    include_ideal: bool = True
    va_start: float = 0.5
    va_stop: float = 100.0
    va_step: float = 0.5
    va_distances_km: typing.List[float] = field(default_factory=lambda: [30.0, 50.0, 80.0])
    tolerance: float = 1e-8
    workers: int = 1


@dataclass
class MCSection:
    n_samples: int = 1_000_000
    seed: int = 0
    amplification: float = 30.0
    lo_amplitude: float = 1.0
    electronic_noise_variance: float = 100.0
    v_b1: typing.Optional[float] = None
    z_threshold: float = 4.0
    workers: int = 1


@dataclass
class OutputSection:
    path: typing.Optional[str] = None
    clamp: bool = False


@dataclass
class RunConfig:
    channel: ChannelSection = field(default_factory=ChannelSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    mc: MCSection = field(default_factory=MCSection)
    output: OutputSection = field(default_factory=OutputSection)


def _coerce(value, tp, where: str, problems: list[str]):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        if value is None:
            return None
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return _coerce(value, inner, where, problems)
    if origin in (list, typing.List):
        if not isinstance(value, list):
            problems.append(f"{where}: expected a list, got {value!r}")
            return None
        (inner,) = typing.get_args(tp)
        return [_coerce(v, inner, f"{where}[{i}]", problems) for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            problems.append(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}: expected a number, got {value!r}")
            return value
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            problems.append(f"{where}: expected a string, got {value!r}")
        return value
    raise TypeError(tp)


def from_mapping(data: dict | None) -> RunConfig:
    """Build and validate a :class:`RunConfig`; raises :class:`ConfigError` listing every problem."""
    data = data or {}
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError([f"top level: expected a mapping, got {type(data).__name__}"])
    cfg = RunConfig()
    sections = {f.name: f for f in dataclasses.fields(RunConfig)}
    for name in data:
        if name not in sections:
            problems.append(f"{name}: unknown section")
    for name in sections:
        raw = data.get(name)
        if raw is None:
            continue
        if not isinstance(raw, dict):
            problems.append(f"{name}: expected a mapping")
            continue
        section = getattr(cfg, name)
        hints = typing.get_type_hints(type(section))
        for key, value in raw.items():
            if key not in hints:
                problems.append(f"{name}.{key}: unknown key")
                continue
            setattr(section, key, _coerce(value, hints[key], f"{name}.{key}", problems))
    if problems:
        raise ConfigError(problems)
    validate(cfg)
    return cfg


def load(path: str | Path | None) -> RunConfig:
    if path is None:
        return from_mapping({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: invalid YAML: {exc}"]) from exc
    return from_mapping(data)


def validate(cfg: RunConfig) -> None:
    p: list[str] = []
    ch, det, pr, sw, mc = cfg.channel, cfg.detector, cfg.protocol, cfg.sweep, cfg.mc
    if ch.excess_noise < 0:
        p.append("channel.excess_noise: must be >= 0")
    if ch.distance_km < 0:
        p.append("channel.distance_km: must be >= 0")
    if ch.alpha_db_per_km < 0:
        p.append("channel.alpha_db_per_km: must be >= 0")
    if ch.transmittance is not None and not 0 < ch.transmittance <= 1:
        p.append("channel.transmittance: must lie in (0, 1]")
    for key in ("eta_d", "eta_e"):
        if not 0 < getattr(det, key) <= 1:
            p.append(f"detector.{key}: must lie in (0, 1]")
    if pr.epr_variance <= 1:
        p.append("protocol.epr_variance: must exceed 1")
    if not 0 <= pr.beta <= 1:
        p.append("protocol.beta: must lie in [0, 1]")
    if pr.gain < 1:
        p.append("protocol.gain: must be >= 1")
    if sw.distance_step_km <= 0:
        p.append("sweep.distance_step_km: must be positive")
    if sw.distance_start_km < 0 or sw.distance_stop_km < sw.distance_start_km:
        p.append("sweep.distance_start_km/distance_stop_km: need 0 <= start <= stop")
    if not sw.gains or any(g < 1 for g in sw.gains):
        p.append("sweep.gains: need a non-empty list of gains >= 1")
    if sw.va_step <= 0:
        p.append("sweep.va_step: must be positive")
    if sw.va_start <= 0 or sw.va_stop < sw.va_start:
        p.append("sweep.va_start/va_stop: need 0 < start <= stop")
    if any(L < 0 for L in sw.va_distances_km):
        p.append("sweep.va_distances_km: distances must be >= 0")
    if sw.tolerance <= 0:
        p.append("sweep.tolerance: must be positive")
    if sw.workers < 1:
        p.append("sweep.workers: must be >= 1")
    if mc.n_samples < 10_000:
        p.append("mc.n_samples: must be >= 10000")
    if mc.seed < 0 or mc.seed >= 2 ** 64:
        p.append("mc.seed: must be an unsigned 64-bit integer")
    if mc.amplification <= 0:
        p.append("mc.amplification: must be positive")
    if mc.lo_amplitude <= 0:
        p.append("mc.lo_amplitude: must be positive")
    if mc.electronic_noise_variance < 0:
        p.append("mc.electronic_noise_variance: must be >= 0")
    if mc.v_b1 is not None and mc.v_b1 < 1:
        p.append("mc.v_b1: must be >= 1")
    if mc.z_threshold <= 0:
        p.append("mc.z_threshold: must be positive")
    if mc.workers < 1:
        p.append("mc.workers: must be >= 1")
    if p:
        raise ConfigError(p)


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive uniform grid, rounded to suppress accumulated float noise."""
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]
