"""Experiment configuration (versioned JSON) and result-row plumbing."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, asdict

from gkplab.errors import ConfigError

SCHEMA_VERSION = 1

_CHANNELS = ("none", "quadrature", "photon_loss", "dephasing", "kerr")


@dataclass
class CombConfig:
    N: list[int] = field(default_factory=lambda: [10, 20, 40, 80])
    sigma_control: float = 0.0
    seed: int = 2024
    weighting: str = "exact"

    def validate(self):
        if not self.N or any(n < 1 for n in self.N):
            raise ConfigError("comb.N must be a non-empty list of positive integers")
        if self.sigma_control < 0:
            raise ConfigError("comb.sigma_control must be >= 0")
        if self.weighting not in ("exact", "finite-difference"):
            raise ConfigError(f"unknown comb weighting {self.weighting!r}")


@dataclass
class GateConfig:
    kind: str = "hadamard"
    t_gate: float = 50.0
    n_segments: int = 40
    u_final: float = 1.0

    def validate(self):
        if self.kind not in ("hadamard", "phase", "identity"):
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if self.t_gate <= 0 or self.n_segments < 1:
            raise ConfigError("gate.t_gate must be > 0 and n_segments >= 1")


@dataclass
class ExperimentConfig:
    geometry: str = "square"
    epsilon: list[float] = field(default_factory=lambda: [0.15])
    noise_channel: str = "none"
    noise_strengths: list[float] = field(default_factory=lambda: [0.0])
    dim: int = 180
    dims: list[int] | None = None
    dt: float | None = None
    t_final: float | None = None
    gamma: float = 1.0
    record_every: int = 25
    transient_multiplier: float = 5.0
    comb: CombConfig | None = None
    gate: GateConfig | None = None
    eta_ratios: list[float] = field(default_factory=lambda: [0.995, 1.0, 1.005])
    sigma_controls: list[float] = field(default_factory=lambda: [3e-4, 1e-3, 3e-3])
    seed: int = 0
    threads: int | None = None
    out: str | None = None
    schema_version: int = SCHEMA_VERSION

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.geometry not in ("square", "hexagonal"):
            raise ConfigError(f"unknown geometry {self.geometry!r}")
        if not self.epsilon or any(not (0 < e < 1) for e in self.epsilon):
            raise ConfigError("epsilon must be a non-empty list inside (0, 1)")
        if self.noise_channel not in _CHANNELS:
            raise ConfigError(f"unknown noise channel {self.noise_channel!r}")
        if not self.noise_strengths or any(s < 0 for s in self.noise_strengths):
            raise ConfigError("noise_strengths must be non-empty and >= 0")
        if self.noise_channel == "none" and any(s != 0.0 for s in self.noise_strengths):
            raise ConfigError("channel 'none' cannot carry nonzero strengths")
        if self.dim < 2:
            raise ConfigError("dim must be >= 2")
        if self.dims is not None and (len(self.dims) < 2 or any(d < 2 for d in self.dims)):
            raise ConfigError("dims must hold at least two truncations")
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive when given")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.comb is not None:
            self.comb.validate()
        if self.gate is not None:
            self.gate.validate()
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(data.get("epsilon"), (int, float)):
            data["epsilon"] = [float(data["epsilon"])]
        if "comb" in data and isinstance(data["comb"], dict):
            data["comb"] = CombConfig(**data["comb"])
        if "gate" in data and isinstance(data["gate"], dict):
            data["gate"] = GateConfig(**data["gate"])
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def worker_count(requested: int | None) -> int:
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get("GKPLAB_WORKERS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return 1


def write_rows_csv(rows: list[dict], columns: list[str], path: str):
    """Deterministic CSV: fixed column order, repr-stable floats, no timestamps."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append(f"{v:.10g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_manifest(config: ExperimentConfig, path: str, extra: dict | None = None):
    import datetime

    from gkplab import __version__

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": json.loads(config.to_json()),
        "config_hash": config.content_hash(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
