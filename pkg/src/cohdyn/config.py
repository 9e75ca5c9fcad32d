"""Experiment configuration: flat JSON in, validated dataclass out.

Validation is exhaustive: every problem found is reported in a single
ConfigError, so a bad config never starts a partial run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

MODELS = (
    "u1-spin-half",
    "u1-spin-one",
    "dipole-fragment",
    "mfim",
    "replica-oracle",
    "ssep",
)
CONVENTIONS = ("annealed", "quenched")

#: hard resource limits of the dense engines
REPLICA_MAX_L = {2: 10, 3: 6}
MFIM_MAX_L = 24

REQUIRED_KEYS = ("model", "L", "L_A", "t_max", "realizations", "seed", "convention", "out")


@dataclass
class ExperimentConfig:
    model: str
    L: int
    L_A: list[int]
    t_max: int
    realizations: int
    seed: int
    convention: str
    out: str
    grid: dict = field(default_factory=dict)  # the only defaulted key
    theta: float | None = None  # ssep tilt angle, required for ssep
    species: int = 2  # replica-oracle local dimension

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        problems = [f"missing required key {k!r}" for k in REQUIRED_KEYS if k not in raw]
        known = set(REQUIRED_KEYS) | {"grid", "theta", "species"}
        problems += [f"unknown key {k!r}" for k in sorted(set(raw) - known)]
        if problems:
            raise ConfigError(problems)
        cfg = cls(**{k: raw[k] for k in raw})
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        p = []
        if self.model not in MODELS:
            p.append(f"model must be one of {MODELS}, got {self.model!r}")
        if not isinstance(self.L, int) or self.L < 1:
            p.append(f"L must be a positive integer, got {self.L!r}")
        if not isinstance(self.L_A, list) or any(
            not isinstance(a, int) for a in self.L_A
        ):
            p.append("L_A must be a list of integers")
        elif isinstance(self.L, int) and any(not 0 < a < self.L for a in self.L_A):
            p.append(f"every L_A must satisfy 0 < L_A < L={self.L}")
        if not isinstance(self.t_max, int) or self.t_max < 0:
            p.append(f"t_max must be a non-negative integer, got {self.t_max!r}")
        if not isinstance(self.realizations, int) or self.realizations < 1:
            p.append("realizations must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            p.append("seed must be a 64-bit unsigned integer")
        if self.convention not in CONVENTIONS:
            p.append(f"convention must be one of {CONVENTIONS}")
        if not isinstance(self.grid, dict):
            p.append("grid must be an object")

        if isinstance(self.L, int):
            if self.model == "u1-spin-half" and self.L % 2:
                p.append("u1-spin-half needs even L (zero-charge sector)")
            if self.model == "u1-spin-one" and self.L % 3:
                p.append("u1-spin-one needs L divisible by 3 (period-3 initial state)")
            if self.model == "dipole-fragment" and self.L % 4:
                p.append("dipole-fragment needs L divisible by 4")
            if self.model == "mfim" and self.L > MFIM_MAX_L:
                p.append(f"mfim is limited to L <= {MFIM_MAX_L}")
            if self.model == "replica-oracle":
                if self.species not in REPLICA_MAX_L:
                    p.append("replica-oracle species must be 2 or 3")
                elif self.L > REPLICA_MAX_L[self.species]:
                    p.append(
                        f"replica-oracle q={self.species} is limited to "
                        f"L <= {REPLICA_MAX_L[self.species]} (dense contraction)"
                    )
        if self.model == "ssep":
            if self.theta is None:
                p.append("ssep requires key 'theta' (tilt angle in radians)")
            elif not isinstance(self.theta, (int, float)) or not math.isfinite(self.theta):
                p.append("theta must be a finite number")
        if p:
            raise ConfigError(p)
        return self
