"""Strict experiment configuration, loaded from and saved to TOML.

Example::

    output_dir = "results"
    seeds = {start = 0, count = 8}

    [environment]
    name = "select_obj"

    [[methods]]
    name = "plalam"
    budget = {total_queries = 4000, cp = 4.0}

    [[methods]]
    name = "cem"
    sigma = 1.0
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional, Union

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core import METHODS, SearchBudget

OUTPUT_DIR_ENV = "PLALAM_OUTPUT_DIR"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class EnvConfig(_Strict):
    name: str
    params: dict = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        from .envs import ENV_NAMES

        if v not in ENV_NAMES:
            raise ValueError(f"unknown environment {v!r}; expected one of {ENV_NAMES}")
        return v


class BudgetConfig(_Strict):
    total_queries: int = 2000
    n_init: Optional[int] = None  # environment default when unset
    n_par: int = 50
    n_thres: int = 10
    cp: float = 2.0

    def resolve(self, default_n_init: int) -> SearchBudget:
        n_init = self.n_init if self.n_init is not None else min(default_n_init,
                                                                self.total_queries)
        return SearchBudget(self.total_queries, n_init, self.n_par, self.n_thres, self.cp)


class MethodConfig(_Strict):
    name: str
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    # CEM / CMA-ES initial spread, also used for unbounded initial samples
    sigma: float = 1.0
    popsize: Optional[int] = None
    n_elite: int = 10
    codec: Literal["identity", "pca", "random_projection"] = "identity"
    latent_dim: Optional[int] = None
    encoder: Literal["identity", "snapshots"] = "snapshots"
    leaf_init: Literal["mean", "ranked"] = "mean"
    sigma_mult: float = 1.0
    label: Optional[str] = None

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        if v not in METHODS:
            raise ValueError(f"unknown method {v!r}; expected one of {METHODS}")
        return v

    @model_validator(mode="after")
    def _latent(self):
        if self.codec != "identity" and not self.latent_dim:
            raise ValueError("latent_dim is required for a non-identity codec")
        return self

    @property
    def key(self) -> str:
        return self.label or self.name


class SeedRange(_Strict):
    start: int = 0
    count: int = 1


class DiagnosticsConfig(_Strict):
    trials: int = 10
    z: float = 0.5
    c_k: float = 1.0
    n_intervals: int = 10


class SweepConfig(_Strict):
    """Grid over fields of every listed method (e.g. ``cp`` or ``sigma``)."""

    cp: list[float] = Field(default_factory=list)
    sigma: list[float] = Field(default_factory=list)


class RunConfig(_Strict):
    environment: EnvConfig
    methods: list[MethodConfig]
    seeds: Union[list[int], SeedRange] = Field(default_factory=lambda: SeedRange())
    output_dir: str = "results"
    timing: bool = True
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)

    @model_validator(mode="after")
    def _unique_methods(self):
        keys = [m.key for m in self.methods]
        if len(set(keys)) != len(keys):
            raise ValueError("method names/labels must be unique")
        if not keys:
            raise ValueError("at least one method is required")
        return self

    def seed_list(self) -> list[int]:
        if isinstance(self.seeds, SeedRange):
            return list(range(self.seeds.start, self.seeds.start + self.seeds.count))
        return list(self.seeds)

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def hash(self) -> str:
        """Digest of the canonical form, ignoring output location and seeds."""
        d = self.to_dict()
        for k in ("output_dir", "seeds"):
            d.pop(k, None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def parse_config(text: str) -> RunConfig:
    return RunConfig.model_validate(tomli.loads(text))


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        return RunConfig.model_validate(tomli.load(fh))


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(config.to_toml())
