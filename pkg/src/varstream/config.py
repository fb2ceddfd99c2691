"""Declarative run configuration: one file (YAML or JSON), flag overrides win.

The same pydantic models back config files, the service wire format and the
CLI, so parse -> serialize -> parse is the identity and every surface
validates identically.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, model_validator

from .errors import InputDataError
from .model import Discontinuity, SimSpec
from .network import EventSpec
from .spectral import BandSpec, FreqSpec


class PenaltyConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float = Field(
        validation_alias=AliasChoices("lambda", "lam", "alpha"),
        serialization_alias="lambda",
        gt=0,
    )
    beta: float = Field(default=0.0, ge=0.0, le=1.0)


class BandConfig(BaseModel):
    name: str
    lo: float = Field(ge=0)
    hi: float

    def to_band(self) -> BandSpec:
        return BandSpec(name=self.name, lo=self.lo, hi=self.hi)


class FreqConfig(BaseModel):
    omega_s: float = Field(gt=0)
    grid_spacing: float = Field(default=1.0, gt=0)
    bands: list[BandConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _bands_within_nyquist(self) -> "FreqConfig":
        nyq = self.omega_s / 2
        for b in self.bands:
            if not b.lo < b.hi <= nyq:
                raise ValueError(f"band {b.name} [{b.lo}, {b.hi}] outside (lo, {nyq}]")
        return self

    def to_freq(self) -> FreqSpec:
        return FreqSpec.regular(self.omega_s, self.grid_spacing)


class EventConfig(BaseModel):
    label: str
    time: int = Field(ge=0)


class EventsConfig(BaseModel):
    events: list[EventConfig]
    window: int = Field(default=250, ge=1)

    def to_events(self) -> EventSpec:
        return EventSpec(events=tuple((e.label, e.time) for e in self.events), window=self.window)


class IoConfig(BaseModel):
    input: Optional[str] = None  # path, or None for stdin
    output: Optional[str] = None  # path, or None for stdout
    format: Literal["jsonl"] = "jsonl"


class RunConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    p: Optional[int] = Field(default=None, ge=1)
    k: int = Field(default=1, ge=1, validation_alias=AliasChoices("k", "order"))
    method: Literal["sope", "gsope", "kf"] = "sope"
    penalty: Optional[PenaltyConfig] = None
    q_sigma: Optional[float] = Field(default=None, ge=0)
    freq: Optional[FreqConfig] = None
    events: Optional[EventsConfig] = None
    quantile: float = Field(default=0.75, gt=0, lt=1)
    quantile_mode: Literal["epoch", "pre-event"] = "epoch"
    io: IoConfig = Field(default_factory=IoConfig)
    seed: int = 0

    @model_validator(mode="after")
    def _method_fields(self) -> "RunConfig":
        if self.method in ("sope", "gsope") and self.penalty is None:
            raise ValueError(f"method {self.method!r} requires a penalty (lambda/beta)")
        if self.method == "kf" and self.q_sigma is None:
            raise ValueError("method 'kf' requires q_sigma")
        return self


class DiscontinuityConfig(BaseModel):
    time: int = Field(ge=0)
    row: int = Field(ge=0)
    col: int = Field(ge=0)
    lag: int = Field(default=0, ge=0)
    delta: float


class SimConfig(BaseModel):
    p: int = Field(ge=1)
    k: int = Field(default=1, ge=1, validation_alias=AliasChoices("k", "order"))
    t_total: int = Field(ge=2)
    groups: Optional[list[list[int]]] = None
    amp_diag_range: tuple[float, float] = (0.3, 0.7)
    amp_offdiag_range: tuple[float, float] = (-0.2, 0.2)
    noise_cov: Optional[list[list[float]]] = None
    seed: int = 0
    discontinuities: list[DiscontinuityConfig] = Field(default_factory=list)

    model_config = ConfigDict(populate_by_name=True)

    def to_simspec(self) -> SimSpec:
        import numpy as np

        return SimSpec(
            p=self.p,
            k=self.k,
            t_total=self.t_total,
            groups=None if self.groups is None else tuple(tuple(g) for g in self.groups),
            amp_diag_range=tuple(self.amp_diag_range),
            amp_offdiag_range=tuple(self.amp_offdiag_range),
            noise_cov=None if self.noise_cov is None else np.asarray(self.noise_cov, dtype=float),
            seed=self.seed,
            discontinuities=tuple(
                Discontinuity(time=d.time, row=d.row, col=d.col, lag=d.lag, delta=d.delta)
                for d in self.discontinuities
            ),
        )


def load_config_file(path: str | Path) -> dict:
    """YAML (superset of JSON) config loader with friendly errors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputDataError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InputDataError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InputDataError(f"config {path} must be a mapping at top level")
    return data


def parse_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValueError as exc:
        raise InputDataError(str(exc)) from exc


def parse_sim_config(data: dict) -> SimConfig:
    try:
        return SimConfig.model_validate(data)
    except ValueError as exc:
        raise InputDataError(str(exc)) from exc
