"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator

from ..config import EventsConfig, FreqConfig, PenaltyConfig, SimConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class EstimatorSpec(BaseModel):
    """Which estimator to run and its hyperparameters."""

    method: str = "sope"
    p: int = Field(ge=1)
    k: int = Field(default=1, ge=1)
    penalty: Optional[PenaltyConfig] = None
    q_sigma: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _method_fields(self) -> "EstimatorSpec":
        if self.method not in ("sope", "gsope", "kf"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method in ("sope", "gsope") and self.penalty is None:
            raise ValueError(f"method {self.method!r} requires a penalty")
        if self.method == "kf" and self.q_sigma is None:
            raise ValueError("method 'kf' requires q_sigma")
        return self


class SimulateRequest(BaseModel):
    sim: SimConfig
    include_coeffs: bool = False


class CoeffsPayload(BaseModel):
    t_total: int
    rows: int
    cols: int
    data: list[float]  # row-major per time point, time-major overall


class SimulateResponse(BaseModel):
    channels: list[str]
    values: list[list[float]]
    coeffs: Optional[CoeffsPayload] = None


class SessionCreateRequest(BaseModel):
    estimator: EstimatorSpec


class SessionCreateResponse(BaseModel):
    session_id: str
    warmup: int


class SessionInfoResponse(BaseModel):
    method: str
    p: int
    k: int
    warmup: int
    samples_consumed: int
    ready: bool


class SamplesRequest(BaseModel):
    values: list[list[float]]


class RecordsResponse(BaseModel):
    records: list[dict]


class EstimateRequest(BaseModel):
    estimator: EstimatorSpec
    values: list[list[float]]


class ConnectivityRequest(BaseModel):
    estimator: EstimatorSpec
    freq: FreqConfig
    values: list[list[float]]
    partial_squared: bool = False

    @model_validator(mode="after")
    def _has_bands(self) -> "ConnectivityRequest":
        if not self.freq.bands:
            raise ValueError("connectivity requires at least one band")
        return self


class NetworkRequest(BaseModel):
    records: list[dict]
    events: EventsConfig
    quantiles: list[float] = Field(default_factory=lambda: [0.75])
    measures: list[str] = Field(default_factory=lambda: ["coherence"])
    bands: Optional[list[str]] = None  # None = every band present in the records
    quantile_mode: str = "epoch"


class BenchCell(BaseModel):
    method: str
    p: int = Field(ge=1)
    k: int = Field(ge=1)


class BenchTimeRequest(BaseModel):
    cells: list[BenchCell]
    iters: int = 1000
    warmup_iters: Optional[int] = None
    seed: int = 0
    mem_budget_bytes: Optional[int] = None
    penalty: Optional[PenaltyConfig] = None
    q_sigma: float = 1e-5


class BenchTimeResponse(BaseModel):
    records: list[dict]
    tables: dict[str, str]


class BenchMseRequest(BaseModel):
    sim: SimConfig
    lams: list[float] = Field(default_factory=list)
    beta: float = 0.9
    q_sigmas: list[float] = Field(default_factory=list)
    replicates: int = Field(default=1, ge=1)
    seed: int = 0
    n_jobs: int = 1


class BenchTransferRequest(BaseModel):
    sim: SimConfig
    penalty: PenaltyConfig
    q_sigma: float
    replicates: int = Field(default=1, ge=1)
    entries: Optional[list[tuple[int, int, int]]] = None
    seed: int = 0
    n_jobs: int = 1


class EnvelopePayload(BaseModel):
    row: int
    col: int
    lag: int
    lo: list[float]
    med: list[float]
    hi: list[float]
    truth: list[float]
    coverage: float


class BenchTransferResponse(BaseModel):
    sim_digest: str
    replicates: int
    t0: int
    envelopes: dict[str, list[EnvelopePayload]]
