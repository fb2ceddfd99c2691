"""Streaming orchestration: uniform stepping across estimators, plus the
estimate -> spectral-connectivity pipeline.

The estimate stage is strictly causal: the record for time t depends only on
samples up to t, so truncating the input truncates the output and nothing
else.  Estimation itself is sequential; the per-t connectivity evaluation is
a pure function of the emitted coefficient block (and, for the general
covariance estimator, its running noise covariance at that step).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import InputDataError
from .gsope import gsope_init, gsope_step
from .kalman import kf_init, kf_step
from .sope import PenaltySpec, sope_init, sope_step, warmup_length
from .spectral import BandSpec, ConnectivityFrame, FreqSpec, band_connectivity

METHODS = ("sope", "gsope", "kf")


@dataclass
class StreamingEstimator:
    """One estimator instance fed sample by sample.

    Samples arriving before the warmup target are buffered; once enough have
    accumulated the state is initialized and every further sample yields a
    coefficient estimate.  ``sigma`` is the running noise covariance for the
    general-covariance method and None otherwise.
    """

    method: str
    p: int
    k: int
    penalty: Optional[PenaltySpec] = None
    q_sigma: Optional[float] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise InputDataError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in ("sope", "gsope"):
            if self.penalty is None:
                raise InputDataError(f"method {self.method!r} requires a penalty")
            self.warmup = warmup_length(self.p, self.k)
        else:
            if self.q_sigma is None:
                raise InputDataError("method 'kf' requires q_sigma")
            self.warmup = self.k
        self._pending: list[np.ndarray] = []
        self._state = None
        self.t = 0  # samples consumed so far

    @property
    def ready(self) -> bool:
        return self._state is not None

    def feed(self, x: np.ndarray) -> Optional[tuple[int, np.ndarray, Optional[np.ndarray]]]:
        """Consume one sample; returns (t, phi, sigma) once warmed up, else None."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise InputDataError(f"sample shape {x.shape} != ({self.p},)")
        if not np.all(np.isfinite(x)):
            raise InputDataError(f"sample at t={self.t} has non-finite values")
        if self._state is None:
            self._pending.append(x)
            self.t += 1
            if len(self._pending) == self.warmup:
                warm = np.vstack(self._pending)
                self._pending = []
                if self.method == "sope":
                    self._state = sope_init(warm, self.penalty, self.k)
                elif self.method == "gsope":
                    self._state = gsope_init(warm, self.penalty, self.k)
                else:
                    self._state = kf_init(warm, self.q_sigma, k=self.k)
            return None
        t = self.t
        if self.method == "sope":
            _, phi = sope_step(self._state, x)
            sigma = None
        elif self.method == "gsope":
            _, phi = gsope_step(self._state, x)
            sigma = self._state.sigma
        else:
            _, phi = kf_step(self._state, x)
            sigma = None
        self.t += 1
        return t, phi, sigma


def stream_estimates(
    values: Iterable[np.ndarray],
    estimator: StreamingEstimator,
) -> Iterator[tuple[int, np.ndarray, Optional[np.ndarray]]]:
    """Drive an estimator over an iterable of samples, yielding per-step results."""
    for x in values:
        out = estimator.feed(x)
        if out is not None:
            yield out


def connectivity_frames(
    values: np.ndarray,
    estimator: StreamingEstimator,
    freq: FreqSpec,
    bands: Sequence[BandSpec],
    partial_squared: bool = False,
) -> list[ConnectivityFrame]:
    """Estimate a series and evaluate band connectivity at every step.

    For the general-covariance estimator the running covariance at each step
    is plugged into the spectral matrix; the other methods use the identity.
    """
    if not bands:
        raise InputDataError("no bands configured")
    frames: list[ConnectivityFrame] = []
    for t, phi, sigma in stream_estimates(np.asarray(values, dtype=float), estimator):
        for band in bands:
            frames.append(
                band_connectivity(phi, sigma, band, freq, t=t, partial_squared=partial_squared)
            )
    return frames
