"""Kalman-filter baseline on the vectorized tv-VAR coefficient state space.

The coefficient block is tracked as the state vector ``a(t) = vec(Phi(t)')``
(rows of Phi stacked, length K*P^2) under a random-walk transition and the
linear observation ``X(t) = C(t) a(t) + v(t)`` with ``C(t) = I_P kron u(t)'``:

    a(t) = a(t-1) + w(t),        Cov(w) = q_sigma^2 * I,
    X(t) = C(t) a(t) + v(t),     Cov(v) = R.

The filter is the textbook predict/update pair with a Joseph-form covariance
update; the Kronecker block structure of C(t) is exploited so no P x K*P^2
observation matrix is materialised, but every quantity is mathematically
identical to the dense filter.  The (K*P^2)^2 covariance is what makes this
baseline expensive in both memory and time as P grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputDataError, NumericalError
from .model import build_regressor
from .sope import EstimateTrack


@dataclass
class KalmanState:
    """Filter state: vectorized coefficients, their covariance, and the lag buffer."""

    a: np.ndarray  # (K*P^2,)
    cov: np.ndarray  # (K*P^2, K*P^2)
    q_sigma: float
    r: np.ndarray  # (P, P)
    buffer: np.ndarray  # (K, P), oldest first
    t: int
    p: int
    k: int

    def phi(self) -> np.ndarray:
        """Current coefficient block, reshaped from the state vector."""
        return self.a.reshape(self.p, self.k * self.p)


def state_dim(p: int, k: int) -> int:
    return k * p * p


def covariance_bytes(p: int, k: int) -> int:
    """Memory footprint of the dense float64 state covariance."""
    n = state_dim(p, k)
    return n * n * 8


def build_observation_matrix(u: np.ndarray, p: int) -> np.ndarray:
    """Dense observation matrix ``I_P kron u'`` (row i holds u in its own block)."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size % p != 0:
        raise InputDataError(f"regressor of size {u.size} not a multiple of p={p}")
    return np.kron(np.eye(p), u[None, :])


def kf_init(
    warmup: np.ndarray,
    q_sigma: float,
    r: Optional[np.ndarray] = None,
    k: Optional[int] = None,
    init_cov_scale: float = 1.0,
) -> KalmanState:
    """Start the filter at a = 0, cov = init_cov_scale * I, buffer = last K samples.

    ``warmup`` must hold at least K samples; only the last K are used.  When
    ``k`` is omitted the whole warmup is taken as the buffer.  R defaults to
    the identity.
    """
    warmup = np.asarray(warmup, dtype=float)
    if warmup.ndim != 2 or warmup.shape[0] < 1:
        raise InputDataError(f"warmup must be (k, p), got shape {warmup.shape}")
    if k is None:
        k = warmup.shape[0]
    if warmup.shape[0] < k:
        raise InputDataError(f"warmup holds {warmup.shape[0]} samples, need k={k}")
    p = warmup.shape[1]
    if q_sigma < 0:
        raise InputDataError(f"q_sigma must be >= 0, got {q_sigma}")
    r_mat = np.eye(p) if r is None else np.asarray(r, dtype=float)
    if r_mat.shape != (p, p):
        raise InputDataError(f"R shape {r_mat.shape} != ({p}, {p})")
    n = state_dim(p, k)
    return KalmanState(
        a=np.zeros(n),
        cov=init_cov_scale * np.eye(n),
        q_sigma=q_sigma,
        r=r_mat,
        buffer=warmup[-k:].copy(),
        t=k,
        p=p,
        k=k,
    )


def kf_step(state: KalmanState, x: np.ndarray) -> tuple[KalmanState, np.ndarray]:
    """One predict/update cycle; returns the advanced state and Phi estimate.

    Predict adds q_sigma^2 to the covariance diagonal (random-walk state);
    update uses the block structure of C(t):  with n = K*P^2 and the state
    covariance split into P x P blocks of size (K*P) x (K*P),

        (C P-)[i, :] = u' P-[block i, :],      S = C P- C' + R,
        gain = P- C' S^{-1},                   cov = P- - W - W' + gain S gain',

    where W = gain (C P-).  The covariance form is the Joseph update expanded
    exactly, and the result is symmetrized against roundoff.
    """
    x = np.asarray(x, dtype=float)
    p, k = state.p, state.k
    if x.shape != (p,):
        raise InputDataError(f"sample shape {x.shape} != ({p},)")
    kp = k * p
    n = p * kp

    u = build_regressor(state.buffer)
    pr = state.cov
    if state.q_sigma != 0.0:
        pr = pr + (state.q_sigma ** 2) * np.eye(n)

    # C P- via the block layout: row i of C holds u in columns [i*kp, (i+1)*kp).
    cpr = np.einsum("a,iay->iy", u, pr.reshape(p, kp, n))
    s = np.einsum("ijb,b->ij", cpr.reshape(p, p, kp), u) + state.r
    s = 0.5 * (s + s.T)
    try:
        gain = np.linalg.solve(s, cpr).T  # (n, P) = P- C' S^{-1}
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"innovation covariance singular at t={state.t} (p={p}, k={k}): {exc}"
        ) from exc

    innov = x - state.a.reshape(p, kp) @ u
    a_new = state.a + gain @ innov
    w = gain @ cpr
    cov_new = pr - w - w.T + gain @ s @ gain.T
    cov_new = 0.5 * (cov_new + cov_new.T)

    state.a = a_new
    state.cov = cov_new
    state.buffer[:-1] = state.buffer[1:]
    state.buffer[-1] = x
    state.t += 1
    return state, state.phi().copy()


def run_kf(
    samples: np.ndarray,
    q_sigma: float,
    r: Optional[np.ndarray] = None,
    k: int = 1,
    init_cov_scale: float = 1.0,
) -> EstimateTrack:
    """Filter a whole series; estimates start after the K-sample buffer fill."""
    samples = np.asarray(samples, dtype=float)
    n, p = samples.shape
    if n <= k:
        raise InputDataError(f"series of length {n} does not exceed buffer fill {k}")
    state = kf_init(samples[:k], q_sigma, r, k=k, init_cov_scale=init_cov_scale)
    phis = np.empty((n - k, p, k * p))
    for i in range(n - k):
        _, phis[i] = kf_step(state, samples[k + i])
    return EstimateTrack(phis=phis, t0=k, method="kf")
