"""Smooth online estimation of tv-VAR coefficients (identity noise covariance).

Each arriving sample solves a small penalized least squares problem that
anchors the new coefficient block to an extrapolation of the previous two:

    Phi(t) = argmin_b ||x(t) - b u(t)||^2 + lam * ||b - m(t)||_F^2,
    m(t)   = Phi(t-1) + beta * (Phi(t-1) - Phi(t-2)),

whose closed form is ``(x u' + lam m)(u u' + lam I)^{-1}``.  Because the
Gram matrix is a rank-one update of ``lam I`` the inverse is applied through
the Sherman-Morrison identity in O(P * K * P) time, never materialising a
(K*P) x (K*P) matrix.  beta = 0 penalizes the first difference only,
beta = 1 the second difference only; intermediate values blend the two.

The recursion is sequential in t: one state must be driven by a single
logical thread, but independent states may run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputDataError
from .model import build_regressor

SMW_UNDERFLOW = 1e-30


@dataclass(frozen=True)
class PenaltySpec:
    """Smoothing hyperparameters: overall strength and momentum weight.

    ``lam`` (also exposed as ``alpha``) is the total regularization strength;
    ``beta`` in [0, 1] weights the first-difference extrapolation term.  In
    the two-penalty decomposition lam = lam1 + lam2 and beta = lam2 / lam.
    """

    lam: float
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise InputDataError(f"penalty strength must be > 0, got {self.lam}")
        if not 0.0 <= self.beta <= 1.0:
            raise InputDataError(f"beta must be in [0, 1], got {self.beta}")

    @property
    def alpha(self) -> float:
        return self.lam


@dataclass
class SopeState:
    """Recursion memory: the last two estimates plus a K-sample ring buffer.

    ``buffer`` rows are the most recent K samples in time order (oldest
    first).  ``t`` counts samples consumed so far, including warmup.
    """

    phi_prev: np.ndarray
    phi_prev2: np.ndarray
    buffer: np.ndarray
    t: int
    penalty: PenaltySpec

    @property
    def p(self) -> int:
        return self.phi_prev.shape[0]

    @property
    def k(self) -> int:
        return self.buffer.shape[0]


@dataclass
class EstimateTrack:
    """Stacked per-step estimates plus the sample index of the first one."""

    phis: np.ndarray  # (n_steps, P, K*P)
    t0: int
    method: str = "sope"
    burn_in: int = 0  # advisory: steps before downstream use is recommended

    def __len__(self) -> int:
        return self.phis.shape[0]


def warmup_length(p: int, k: int) -> int:
    """Samples consumed by initialization before streaming estimates start."""
    return max(2 * k * p, 50)


def smw_apply(a_block: np.ndarray, u: np.ndarray, lam: float) -> np.ndarray:
    """Right-multiply ``a_block`` by ``(u u' + lam I)^{-1}`` via rank-one inversion.

    Uses ``a/lam - (a u) u' / (lam (lam + u'u))``; cost is one matrix-vector
    product and one outer product.  Falls back to ``a/lam`` when
    ``lam + u'u`` underflows.
    """
    if not lam > 0:
        raise InputDataError(f"lam must be > 0, got {lam}")
    denom = lam + float(u @ u)
    if denom <= SMW_UNDERFLOW:
        return a_block / lam
    au = a_block @ u
    return a_block / lam - np.outer(au, u) / (lam * denom)


def ridge_ls(samples: np.ndarray, k: int, ridge: float) -> np.ndarray:
    """Ridge-regularized batch least squares fit of a constant (P, K*P) block.

    Uses every sample in ``samples`` with full lag depth available, solving
    ``Phi (U U' + ridge I) = Y U'`` by a dense (K*P) x (K*P) solve.  Plain
    least squares on a short window is singular, hence the ridge.
    """
    samples = np.asarray(samples, dtype=float)
    n, p = samples.shape
    if n < k + 1:
        raise InputDataError(f"need at least k+1={k + 1} samples, got {n}")
    m = n - k
    y = samples[k:].T  # (P, M)
    u_cols = np.empty((k * p, m))
    for j in range(m):
        u_cols[:, j] = build_regressor(samples[j : j + k])
    gram = u_cols @ u_cols.T + ridge * np.eye(k * p)
    return np.linalg.solve(gram, u_cols @ y.T).T


def sope_init(warmup: np.ndarray, penalty: PenaltySpec, k: int) -> SopeState:
    """Initialize the recursion from a warmup window.

    With at least ``warmup_length(p, k)`` samples the initial block is the
    ridge least squares fit (ridge strength = penalty.lam) over the whole
    window handed in; with fewer (but at least k+1) it starts at zero, since
    a least squares fit on so little data is ill posed.  Both
    previous-estimate slots are set to the same block.
    """
    warmup = np.asarray(warmup, dtype=float)
    if warmup.ndim != 2:
        raise InputDataError(f"warmup must be (n, p), got shape {warmup.shape}")
    n, p = warmup.shape
    if n < k + 1:
        raise InputDataError(f"warmup needs at least k+1={k + 1} samples, got {n}")
    if n >= warmup_length(p, k):
        phi0 = ridge_ls(warmup, k, penalty.lam)
    else:
        phi0 = np.zeros((p, k * p))
    return SopeState(
        phi_prev=phi0,
        phi_prev2=phi0.copy(),
        buffer=warmup[-k:].copy(),
        t=n,
        penalty=penalty,
    )


def sope_step(state: SopeState, x: np.ndarray) -> tuple[SopeState, np.ndarray]:
    """Consume one sample and return the advanced state and new estimate.

    The state is updated in place (the returned state is the same object);
    the returned estimate block is freshly allocated.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (state.p,):
        raise InputDataError(f"sample shape {x.shape} != ({state.p},)")
    lam, beta = state.penalty.lam, state.penalty.beta
    u = build_regressor(state.buffer)
    target = state.phi_prev + beta * (state.phi_prev - state.phi_prev2)
    a = np.outer(x, u)
    a += lam * target
    phi = smw_apply(a, u, lam)

    state.phi_prev2 = state.phi_prev
    state.phi_prev = phi
    state.buffer[:-1] = state.buffer[1:]
    state.buffer[-1] = x
    state.t += 1
    return state, phi


def run_sope(samples: np.ndarray, penalty: PenaltySpec, k: int) -> EstimateTrack:
    """Run the full recursion over a series, one estimate per post-warmup step."""
    samples = np.asarray(samples, dtype=float)
    n, p = samples.shape
    w = warmup_length(p, k)
    if n <= w:
        raise InputDataError(f"series of length {n} does not exceed warmup {w}")
    state = sope_init(samples[:w], penalty, k)
    phis = np.empty((n - w, p, k * p))
    for i in range(n - w):
        _, phis[i] = sope_step(state, samples[w + i])
    return EstimateTrack(phis=phis, t0=w, method="sope")
