"""Smooth online estimation with an unknown, online-estimated noise covariance.

When the innovation covariance is not the identity the per-step problem is a
generalized least squares fit.  The update whitens the new sample and the
lagged buffer by the inverse symmetric square root of the running covariance
estimate, applies the identity-covariance recursion in whitened coordinates,
and back-transforms:

    x~ = S^{-1/2} x,   u~ from the whitened buffer,
    Phi~(t) = (x~ u~' + lam m~)(u~ u~' + lam I)^{-1},
    Phi(t)  = S^{1/2} Phi~(t) (I_K kron S^{-1/2}),

with the covariance refreshed from the unwhitened residual,

    S_t = ((t-1)/t) S_{t-1} + (1/t) r(t) r(t)',   r(t) = x - Phi(t) u(t).

The whitened previous-estimate slots are carried across steps; factors are
recomputed every step from a jittered eigendecomposition, which keeps the
transform invertible even as the residual covariance degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputDataError
from .model import build_regressor
from .sope import EstimateTrack, PenaltySpec, SopeState, smw_apply, sope_init, warmup_length

JITTER_MIN = 1e-15


def default_jitter(sigma: np.ndarray) -> float:
    """Relative eigenvalue floor: 1e-8 of the mean diagonal, with an absolute floor."""
    p = sigma.shape[0]
    return max(1e-8 * float(np.trace(sigma)) / p, JITTER_MIN)


def sym_sqrt_pair(sigma: np.ndarray, jitter: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of ``sigma + jitter I``.

    Eigenvalues are clamped below at ``jitter`` after the shift, so the
    inverse factor is always finite.  Raises on non-symmetric input.
    """
    sigma = np.asarray(sigma, dtype=float)
    scale = max(1.0, float(np.abs(sigma).max()) if sigma.size else 1.0)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InputDataError(f"covariance must be square, got shape {sigma.shape}")
    if np.abs(sigma - sigma.T).max() > 1e-10 * scale:
        raise InputDataError("covariance must be symmetric")
    w, v = np.linalg.eigh(sigma)
    w = np.maximum(w + jitter, jitter)
    root = np.sqrt(w)
    sqrt = (v * root) @ v.T
    inv_sqrt = (v / root) @ v.T
    return sqrt, inv_sqrt


@dataclass
class GeneralSopeState:
    """Whitened-coordinate recursion state plus the running covariance.

    ``inner.phi_prev``/``inner.phi_prev2`` live in whitened coordinates;
    ``inner.buffer`` keeps the raw samples (they are whitened at step time
    with the current factors).  ``n_obs`` is the absolute sample count that
    drives the (t-1)/t covariance weights.
    """

    inner: SopeState
    sigma: np.ndarray
    sigma_sqrt: np.ndarray
    sigma_sqrt_inv: np.ndarray
    n_obs: int

    @property
    def p(self) -> int:
        return self.inner.p

    @property
    def k(self) -> int:
        return self.inner.k


def gsope_init(warmup: np.ndarray, penalty: PenaltySpec, k: int) -> GeneralSopeState:
    """Initialize with the identity covariance; whitened == raw at this point.

    Factors are produced by the same jittered decomposition used at refresh
    time, so the first step sees exactly the transform later steps would.
    """
    inner = sope_init(warmup, penalty, k)
    sigma = np.eye(inner.p)
    sqrt, inv_sqrt = sym_sqrt_pair(sigma, default_jitter(sigma))
    return GeneralSopeState(
        inner=inner,
        sigma=sigma,
        sigma_sqrt=sqrt,
        sigma_sqrt_inv=inv_sqrt,
        n_obs=inner.t,
    )


def _back_transform(phi_w: np.ndarray, sqrt: np.ndarray, inv_sqrt: np.ndarray, k: int) -> np.ndarray:
    """Phi = S^{1/2} Phi~ (I_K kron S^{-1/2}), applied lag block by lag block."""
    p = phi_w.shape[0]
    left = sqrt @ phi_w
    return (left.reshape(p, k, p) @ inv_sqrt).reshape(p, k * p)


def gsope_step(state: GeneralSopeState, x: np.ndarray) -> tuple[GeneralSopeState, np.ndarray]:
    """Consume one sample: whiten, recurse, back-transform, update covariance.

    State is advanced in place; the returned block is in original coordinates.
    """
    x = np.asarray(x, dtype=float)
    p, k = state.p, state.k
    if x.shape != (p,):
        raise InputDataError(f"sample shape {x.shape} != ({p},)")
    inner = state.inner
    lam, beta = inner.penalty.lam, inner.penalty.beta
    s_inv = state.sigma_sqrt_inv

    x_w = s_inv @ x
    u_w = build_regressor(inner.buffer @ s_inv)
    target = inner.phi_prev + beta * (inner.phi_prev - inner.phi_prev2)
    a = np.outer(x_w, u_w)
    a += lam * target
    phi_w = smw_apply(a, u_w, lam)

    phi = _back_transform(phi_w, state.sigma_sqrt, s_inv, k)
    u = build_regressor(inner.buffer)
    resid = x - phi @ u

    n = state.n_obs + 1
    state.sigma = ((n - 1) / n) * state.sigma + np.outer(resid, resid) / n
    state.sigma_sqrt, state.sigma_sqrt_inv = sym_sqrt_pair(state.sigma, default_jitter(state.sigma))
    state.n_obs = n

    inner.phi_prev2 = inner.phi_prev
    inner.phi_prev = phi_w
    inner.buffer[:-1] = inner.buffer[1:]
    inner.buffer[-1] = x
    inner.t += 1
    return state, phi


def run_gsope(
    samples: np.ndarray,
    penalty: PenaltySpec,
    k: int,
    burn_in: int | None = None,
) -> EstimateTrack:
    """Full run with online covariance; ``burn_in`` marks how many initial
    estimates downstream consumers should treat as covariance warm-up
    (default 10 * P).  All estimates are still returned."""
    samples = np.asarray(samples, dtype=float)
    n, p = samples.shape
    w = warmup_length(p, k)
    if n <= w:
        raise InputDataError(f"series of length {n} does not exceed warmup {w}")
    if burn_in is None:
        burn_in = 10 * p
    state = gsope_init(samples[:w], penalty, k)
    phis = np.empty((n - w, p, k * p))
    for i in range(n - w):
        _, phis[i] = gsope_step(state, samples[w + i])
    return EstimateTrack(phis=phis, t0=w, method="gsope", burn_in=burn_in)
