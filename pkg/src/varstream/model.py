"""Time-varying VAR model core: coefficient designs, simulation, regressors.

The data model is a tv-VAR(K) over P channels,

    X(t) = sum_{l=1..K} Phi_{t,l} X(t-l) + E(t),      E(t) ~ N(0, Sigma_E),

with the K lag matrices concatenated into a single P x (K*P) coefficient
block ``Phi(t) = [Phi_{t,1}, ..., Phi_{t,K}]`` and the stacked regressor
``u(t) = [X(t-1)', ..., X(t-K)']'``, so that ``X(t) = Phi(t) u(t) + E(t)``.

Everything here is pure NumPy over immutable inputs (apart from the RNG),
shared by all estimators and by the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InputDataError

# Coefficient paths are dense arrays of shape (T, P, K*P); a single
# coefficient block is (P, K*P) with lag l occupying columns [l*P, (l+1)*P).

STATIONARITY_LIMIT = 0.98
MAX_HALVINGS = 20


class Sample(NamedTuple):
    """One multichannel observation: time index and a length-P value vector."""

    t: int
    values: np.ndarray


@dataclass(frozen=True)
class Discontinuity:
    """Additive step change to one coefficient entry from ``time`` onward.

    ``row``/``col`` are 0-based channel indices, ``lag`` is 0-based
    (lag index l corresponds to the dependence on X(t-l-1)).
    """

    time: int
    row: int
    col: int
    lag: int
    delta: float


@dataclass(frozen=True)
class SimSpec:
    """Simulation design for cosine-varying coefficients.

    Parameters
    ----------
    p, k : int
        Channel count and model order.
    t_total : int
        Length of the generated series.
    groups : tuple of tuples, optional
        Partition of the 0-based channel indices into blocks; coefficients
        between channels in different groups are identically zero.  Default
        is a single group containing every channel.
    amp_diag_range, amp_offdiag_range : (float, float)
        Uniform ranges for the cosine amplitudes on diagonal and (within
        group) off-diagonal entries.
    noise_cov : ndarray, optional
        P x P symmetric PSD innovation covariance; identity when omitted.
    seed : int
        Seed for the generating RNG when one is not passed explicitly.
    discontinuities : tuple of Discontinuity
        Step changes applied to the coefficient path after the stationarity
        rescaling pass.
    """

    p: int
    k: int
    t_total: int
    groups: Optional[tuple[tuple[int, ...], ...]] = None
    amp_diag_range: tuple[float, float] = (0.3, 0.7)
    amp_offdiag_range: tuple[float, float] = (-0.2, 0.2)
    noise_cov: Optional[np.ndarray] = None
    seed: int = 0
    discontinuities: tuple[Discontinuity, ...] = ()

    def validate(self) -> None:
        if self.p < 1 or self.k < 1:
            raise InputDataError(f"need p >= 1 and k >= 1, got p={self.p}, k={self.k}")
        if self.t_total <= self.k:
            raise InputDataError(f"t_total={self.t_total} must exceed k={self.k}")
        for lo, hi in (self.amp_diag_range, self.amp_offdiag_range):
            if lo > hi:
                raise InputDataError(f"amplitude range ({lo}, {hi}) has lower > upper")
        groups = self.resolved_groups()
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(self.p)):
            raise InputDataError(f"groups {groups} do not partition 0..{self.p - 1}")
        if self.noise_cov is not None:
            cov = np.asarray(self.noise_cov, dtype=float)
            if cov.shape != (self.p, self.p):
                raise InputDataError(f"noise_cov shape {cov.shape} != ({self.p}, {self.p})")
        for d in self.discontinuities:
            if not (0 <= d.time < self.t_total):
                raise InputDataError(f"discontinuity time {d.time} outside series")
            if not (0 <= d.row < self.p and 0 <= d.col < self.p and 0 <= d.lag < self.k):
                raise InputDataError(f"discontinuity indices out of range: {d}")

    def resolved_groups(self) -> tuple[tuple[int, ...], ...]:
        if self.groups is None:
            return (tuple(range(self.p)),)
        return tuple(tuple(g) for g in self.groups)

    def noise_covariance(self) -> np.ndarray:
        if self.noise_cov is None:
            return np.eye(self.p)
        return np.asarray(self.noise_cov, dtype=float)


def group_mask(p: int, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Boolean (P, P) mask, True where channels i and j share a group."""
    mask = np.zeros((p, p), dtype=bool)
    for g in groups:
        idx = np.asarray(list(g), dtype=int)
        mask[np.ix_(idx, idx)] = True
    return mask


def companion_matrix(phi: np.ndarray) -> np.ndarray:
    """Embed a (P, K*P) coefficient block as its (K*P, K*P) companion matrix."""
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[0]
    kp = phi.shape[1]
    if kp % p != 0:
        raise InputDataError(f"coefficient block {phi.shape} is not P x (K*P)")
    comp = np.zeros((kp, kp))
    comp[:p, :] = phi
    if kp > p:
        comp[p:, :-p] = np.eye(kp - p)
    return comp


def companion_spectral_radius(phi: np.ndarray) -> float:
    """Spectral radius of the companion matrix of one coefficient block."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def _path_max_radius(path: np.ndarray, chunk: int = 512) -> float:
    """Max companion spectral radius over all time points of a path."""
    t_total, p, kp = path.shape
    k = kp // p
    worst = 0.0
    for start in range(0, t_total, chunk):
        block = path[start : start + chunk]
        comps = np.zeros((block.shape[0], kp, kp))
        comps[:, :p, :] = block
        if k > 1:
            comps[:, p:, :-p] = np.eye(kp - p)
        radii = np.max(np.abs(np.linalg.eigvals(comps)), axis=1)
        worst = max(worst, float(radii.max()))
    return worst


def make_cosine_coeffs(spec: SimSpec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Generate the cosine coefficient path for a simulation design.

    Each within-group entry follows ``A * cos(pi * t / T + B)`` with amplitude
    A drawn uniformly from the diagonal or off-diagonal range and phase B
    uniform on [0, 2*pi); cross-group entries are exactly zero.  If any time
    point fails the companion stationarity check the amplitudes are halved
    and the path retested, up to ``MAX_HALVINGS`` times.  Discontinuities are
    added afterwards and the check repeated (halving the jump sizes instead).

    Returns
    -------
    ndarray of shape (t_total, p, k*p)
    """
    spec.validate()
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    p, k, t_total = spec.p, spec.k, spec.t_total
    mask = group_mask(p, spec.resolved_groups())

    amps = np.zeros((k, p, p))
    for l in range(k):
        diag = rng.uniform(*spec.amp_diag_range, size=p)
        off = rng.uniform(*spec.amp_offdiag_range, size=(p, p))
        a = np.where(np.eye(p, dtype=bool), np.diag(diag), off)
        amps[l] = np.where(mask, a, 0.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(k, p, p))

    t_axis = np.arange(1, t_total + 1, dtype=float) / t_total
    # (T, K, P, P) -> (T, P, K*P)
    cos_part = np.cos(np.pi * t_axis[:, None, None, None] + phases[None, :, :, :])

    def assemble(a: np.ndarray) -> np.ndarray:
        blocks = a[None, :, :, :] * cos_part
        return blocks.transpose(0, 2, 1, 3).reshape(t_total, p, k * p)

    path = assemble(amps)
    for attempt in range(MAX_HALVINGS + 1):
        if _path_max_radius(path) < STATIONARITY_LIMIT:
            break
        if attempt == MAX_HALVINGS:
            raise InputDataError("could not rescale amplitudes to a stationary path")
        path *= 0.5

    if spec.discontinuities:
        scale = 1.0
        for attempt in range(MAX_HALVINGS + 1):
            jumped = path.copy()
            for d in spec.discontinuities:
                jumped[d.time :, d.row, d.lag * p + d.col] += scale * d.delta
            if _path_max_radius(jumped) < STATIONARITY_LIMIT:
                path = jumped
                break
            if attempt == MAX_HALVINGS:
                raise InputDataError("discontinuity jumps could not be made stationary")
            scale *= 0.5

    return path


def simulate_tvvar(
    spec: SimSpec,
    path: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    burn_in: Optional[int] = None,
) -> np.ndarray:
    """Simulate a tv-VAR series driven by a coefficient path.

    The first K pre-samples are drawn i.i.d. from the innovation
    distribution, a burn-in of ``10 * k`` steps (frozen at the first
    coefficient block) is discarded, and the returned rows align with
    ``path``: row t was generated with coefficients ``path[t]``.

    Returns
    -------
    ndarray of shape (t_total, p)
    """
    spec.validate()
    path = np.asarray(path, dtype=float)
    if path.shape != (spec.t_total, spec.p, spec.k * spec.p):
        raise InputDataError(f"path shape {path.shape} inconsistent with spec")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if burn_in is None:
        burn_in = 10 * spec.k

    cov = spec.noise_covariance()
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise InputDataError("noise_cov must be symmetric")
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(1.0, w.max()):
        raise InputDataError(f"noise_cov is not PSD (min eigenvalue {w.min():.3e})")
    noise_factor = v * np.sqrt(np.clip(w, 0.0, None))

    p, k, t_total = spec.p, spec.k, spec.t_total
    n_steps = burn_in + t_total
    x = np.empty((k + n_steps, p))
    x[:k] = rng.standard_normal((k, p)) @ noise_factor.T
    eps = rng.standard_normal((n_steps, p)) @ noise_factor.T

    for step in range(n_steps):
        i = k + step
        phi = path[0] if step < burn_in else path[step - burn_in]
        u = x[i - k : i][::-1].reshape(-1)
        x[i] = phi @ u + eps[step]
    return x[k + burn_in :]


def build_regressor(buffer: np.ndarray) -> np.ndarray:
    """Stack the last K samples (given oldest-first) into the regressor u(t).

    ``buffer`` holds rows X(t-K), ..., X(t-1) in time order; the output is
    the length K*P vector [X(t-1)', ..., X(t-K)']' with the newest sample
    first.
    """
    buffer = np.asarray(buffer, dtype=float)
    if buffer.ndim != 2:
        raise InputDataError(f"regressor buffer must be 2-D, got shape {buffer.shape}")
    # flatten() copies, so the result never aliases a mutable ring buffer
    return buffer[::-1].flatten()


def unstack_regressor(u: np.ndarray, p: int) -> np.ndarray:
    """Inverse of :func:`build_regressor`: recover the (K, P) buffer rows."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size % p != 0:
        raise InputDataError(f"regressor of size {u.size} is not a multiple of p={p}")
    return u.reshape(-1, p)[::-1]
