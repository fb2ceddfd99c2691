"""Time-varying spectral matrices and connectivity measures from VAR coefficients.

For a coefficient block Phi(t) and innovation covariance Sigma_E, the
frequency-domain quantities at frequency w (Hz, sampling rate w_s) are

    Phi(t, w) = I_P - sum_l Phi_{t,l} exp(-i 2 pi l w / w_s),
    H(t, w)   = Phi(t, w)^{-1}                      (transfer function),
    S(t, w)   = H Sigma_E H*                        (spectral matrix),
    G(t, w)   = S^{-1},
    Gamma     = Diag(G)^{-1/2} G Diag(G)^{-1/2},

from which coherence |S_ij|^2 / (S_ii S_jj), partial coherence |Gamma_ij|,
and partial directed coherence |Phi_ij(t,w)| / sqrt(sum_k |Phi_kj(t,w)|^2)
are read off.  Feeding true coefficients gives ground-truth connectivity;
feeding online estimates gives the streaming plug-in estimator.

Band values are uniform averages of the pointwise measures over the grid
frequencies falling inside the band (no re-normalization after averaging).
All functions are pure and safe to evaluate in parallel across (t, w).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputDataError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FreqSpec:
    """Sampling rate (Hz) and the ascending evaluation grid within Nyquist."""

    omega_s: float
    grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if self.omega_s <= 0:
            raise InputDataError(f"omega_s must be > 0, got {self.omega_s}")
        if grid.size == 0:
            raise InputDataError("frequency grid is empty")
        if np.any(np.diff(grid) <= 0):
            raise InputDataError("frequency grid must be strictly ascending")
        if grid[0] < 0 or grid[-1] > self.omega_s / 2 + 1e-12:
            raise InputDataError(
                f"grid [{grid[0]}, {grid[-1]}] outside [0, {self.omega_s / 2}]"
            )

    @classmethod
    def regular(cls, omega_s: float, spacing: float = 1.0) -> "FreqSpec":
        """Evenly spaced grid from 0 to Nyquist with the given spacing (Hz)."""
        if spacing <= 0:
            raise InputDataError(f"grid spacing must be > 0, got {spacing}")
        nyquist = omega_s / 2
        n = int(np.floor(nyquist / spacing + 1e-9))
        return cls(omega_s=omega_s, grid=np.arange(n + 1) * spacing)


@dataclass(frozen=True)
class BandSpec:
    """Named frequency band [lo, hi] in Hz."""

    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not 0 <= self.lo < self.hi:
            raise InputDataError(f"band {self.name}: need 0 <= lo < hi, got [{self.lo}, {self.hi}]")


@dataclass
class SpectralFrame:
    """All frequency-domain matrices at one (coefficient block, frequency) point."""

    phi_omega: np.ndarray
    h: np.ndarray
    s: np.ndarray
    g: np.ndarray
    gamma_mat: np.ndarray
    omega: float
    unstable: bool = False

    @property
    def coherence(self) -> np.ndarray:
        return coherence(self.s)

    def partial_coherence(self, squared: bool = False) -> np.ndarray:
        return partial_coherence(self.gamma_mat, squared=squared)

    @property
    def pdc(self) -> np.ndarray:
        return pdc(self.phi_omega)


@dataclass
class ConnectivityFrame:
    """Band-averaged connectivity matrices at one time index."""

    coherence: np.ndarray
    partial_coherence: np.ndarray
    pdc: np.ndarray
    band: BandSpec
    t: int = -1
    unstable: bool = False


def fourier_param_matrix(phi: np.ndarray, omega: float, omega_s: float) -> np.ndarray:
    """Frequency-domain coefficient matrix I_P - sum_l Phi_l e^{-i 2 pi l w / w_s}."""
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[0]
    k = phi.shape[1] // p
    lags = np.arange(1, k + 1)
    weights = np.exp(-1j * 2.0 * np.pi * lags * omega / omega_s)
    blocks = phi.reshape(p, k, p).transpose(1, 0, 2)  # (K, P, P)
    return np.eye(p, dtype=complex) - np.tensordot(weights, blocks, axes=(0, 0))


def spectral_frame(
    phi: np.ndarray,
    sigma_e: Optional[np.ndarray],
    omega: float,
    omega_s: float,
) -> SpectralFrame:
    """Compute transfer, spectral, inverse-spectral and scaled-inverse matrices.

    Frames whose Phi(t, w) or S condition estimate exceeds ``CONDITION_LIMIT``
    are flagged ``unstable`` (pseudo-inverses are substituted so downstream
    code can still inspect them); they are not silently repaired.
    """
    phi = np.asarray(phi, dtype=float)
    p = phi.shape[0]
    sig = np.eye(p) if sigma_e is None else np.asarray(sigma_e, dtype=float)
    phi_w = fourier_param_matrix(phi, omega, omega_s)

    unstable = False
    cond_phi = np.linalg.cond(phi_w)
    if not np.isfinite(cond_phi) or cond_phi > CONDITION_LIMIT:
        unstable = True
        h = np.linalg.pinv(phi_w)
    else:
        h = np.linalg.inv(phi_w)
    s = h @ sig @ h.conj().T
    cond_s = np.linalg.cond(s)
    if not np.isfinite(cond_s) or cond_s > CONDITION_LIMIT:
        unstable = True
        g = np.linalg.pinv(s)
    else:
        g = np.linalg.inv(s)
    d = np.sqrt(np.abs(np.diag(g)))
    d = np.where(d > 0, d, 1.0)
    gamma = g / np.outer(d, d)
    return SpectralFrame(
        phi_omega=phi_w, h=h, s=s, g=g, gamma_mat=gamma, omega=omega, unstable=unstable
    )


def coherence(s: np.ndarray) -> np.ndarray:
    """Squared coherence |S_ij|^2 / (S_ii S_jj); requires positive auto-spectra."""
    s = np.asarray(s)
    auto = np.real(np.diag(s))
    if np.any(auto <= 0):
        raise InputDataError("zero or negative auto-spectrum; coherence undefined")
    return np.abs(s) ** 2 / np.outer(auto, auto)


def partial_coherence(gamma_mat: np.ndarray, squared: bool = False) -> np.ndarray:
    """Magnitude (default) or squared magnitude of the scaled inverse spectrum."""
    mag = np.abs(np.asarray(gamma_mat))
    return mag ** 2 if squared else mag


def pdc(phi_omega: np.ndarray) -> np.ndarray:
    """Partial directed coherence: column-normalized |Phi(t, w)| magnitudes."""
    mag = np.abs(np.asarray(phi_omega))
    norms = np.sqrt((mag ** 2).sum(axis=0))
    if np.any(norms == 0):
        raise InputDataError("all-zero column in Phi(t, w); PDC normalization undefined")
    return mag / norms[None, :]


def band_connectivity(
    phi: np.ndarray,
    sigma_e: Optional[np.ndarray],
    band: BandSpec,
    freq: FreqSpec,
    t: int = -1,
    partial_squared: bool = False,
) -> ConnectivityFrame:
    """Average the pointwise measures over the grid frequencies inside the band."""
    if band.hi > freq.omega_s / 2 + 1e-12:
        raise InputDataError(f"band {band.name} exceeds Nyquist {freq.omega_s / 2}")
    pts = freq.grid[(freq.grid >= band.lo) & (freq.grid <= band.hi)]
    if pts.size == 0:
        raise InputDataError(f"no grid frequencies inside band {band.name} [{band.lo}, {band.hi}]")
    p = np.asarray(phi).shape[0]
    coh = np.zeros((p, p))
    pco = np.zeros((p, p))
    pdcm = np.zeros((p, p))
    unstable = False
    for omega in pts:
        frame = spectral_frame(phi, sigma_e, omega, freq.omega_s)
        unstable = unstable or frame.unstable
        coh += frame.coherence
        pco += frame.partial_coherence(squared=partial_squared)
        pdcm += frame.pdc
    n = pts.size
    return ConnectivityFrame(
        coherence=coh / n,
        partial_coherence=pco / n,
        pdc=pdcm / n,
        band=band,
        t=t,
        unstable=unstable,
    )
