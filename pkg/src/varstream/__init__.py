"""varstream: streaming estimation of time-varying VAR models and the
spectral connectivity measures derived from them."""

__version__ = "0.1.0"

from .model import SimSpec, build_regressor, companion_spectral_radius, make_cosine_coeffs, simulate_tvvar
from .sope import EstimateTrack, PenaltySpec, SopeState, run_sope, smw_apply, sope_init, sope_step
from .gsope import GeneralSopeState, gsope_init, gsope_step, run_gsope, sym_sqrt_pair
from .kalman import KalmanState, build_observation_matrix, kf_init, kf_step, run_kf
from .spectral import (
    BandSpec,
    ConnectivityFrame,
    FreqSpec,
    SpectralFrame,
    band_connectivity,
    coherence,
    fourier_param_matrix,
    partial_coherence,
    pdc,
    spectral_frame,
)
from .network import EventSpec, NetworkDelta, epoch_quantiles, event_deltas, network_delta, window_mean

__all__ = [
    "__version__",
    "SimSpec",
    "build_regressor",
    "companion_spectral_radius",
    "make_cosine_coeffs",
    "simulate_tvvar",
    "EstimateTrack",
    "PenaltySpec",
    "SopeState",
    "run_sope",
    "smw_apply",
    "sope_init",
    "sope_step",
    "GeneralSopeState",
    "gsope_init",
    "gsope_step",
    "run_gsope",
    "sym_sqrt_pair",
    "KalmanState",
    "build_observation_matrix",
    "kf_init",
    "kf_step",
    "run_kf",
    "BandSpec",
    "ConnectivityFrame",
    "FreqSpec",
    "SpectralFrame",
    "band_connectivity",
    "coherence",
    "fourier_param_matrix",
    "partial_coherence",
    "pdc",
    "spectral_frame",
    "EventSpec",
    "NetworkDelta",
    "epoch_quantiles",
    "event_deltas",
    "network_delta",
    "window_mean",
]
