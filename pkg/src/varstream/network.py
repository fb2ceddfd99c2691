"""Quantile-thresholded connectivity graphs and before/after event deltas.

Connectivity values for each ordered channel pair are compared against the
pair's own empirical quantile threshold.  Around each event, the mean
connectivity over [center - w, center) ("before") and [center, center + w)
("after") is classified per pair:

    persistent : before > thr and after > thr
    lost       : before > thr and after <= thr
    gained     : before <= thr and after > thr
    absent     : otherwise

Ties at the threshold count as not exceeding, so edges are deterministic.
Thresholds may be computed over the whole epoch (default) or restricted to
the data strictly before the event.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import InputDataError

CLASSES = ("persistent", "lost", "gained", "absent")
QUANTILE_MODES = ("epoch", "pre-event")


@dataclass(frozen=True)
class EventSpec:
    """Labelled event times plus the half-width (in samples) of the windows."""

    events: tuple[tuple[str, int], ...]
    window: int = 250

    def __post_init__(self) -> None:
        if self.window < 1:
            raise InputDataError(f"window half-width must be >= 1, got {self.window}")

    def validate_against(self, t_total: int) -> None:
        for label, time in self.events:
            if not 0 <= time < t_total:
                raise InputDataError(f"event '{label}' at t={time} outside series of {t_total}")


@dataclass
class NetworkDelta:
    """Per-pair edge classification between two averaged windows."""

    classes: np.ndarray  # (P, P) of strings from CLASSES
    threshold_quantile: float
    measure: str
    band: str
    directed: bool
    event: str = ""
    event_time: int = -1
    quantile_mode: str = "epoch"
    before_truncated: bool = False
    after_truncated: bool = False

    def counts(self) -> dict[str, int]:
        flat = self.classes.ravel()
        return {c: int((flat == c).sum()) for c in CLASSES}


def epoch_quantiles(values: np.ndarray, q: float) -> np.ndarray:
    """Per-pair empirical q-quantile over time (linear interpolation).

    ``values`` is (T, P, P); the result is (P, P).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 3 or values.shape[0] == 0:
        raise InputDataError(f"need a nonempty (T, P, P) series, got shape {values.shape}")
    if not 0.0 < q < 1.0:
        raise InputDataError(f"quantile must be in (0, 1), got {q}")
    return np.quantile(values, q, axis=0, method="linear")


def window_mean(
    values: np.ndarray,
    center: int,
    half_width: int,
    side: str,
) -> tuple[np.ndarray, bool]:
    """Mean over the before/after window around ``center``; truncates at edges.

    Returns the (P, P) mean and a flag that is True when the window was
    clipped by the series boundary.
    """
    values = np.asarray(values, dtype=float)
    t_total = values.shape[0]
    if side == "before":
        lo, hi = center - half_width, center
    elif side == "after":
        lo, hi = center, center + half_width
    else:
        raise InputDataError(f"side must be 'before' or 'after', got {side!r}")
    truncated = lo < 0 or hi > t_total
    lo_c, hi_c = max(lo, 0), min(hi, t_total)
    if hi_c <= lo_c:
        raise InputDataError(f"empty {side} window around t={center} (series length {t_total})")
    return values[lo_c:hi_c].mean(axis=0), truncated


def network_delta(
    before: np.ndarray,
    after: np.ndarray,
    thresholds: np.ndarray,
    *,
    threshold_quantile: float,
    measure: str,
    band: str,
    directed: bool,
) -> NetworkDelta:
    """Classify each ordered pair by the before/after threshold rule."""
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if not (before.shape == after.shape == thresholds.shape):
        raise InputDataError(
            f"shape mismatch: before {before.shape}, after {after.shape}, "
            f"thresholds {thresholds.shape}"
        )
    hi_before = before > thresholds
    hi_after = after > thresholds
    classes = np.full(before.shape, "absent", dtype="<U10")
    classes[hi_before & hi_after] = "persistent"
    classes[hi_before & ~hi_after] = "lost"
    classes[~hi_before & hi_after] = "gained"
    return NetworkDelta(
        classes=classes,
        threshold_quantile=threshold_quantile,
        measure=measure,
        band=band,
        directed=directed,
    )


def event_deltas(
    values: np.ndarray,
    events: EventSpec,
    q: float,
    *,
    measure: str,
    band: str,
    directed: bool,
    quantile_mode: str = "epoch",
) -> list[NetworkDelta]:
    """Full pipeline: thresholds, windows and classification for every event.

    ``quantile_mode`` selects whether thresholds come from the whole epoch or
    only from samples strictly before each event.
    """
    values = np.asarray(values, dtype=float)
    events.validate_against(values.shape[0])
    if quantile_mode not in QUANTILE_MODES:
        raise InputDataError(f"quantile_mode must be one of {QUANTILE_MODES}")
    epoch_thr = epoch_quantiles(values, q) if quantile_mode == "epoch" else None
    out = []
    for label, center in events.events:
        if quantile_mode == "epoch":
            thr = epoch_thr
        else:
            if center < 1:
                raise InputDataError(f"event '{label}' at t={center} has no pre-event data")
            thr = epoch_quantiles(values[:center], q)
        before, btrunc = window_mean(values, center, events.window, "before")
        after, atrunc = window_mean(values, center, events.window, "after")
        delta = network_delta(
            before,
            after,
            thr,
            threshold_quantile=q,
            measure=measure,
            band=band,
            directed=directed,
        )
        delta.event = label
        delta.event_time = center
        delta.quantile_mode = quantile_mode
        delta.before_truncated = btrunc
        delta.after_truncated = atrunc
        out.append(delta)
    return out
