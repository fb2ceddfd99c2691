"""Timing and accuracy benchmarks for the online estimators.

``time_per_iteration`` measures steady-state per-step wall time (warmup
iterations discarded, BLAS pinned to one thread) on simulated white-noise
data; the Kalman baseline refuses cells whose dense state covariance would
exceed the memory budget instead of crashing.  Absolute milliseconds are
machine specific, so comparisons should be read as ratios and scaling
shapes.

``mse_sweep`` scores per-parameter mean squared error of the estimators
against a known cosine coefficient path over hyperparameter grids, and
``transfer_study`` carries hyperparameters tuned on one problem size to a
larger one, reporting pointwise quantile envelopes over noise replicates.
Both are seed-deterministic; replicates can fan out over processes.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .errors import InputDataError
from .gsope import gsope_init, gsope_step
from .kalman import covariance_bytes, kf_init, kf_step, run_kf
from .model import SimSpec, make_cosine_coeffs, simulate_tvvar
from .sope import PenaltySpec, run_sope, sope_init, sope_step, warmup_length

DEFAULT_MEM_BUDGET = 4 * 2 ** 30  # 4 GiB for the KF state covariance
METHODS = ("sope", "gsope", "kf")


@dataclass
class TimingRow:
    method: str
    p: int
    k: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    iterations: int
    warmup_iterations: int


@dataclass
class TimingRefusal:
    """Reported outcome when a cell would blow the memory budget."""

    method: str
    p: int
    k: int
    required_bytes: int
    budget_bytes: int

    @property
    def reason(self) -> str:
        return (
            f"state covariance needs {self.required_bytes / 2**30:.2f} GiB "
            f"(budget {self.budget_bytes / 2**30:.2f} GiB)"
        )


@dataclass
class MseRow:
    method: str
    hyper: dict
    per_param_mse: float
    replicates: int
    sim_digest: str


@dataclass
class EntryEnvelope:
    """Pointwise 2.5/50/97.5 percentile bands for one coefficient entry."""

    row: int
    col: int
    lag: int
    lo: np.ndarray
    med: np.ndarray
    hi: np.ndarray
    truth: np.ndarray
    coverage: float


@dataclass
class TransferReport:
    sim_digest: str
    replicates: int
    t0: int
    envelopes: dict[str, list[EntryEnvelope]] = field(default_factory=dict)


def sim_digest(spec: SimSpec) -> str:
    """Short stable digest of a simulation design, for tagging result rows."""
    payload = {
        "p": spec.p,
        "k": spec.k,
        "t_total": spec.t_total,
        "groups": spec.resolved_groups(),
        "amp_diag_range": spec.amp_diag_range,
        "amp_offdiag_range": spec.amp_offdiag_range,
        "noise_cov": None if spec.noise_cov is None else np.asarray(spec.noise_cov).tolist(),
        "seed": spec.seed,
        "discontinuities": [
            (d.time, d.row, d.col, d.lag, d.delta) for d in spec.discontinuities
        ],
    }
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def replicate_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Deterministic child seeds, one per replicate."""
    return np.random.SeedSequence(seed).spawn(n)


def _make_stepper(method: str, data: np.ndarray, k: int, penalty, q_sigma):
    """Initialize an estimator on the head of ``data``; return (step, n_init)."""
    if method == "sope":
        w = warmup_length(data.shape[1], k)
        state = sope_init(data[:w], penalty, k)
        return (lambda x: sope_step(state, x)), w
    if method == "gsope":
        w = warmup_length(data.shape[1], k)
        state = gsope_init(data[:w], penalty, k)
        return (lambda x: gsope_step(state, x)), w
    if method == "kf":
        state = kf_init(data[:k], q_sigma, k=k)
        return (lambda x: kf_step(state, x)), k
    raise InputDataError(f"unknown method {method!r}; expected one of {METHODS}")


def time_per_iteration(
    method: str,
    p: int,
    k: int,
    iters: int = 1000,
    warmup_iters: Optional[int] = None,
    seed: int = 0,
    penalty: Optional[PenaltySpec] = None,
    q_sigma: float = 1e-5,
    mem_budget_bytes: int = DEFAULT_MEM_BUDGET,
) -> TimingRow | TimingRefusal:
    """Per-step wall time statistics for one (method, P, K) cell.

    The estimator is driven on simulated white noise; the first
    ``warmup_iters`` steps (default max(50, K+1)) are excluded from the
    statistics so allocation/JIT effects do not skew them.  The KF refuses
    cells whose (K*P^2)^2 covariance exceeds the memory budget.
    """
    if method not in METHODS:
        raise InputDataError(f"unknown method {method!r}; expected one of {METHODS}")
    if iters < 1:
        raise InputDataError(f"iters must be >= 1, got {iters}")
    if warmup_iters is None:
        warmup_iters = max(50, k + 1)
    if method == "kf":
        required = covariance_bytes(p, k)
        if required > mem_budget_bytes:
            return TimingRefusal(
                method=method, p=p, k=k, required_bytes=required, budget_bytes=mem_budget_bytes
            )

    rng = np.random.default_rng(seed)
    n_init = warmup_length(p, k) if method in ("sope", "gsope") else k
    data = rng.standard_normal((n_init + warmup_iters + iters, p))
    if penalty is None:
        penalty = PenaltySpec(lam=1000.0, beta=0.9)

    step, consumed = _make_stepper(method, data, k, penalty, q_sigma)
    durations = np.empty(iters)
    with threadpool_limits(limits=1):
        for i in range(warmup_iters):
            step(data[consumed + i])
        base = consumed + warmup_iters
        for i in range(iters):
            t0 = time.perf_counter_ns()
            step(data[base + i])
            durations[i] = time.perf_counter_ns() - t0
    durations /= 1e6  # ns -> ms
    return TimingRow(
        method=method,
        p=p,
        k=k,
        mean_ms=float(durations.mean()),
        p50_ms=float(np.percentile(durations, 50)),
        p95_ms=float(np.percentile(durations, 95)),
        iterations=iters,
        warmup_iterations=warmup_iters,
    )


def _run_method(method: str, data: np.ndarray, k: int, hyper: dict):
    if method == "sope":
        return run_sope(data, PenaltySpec(lam=hyper["lam"], beta=hyper.get("beta", 0.0)), k)
    if method == "kf":
        return run_kf(data, hyper["q_sigma"], k=k)
    raise InputDataError(f"mse_sweep supports 'sope' and 'kf', got {method!r}")


def _replicate_sse(
    method: str,
    hypers: Sequence[dict],
    spec: SimSpec,
    seed_seq: np.random.SeedSequence,
    skip: int,
) -> tuple[np.ndarray, int]:
    """Sum of squared estimate errors per hyper for one simulated replicate."""
    rng = np.random.default_rng(seed_seq)
    path = make_cosine_coeffs(spec, rng)
    data = simulate_tvvar(spec, path, rng)
    sses = np.zeros(len(hypers))
    count = 0
    for j, hyper in enumerate(hypers):
        track = _run_method(method, data, spec.k, hyper)
        start = max(skip, track.t0)
        est = track.phis[start - track.t0 :]
        err = est - path[start:]
        sses[j] = float((err ** 2).sum())
        if j == 0:
            count = err.size
    return sses, count


def mse_sweep(
    method: str,
    hypers: Sequence[dict],
    spec: SimSpec,
    replicates: int,
    seed: int = 0,
    skip: Optional[int] = None,
    n_jobs: int = 1,
) -> list[MseRow]:
    """Per-parameter MSE against the known coefficient path, per grid point.

    ``hypers`` is a list of dicts ({'lam':, 'beta':} for sope, {'q_sigma':}
    for kf).  Errors are averaged over time points t >= ``skip`` (default:
    the streaming warmup length, so both methods are scored on the same
    region), all matrix entries, and all replicates.
    """
    if not hypers:
        raise InputDataError("hyperparameter grid is empty")
    if replicates < 1:
        raise InputDataError(f"replicates must be >= 1, got {replicates}")
    spec.validate()
    if skip is None:
        skip = warmup_length(spec.p, spec.k)
    seeds = replicate_seeds(seed, replicates)
    if n_jobs == 1:
        parts = [_replicate_sse(method, hypers, spec, s, skip) for s in seeds]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_replicate_sse)(method, hypers, spec, s, skip) for s in seeds
        )
    total = np.zeros(len(hypers))
    count = 0
    for sses, n in parts:
        total += sses
        count += n
    digest = sim_digest(spec)
    return [
        MseRow(
            method=method,
            hyper=dict(h),
            per_param_mse=float(total[j] / count),
            replicates=replicates,
            sim_digest=digest,
        )
        for j, h in enumerate(hypers)
    ]


def _replicate_entries(
    method: str,
    hyper: dict,
    spec: SimSpec,
    path: np.ndarray,
    seed_seq: np.random.SeedSequence,
    entries: Sequence[tuple[int, int, int]],
    skip: int,
) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    data = simulate_tvvar(spec, path, rng)
    track = _run_method(method, data, spec.k, hyper)
    start = max(skip, track.t0)
    est = track.phis[start - track.t0 :]
    cols = [lag * spec.p + col for (_, col, lag) in entries]
    rows = [row for (row, _, _) in entries]
    return est[:, rows, cols].T  # (n_entries, T_eff)


def transfer_study(
    penalty: PenaltySpec,
    q_sigma: float,
    spec: SimSpec,
    replicates: int,
    entries: Optional[Sequence[tuple[int, int, int]]] = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> TransferReport:
    """Run both estimators on a larger design with transferred hyperparameters.

    One coefficient path is drawn; ``replicates`` noise realizations are
    estimated and summarized as pointwise 2.5/50/97.5 percentile envelopes
    for the designated (row, col, lag) entries, with the fraction of time
    points whose truth falls inside the outer band reported as coverage.
    """
    if replicates < 1:
        raise InputDataError(f"replicates must be >= 1, got {replicates}")
    spec.validate()
    if entries is None:
        entries = [(1, 1, 0), (spec.p - 1, 1, 0)]
    skip = warmup_length(spec.p, spec.k)
    path_rng = np.random.default_rng(spec.seed)
    path = make_cosine_coeffs(spec, path_rng)
    seeds = replicate_seeds(seed, replicates)

    report = TransferReport(sim_digest=sim_digest(spec), replicates=replicates, t0=skip)
    for method, hyper in (("sope", {"lam": penalty.lam, "beta": penalty.beta}),
                          ("kf", {"q_sigma": q_sigma})):
        if n_jobs == 1:
            parts = [
                _replicate_entries(method, hyper, spec, path, s, entries, skip) for s in seeds
            ]
        else:
            parts = Parallel(n_jobs=n_jobs)(
                delayed(_replicate_entries)(method, hyper, spec, path, s, entries, skip)
                for s in seeds
            )
        stacked = np.stack(parts)  # (reps, n_entries, T_eff)
        lo, med, hi = np.percentile(stacked, [2.5, 50.0, 97.5], axis=0)
        envs = []
        for idx, (row, col, lag) in enumerate(entries):
            truth = path[skip:, row, lag * spec.p + col]
            inside = (truth >= lo[idx]) & (truth <= hi[idx])
            envs.append(
                EntryEnvelope(
                    row=row,
                    col=col,
                    lag=lag,
                    lo=lo[idx],
                    med=med[idx],
                    hi=hi[idx],
                    truth=truth,
                    coverage=float(inside.mean()),
                )
            )
        report.envelopes[method] = envs
    return report


def format_timing_table(rows: Sequence[TimingRow | TimingRefusal], method: str) -> str:
    """Aligned text table of mean per-iteration times: K down the rows, P across."""
    cells = {(r.k, r.p): r for r in rows if r.method == method}
    if not cells:
        return f"(no {method} timing rows)"
    ks = sorted({k for k, _ in cells})
    ps = sorted({p for _, p in cells})
    header = [f"{method} per-iteration mean (ms)"] + [f"P={p}" for p in ps]
    widths = [max(len(header[0]), 6)] + [max(len(h), 9) for h in header[1:]]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for k in ks:
        row = [f"K={k}".rjust(widths[0])]
        for j, p in enumerate(ps):
            cell = cells.get((k, p))
            if cell is None:
                text = "-"
            elif isinstance(cell, TimingRefusal):
                text = "refused"
            else:
                text = f"{cell.mean_ms:.3f}"
            row.append(text.rjust(widths[j + 1]))
        lines.append("  ".join(row))
    return "\n".join(lines)
