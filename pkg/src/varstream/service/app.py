"""FastAPI service exposing simulation, streaming estimation, connectivity,
network deltas and the benchmark harness over HTTP.

The CLI is a thin client of this app (in-process by default); anything the
CLI can do, another client can do against a long-running instance.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import (
    format_timing_table,
    mse_sweep,
    time_per_iteration,
    transfer_study,
)
from ..errors import InputDataError, NumericalError
from ..iotools import (
    connectivity_record,
    matrix_from_payload,
    mse_record,
    network_record,
    params_record,
    timing_record,
)
from ..model import make_cosine_coeffs, simulate_tvvar
from ..network import EventSpec, event_deltas
from ..pipeline import StreamingEstimator, connectivity_frames
from ..sope import PenaltySpec
from .schemas import (
    BenchMseRequest,
    BenchTimeRequest,
    BenchTimeResponse,
    BenchTransferRequest,
    BenchTransferResponse,
    ConnectivityRequest,
    CoeffsPayload,
    EnvelopePayload,
    EstimateRequest,
    EstimatorSpec,
    HealthResponse,
    NetworkRequest,
    RecordsResponse,
    SamplesRequest,
    SessionCreateRequest,
    SessionCreateResponse,
    SessionInfoResponse,
    SimulateRequest,
    SimulateResponse,
)
from .sessions import SessionStore, UnknownSession


def _build_estimator(spec: EstimatorSpec) -> StreamingEstimator:
    penalty = None
    if spec.penalty is not None:
        penalty = PenaltySpec(lam=spec.penalty.lam, beta=spec.penalty.beta)
    return StreamingEstimator(
        method=spec.method, p=spec.p, k=spec.k, penalty=penalty, q_sigma=spec.q_sigma
    )


def create_app() -> FastAPI:
    app = FastAPI(title="varstream", version=__version__)
    store = SessionStore()

    @app.exception_handler(InputDataError)
    async def _input_error(_: Request, exc: InputDataError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(UnknownSession)
    async def _unknown_session(_: Request, exc: UnknownSession) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": f"unknown session {exc}"})

    @app.exception_handler(NumericalError)
    async def _numerical_error(_: Request, exc: NumericalError) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        spec = req.sim.to_simspec()
        rng = np.random.default_rng(spec.seed)
        path = make_cosine_coeffs(spec, rng)
        values = simulate_tvvar(spec, path, rng)
        coeffs = None
        if req.include_coeffs:
            coeffs = CoeffsPayload(
                t_total=path.shape[0],
                rows=path.shape[1],
                cols=path.shape[2],
                data=path.ravel().tolist(),
            )
        channels = [f"ch{i + 1}" for i in range(spec.p)]
        return SimulateResponse(channels=channels, values=values.tolist(), coeffs=coeffs)

    @app.post("/estimate", response_model=RecordsResponse)
    def estimate(req: EstimateRequest) -> RecordsResponse:
        est = _build_estimator(req.estimator)
        records = []
        for row in req.values:
            out = est.feed(np.asarray(row, dtype=float))
            if out is not None:
                t, phi, _ = out
                records.append(params_record(t, phi, est.method))
        return RecordsResponse(records=records)

    @app.post("/sessions", response_model=SessionCreateResponse)
    def create_session(req: SessionCreateRequest) -> SessionCreateResponse:
        est = _build_estimator(req.estimator)
        sid = store.create(est)
        return SessionCreateResponse(session_id=sid, warmup=est.warmup)

    @app.get("/sessions/{sid}", response_model=SessionInfoResponse)
    def session_info(sid: str) -> SessionInfoResponse:
        return SessionInfoResponse(**store.get(sid).info())

    @app.post("/sessions/{sid}/samples", response_model=RecordsResponse)
    def feed_session(sid: str, req: SamplesRequest) -> RecordsResponse:
        session = store.get(sid)
        return RecordsResponse(records=session.feed_rows(req.values))

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        store.delete(sid)
        return {"deleted": sid}

    @app.post("/connectivity", response_model=RecordsResponse)
    def connectivity(req: ConnectivityRequest) -> RecordsResponse:
        est = _build_estimator(req.estimator)
        freq = req.freq.to_freq()
        bands = [b.to_band() for b in req.freq.bands]
        values = np.asarray(req.values, dtype=float)
        frames = connectivity_frames(
            values, est, freq, bands, partial_squared=req.partial_squared
        )
        return RecordsResponse(records=[connectivity_record(f) for f in frames])

    @app.post("/network", response_model=RecordsResponse)
    def network(req: NetworkRequest) -> RecordsResponse:
        conn = [r for r in req.records if r.get("kind") == "connectivity"]
        if not conn:
            raise InputDataError("no connectivity records provided")
        events = req.events.to_events()
        bands = req.bands if req.bands is not None else sorted({r["band"] for r in conn})
        out = []
        for band in bands:
            rows = sorted((r for r in conn if r["band"] == band), key=lambda r: r["t"])
            if not rows:
                raise InputDataError(f"no connectivity records for band {band!r}")
            ts = np.array([r["t"] for r in rows])
            # Event times are sample indices; map them onto series positions.
            positions = []
            for label, time_idx in events.events:
                pos = int(np.searchsorted(ts, time_idx))
                if pos >= len(ts) or ts[pos] != time_idx:
                    raise InputDataError(
                        f"event '{label}' at t={time_idx} not covered by the "
                        f"connectivity series for band {band!r}"
                    )
                positions.append((label, pos))
            ev = EventSpec(events=tuple(positions), window=events.window)
            for measure in req.measures:
                if measure not in rows[0].get("measures", {}):
                    raise InputDataError(f"measure {measure!r} not present in records")
                values = np.stack(
                    [matrix_from_payload(r["measures"][measure]) for r in rows]
                )
                for q in req.quantiles:
                    deltas = event_deltas(
                        values,
                        ev,
                        q,
                        measure=measure,
                        band=band,
                        directed=(measure == "pdc"),
                        quantile_mode=req.quantile_mode,
                    )
                    for delta, (_, time_idx) in zip(deltas, events.events):
                        delta.event_time = time_idx
                    out.extend(network_record(d) for d in deltas)
        return RecordsResponse(records=out)

    @app.post("/bench/time", response_model=BenchTimeResponse)
    def bench_time(req: BenchTimeRequest) -> BenchTimeResponse:
        penalty = None
        if req.penalty is not None:
            penalty = PenaltySpec(lam=req.penalty.lam, beta=req.penalty.beta)
        rows = []
        for cell in req.cells:
            kwargs = dict(
                iters=req.iters,
                warmup_iters=req.warmup_iters,
                seed=req.seed,
                penalty=penalty,
                q_sigma=req.q_sigma,
            )
            if req.mem_budget_bytes is not None:
                kwargs["mem_budget_bytes"] = req.mem_budget_bytes
            rows.append(time_per_iteration(cell.method, cell.p, cell.k, **kwargs))
        tables = {
            m: format_timing_table(rows, m)
            for m in sorted({r.method for r in rows})
        }
        return BenchTimeResponse(records=[timing_record(r) for r in rows], tables=tables)

    @app.post("/bench/mse", response_model=RecordsResponse)
    def bench_mse(req: BenchMseRequest) -> RecordsResponse:
        spec = req.sim.to_simspec()
        rows = []
        if req.lams:
            hypers = [{"lam": lam, "beta": req.beta} for lam in req.lams]
            rows += mse_sweep("sope", hypers, spec, req.replicates, req.seed, n_jobs=req.n_jobs)
        if req.q_sigmas:
            hypers = [{"q_sigma": s} for s in req.q_sigmas]
            rows += mse_sweep("kf", hypers, spec, req.replicates, req.seed, n_jobs=req.n_jobs)
        return RecordsResponse(records=[mse_record(r) for r in rows])

    @app.post("/bench/transfer", response_model=BenchTransferResponse)
    def bench_transfer(req: BenchTransferRequest) -> BenchTransferResponse:
        spec = req.sim.to_simspec()
        penalty = PenaltySpec(lam=req.penalty.lam, beta=req.penalty.beta)
        entries = None if req.entries is None else [tuple(e) for e in req.entries]
        report = transfer_study(
            penalty,
            req.q_sigma,
            spec,
            req.replicates,
            entries=entries,
            seed=req.seed,
            n_jobs=req.n_jobs,
        )
        envelopes = {
            method: [
                EnvelopePayload(
                    row=e.row,
                    col=e.col,
                    lag=e.lag,
                    lo=e.lo.tolist(),
                    med=e.med.tolist(),
                    hi=e.hi.tolist(),
                    truth=e.truth.tolist(),
                    coverage=e.coverage,
                )
                for e in envs
            ]
            for method, envs in report.envelopes.items()
        }
        return BenchTransferResponse(
            sim_digest=report.sim_digest,
            replicates=report.replicates,
            t0=report.t0,
            envelopes=envelopes,
        )

    return app


app = create_app()
