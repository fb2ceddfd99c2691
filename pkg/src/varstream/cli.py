"""Command-line client for the varstream service.

Every subcommand marshals flags and config-file values into the service's
request models and talks HTTP: against a remote instance when --server is
given, otherwise against an in-process copy of the app, so the CLI works
standalone but all logic lives behind the service surface.

Exit codes: 0 success, 2 usage errors, 3 malformed input data, 4 numerical
failures.
"""

from __future__ import annotations

import functools
import sys
from typing import Optional

import click
import numpy as np

from .config import load_config_file, parse_run_config, parse_sim_config
from .errors import InputDataError, NumericalError
from .iotools import dump_record, iter_csv_samples, read_records, write_csv

EXIT_INPUT = 3
EXIT_NUMERIC = 4


class InputCliError(click.ClickException):
    exit_code = EXIT_INPUT


class NumericCliError(click.ClickException):
    exit_code = EXIT_NUMERIC


def _mapped(fn):
    """Convert package exceptions into distinct CLI exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputDataError as exc:
            raise InputCliError(str(exc)) from exc
        except NumericalError as exc:
            raise NumericCliError(str(exc)) from exc

    return wrapper


class ServiceClient:
    """HTTP client: remote when a server URL is given, in-process otherwise.

    The in-process mode drives the ASGI app through httpx on a private event
    loop, so the CLI runs standalone while still exercising the exact service
    surface a remote client would see.
    """

    def __init__(self, server: Optional[str]) -> None:
        import httpx

        self._loop = None
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            import asyncio

            from .service.app import create_app

            self._loop = asyncio.new_event_loop()
            self._client = httpx.AsyncClient(
                transport=httpx.ASGITransport(app=create_app()),
                base_url="http://varstream.local",
                timeout=None,
            )

    def _send(self, method: str, path: str, payload: Optional[dict]):
        if self._loop is None:
            return self._client.request(method, path, json=payload)
        return self._loop.run_until_complete(self._client.request(method, path, json=payload))

    def request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        resp = self._send(method, path, payload)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            if resp.status_code == 500:
                raise NumericalError(f"service error: {detail}")
            raise InputDataError(f"service rejected request ({resp.status_code}): {detail}")
        return resp.json()

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, payload)

    def close(self) -> None:
        if self._loop is None:
            self._client.close()
        else:
            self._loop.run_until_complete(self._client.aclose())
            self._loop.close()


def _out_handle(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _emit(handle, record: dict) -> None:
    handle.write(dump_record(record))
    handle.write("\n")
    handle.flush()


def _load_cfg(config: Optional[str]) -> dict:
    return load_config_file(config) if config else {}


def _parse_bands(text: Optional[str]) -> Optional[list[dict]]:
    if text is None:
        return None
    bands = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 3:
            raise InputDataError(f"band {chunk!r} must be name:lo:hi")
        bands.append({"name": parts[0], "lo": float(parts[1]), "hi": float(parts[2])})
    return bands


def _parse_events(text: Optional[str]) -> Optional[list[dict]]:
    if text is None:
        return None
    events = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 2:
            raise InputDataError(f"event {chunk!r} must be label:time")
        events.append({"label": parts[0], "time": int(parts[1])})
    return events


def _estimator_payload(cfg: dict, p: int, method, lam, beta, q_sigma, order) -> dict:
    merged = dict(cfg)
    if order is not None:
        merged["k"] = order
    if method is not None:
        merged["method"] = method
    if lam is not None or beta is not None:
        pen = dict(merged.get("penalty") or {})
        if lam is not None:
            pen["lambda"] = lam
        if beta is not None:
            pen["beta"] = beta
        merged["penalty"] = pen
    if q_sigma is not None:
        merged["q_sigma"] = q_sigma
    merged.setdefault("p", p)
    run = parse_run_config(merged)
    payload = {"method": run.method, "p": p, "k": run.k}
    if run.penalty is not None:
        payload["penalty"] = {"lambda": run.penalty.lam, "beta": run.penalty.beta}
    if run.q_sigma is not None:
        payload["q_sigma"] = run.q_sigma
    return payload


@click.group()
def main() -> None:
    """Streaming tv-VAR estimation, connectivity and benchmarks."""


_server_opt = click.option("--server", default=None, help="Remote service URL (default: in-process).")
_config_opt = click.option("--config", "-c", default=None, help="YAML/JSON config file; flags win.")
_output_opt = click.option("--output", "-o", default=None, help="Output path (default: stdout).")
_seed_opt = click.option("--seed", type=int, default=None, help="RNG seed override.")


@main.command()
@_config_opt
@_output_opt
@click.option("--coeffs-out", default=None, help="Also write the true coefficient path (.npz).")
@_seed_opt
@_server_opt
@_mapped
def simulate(config, output, coeffs_out, seed, server):
    """Generate a synthetic series (CSV) from a simulation config."""
    cfg = _load_cfg(config)
    sim = dict(cfg.get("sim", cfg))
    if seed is not None:
        sim["seed"] = seed
    sim_cfg = parse_sim_config(sim)
    client = ServiceClient(server)
    try:
        resp = client.post(
            "/simulate",
            {"sim": sim_cfg.model_dump(by_alias=True), "include_coeffs": coeffs_out is not None},
        )
    finally:
        client.close()
    values = np.asarray(resp["values"], dtype=float)
    if output is None or output == "-":
        write_csv(sys.stdout, resp["channels"], values)
    else:
        write_csv(output, resp["channels"], values)
    if coeffs_out is not None:
        c = resp["coeffs"]
        path = np.asarray(c["data"], dtype=float).reshape(c["t_total"], c["rows"], c["cols"])
        np.savez(coeffs_out, coeffs=path)
        click.echo(f"wrote coefficient path {path.shape} to {coeffs_out}", err=True)


@main.command()
@click.option("--input", "-i", "input_", default=None, help="CSV input (default: stdin).")
@_output_opt
@_config_opt
@click.option("--method", type=click.Choice(["sope", "gsope", "kf"]), default=None)
@click.option("--lambda", "lam", type=float, default=None, help="Smoothing strength.")
@click.option("--beta", type=float, default=None, help="Momentum weight in [0, 1].")
@click.option("--q-sigma", type=float, default=None, help="KF state-noise scale.")
@click.option("--order", type=int, default=None, help="VAR order K.")
@click.option("--chunk", type=int, default=1, show_default=True, help="Samples per request.")
@_server_opt
@_mapped
def estimate(input_, output, config, method, lam, beta, q_sigma, order, chunk, server):
    """Stream coefficient estimates for a CSV series, one record per step."""
    if chunk < 1:
        raise InputDataError(f"--chunk must be >= 1, got {chunk}")
    cfg = _load_cfg(config)
    source = sys.stdin if input_ in (None, "-") else input_
    stream = iter_csv_samples(source)
    channels = next(stream)
    payload = _estimator_payload(cfg, len(channels), method, lam, beta, q_sigma, order)
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        created = client.post("/sessions", {"estimator": payload})
        sid = created["session_id"]
        batch: list[list[float]] = []
        for sample in stream:
            batch.append(sample.values.tolist())
            if len(batch) >= chunk:
                for rec in client.post(f"/sessions/{sid}/samples", {"values": batch})["records"]:
                    _emit(out, rec)
                batch = []
        if batch:
            for rec in client.post(f"/sessions/{sid}/samples", {"values": batch})["records"]:
                _emit(out, rec)
        client.request("DELETE", f"/sessions/{sid}")
    finally:
        if owned:
            out.close()
        client.close()


@main.command()
@click.option("--input", "-i", "input_", default=None, help="CSV input (default: stdin).")
@_output_opt
@_config_opt
@click.option("--method", type=click.Choice(["sope", "gsope", "kf"]), default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--q-sigma", type=float, default=None)
@click.option("--order", type=int, default=None)
@click.option("--omega-s", type=float, default=None, help="Sampling frequency (Hz).")
@click.option("--grid-spacing", type=float, default=None, help="Frequency grid spacing (Hz).")
@click.option("--bands", default=None, help="Bands as name:lo:hi[,name:lo:hi...].")
@click.option("--partial-squared", is_flag=True, help="Report squared partial coherence.")
@_server_opt
@_mapped
def connectivity(input_, output, config, method, lam, beta, q_sigma, order, omega_s,
                 grid_spacing, bands, partial_squared, server):
    """Per-step band-averaged connectivity records for a CSV series."""
    cfg = _load_cfg(config)
    source = sys.stdin if input_ in (None, "-") else input_
    stream = iter_csv_samples(source)
    channels = next(stream)
    values = [s.values.tolist() for s in stream]
    if not values:
        raise InputDataError("CSV has a header but no data rows")
    payload = _estimator_payload(cfg, len(channels), method, lam, beta, q_sigma, order)
    freq = dict(cfg.get("freq") or {})
    if omega_s is not None:
        freq["omega_s"] = omega_s
    if grid_spacing is not None:
        freq["grid_spacing"] = grid_spacing
    parsed_bands = _parse_bands(bands)
    if parsed_bands is not None:
        freq["bands"] = parsed_bands
    if "omega_s" not in freq:
        raise InputDataError("sampling frequency required (--omega-s or freq.omega_s in config)")
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        resp = client.post(
            "/connectivity",
            {
                "estimator": payload,
                "freq": freq,
                "values": values,
                "partial_squared": partial_squared,
            },
        )
        for rec in resp["records"]:
            _emit(out, rec)
    finally:
        if owned:
            out.close()
        client.close()


@main.command()
@click.option("--input", "-i", "input_", default=None, help="Connectivity records (default: stdin).")
@_output_opt
@_config_opt
@click.option("--events", default=None, help="Events as label:time[,label:time...].")
@click.option("--window", type=int, default=None, help="Half-width in samples.")
@click.option("--quantile", "quantiles", type=float, multiple=True, help="Threshold quantile(s).")
@click.option("--measure", "measures", multiple=True,
              type=click.Choice(["coherence", "partial_coherence", "pdc"]))
@click.option("--band", "bands", multiple=True, help="Band name(s); default: all present.")
@click.option("--quantile-mode", type=click.Choice(["epoch", "pre-event"]), default=None)
@_server_opt
@_mapped
def network(input_, output, config, events, window, quantiles, measures, bands,
            quantile_mode, server):
    """Classify before/after edges around events from connectivity records."""
    cfg = _load_cfg(config)
    records = read_records(sys.stdin if input_ in (None, "-") else input_)
    ev = dict(cfg.get("events") or {})
    parsed = _parse_events(events)
    if parsed is not None:
        ev["events"] = parsed
    if window is not None:
        ev["window"] = window
    if not ev.get("events"):
        raise InputDataError("no events given (--events or events.events in config)")
    payload = {
        "records": records,
        "events": ev,
        "quantiles": list(quantiles) if quantiles else [cfg.get("quantile", 0.75)],
        "measures": list(measures) if measures else ["coherence"],
        "quantile_mode": quantile_mode or cfg.get("quantile_mode", "epoch"),
    }
    if bands:
        payload["bands"] = list(bands)
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        for rec in client.post("/network", payload)["records"]:
            _emit(out, rec)
    finally:
        if owned:
            out.close()
        client.close()


@main.group()
def bench() -> None:
    """Timing tables, MSE sweeps and the hyperparameter transfer study."""


_dump_opt = click.option(
    "--dump-npz", default=None, help="Also write results as a compact binary .npz dump."
)


def _dump_timing_npz(path: str, records: list[dict]) -> None:
    rows = [r for r in records if not r.get("refused")]
    np.savez(
        path,
        method=np.array([r["method"] for r in rows]),
        p=np.array([r["p"] for r in rows]),
        k=np.array([r["k"] for r in rows]),
        mean_ms=np.array([r["mean_ms"] for r in rows]),
        p50_ms=np.array([r["p50_ms"] for r in rows]),
        p95_ms=np.array([r["p95_ms"] for r in rows]),
        refused_method=np.array([r["method"] for r in records if r.get("refused")]),
        refused_p=np.array([r["p"] for r in records if r.get("refused")]),
        refused_k=np.array([r["k"] for r in records if r.get("refused")]),
    )


@bench.command("time")
@_config_opt
@_output_opt
@click.option("--cells", default=None, help="Cells as method:p:k[,method:p:k...].")
@click.option("--iters", type=int, default=None)
@click.option("--warmup-iters", type=int, default=None)
@click.option("--budget-gib", type=float, default=None, help="KF covariance memory budget.")
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--q-sigma", type=float, default=None)
@_dump_opt
@_seed_opt
@_server_opt
@_mapped
def bench_time(config, output, cells, iters, warmup_iters, budget_gib, lam, beta,
               q_sigma, dump_npz, seed, server):
    """Per-iteration timing rows; the aligned table goes to stderr."""
    cfg = _load_cfg(config)
    cell_list = cfg.get("cells", [])
    if cells:
        cell_list = []
        for chunk in cells.split(","):
            parts = chunk.strip().split(":")
            if len(parts) != 3:
                raise InputDataError(f"cell {chunk!r} must be method:p:k")
            cell_list.append({"method": parts[0], "p": int(parts[1]), "k": int(parts[2])})
    if not cell_list:
        raise InputDataError("no timing cells given (--cells or cells in config)")
    payload: dict = {"cells": cell_list}
    for key, val in (("iters", iters if iters is not None else cfg.get("iters")),
                     ("warmup_iters", warmup_iters if warmup_iters is not None else cfg.get("warmup_iters")),
                     ("seed", seed if seed is not None else cfg.get("seed")),
                     ("q_sigma", q_sigma if q_sigma is not None else cfg.get("q_sigma"))):
        if val is not None:
            payload[key] = val
    if budget_gib is not None:
        payload["mem_budget_bytes"] = int(budget_gib * 2 ** 30)
    elif cfg.get("mem_budget_bytes") is not None:
        payload["mem_budget_bytes"] = cfg["mem_budget_bytes"]
    if lam is not None:
        payload["penalty"] = {"lambda": lam, "beta": beta if beta is not None else 0.9}
    elif cfg.get("penalty") is not None:
        payload["penalty"] = cfg["penalty"]
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        resp = client.post("/bench/time", payload)
        for rec in resp["records"]:
            _emit(out, rec)
        for table in resp["tables"].values():
            click.echo(table, err=True)
        if dump_npz:
            _dump_timing_npz(dump_npz, resp["records"])
    finally:
        if owned:
            out.close()
        client.close()


@bench.command("mse")
@_config_opt
@_output_opt
@click.option("--lams", default=None, help="Comma-separated smoothing strengths.")
@click.option("--beta", type=float, default=None)
@click.option("--q-sigmas", default=None, help="Comma-separated KF noise scales.")
@click.option("--replicates", type=int, default=None)
@click.option("--n-jobs", type=int, default=None)
@_dump_opt
@_seed_opt
@_server_opt
@_mapped
def bench_mse(config, output, lams, beta, q_sigmas, replicates, n_jobs, dump_npz, seed, server):
    """Per-parameter MSE over hyperparameter grids on a simulated design."""
    cfg = _load_cfg(config)
    if "sim" not in cfg:
        raise InputDataError("bench mse requires a 'sim' section in the config")
    payload: dict = {"sim": parse_sim_config(cfg["sim"]).model_dump(by_alias=True)}
    payload["lams"] = ([float(v) for v in lams.split(",")] if lams else cfg.get("lams", []))
    payload["q_sigmas"] = (
        [float(v) for v in q_sigmas.split(",")] if q_sigmas else cfg.get("q_sigmas", [])
    )
    for key, val in (("beta", beta if beta is not None else cfg.get("beta")),
                     ("replicates", replicates if replicates is not None else cfg.get("replicates")),
                     ("n_jobs", n_jobs if n_jobs is not None else cfg.get("n_jobs")),
                     ("seed", seed if seed is not None else cfg.get("seed"))):
        if val is not None:
            payload[key] = val
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        records = client.post("/bench/mse", payload)["records"]
        for rec in records:
            _emit(out, rec)
        if dump_npz:
            np.savez(
                dump_npz,
                method=np.array([r["method"] for r in records]),
                hyper=np.array(
                    [r["hyper"].get("lam", r["hyper"].get("q_sigma", float("nan")))
                     for r in records]
                ),
                per_param_mse=np.array([r["per_param_mse"] for r in records]),
            )
    finally:
        if owned:
            out.close()
        client.close()


@bench.command("transfer")
@_config_opt
@_output_opt
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--q-sigma", type=float, default=None)
@click.option("--replicates", type=int, default=None)
@click.option("--entries", default=None, help="Entries as row:col:lag[,row:col:lag...].")
@click.option("--n-jobs", type=int, default=None)
@_dump_opt
@_seed_opt
@_server_opt
@_mapped
def bench_transfer(config, output, lam, beta, q_sigma, replicates, entries, n_jobs,
                   dump_npz, seed, server):
    """Envelope report for hyperparameters transferred to a larger design."""
    cfg = _load_cfg(config)
    if "sim" not in cfg:
        raise InputDataError("bench transfer requires a 'sim' section in the config")
    pen = dict(cfg.get("penalty") or {})
    if lam is not None:
        pen["lambda"] = lam
    if beta is not None:
        pen["beta"] = beta
    if not pen:
        raise InputDataError("transfer requires --lambda/--beta (or penalty in config)")
    payload: dict = {
        "sim": parse_sim_config(cfg["sim"]).model_dump(by_alias=True),
        "penalty": pen,
        "q_sigma": q_sigma if q_sigma is not None else cfg.get("q_sigma"),
    }
    if payload["q_sigma"] is None:
        raise InputDataError("transfer requires --q-sigma (or q_sigma in config)")
    if entries:
        ents = []
        for chunk in entries.split(","):
            parts = chunk.strip().split(":")
            if len(parts) != 3:
                raise InputDataError(f"entry {chunk!r} must be row:col:lag")
            ents.append([int(parts[0]), int(parts[1]), int(parts[2])])
        payload["entries"] = ents
    for key, val in (("replicates", replicates if replicates is not None else cfg.get("replicates")),
                     ("n_jobs", n_jobs if n_jobs is not None else cfg.get("n_jobs")),
                     ("seed", seed if seed is not None else cfg.get("seed"))):
        if val is not None:
            payload[key] = val
    client = ServiceClient(server)
    out, owned = _out_handle(output)
    try:
        report = client.post("/bench/transfer", payload)
        _emit(out, report)
        if dump_npz:
            arrays = {}
            for method, envs in report["envelopes"].items():
                for env in envs:
                    key = f"{method}_{env['row']}_{env['col']}_{env['lag']}"
                    for part in ("lo", "med", "hi", "truth"):
                        arrays[f"{key}_{part}"] = np.asarray(env[part])
            np.savez(dump_npz, **arrays)
    finally:
        if owned:
            out.close()
        client.close()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8317, show_default=True)
@_mapped
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
