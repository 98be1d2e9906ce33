"""Thin command-line client for the workbench service.

Every subcommand talks to the HTTP API.  Without --server the app runs
in-process over an ASGI transport, so commands work offline with the
same request/response path a remote deployment uses; with --server URL
they address a running `softvox serve` instance (file paths are then
resolved on the server's filesystem).

Exit codes: 0 success, 1 validation error, 2 runtime failure.

The only environment override honored is SOFTVOX_OUT_DIR, which replaces
the --out argument of `run` and `analyze`.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

import httpx

OK = 0
VALIDATION_ERROR = 1
RUNTIME_FAILURE = 2

OUT_DIR_ENV = "SOFTVOX_OUT_DIR"
POLL_SECONDS = 0.25


class ClientError(Exception):
    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)


def _client(server: str | None) -> httpx.AsyncClient:
    if server:
        return httpx.AsyncClient(base_url=server, timeout=60.0)
    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())
    return httpx.AsyncClient(transport=transport, base_url="http://softvox", timeout=60.0)


def _check(response: httpx.Response) -> dict:
    if response.status_code >= 500:
        raise ClientError(RUNTIME_FAILURE, f"server error: {response.text}")
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except json.JSONDecodeError:
            detail = response.text
        raise ClientError(VALIDATION_ERROR, str(detail))
    return response.json()


async def _wait_for_job(client: httpx.AsyncClient, job_id: str) -> dict:
    last_line = ""
    while True:
        status = _check(await client.get(f"/jobs/{job_id}"))
        progress = status.get("progress") or {}
        if progress.get("generation") is not None:
            line = (
                f"repetition {progress.get('repetition')} "
                f"generation {progress.get('generation')}/{progress.get('generations')}"
            )
            if line != last_line:
                print(line, file=sys.stderr)
                last_line = line
        if status["state"] != "running":
            return status
        await asyncio.sleep(POLL_SECONDS)


def _finish_job(status: dict) -> int:
    for rep in status.get("repetitions", []):
        mark = "ok" if rep["ok"] else f"FAILED ({rep['error']})"
        best = rep.get("best_distance")
        best_text = f" best_distance={best}" if best is not None else ""
        print(f"repetition {rep['repetition']}: {mark}{best_text}")
    if status["state"] != "done":
        print(f"job failed: {status.get('error')}", file=sys.stderr)
        return RUNTIME_FAILURE
    return OK


def _out_dir(value: str) -> str:
    return os.environ.get(OUT_DIR_ENV, value)


async def _cmd_run(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        raise ClientError(VALIDATION_ERROR, f"config file not found: {args.config}")
    payload = {
        "config_text": config_path.read_text(),
        "out_dir": _out_dir(args.out),
        "master_seed": args.seed,
        "repetitions": args.repetitions,
    }
    async with _client(args.server) as client:
        job = _check(await client.post("/runs", json=payload))
        status = await _wait_for_job(client, job["job_id"])
    return _finish_job(status)


async def _cmd_resume(args) -> int:
    async with _client(args.server) as client:
        job = _check(await client.post("/resume", json={"snapshot_path": args.snapshot}))
        status = await _wait_for_job(client, job["job_id"])
    return _finish_job(status)


async def _cmd_replay(args) -> int:
    payload = {
        "genome_path": args.genome,
        "environment": args.env,
        "trace_path": args.trace,
    }
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ClientError(VALIDATION_ERROR, f"config file not found: {args.config}")
        payload["config_text"] = path.read_text()
    async with _client(args.server) as client:
        result = _check(await client.post("/replay", json=payload))
    obj = result["objectives"]
    print(f"environment {result['env_mode']}")
    print(f"distance {obj['distance']}")
    print(f"energy {obj['energy']}")
    print(f"material {obj['material']}")
    print(f"frequency {result['frequency']}")
    for key, value in result["descriptors"].items():
        print(f"{key} {value}")
    if result["trace_path"]:
        print(f"trace {result['trace_path']} rows {result['trace_rows']}")
    return OK


async def _cmd_descriptors(args) -> int:
    payload = {"body_path": args.body, "voxel_size": args.voxel_size}
    async with _client(args.server) as client:
        result = _check(await client.post("/descriptors", json=payload))
    for key, value in result.items():
        print(f"{key} {value}")
    return OK


async def _cmd_analyze(args) -> int:
    payload = {"run_dirs": args.runs, "out_dir": _out_dir(args.out)}
    async with _client(args.server) as client:
        result = _check(await client.post("/analyze", json=payload))
    for table in result["tables"]:
        print(table)
    return OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softvox",
        description="evolve, replay, and analyze voxel soft robots",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", help="service URL; default runs the app in-process")

    p = sub.add_parser("run", help="execute an experiment configuration")
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--seed", type=int, help="override experiment.master_seed")
    p.add_argument("--repetitions", type=int, help="override experiment.repetitions")
    add_server(p)

    p = sub.add_parser("resume", help="continue a run from a snapshot")
    p.add_argument("--snapshot", required=True, help="snapshot file")
    add_server(p)

    p = sub.add_parser("replay", help="re-score a saved genome and trace its motion")
    p.add_argument("--genome", required=True, help="genome file")
    p.add_argument("--env", required=True, choices=["land", "water"])
    p.add_argument("--trace", help="trace CSV to write")
    p.add_argument("--config", help="configuration file (defaults otherwise)")
    add_server(p)

    p = sub.add_parser("descriptors", help="morphological descriptors of a body file")
    p.add_argument("--body", required=True, help="body file")
    p.add_argument("--voxel-size", type=float, default=0.01, dest="voxel_size")
    add_server(p)

    p = sub.add_parser("analyze", help="summarize finished run directories")
    p.add_argument("--runs", required=True, nargs="+", help="one or more run directories")
    p.add_argument("--out", required=True, help="directory for analysis tables")
    add_server(p)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)

    return parser


_ASYNC_COMMANDS = {
    "run": _cmd_run,
    "resume": _cmd_resume,
    "replay": _cmd_replay,
    "descriptors": _cmd_descriptors,
    "analyze": _cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        return asyncio.run(_ASYNC_COMMANDS[args.command](args))
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return RUNTIME_FAILURE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
