"""FastAPI service wrapping the workbench.

Experiment runs and resumes are long-lived, so they execute as
background jobs: submitting returns a job id, and clients poll
GET /jobs/{id}.  Replay, descriptors, and analysis answer synchronously.
All file paths in requests are resolved on the service host; the CLI
runs the app in-process by default, so paths behave like local ones.

Validation failures return 400/422 (client error); a job that starts
and then fails reports state "failed" with the error message.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import Config, ConfigError, parse_config
from ..descriptors import DescriptorSet
from ..harness import RepetitionResult, analyze, body_descriptors, replay, run_experiment
from ..bodyfile import BodyParseError, parse_body
from ..descriptors import compute_descriptors
from ..evolution import ObjectiveVector
from ..genomefile import ParseError, VersionMismatch
from ..phenotype import InfeasiblePhenotype
from ..rundir import CorruptSnapshot, SnapshotVersionMismatch, read_snapshot
from .models import (
    AnalyzeRequest,
    AnalyzeResponse,
    DescriptorsModel,
    DescriptorsRequest,
    HealthResponse,
    JobCreated,
    JobProgress,
    JobStatus,
    ObjectivesModel,
    RepetitionSummary,
    ReplayRequest,
    ReplayResponse,
    ResumeRequest,
    RunRequest,
)


@dataclass
class _Job:
    id: str
    kind: str
    state: str = "running"
    error: str | None = None
    progress: dict = field(default_factory=dict)
    repetitions: list = field(default_factory=list)
    thread: threading.Thread | None = None


class JobRegistry:
    def __init__(self) -> None:
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, work) -> str:
        job = _Job(id=uuid.uuid4().hex, kind=kind)

        def runner() -> None:
            try:
                results = work(job)
                with self._lock:
                    job.repetitions = results
                    job.state = "failed" if any(not r.ok for r in results) else "done"
                    if job.state == "failed":
                        job.error = "; ".join(r.error or "?" for r in results if not r.ok)
            except Exception as exc:  # noqa: BLE001 - reported through the job
                with self._lock:
                    job.state = "failed"
                    job.error = str(exc)

        job.thread = threading.Thread(target=runner, daemon=True)
        with self._lock:
            self._jobs[job.id] = job
        job.thread.start()
        return job.id

    def get(self, job_id: str) -> _Job | None:
        with self._lock:
            return self._jobs.get(job_id)


def _objectives_model(obj: ObjectiveVector) -> ObjectivesModel:
    return ObjectivesModel(distance=obj.distance, energy=obj.energy, material=obj.material)


def _descriptors_model(d: DescriptorSet) -> DescriptorsModel:
    return DescriptorsModel(
        s_x=d.s_x,
        s_y=d.s_y,
        s_z=d.s_z,
        global_symmetry=d.global_symmetry,
        branching_index=d.branching_index,
        shape_entropy=d.shape_entropy,
        body_volume=d.body_volume,
        hull_volume=d.hull_volume,
    )


def _load_request_config(config_text: str | None, config_path: str | None) -> Config:
    if config_text is not None and config_path is not None:
        raise HTTPException(400, "give config_text or config_path, not both")
    try:
        if config_path is not None:
            path = Path(config_path)
            if not path.exists():
                raise HTTPException(400, f"config file not found: {config_path}")
            return parse_config(path.read_text())
        return parse_config(config_text or "")
    except ConfigError as exc:
        raise HTTPException(400, str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="softvox", version=__version__)
    jobs = JobRegistry()

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/runs", response_model=JobCreated)
    def submit_run(request: RunRequest) -> JobCreated:
        config = _load_request_config(request.config_text, request.config_path)
        if request.master_seed is not None:
            config = replace(config, master_seed=request.master_seed)
        if request.repetitions is not None:
            if request.repetitions < 1:
                raise HTTPException(400, "repetitions must be >= 1")
            config = replace(config, repetitions=request.repetitions)
        out_dir = request.out_dir

        def work(job: _Job) -> list[RepetitionResult]:
            def progress(update: dict) -> None:
                job.progress = update

            return run_experiment(config, out_dir, progress=progress)

        return JobCreated(job_id=jobs.submit("run", work))

    @app.post("/resume", response_model=JobCreated)
    def submit_resume(request: ResumeRequest) -> JobCreated:
        path = Path(request.snapshot_path)
        if not path.exists():
            raise HTTPException(400, f"snapshot not found: {request.snapshot_path}")
        try:
            read_snapshot(path)  # validate before accepting the job
        except (CorruptSnapshot, SnapshotVersionMismatch) as exc:
            raise HTTPException(400, str(exc)) from exc

        def work(job: _Job) -> list[RepetitionResult]:
            from ..harness import resume as resume_run

            def progress(update: dict) -> None:
                job.progress = update

            return [resume_run(path, progress=progress)]

        return JobCreated(job_id=jobs.submit("resume", work))

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str) -> JobStatus:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no such job: {job_id}")
        return JobStatus(
            job_id=job.id,
            kind=job.kind,
            state=job.state,
            error=job.error,
            progress=JobProgress(**job.progress),
            repetitions=[
                RepetitionSummary(
                    repetition=r.repetition,
                    ok=r.ok,
                    error=r.error,
                    best_distance=r.best_distance,
                )
                for r in job.repetitions
            ],
        )

    @app.post("/replay", response_model=ReplayResponse)
    def run_replay(request: ReplayRequest) -> ReplayResponse:
        config = _load_request_config(request.config_text, request.config_path)
        if not Path(request.genome_path).exists():
            raise HTTPException(400, f"genome not found: {request.genome_path}")
        try:
            report = replay(
                request.genome_path, request.environment, request.trace_path, config
            )
        except (ParseError, VersionMismatch) as exc:
            raise HTTPException(400, str(exc)) from exc
        except InfeasiblePhenotype as exc:
            raise HTTPException(422, f"infeasible phenotype: {exc}") from exc
        return ReplayResponse(
            objectives=_objectives_model(report.objectives),
            descriptors=_descriptors_model(report.descriptors),
            frequency=report.frequency,
            env_mode=report.env_mode,
            total_steps=report.total_steps,
            trace_rows=report.trace_rows,
            trace_path=report.trace_path,
        )

    @app.post("/descriptors", response_model=DescriptorsModel)
    def run_descriptors(request: DescriptorsRequest) -> DescriptorsModel:
        if (request.body_path is None) == (request.body_text is None):
            raise HTTPException(400, "give body_path or body_text, not both")
        try:
            if request.body_text is not None:
                body = parse_body(request.body_text)
                if body.full_count == 0:
                    raise HTTPException(422, "body has no full voxels")
                return _descriptors_model(compute_descriptors(body, request.voxel_size))
            path = Path(request.body_path)
            if not path.exists():
                raise HTTPException(400, f"body file not found: {request.body_path}")
            return _descriptors_model(body_descriptors(path, request.voxel_size))
        except BodyParseError as exc:
            raise HTTPException(400, str(exc)) from exc

    @app.post("/analyze", response_model=AnalyzeResponse)
    def run_analyze(request: AnalyzeRequest) -> AnalyzeResponse:
        for d in request.run_dirs:
            if not Path(d).is_dir():
                raise HTTPException(400, f"run directory not found: {d}")
        try:
            tables = analyze(
                request.run_dirs,
                request.out_dir,
                level=request.confidence_level,
                resamples=request.bootstrap_resamples,
                seed=request.seed,
            )
        except FileNotFoundError as exc:
            raise HTTPException(400, str(exc)) from exc
        return AnalyzeResponse(tables=tables)

    return app


app = create_app()
