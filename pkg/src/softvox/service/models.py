"""Request and response schemas of the workbench service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    config_text: str | None = None
    config_path: str | None = None
    out_dir: str
    master_seed: int | None = None
    repetitions: int | None = None


class ResumeRequest(BaseModel):
    snapshot_path: str


class JobCreated(BaseModel):
    job_id: str


class JobProgress(BaseModel):
    repetition: int | None = None
    generation: int | None = None
    generations: int | None = None


class RepetitionSummary(BaseModel):
    repetition: int
    ok: bool
    error: str | None = None
    best_distance: float | None = None


class JobStatus(BaseModel):
    job_id: str
    kind: Literal["run", "resume"]
    state: Literal["running", "done", "failed"]
    error: str | None = None
    progress: JobProgress = Field(default_factory=JobProgress)
    repetitions: list[RepetitionSummary] = Field(default_factory=list)


class ObjectivesModel(BaseModel):
    distance: float
    energy: float
    material: int


class DescriptorsModel(BaseModel):
    s_x: float
    s_y: float
    s_z: float
    global_symmetry: float
    branching_index: float
    shape_entropy: float
    body_volume: float
    hull_volume: float


class ReplayRequest(BaseModel):
    genome_path: str
    environment: Literal["land", "water"]
    trace_path: str | None = None
    config_text: str | None = None
    config_path: str | None = None


class ReplayResponse(BaseModel):
    objectives: ObjectivesModel
    descriptors: DescriptorsModel
    frequency: float
    env_mode: str
    total_steps: int
    trace_rows: int
    trace_path: str | None


class DescriptorsRequest(BaseModel):
    body_path: str | None = None
    body_text: str | None = None
    voxel_size: float = 0.01


class AnalyzeRequest(BaseModel):
    run_dirs: list[str]
    out_dir: str
    confidence_level: float = 0.95
    bootstrap_resamples: int = 10_000
    seed: int = 0


class AnalyzeResponse(BaseModel):
    tables: list[str]
