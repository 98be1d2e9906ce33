"""Run directory layout, the evaluation log, and resumable snapshots.

A run directory holds one experiment:

    out_dir/
      config.snapshot          # effective configuration, reloadable
      rep_000/
        runlog.csv             # one row per evaluation, fixed schema
        genomes/               # final population, one file each
        snapshots/             # resume points (JSON + sha256 checksum)
        best/                  # champion genome + summary

Rows are written in a deterministic order and floats with shortest
round-trip repr, so rerunning a configuration reproduces runlog.csv
byte for byte.  Snapshots embed a format version, the configuration
hash, and the byte offset of the log at their generation; resuming
truncates the log to that offset and continues identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .cppn import Genome
from .evolution import EvalRecord, Individual, ObjectiveVector, RunLog
from .genomefile import parse_genome, serialize_genome

RUNLOG_VERSION = 1
SNAPSHOT_VERSION = 1

RUNLOG_COLUMNS = (
    "generation",
    "individual_id",
    "parent_id",
    "env_mode",
    "distance",
    "energy",
    "material",
    "feasible",
    "s_x",
    "s_y",
    "s_z",
    "G_SI",
    "BI",
    "shape_entropy",
    "frequency",
    "eval_seed",
)


class CorruptSnapshot(Exception):
    pass


class SnapshotVersionMismatch(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def record_row(record: EvalRecord) -> str:
    d = record.descriptors
    cells = (
        record.generation,
        record.individual_id,
        -1 if record.parent_id is None else record.parent_id,
        record.env_mode,
        record.distance,
        record.energy,
        record.material,
        record.feasible,
        d.s_x if d else None,
        d.s_y if d else None,
        d.s_z if d else None,
        d.global_symmetry if d else None,
        d.branching_index if d else None,
        d.shape_entropy if d else None,
        record.frequency,
        record.eval_seed,
    )
    return ",".join(_fmt(c) for c in cells)


class RunLogWriter:
    """Single append-only writer for one repetition's runlog.csv."""

    def __init__(self, path: str | Path, resume_offset: int | None = None):
        self.path = Path(path)
        if resume_offset is None:
            self.path.write_text(
                f"# softvox-runlog {RUNLOG_VERSION}\n" + ",".join(RUNLOG_COLUMNS) + "\n"
            )
        else:
            with open(self.path, "r+b") as fh:
                fh.truncate(resume_offset)
        self._fh = open(self.path, "a", newline="")

    def write_records(self, records: list[EvalRecord]) -> None:
        for record in records:
            self._fh.write(record_row(record) + "\n")
        self._fh.flush()

    def offset(self) -> int:
        self._fh.flush()
        return self._fh.tell()

    def close(self) -> None:
        self._fh.close()


@dataclass(frozen=True)
class LoggedRun:
    """A runlog read back from disk, duck-compatible with RunLog for
    aggregation (run_id plus records with objective fields)."""

    run_id: str
    records: list[EvalRecord]


def _parse_optional_float(cell: str) -> float | None:
    return None if cell == "" else float(cell)


def read_runlog(path: str | Path, run_id: str | None = None) -> LoggedRun:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# softvox-runlog"):
        raise ValueError(f"{path}: not a runlog file")
    if lines[0].split()[-1] != str(RUNLOG_VERSION):
        raise ValueError(f"{path}: unsupported runlog version")
    if lines[1] != ",".join(RUNLOG_COLUMNS):
        raise ValueError(f"{path}: unexpected runlog schema")
    records = []
    for line in lines[2:]:
        cells = line.split(",")
        row = dict(zip(RUNLOG_COLUMNS, cells))
        parent = int(row["parent_id"])
        material = row["material"]
        records.append(
            EvalRecord(
                generation=int(row["generation"]),
                individual_id=int(row["individual_id"]),
                parent_id=None if parent < 0 else parent,
                env_mode=row["env_mode"],
                feasible=row["feasible"] == "1",
                distance=_parse_optional_float(row["distance"]),
                energy=_parse_optional_float(row["energy"]),
                material=None if material == "" else int(material),
                descriptors=None,
                frequency=_parse_optional_float(row["frequency"]),
                eval_seed=int(row["eval_seed"]),
            )
        )
    return LoggedRun(run_id=run_id or path.parent.name, records=records)


# ---------------------------------------------------------------------------
# snapshots


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode()).hexdigest()


def _individual_payload(ind: Individual) -> dict:
    obj = ind.objectives
    return {
        "id": ind.id,
        "parent_id": ind.parent_id,
        "eval_seed": ind.eval_seed,
        "objectives": None if obj is None else {
            "distance": obj.distance,
            "energy": obj.energy,
            "material": obj.material,
        },
        "genome": serialize_genome(ind.genome),
    }


def _individual_from_payload(payload: dict) -> Individual:
    obj = payload["objectives"]
    return Individual(
        id=payload["id"],
        parent_id=payload["parent_id"],
        genome=parse_genome(payload["genome"]),
        objectives=None if obj is None else ObjectiveVector(
            distance=obj["distance"], energy=obj["energy"], material=obj["material"]
        ),
        eval_seed=payload["eval_seed"],
    )


def write_snapshot(
    path: str | Path,
    generation: int,
    population: list[Individual],
    next_id: int,
    run_seed: int,
    repetition: int,
    config_text: str,
    log_offset: int,
) -> None:
    payload = {
        "format_version": SNAPSHOT_VERSION,
        "generation": generation,
        "repetition": repetition,
        "run_seed": run_seed,
        "next_id": next_id,
        "log_offset": log_offset,
        "config_sha256": config_digest(config_text),
        "config_text": config_text,
        "population": [_individual_payload(ind) for ind in population],
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(body.encode()).hexdigest()
    Path(path).write_text(json.dumps({"checksum": checksum, "snapshot": body}))


@dataclass
class Snapshot:
    generation: int
    repetition: int
    run_seed: int
    next_id: int
    log_offset: int
    config_text: str
    population: list[Individual]


def read_snapshot(path: str | Path) -> Snapshot:
    try:
        wrapper = json.loads(Path(path).read_text())
        body = wrapper["snapshot"]
        checksum = wrapper["checksum"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptSnapshot(f"{path}: unreadable snapshot") from exc
    if hashlib.sha256(body.encode()).hexdigest() != checksum:
        raise CorruptSnapshot(f"{path}: checksum mismatch")
    payload = json.loads(body)
    if payload.get("format_version") != SNAPSHOT_VERSION:
        raise SnapshotVersionMismatch(
            f"{path}: snapshot format {payload.get('format_version')} unsupported"
        )
    return Snapshot(
        generation=payload["generation"],
        repetition=payload["repetition"],
        run_seed=payload["run_seed"],
        next_id=payload["next_id"],
        log_offset=payload["log_offset"],
        config_text=payload["config_text"],
        population=[_individual_from_payload(p) for p in payload["population"]],
    )


def repetition_dir(out_dir: str | Path, repetition: int) -> Path:
    return Path(out_dir) / f"rep_{repetition:03d}"
