"""Operational shell: experiment runs, resume, replay, and analysis.

run_experiment executes every repetition of a configuration into a run
directory; each repetition derives its own seed from the master seed, so
repetitions are independent and reproducible one by one.  resume
continues a repetition from a snapshot and produces a runlog byte-equal
to the uninterrupted run.  replay re-scores a saved genome under the
standard protocol and writes a motion trace.  analyze reduces finished
run directories to comparison tables and plot-ready CSVs.
"""

from __future__ import annotations

import itertools
import math
import re
import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeds
from .bodyfile import read_body
from .config import (
    Config,
    environment_spec,
    evolution_config,
    load_config,
    material_params,
    parse_config,
    render_config,
)
from .descriptors import DescriptorSet, compute_descriptors
from .evolution import (
    EvalRecord,
    Individual,
    ObjectiveVector,
    RunLog,
    evolve_run,
    run_evaluation,
)
from .genomefile import read_genome, write_genome
from .lattice import NumericalBlowup
from .phenotype import InfeasiblePhenotype, express
from .rundir import (
    LoggedRun,
    RunLogWriter,
    Snapshot,
    read_runlog,
    read_snapshot,
    repetition_dir,
    write_snapshot,
)
from .stats import aggregate_pareto, bonferroni_adjust, bootstrap_ci, mann_whitney_u


@dataclass
class RepetitionResult:
    repetition: int
    ok: bool
    error: str | None
    best_distance: float | None


def _best_feasible(records: list[EvalRecord]) -> EvalRecord | None:
    feasible = [r for r in records if r.feasible]
    if not feasible:
        return None
    return max(feasible, key=lambda r: (r.distance, -r.individual_id))


@dataclass
class _Champion:
    """Best surviving individual seen so far, frozen at capture time."""

    id: int
    genome: object
    objectives: ObjectiveVector
    env_mode: str
    frequency: float | None


def _write_outputs(rep_dir: Path, log: RunLog, champion: _Champion | None) -> None:
    genome_dir = rep_dir / "genomes"
    genome_dir.mkdir(exist_ok=True)
    for ind in log.final_population:
        write_genome(ind.genome, genome_dir / f"{ind.id:06d}.genome")
    if champion is not None:
        best_dir = rep_dir / "best"
        best_dir.mkdir(exist_ok=True)
        write_genome(champion.genome, best_dir / "genome.txt")
        lines = [
            f"individual_id {champion.id}",
            f"env_mode {champion.env_mode}",
            f"distance {champion.objectives.distance!r}",
            f"energy {champion.objectives.energy!r}",
            f"material {champion.objectives.material}",
            f"frequency {champion.frequency!r}",
        ]
        (best_dir / "summary.txt").write_text("\n".join(lines) + "\n")


def _run_repetition(
    config: Config,
    config_text: str,
    out_dir: Path,
    repetition: int,
    progress=None,
    resume_from: Snapshot | None = None,
) -> RepetitionResult:
    rep_dir = repetition_dir(out_dir, repetition)
    rep_dir.mkdir(parents=True, exist_ok=True)
    (rep_dir / "snapshots").mkdir(exist_ok=True)

    run_seed = seeds.mix(config.master_seed, seeds.TAG_REP, repetition)
    evo = evolution_config(config, run_seed)

    if resume_from is None:
        writer = RunLogWriter(rep_dir / "runlog.csv")
        start_generation = 0
        initial_population = None
        initial_next_id = None
    else:
        writer = RunLogWriter(rep_dir / "runlog.csv", resume_offset=resume_from.log_offset)
        start_generation = resume_from.generation
        initial_population = resume_from.population
        initial_next_id = resume_from.next_id
        _rehydrate(initial_population, evo)

    champion: list[_Champion | None] = [None]

    def on_records(records: list[EvalRecord]) -> None:
        writer.write_records(records)

    def track_champion(population: list[Individual], env_mode: str) -> None:
        for ind in population:
            if not ind.feasible:
                continue
            if champion[0] is None or ind.objectives.distance > champion[0].objectives.distance:
                champion[0] = _Champion(
                    id=ind.id,
                    genome=ind.genome,
                    objectives=ind.objectives,
                    env_mode=env_mode,
                    frequency=ind.phenotype.frequency if ind.phenotype else None,
                )

    def on_snapshot_point(generation: int, population: list[Individual], next_id: int) -> None:
        track_champion(population, evo.environment_at(generation - 1).mode.value)
        interval = config.snapshot_interval
        if interval > 0 and generation % interval == 0:
            write_snapshot(
                rep_dir / "snapshots" / f"gen_{generation:06d}.json",
                generation,
                population,
                next_id,
                run_seed,
                repetition,
                config_text,
                writer.offset(),
            )

    def on_generation(generation: int) -> None:
        if progress is not None:
            progress(
                {
                    "repetition": repetition,
                    "generation": generation,
                    "generations": config.generations,
                }
            )

    try:
        log = evolve_run(
            evo,
            run_id=f"rep_{repetition:03d}",
            on_records=on_records,
            on_generation=on_generation,
            on_snapshot_point=on_snapshot_point,
            start_generation=start_generation,
            initial_population=initial_population,
            initial_next_id=initial_next_id,
        )
        track_champion(
            log.final_population, evo.environment_at(config.generations - 1).mode.value
        )
        write_snapshot(
            rep_dir / "snapshots" / "final.json",
            config.generations,
            log.final_population,
            log.next_id,
            run_seed,
            repetition,
            config_text,
            writer.offset(),
        )
        _write_outputs(rep_dir, log, champion[0])
        best = _best_feasible(log.records)
        return RepetitionResult(
            repetition=repetition,
            ok=True,
            error=None,
            best_distance=best.distance if best else None,
        )
    except Exception as exc:  # noqa: BLE001 - repetition isolation
        (rep_dir / "error.txt").write_text(traceback.format_exc())
        return RepetitionResult(repetition=repetition, ok=False, error=str(exc), best_distance=None)
    finally:
        writer.close()


def _rehydrate(population: list[Individual], evo) -> None:
    """Recompute the derived fields a snapshot does not store."""
    for ind in population:
        try:
            ind.phenotype = express(
                ind.genome, evo.dims, evo.frequency_min, evo.frequency_max
            )
            ind.descriptors = compute_descriptors(
                ind.phenotype.body, evo.material.voxel_size
            )
        except InfeasiblePhenotype:
            ind.phenotype = None
            ind.descriptors = None


def run_experiment(
    config: Config,
    out_dir: str | Path,
    progress=None,
) -> list[RepetitionResult]:
    """Execute all repetitions; failures are isolated per repetition."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_text = render_config(config)
    (out_dir / "config.snapshot").write_text(config_text)
    results = []
    for repetition in range(config.repetitions):
        results.append(
            _run_repetition(config, config_text, out_dir, repetition, progress=progress)
        )
    return results


def resume(snapshot_path: str | Path, progress=None) -> RepetitionResult:
    """Continue one repetition from its snapshot.

    The continuation writes the same rows an uninterrupted run would
    have written: all randomness is derived from (seed, generation,
    slot), and the log is truncated back to the snapshot's offset.
    """
    snapshot = read_snapshot(snapshot_path)
    config = parse_config(snapshot.config_text)
    rep_dir = Path(snapshot_path).resolve().parent.parent
    out_dir = rep_dir.parent
    return _run_repetition(
        config,
        snapshot.config_text,
        out_dir,
        snapshot.repetition,
        progress=progress,
        resume_from=snapshot,
    )


# ---------------------------------------------------------------------------
# replay and descriptors


@dataclass
class ReplayReport:
    objectives: ObjectiveVector
    descriptors: DescriptorSet
    frequency: float
    env_mode: str
    total_steps: int
    trace_rows: int
    trace_path: str | None


def replay(
    genome_path: str | Path,
    env_mode: str,
    trace_path: str | Path | None,
    config: Config | None = None,
) -> ReplayReport:
    """Re-score a saved genome under the standard evaluation protocol."""
    if config is None:
        config = Config()
    genome = read_genome(genome_path)
    phenotype = express(
        genome,
        (config.grid_x, config.grid_y, config.grid_z),
        config.frequency_min,
        config.frequency_max,
    )
    env = environment_spec(config, env_mode)
    mat = material_params(config)
    outcome = run_evaluation(
        phenotype,
        env,
        mat,
        config.cycles_per_eval,
        settle_time=config.settle_time,
        self_collision=config.self_collision,
        trace_every=config.trace_sample_interval if trace_path else 0,
    )
    rows = 0
    if trace_path is not None and outcome.trace is not None:
        rows = outcome.trace.shape[0]
        _write_trace(Path(trace_path), outcome, config.trace_sample_interval)
    descriptors = compute_descriptors(phenotype.body, mat.voxel_size)
    return ReplayReport(
        objectives=outcome.objectives,
        descriptors=descriptors,
        frequency=phenotype.frequency,
        env_mode=env_mode,
        total_steps=outcome.total_steps,
        trace_rows=rows,
        trace_path=str(trace_path) if trace_path else None,
    )


def _write_trace(path: Path, outcome, interval: int) -> None:
    trace = outcome.trace
    masses = outcome.masses
    n = trace.shape[1]
    header = ["step", "com_x", "com_y", "com_z"]
    for v in range(n):
        header += [f"v{v}_x", f"v{v}_y", f"v{v}_z"]
    lines = [",".join(header)]
    total = masses.sum()
    for row in range(trace.shape[0]):
        com = (masses[:, None] * trace[row]).sum(axis=0) / total
        cells = [str(row * interval), repr(float(com[0])), repr(float(com[1])), repr(float(com[2]))]
        for v in range(n):
            cells += [
                repr(float(trace[row, v, 0])),
                repr(float(trace[row, v, 1])),
                repr(float(trace[row, v, 2])),
            ]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def body_descriptors(body_path: str | Path, voxel_size: float = 0.01) -> DescriptorSet:
    return compute_descriptors(read_body(body_path), voxel_size)


# ---------------------------------------------------------------------------
# analysis


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "treatment"


@dataclass
class Treatment:
    name: str
    runs: list[LoggedRun]

    @property
    def best_distances(self) -> list[float]:
        out = []
        for run in self.runs:
            feasible = [r.distance for r in run.records if r.feasible]
            out.append(max(feasible) if feasible else 0.0)
        return out


def load_treatment(run_dir: str | Path) -> Treatment:
    run_dir = Path(run_dir)
    rep_dirs = sorted(run_dir.glob("rep_*"))
    runs = [
        read_runlog(d / "runlog.csv", run_id=f"{run_dir.name}/{d.name}")
        for d in rep_dirs
        if (d / "runlog.csv").exists()
    ]
    if not runs:
        raise FileNotFoundError(f"{run_dir}: no rep_*/runlog.csv found")
    return Treatment(name=run_dir.name, runs=runs)


def _best_so_far_curves(treatment: Treatment) -> tuple[np.ndarray, np.ndarray]:
    generations = 1 + max(r.generation for run in treatment.runs for r in run.records)
    curves = np.zeros((len(treatment.runs), generations))
    for i, run in enumerate(treatment.runs):
        best = 0.0
        by_gen: dict[int, float] = {}
        for rec in run.records:
            if rec.feasible:
                by_gen[rec.generation] = max(by_gen.get(rec.generation, 0.0), rec.distance)
        for g in range(generations):
            best = max(best, by_gen.get(g, 0.0))
            curves[i, g] = best
    return np.arange(generations), curves


def analyze(
    run_dirs: list[str | Path],
    out_dir: str | Path,
    level: float = 0.95,
    resamples: int = 10_000,
    seed: int = 0,
) -> list[str]:
    """Reduce run directories to comparison and summary tables.

    Returns the list of files written.  Each input directory is one
    treatment; its per-repetition metric is the best feasible distance
    ever logged.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    treatments = [load_treatment(d) for d in run_dirs]
    names = []
    used = set()
    for t in treatments:
        base = _safe_name(t.name)
        name = base
        k = 2
        while name in used:
            name = f"{base}_{k}"
            k += 1
        used.add(name)
        names.append(name)

    written: list[str] = []

    lines = ["treatment,repetitions,mean_best_distance,ci_lo,ci_hi"]
    for name, t in zip(names, treatments):
        best = t.best_distances
        lo, hi = bootstrap_ci(best, level=level, resamples=resamples, seed=seed)
        lines.append(f"{name},{len(best)},{float(np.mean(best))!r},{lo!r},{hi!r}")
    path = out_dir / "treatments.csv"
    path.write_text("\n".join(lines) + "\n")
    written.append(str(path))

    pairs = list(itertools.combinations(range(len(treatments)), 2))
    lines = ["treatment_a,treatment_b,u_statistic,p_value,adjusted_p,method"]
    if pairs:
        results = [
            mann_whitney_u(treatments[i].best_distances, treatments[j].best_distances)
            for i, j in pairs
        ]
        adjusted = bonferroni_adjust([r.p_value for r in results], len(pairs))
        for (i, j), r, adj in zip(pairs, results, adjusted):
            lines.append(
                f"{names[i]},{names[j]},{r.u_statistic!r},{r.p_value!r},{adj!r},{r.method.value}"
            )
    path = out_dir / "comparisons.csv"
    path.write_text("\n".join(lines) + "\n")
    written.append(str(path))

    for name, t in zip(names, treatments):
        front = aggregate_pareto(t.runs)
        lines = ["distance,energy,material,run_id,individual_id"]
        for p in front:
            o = p.objectives
            lines.append(f"{o.distance!r},{o.energy!r},{o.material},{p.run_id},{p.individual_id}")
        path = out_dir / f"front_{name}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(str(path))

        gens, curves = _best_so_far_curves(t)
        lines = ["generation,min,q25,median,q75,max,mean"]
        for g in gens:
            col = curves[:, g]
            lines.append(
                f"{g},{float(col.min())!r},{float(np.quantile(col, 0.25))!r},"
                f"{float(np.quantile(col, 0.5))!r},{float(np.quantile(col, 0.75))!r},"
                f"{float(col.max())!r},{float(col.mean())!r}"
            )
        path = out_dir / f"quantiles_{name}.csv"
        path.write_text("\n".join(lines) + "\n")
        written.append(str(path))

    return written
