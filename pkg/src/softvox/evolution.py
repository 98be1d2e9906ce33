"""Mutation-only Pareto evolution of voxel soft robots.

Three objectives: net center-of-mass travel in voxel lengths (maximized;
horizontal on land where vertical motion is bounce, full 3D in water),
fraction of actuated voxels (minimized, an energy proxy), and voxel
count (minimized, a material proxy).

Selection is elitist nondominated sorting with a crowding tie-break:
each survivor spawns one mutated offspring, parents and offspring
compete, and the best population_size individuals survive ordered by
(front rank, crowding descending, id).  Infeasible individuals (empty
phenotype or diverged simulation) stay in the log but rank behind every
feasible one.

When the environment schedule switches mid-run the whole current
population is re-scored in the new environment before selection; genomes
are untouched, only objectives change.

Every random draw derives from (master_seed, generation, slot), so
results do not depend on evaluation scheduling and runs can resume from
a snapshot bit-identically.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import seeds
from .cppn import Genome, MutationRates, mutate, random_genome
from .descriptors import DescriptorSet, compute_descriptors
from .lattice import (
    EnvironmentMode,
    EnvironmentSpec,
    MaterialParams,
    NumericalBlowup,
    build_lattice,
    center_of_mass,
    control_schedule,
    simulate,
    stable_timestep,
)
from .phenotype import InfeasiblePhenotype, Phenotype, express


@dataclass(frozen=True)
class ObjectiveVector:
    distance: float
    energy: float
    material: int

    def __post_init__(self) -> None:
        if self.distance < 0 or not 0.0 <= self.energy <= 1.0 or self.material < 1:
            raise ValueError("objective vector out of range")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """True when a is at least as good everywhere and better somewhere."""
    if a.distance < b.distance or a.energy > b.energy or a.material > b.material:
        return False
    return a.distance > b.distance or a.energy < b.energy or a.material < b.material


@dataclass(eq=False)
class Individual:
    id: int
    parent_id: int | None
    genome: Genome
    objectives: ObjectiveVector | None = None
    descriptors: DescriptorSet | None = None
    phenotype: Phenotype | None = None
    eval_seed: int = 0

    @property
    def feasible(self) -> bool:
        return self.objectives is not None


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 32
    generations: int = 100
    environment_schedule: tuple[tuple[int, EnvironmentSpec], ...] = (
        (0, EnvironmentSpec.land()),
    )
    material: MaterialParams = MaterialParams()
    cycles_per_eval: int = 8
    dims: tuple[int, int, int] = (8, 8, 7)
    rates: MutationRates = MutationRates()
    master_seed: int = 0
    frequency_min: float = 0.5
    frequency_max: float = 10.0
    settle_time: float = 0.5
    self_collision: bool = False
    eval_workers: int = 1

    def __post_init__(self) -> None:
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be >= 1")
        if self.cycles_per_eval < 1:
            raise ValueError("cycles_per_eval must be >= 1")
        if any(d < 1 for d in self.dims):
            raise ValueError("grid dims must be >= 1")
        if not 0 < self.frequency_min < self.frequency_max:
            raise ValueError("need 0 < frequency_min < frequency_max")
        starts = [g for g, _ in self.environment_schedule]
        if not starts or starts[0] != 0:
            raise ValueError("environment schedule must start at generation 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule generations must be strictly increasing")
        if starts[-1] >= self.generations:
            raise ValueError("schedule transition beyond the last generation")

    def environment_at(self, generation: int) -> EnvironmentSpec:
        env = self.environment_schedule[0][1]
        for start, spec in self.environment_schedule:
            if start <= generation:
                env = spec
        return env


@dataclass(frozen=True)
class EvalRecord:
    generation: int
    individual_id: int
    parent_id: int | None
    env_mode: str
    feasible: bool
    distance: float | None
    energy: float | None
    material: int | None
    descriptors: DescriptorSet | None
    frequency: float | None
    eval_seed: int


@dataclass(frozen=True)
class GenerationStat:
    generation: int
    env_mode: str
    feasible_count: int
    mean_distance: float
    best_distance: float


@dataclass
class RunLog:
    run_id: str
    records: list[EvalRecord] = field(default_factory=list)
    generation_stats: list[GenerationStat] = field(default_factory=list)
    transition_stats: list[GenerationStat] = field(default_factory=list)
    final_population: list[Individual] = field(default_factory=list)
    next_id: int = 0


# ---------------------------------------------------------------------------
# dominance machinery


def nondominated_sort(population: list[Individual]) -> list[list[Individual]]:
    """Successive nondominated fronts; infeasible individuals trail.

    Front k is the nondominated set once fronts < k are removed.  All
    infeasible individuals form one final front of their own.
    """
    feasible = [ind for ind in population if ind.feasible]
    infeasible = [ind for ind in population if not ind.feasible]
    fronts: list[list[Individual]] = []
    if feasible:
        index_fronts = sort_objective_fronts([ind.objectives for ind in feasible])
        fronts = [[feasible[i] for i in front] for front in index_fronts]
    if infeasible:
        fronts.append(list(infeasible))
    return fronts


def sort_objective_fronts(vectors: list[ObjectiveVector]) -> list[list[int]]:
    """Fast nondominated sorting over plain objective vectors."""
    n = len(vectors)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(vectors[i], vectors[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(vectors[j], vectors[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if domination_count[i] == 0]
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for i in current:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(front: list[Individual]) -> np.ndarray:
    """Crowding of each front member, aligned with the input order.

    Fronts of one or two are all-boundary (+inf).  Individuals sharing an
    identical objective vector add no spread and score 0; everyone else
    gets the usual per-objective sum of normalized neighbor gaps, with
    +inf at the extremes.  An infeasible front scores all zeros.
    """
    n = len(front)
    if n == 0:
        raise ValueError("front must be nonempty")
    if any(not ind.feasible for ind in front):
        return np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    vectors = [
        (ind.objectives.distance, ind.objectives.energy, ind.objectives.material)
        for ind in front
    ]
    counts: dict[tuple, int] = {}
    for v in vectors:
        counts[v] = counts.get(v, 0) + 1
    crowd = np.zeros(n)
    duplicated = np.array([counts[v] > 1 for v in vectors])
    for axis in range(3):
        values = np.array([v[axis] for v in vectors])
        order = np.argsort(values, kind="stable")
        span = values[order[-1]] - values[order[0]]
        crowd[order[0]] = np.inf
        crowd[order[-1]] = np.inf
        if span > 0:
            for pos in range(1, n - 1):
                i = order[pos]
                if not np.isinf(crowd[i]):
                    gap = values[order[pos + 1]] - values[order[pos - 1]]
                    crowd[i] += gap / span
    crowd[duplicated] = 0.0
    return crowd


def select_survivors(candidates: list[Individual], population_size: int) -> list[Individual]:
    """Elitist truncation by (front rank, crowding desc, id asc)."""
    ordered: list[Individual] = []
    for front in nondominated_sort(candidates):
        crowd = crowding_distance(front)
        ranked = sorted(range(len(front)), key=lambda i: (-crowd[i], front[i].id))
        ordered.extend(front[i] for i in ranked)
    return ordered[:population_size]


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvaluationOutcome:
    objectives: ObjectiveVector
    settle_steps: int
    measure_steps: int
    trace: np.ndarray | None = None  # (rows, n_voxels, 3) sampled positions
    masses: np.ndarray | None = None

    @property
    def total_steps(self) -> int:
        return self.settle_steps + self.measure_steps


def run_evaluation(
    phenotype: Phenotype,
    env: EnvironmentSpec,
    mat: MaterialParams,
    cycles: int,
    settle_time: float = 0.5,
    self_collision: bool = False,
    trace_every: int = 0,
) -> EvaluationOutcome:
    """The scoring protocol, optionally with a sampled position trace.

    On land the body first rests on the ground plane and settles
    unactuated so drop transients do not count as travel; the actuation
    clock starts at the measurement window.  Water runs skip settling
    (nothing to settle against) and count motion in all directions;
    land scores the horizontal plane only, since vertical center motion
    is bounce rather than travel.  Raises NumericalBlowup on divergence.
    """
    body = phenotype.body
    state = build_lattice(body, mat)
    ctrl = control_schedule(body, phenotype.frequency)
    dt = stable_timestep(state)
    on_land = env.mode is EnvironmentMode.LAND
    settle_steps = math.ceil(settle_time / dt) if on_land else 0
    measure_steps = math.ceil(cycles / phenotype.frequency / dt)

    trace = None
    if trace_every > 0:
        rows = -(-(settle_steps + measure_steps) // trace_every)
        trace = np.zeros((rows, state.n_voxels, 3))

    if on_land:
        state.position[:, 2] -= state.position[:, 2].min() - 0.5 * mat.voxel_size
        if settle_steps > 0:
            simulate(state, dt, settle_steps, env, ctrl, mat, actuate=False,
                     self_collision=self_collision,
                     trace_every=trace_every, trace_offset=0, trace_out=trace)
        state.sim_time = 0.0
    start = center_of_mass(state)
    simulate(state, dt, measure_steps, env, ctrl, mat, actuate=True,
             self_collision=self_collision,
             trace_every=trace_every, trace_offset=settle_steps, trace_out=trace)
    delta = center_of_mass(state) - start
    if on_land:
        travelled = math.hypot(delta[0], delta[1])
    else:
        travelled = float(np.linalg.norm(delta))
    objectives = ObjectiveVector(
        distance=travelled / mat.voxel_size,
        energy=body.active_count / body.full_count,
        material=body.full_count,
    )
    return EvaluationOutcome(
        objectives=objectives,
        settle_steps=settle_steps,
        measure_steps=measure_steps,
        trace=trace,
        masses=state.mass if trace is not None else None,
    )


def evaluate(
    phenotype: Phenotype,
    env: EnvironmentSpec,
    mat: MaterialParams,
    cycles: int,
    settle_time: float = 0.5,
    self_collision: bool = False,
) -> ObjectiveVector:
    """Simulate one phenotype and score it (see run_evaluation)."""
    return run_evaluation(
        phenotype, env, mat, cycles, settle_time, self_collision
    ).objectives


def _score_genome(
    genome: Genome, env: EnvironmentSpec, config: EvolutionConfig
) -> tuple[ObjectiveVector | None, DescriptorSet | None, Phenotype | None]:
    try:
        phenotype = express(
            genome, config.dims, config.frequency_min, config.frequency_max
        )
    except InfeasiblePhenotype:
        return None, None, None
    try:
        objectives = evaluate(
            phenotype,
            env,
            config.material,
            config.cycles_per_eval,
            config.settle_time,
            config.self_collision,
        )
    except NumericalBlowup:
        objectives = None
    descriptors = compute_descriptors(phenotype.body, config.material.voxel_size)
    return objectives, descriptors, phenotype


def _record_for(ind: Individual, generation: int, env: EnvironmentSpec) -> EvalRecord:
    obj = ind.objectives
    return EvalRecord(
        generation=generation,
        individual_id=ind.id,
        parent_id=ind.parent_id,
        env_mode=env.mode.value,
        feasible=obj is not None,
        distance=obj.distance if obj else None,
        energy=obj.energy if obj else None,
        material=obj.material if obj else None,
        descriptors=ind.descriptors,
        frequency=ind.phenotype.frequency if ind.phenotype else None,
        eval_seed=ind.eval_seed,
    )


def _population_stat(generation: int, env: EnvironmentSpec, population: list[Individual]) -> GenerationStat:
    distances = [ind.objectives.distance for ind in population if ind.feasible]
    return GenerationStat(
        generation=generation,
        env_mode=env.mode.value,
        feasible_count=len(distances),
        mean_distance=float(np.mean(distances)) if distances else 0.0,
        best_distance=max(distances) if distances else 0.0,
    )


class _Evaluator:
    """Runs genome scoring, optionally across a thread pool.

    The compiled simulation loop releases the GIL, so threads scale on
    multicore hosts; results are merged back in slot order either way.
    """

    def __init__(self, config: EvolutionConfig):
        workers = config.eval_workers
        if workers == 0:
            workers = min(os.cpu_count() or 1, 8)
        self.config = config
        self.pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def score_all(self, genomes: list[Genome], env: EnvironmentSpec):
        if self.pool is None:
            return [_score_genome(g, env, self.config) for g in genomes]
        futures = [self.pool.submit(_score_genome, g, env, self.config) for g in genomes]
        return [f.result() for f in futures]

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def evolve_run(
    config: EvolutionConfig,
    run_id: str = "run",
    on_records=None,
    on_generation=None,
    on_snapshot_point=None,
    start_generation: int = 0,
    initial_population: list[Individual] | None = None,
    initial_next_id: int | None = None,
) -> RunLog:
    """Run the generational loop and return its complete log.

    on_records(list[EvalRecord]) fires after each evaluation batch in a
    deterministic order; on_generation(generation) after selection;
    on_snapshot_point(generation, population, next_id) at the start of
    every generation >= 1 (the state needed to resume from there).
    """
    log = RunLog(run_id=run_id)
    evaluator = _Evaluator(config)
    seed = config.master_seed
    pop_size = config.population_size

    def emit(records: list[EvalRecord]) -> None:
        log.records.extend(records)
        if on_records is not None:
            on_records(records)

    def apply_scores(inds: list[Individual], results) -> None:
        for ind, (objectives, descriptors, phenotype) in zip(inds, results):
            ind.objectives = objectives
            ind.descriptors = descriptors
            ind.phenotype = phenotype

    try:
        if initial_population is None:
            env = config.environment_at(0)
            population = []
            for slot in range(pop_size):
                rng = seeds.rng_for(seed, seeds.TAG_INIT, slot)
                genome = random_genome(rng, genome_id=slot)
                population.append(
                    Individual(
                        id=slot,
                        parent_id=None,
                        genome=genome,
                        eval_seed=seeds.mix(seed, seeds.TAG_EVAL, 0, slot),
                    )
                )
            apply_scores(population, evaluator.score_all([i.genome for i in population], env))
            emit([_record_for(ind, 0, env) for ind in population])
            log.generation_stats.append(_population_stat(0, env, population))
            if on_generation is not None:
                on_generation(0)
            next_id = pop_size
            first = 1
        else:
            population = list(initial_population)
            next_id = initial_next_id if initial_next_id is not None else (
                max(ind.id for ind in population) + 1
            )
            first = start_generation

        for generation in range(first, config.generations):
            if on_snapshot_point is not None:
                on_snapshot_point(generation, population, next_id)
            env = config.environment_at(generation)
            previous_env = config.environment_at(generation - 1)

            if env.mode is not previous_env.mode:
                # abrupt transition: rescore everyone in the new world
                for slot, ind in enumerate(population):
                    ind.eval_seed = seeds.mix(seed, seeds.TAG_REEVAL, generation, slot)
                rescored = evaluator.score_all([i.genome for i in population], env)
                for ind, (objectives, descriptors, phenotype) in zip(population, rescored):
                    ind.objectives = objectives
                    if ind.descriptors is None:
                        ind.descriptors = descriptors
                    if ind.phenotype is None:
                        ind.phenotype = phenotype
                emit([_record_for(ind, generation, env) for ind in population])
                log.transition_stats.append(_population_stat(generation, env, population))

            offspring: list[Individual] = []
            for slot, parent in enumerate(population):
                rng = seeds.rng_for(seed, seeds.TAG_MUTATE, generation, slot)
                child_genome = mutate(parent.genome, config.rates, rng, new_id=next_id)
                offspring.append(
                    Individual(
                        id=next_id,
                        parent_id=parent.id,
                        genome=child_genome,
                        eval_seed=seeds.mix(seed, seeds.TAG_EVAL, generation, slot),
                    )
                )
                next_id += 1
            apply_scores(offspring, evaluator.score_all([i.genome for i in offspring], env))
            emit([_record_for(ind, generation, env) for ind in offspring])

            population = select_survivors(population + offspring, pop_size)
            log.generation_stats.append(_population_stat(generation, env, population))
            if on_generation is not None:
                on_generation(generation)

        log.final_population = population
        log.next_id = next_id
        return log
    finally:
        evaluator.close()
