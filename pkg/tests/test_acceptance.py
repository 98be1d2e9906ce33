"""Acceptance suite: one test per release criterion.

Criteria 9 and 10 run desk-scale evolution campaigns (grid 8x8x7,
population 16, 100 generations, 5 seeds per treatment) and are marked
slow; everything else is exact oracles and structural checks.  Each
criterion prints a PASS/FAIL line in the terminal summary.
"""

import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from softvox import seeds as seedlib
from softvox.cli import main as cli_main
from softvox.descriptors import branching_index, convex_hull_volume, mesh_volume, body_mesh
from softvox.drag import apply_drag, extract_surface_mesh, facet_drag_force
from softvox.evolution import (
    EvolutionConfig,
    Individual,
    ObjectiveVector,
    dominates,
    evolve_run,
    nondominated_sort,
)
from softvox.lattice import (
    EnvironmentSpec,
    MaterialParams,
    build_lattice,
    control_schedule,
    simulate,
    stable_timestep,
    forces,
)
from softvox.phenotype import Material, VoxelBody
from softvox.stats import bonferroni_adjust, bootstrap_ci, hypervolume_3d, mann_whitney_u

L = 0.01
S3 = MaterialParams(elastic_modulus=0.1e6)


def body_from_cells(dims, cells, active=()):
    material = np.zeros(dims, dtype=np.int8)
    for c in cells:
        material[c] = Material.ACTIVE if c in active else Material.PASSIVE
    return VoxelBody(material=material, phase=np.zeros(dims))


def full_body(dims, kind=Material.PASSIVE):
    return VoxelBody(material=np.full(dims, kind, dtype=np.int8), phase=np.zeros(dims))


def random_connected_body(rng, dims=(6, 6, 5), n_cells=14):
    cells = {(dims[0] // 2, dims[1] // 2, dims[2] // 2)}
    while len(cells) < n_cells:
        base = list(cells)[int(rng.integers(len(cells)))]
        d = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)][
            int(rng.integers(6))
        ]
        cand = (base[0] + d[0], base[1] + d[1], base[2] + d[2])
        if all(0 <= cand[i] < dims[i] for i in range(3)):
            cells.add(cand)
    return body_from_cells(dims, cells)


# --------------------------------------------------------------------------
# 1. drag formula


def test_criterion_01_drag_formula():
    body = body_from_cells((1, 1, 1), [(0, 0, 0)])
    state = build_lattice(body, S3)
    mesh = extract_surface_mesh(body, state)
    facet = next(f for f in mesh.facets if f.outward_normal[0] > 0.9)
    assert facet.area == pytest.approx(0.5e-4, rel=1e-12)

    velocity = np.array([1.0, 0.0, 0.0])
    force = facet_drag_force(facet, velocity, 1000.0, 1.5)
    assert np.linalg.norm(force) == pytest.approx(0.0375, rel=1e-9)
    assert float(force @ facet.outward_normal) < 0

    doubled = facet_drag_force(facet, 2.0 * velocity, 1000.0, 1.5)
    assert np.array_equal(doubled, 4.0 * force)


# --------------------------------------------------------------------------
# 2. facet exposure


def test_criterion_02_facet_exposure():
    single = body_from_cells((1, 1, 1), [(0, 0, 0)])
    assert len(extract_surface_mesh(single, build_lattice(single, S3))) == 12
    for n in (1, 2, 3, 4):
        cube = full_body((n, n, n))
        mesh = extract_surface_mesh(cube, build_lattice(cube, S3))
        assert len(mesh) == 12 * n * n


# --------------------------------------------------------------------------
# 3. branching index reference values


def test_criterion_03_branching_index():
    slab = body_from_cells(
        (5, 5, 1), [(i, j, 0) for i in range(5) for j in range(5)]
    )
    assert branching_index(slab, L) == pytest.approx(0.0, abs=1e-9)

    x_cells = [(0, 0, 0), (1, 1, 0), (2, 2, 0), (3, 3, 0), (4, 4, 0),
               (0, 4, 0), (1, 3, 0), (3, 1, 0), (4, 0, 0)]
    x_body = body_from_cells((5, 5, 1), x_cells)
    assert branching_index(x_body, L) == pytest.approx(0.64, abs=1e-6)


# --------------------------------------------------------------------------
# 4. mesh volume oracle


def test_criterion_04_mesh_volume():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 18))
        body = random_connected_body(rng, n_cells=n)
        volume = mesh_volume(body_mesh(body, L))
        assert volume == pytest.approx(body.full_count * L ** 3, rel=1e-9)

    corners = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
    )
    assert convex_hull_volume(corners) == pytest.approx(1.0, abs=1e-12)


# --------------------------------------------------------------------------
# 5. dominance machinery vs brute force


def _front_oracle(vectors):
    remaining = dict(enumerate(vectors))
    fronts = []
    while remaining:
        front = {
            i
            for i in remaining
            if not any(dominates(remaining[j], remaining[i]) for j in remaining if j != i)
        }
        fronts.append(front)
        for i in front:
            del remaining[i]
    return fronts


def test_criterion_05_dominance_machinery():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        population = [
            Individual(
                id=i,
                parent_id=None,
                genome=None,
                objectives=ObjectiveVector(
                    distance=float(rng.integers(0, 6)),
                    energy=float(rng.integers(0, 5)) / 4.0,
                    material=int(rng.integers(1, 7)),
                ),
            )
            for i in range(n)
        ]
        got = [
            {ind.id for ind in front} for front in nondominated_sort(population)
        ]
        expected = _front_oracle([ind.objectives for ind in population])
        assert got == expected


# --------------------------------------------------------------------------
# 6. statistics oracles


def _u_distribution(n, m):
    counts = {}
    for a_ranks in itertools.combinations(range(n + m), n):
        others = [r for r in range(n + m) if r not in a_ranks]
        u = sum(x > y for x in a_ranks for y in others)
        counts[u] = counts.get(u, 0) + 1
    return counts


def _sample_with_u(n, m, u):
    """Tie-free samples whose U statistic equals u (0 <= u <= n*m)."""
    a_beats = []
    remaining = u
    for _ in range(n):
        k = min(m, remaining)
        a_beats.append(k)
        remaining -= k
    b = [float(j) for j in range(m)]
    a = [b[k - 1] + 0.5 if k > 0 else -1.0 - len(a_beats) - i
         for i, k in enumerate(a_beats)]
    # shift duplicates apart deterministically, preserving order vs b
    a = [v + 1e-9 * i for i, v in enumerate(a)]
    return a, b


def test_criterion_06_statistics():
    for n in range(1, 9):
        for m in range(1, 9):
            dist = _u_distribution(n, m)
            total = sum(dist.values())
            for u in range(n * m + 1):
                a, b = _sample_with_u(n, m, u)
                result = mann_whitney_u(a, b)
                assert result.u_statistic == u
                p_low = sum(c for v, c in dist.items() if v <= u) / total
                p_high = sum(c for v, c in dist.items() if v >= u) / total
                expected = min(1.0, 2.0 * min(p_low, p_high))
                assert result.p_value == pytest.approx(expected, abs=1e-12)

    assert bootstrap_ci([0.0, 1.0], 0.95, resamples=4, seed=0) == (0.0, 1.0)
    assert bonferroni_adjust([0.5], 3) == [1.0]
    assert bonferroni_adjust([0.2, 0.9], 5) == [1.0, 1.0]


# --------------------------------------------------------------------------
# 7. physics invariants


def test_criterion_07_physics_invariants():
    # monotone energy decay over 1e5 steps, no gravity or contact
    body = full_body((3, 3, 3))
    state = build_lattice(body, S3)
    rng = np.random.default_rng(17)
    state.velocity[:] = rng.normal(0, 0.05, state.velocity.shape)
    state.position[:, 2] += 1.0
    ctrl = control_schedule(body, 5.0)
    dt = stable_timestep(state)
    free = EnvironmentSpec.land(gravity=0.0)
    n = 100_000
    energy = np.zeros(n)
    simulate(state, dt, n, free, ctrl, S3, actuate=False, energy_out=energy)
    slack = 1e-9 * np.maximum(energy[:-1], 0.0)
    assert not (np.diff(energy) > slack).any()

    # neutral buoyancy: a passive body in water does not drift
    body = full_body((2, 3, 2))
    state = build_lattice(body, S3)
    start = state.position.copy()
    dt = stable_timestep(state)
    simulate(state, dt, math.ceil(10.0 / dt), EnvironmentSpec.water(),
             control_schedule(body, 5.0), S3)
    assert np.abs(state.position - start).max() < 1e-9

    # bond force pairs cancel exactly
    pair = body_from_cells((2, 1, 1), [(0, 0, 0), (1, 0, 0)])
    state = build_lattice(pair, S3)
    state.position[1] += (0.003, 0.001, -0.002)
    state.velocity[0] = (0.2, -0.1, 0.4)
    f = forces(state, EnvironmentSpec.land(gravity=0.0), control_schedule(pair, 2.0), mat=S3)
    assert np.all(f[0] == -f[1])


# --------------------------------------------------------------------------
# 8. end-to-end determinism through the CLI


DETERMINISM_CONFIG = """
experiment.environment = land_water_halfway
experiment.generations = 6
experiment.repetitions = 2
experiment.master_seed = 2024
evolution.population_size = 4
evolution.cycles_per_eval = 2
body.grid_x = 4
body.grid_y = 3
body.grid_z = 2
material.stiffness = S2
output.snapshot_interval = 3
"""


def test_criterion_08_determinism(tmp_path):
    config = tmp_path / "exp.cfg"
    config.write_text(DETERMINISM_CONFIG)
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert cli_main(["run", "--config", str(config), "--out", str(first)]) == 0
    assert cli_main(["run", "--config", str(config), "--out", str(second)]) == 0
    for rep in ("rep_000", "rep_001"):
        a = (first / rep / "runlog.csv").read_bytes()
        b = (second / rep / "runlog.csv").read_bytes()
        assert a == b

    # resume from the mid-run snapshot reproduces the uninterrupted rows
    reference = (second / "rep_000" / "runlog.csv").read_bytes()
    log = second / "rep_000" / "runlog.csv"
    log.write_bytes(reference[: len(reference) // 2])
    snapshot = second / "rep_000" / "snapshots" / "gen_000003.json"
    assert cli_main(["resume", "--snapshot", str(snapshot)]) == 0
    assert log.read_bytes() == reference


# --------------------------------------------------------------------------
# 9 and 10. desk-scale stiffness trends


def _desk_run(env_mode: str, modulus: float, seed: int) -> float:
    env = EnvironmentSpec.land() if env_mode == "land" else EnvironmentSpec.water()
    config = EvolutionConfig(
        population_size=16,
        generations=100,
        environment_schedule=((0, env),),
        material=MaterialParams(elastic_modulus=modulus),
        cycles_per_eval=8,
        dims=(8, 8, 7),
        master_seed=seed,
        eval_workers=0,
    )
    log = evolve_run(config)
    return max((r.distance for r in log.records if r.feasible), default=0.0)


@pytest.mark.slow
def test_criterion_09_land_stiffness_trend():
    soft = [_desk_run("land", 0.001e6, seed) for seed in range(5)]
    stiff = [_desk_run("land", 1.0e6, seed) for seed in range(5)]
    assert np.median(stiff) >= 3.0 * np.median(soft), (soft, stiff)


@pytest.mark.slow
def test_criterion_10_water_stiffness_trend():
    soft = [_desk_run("water", 0.001e6, seed) for seed in range(5)]
    stiff = [_desk_run("water", 10.0e6, seed) for seed in range(5)]
    assert np.median(soft) >= np.median(stiff), (soft, stiff)


# --------------------------------------------------------------------------
# 11. transition re-evaluation structure


@pytest.mark.slow
def test_criterion_11_transition_structure():
    config = EvolutionConfig(
        population_size=16,
        generations=40,
        environment_schedule=(
            (0, EnvironmentSpec.land()),
            (20, EnvironmentSpec.water()),
        ),
        material=S3,
        cycles_per_eval=8,
        dims=(8, 8, 7),
        master_seed=7,
        eval_workers=0,
    )
    log = evolve_run(config)
    before = next(s for s in log.generation_stats if s.generation == 19)
    after = log.transition_stats[0]
    assert after.generation == 20
    assert after.env_mode == "water"
    assert before.mean_distance > 0
    assert after.mean_distance < 0.5 * before.mean_distance, (before, after)


# --------------------------------------------------------------------------
# 12. elitist archive hypervolume


def _hv_oracle(points, ref=(0.0, 1.0, 448.0)):
    boxes = []
    for p in points:
        u = (p.distance - ref[0], ref[1] - p.energy, ref[2] - p.material)
        if all(c > 0 for c in u):
            boxes.append(u)
    n = len(boxes)
    if n == 0:
        return 0.0
    assert n <= 20
    arr = np.array(boxes)
    size = 1 << n
    masks = np.arange(size)
    mins = np.full((size, 3), np.inf)
    for i in range(n):
        has = (masks >> i) & 1 == 1
        mins[has] = np.minimum(mins[has], arr[i])
    popcount = np.zeros(size, dtype=np.int64)
    for i in range(n):
        popcount += (masks >> i) & 1
    volumes = np.prod(mins, axis=1)
    volumes[0] = 0.0
    signs = np.where(popcount % 2 == 1, 1.0, -1.0)
    signs[0] = 0.0
    return float(np.sum(signs * volumes))


def test_criterion_12_archive_hypervolume_monotone():
    config = EvolutionConfig(
        population_size=8,
        generations=14,
        environment_schedule=((0, EnvironmentSpec.land()),),
        material=MaterialParams(elastic_modulus=0.01e6),
        cycles_per_eval=2,
        dims=(4, 4, 3),
        master_seed=5,
        eval_workers=1,
    )
    log = evolve_run(config)
    reference = dict(ref_distance=0.0, ref_energy=1.0, ref_material=4 * 4 * 3)

    archive: list[ObjectiveVector] = []
    previous = -1.0
    checked_against_oracle = 0
    for generation in range(config.generations):
        for rec in log.records:
            if rec.generation == generation and rec.feasible:
                archive.append(ObjectiveVector(rec.distance, rec.energy, rec.material))
        front = [
            v
            for v in archive
            if not any(dominates(o, v) for o in archive if o is not v)
        ]
        volume = hypervolume_3d(front, **reference)
        assert volume >= previous - 1e-12
        previous = volume
        unique_front = list({(v.distance, v.energy, v.material): v for v in front}.values())
        if len(unique_front) <= 20:
            oracle = _hv_oracle(unique_front, ref=(0.0, 1.0, 4 * 4 * 3))
            assert volume == pytest.approx(oracle, rel=1e-9, abs=1e-15)
            checked_against_oracle += 1
    assert checked_against_oracle > 0
