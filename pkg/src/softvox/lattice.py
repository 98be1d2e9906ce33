"""Damped spring-lattice dynamics of a voxel soft body.

A body becomes one point mass per voxel at its cell center.  Six-neighbor
pairs get axial springs (stiffness E * L, rest length L); face-diagonal
pairs bracing an existing junction get shear springs at half stiffness
and rest length sqrt(2) * L.  Active voxels modulate bond rest lengths
with a global sinusoid; each bond averages its endpoints' scale factors.

Integration is semi-implicit Euler at a fixed timestep from
stable_timestep().  Ground contact resolves the normal penalty
spring-damper implicitly per voxel (unconditionally stable across the
whole stiffness sweep, equilibrium penetration exactly m*g/k) and applies
stick-or-slide Coulomb friction capped by the force that would stop the
tangential motion within one step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernel
from .phenotype import VoxelBody
from .voxmesh import FACE_CORNER_IDX, exposed_faces, neighbor_table, voxel_index_grid

TIMESTEP_SAFETY = 0.1
FALLBACK_TIMESTEP = 1e-3
BLOWUP_FACTOR = 1e3
# drag forces vary on actuation timescales, so inside long simulations the
# facet geometry is refreshed on this interval rather than every bond-
# stability-limited step
DRAG_REFRESH_TIME = 1e-4

STIFFNESS_GRADES = {
    "S1": 0.001e6,
    "S2": 0.01e6,
    "S3": 0.1e6,
    "S4": 1.0e6,
    "S5": 10.0e6,
}


class EmptyBody(Exception):
    """The body contains no full voxel."""


class NumericalBlowup(Exception):
    """The integrator produced non-finite or runaway positions."""


class EnvironmentMode(enum.Enum):
    LAND = "land"
    WATER = "water"


@dataclass(frozen=True)
class MaterialParams:
    elastic_modulus: float = 0.1e6   # Pa
    density: float = 1000.0          # kg/m^3
    bond_damping_ratio: float = 0.4
    friction_static: float = 1.0
    friction_kinetic: float = 0.8
    actuation_amplitude: float = 0.15
    voxel_size: float = 0.01         # m

    def __post_init__(self) -> None:
        if self.elastic_modulus <= 0:
            raise ValueError("elastic_modulus must be positive")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if not 0.0 <= self.bond_damping_ratio <= 2.0:
            raise ValueError("bond_damping_ratio must lie in [0, 2]")
        if not 0.0 <= self.friction_kinetic <= self.friction_static:
            raise ValueError("need 0 <= friction_kinetic <= friction_static")
        if not 0.0 <= self.actuation_amplitude < 0.5:
            raise ValueError("actuation_amplitude must lie in [0, 0.5)")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")

    @property
    def voxel_mass(self) -> float:
        return self.density * self.voxel_size ** 3

    @property
    def axial_stiffness(self) -> float:
        return self.elastic_modulus * self.voxel_size


@dataclass(frozen=True)
class EnvironmentSpec:
    mode: EnvironmentMode
    gravity: float = 9.81
    fluid_density: float = 1000.0
    drag_coefficient: float = 1.5
    ground_contact_stiffness: float = 1e5
    ground_contact_damping: float = 10.0

    def __post_init__(self) -> None:
        if self.mode is EnvironmentMode.WATER and self.gravity != 0.0:
            raise ValueError("water is neutrally buoyant: gravity must be 0")
        if self.fluid_density <= 0 or self.drag_coefficient <= 0:
            raise ValueError("fluid parameters must be positive")
        if self.ground_contact_stiffness <= 0 or self.ground_contact_damping < 0:
            raise ValueError("ground contact parameters out of range")

    @classmethod
    def land(cls, **kw) -> "EnvironmentSpec":
        kw.setdefault("gravity", 9.81)
        return cls(mode=EnvironmentMode.LAND, **kw)

    @classmethod
    def water(cls, **kw) -> "EnvironmentSpec":
        kw["gravity"] = 0.0
        return cls(mode=EnvironmentMode.WATER, **kw)


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Global oscillation frequency plus one phase offset per voxel."""

    frequency: float
    phase: np.ndarray

    def __post_init__(self) -> None:
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if np.any(np.abs(self.phase) > math.pi + 1e-12):
            raise ValueError("phases must lie in [-pi, pi]")


@dataclass(eq=False)
class LatticeState:
    """Mutable integrator state; confined to a single evaluation.

    Voxel order matches VoxelBody.full_cells() (C order), which aligns
    control schedules, external force arrays, and surface meshes.
    """

    voxel_ids: np.ndarray        # (n, 3) grid coordinates
    position: np.ndarray         # (n, 3) m
    velocity: np.ndarray         # (n, 3) m/s
    mass: np.ndarray             # (n,) kg
    bond_a: np.ndarray           # (m,)
    bond_b: np.ndarray           # (m,)
    bond_kind: np.ndarray        # (m,) 0 axial, 1 face diagonal
    bond_rest: np.ndarray        # (m,) m
    bond_k: np.ndarray           # (m,) N/m
    bond_damp: np.ndarray        # (m,) N s/m
    actuation_amp: np.ndarray    # (n,) strain amplitude, 0 for passive
    neighbors: np.ndarray        # (n, 6) voxel ids, -1 where exposed
    voxel_size: float
    sim_time: float = 0.0

    @property
    def n_voxels(self) -> int:
        return len(self.mass)

    def copy(self) -> "LatticeState":
        return LatticeState(
            voxel_ids=self.voxel_ids,
            position=self.position.copy(),
            velocity=self.velocity.copy(),
            mass=self.mass,
            bond_a=self.bond_a,
            bond_b=self.bond_b,
            bond_kind=self.bond_kind,
            bond_rest=self.bond_rest,
            bond_k=self.bond_k,
            bond_damp=self.bond_damp,
            actuation_amp=self.actuation_amp,
            neighbors=self.neighbors,
            voxel_size=self.voxel_size,
            sim_time=self.sim_time,
        )


_DIAGONAL_OFFSETS = (
    (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1),
)


def build_lattice(body: VoxelBody, mat: MaterialParams) -> LatticeState:
    """Point masses and bonds for every full voxel of the body."""
    cells, lookup = voxel_index_grid(body)
    if len(cells) == 0:
        raise EmptyBody("cannot build a lattice from an empty body")
    n = len(cells)
    L = mat.voxel_size
    pos = (cells.astype(np.float64) + 0.5) * L
    mass = np.full(n, mat.voxel_mass)
    nbr = neighbor_table(cells, lookup)

    k_ax = mat.axial_stiffness
    bonds_a: list[int] = []
    bonds_b: list[int] = []
    kinds: list[int] = []
    dims = np.array(body.dims)
    for v in range(n):
        # axial bonds toward +x, +y, +z so each pair appears once
        for d in (1, 3, 5):
            j = nbr[v, d]
            if j >= 0:
                bonds_a.append(v)
                bonds_b.append(int(j))
                kinds.append(0)
        # face diagonals bracing at least one shared full neighbor
        for off in _DIAGONAL_OFFSETS:
            target = cells[v] + np.array(off)
            if np.any(target < 0) or np.any(target >= dims):
                continue
            j = lookup[target[0], target[1], target[2]]
            if j < 0:
                continue
            corner_a = cells[v].copy()
            corner_b = cells[v].copy()
            nonzero = [axis for axis in range(3) if off[axis] != 0]
            corner_a[nonzero[0]] += off[nonzero[0]]
            corner_b[nonzero[1]] += off[nonzero[1]]
            braced = False
            for corner in (corner_a, corner_b):
                if np.all(corner >= 0) and np.all(corner < dims):
                    if lookup[corner[0], corner[1], corner[2]] >= 0:
                        braced = True
                        break
            if braced:
                bonds_a.append(v)
                bonds_b.append(int(j))
                kinds.append(1)

    bond_a = np.array(bonds_a, dtype=np.int64)
    bond_b = np.array(bonds_b, dtype=np.int64)
    bond_kind = np.array(kinds, dtype=np.int64)
    bond_k = np.where(bond_kind == 0, k_ax, 0.5 * k_ax)
    bond_rest = np.where(bond_kind == 0, L, math.sqrt(2.0) * L)
    if len(bond_a) > 0:
        m_red = mass[bond_a] * mass[bond_b] / (mass[bond_a] + mass[bond_b])
        bond_damp = mat.bond_damping_ratio * 2.0 * np.sqrt(bond_k * m_red)
    else:
        bond_damp = np.zeros(0)

    active = (body.material[cells[:, 0], cells[:, 1], cells[:, 2]] == 2)
    amp = np.where(active, mat.actuation_amplitude, 0.0)

    return LatticeState(
        voxel_ids=cells,
        position=pos,
        velocity=np.zeros((n, 3)),
        mass=mass,
        bond_a=bond_a,
        bond_b=bond_b,
        bond_kind=bond_kind,
        bond_rest=bond_rest.astype(np.float64),
        bond_k=bond_k.astype(np.float64),
        bond_damp=bond_damp,
        actuation_amp=amp.astype(np.float64),
        neighbors=nbr,
        voxel_size=L,
        sim_time=0.0,
    )


def control_schedule(body: VoxelBody, frequency: float) -> ControlSchedule:
    """Per-voxel phases in lattice order for the body's active cells."""
    cells = body.full_cells()
    phases = body.phase[cells[:, 0], cells[:, 1], cells[:, 2]]
    return ControlSchedule(frequency=frequency, phase=phases.astype(np.float64))


def actuation_scale(t: float, f: float, phase: float, a: float) -> float:
    """Rest-length multiplier of an active voxel at time t."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    return 1.0 + a * math.sin(2.0 * math.pi * f * t + phase)


def stable_timestep(state: LatticeState) -> float:
    """Conservative fixed timestep for the stiffest bond present."""
    if len(state.bond_k) == 0:
        return FALLBACK_TIMESTEP
    m_min = float(np.min(state.mass))
    k_max = float(np.max(state.bond_k))
    return TIMESTEP_SAFETY * 2.0 * math.sqrt(m_min / k_max)


def center_of_mass(state: LatticeState) -> np.ndarray:
    if state.n_voxels == 0:
        raise EmptyBody("no voxels")
    total = float(np.sum(state.mass))
    return (state.mass[:, None] * state.position).sum(axis=0) / total


def mechanical_energy(state: LatticeState, ctrl: ControlSchedule | None = None) -> float:
    """Kinetic plus spring potential at the state's actuation time."""
    e = 0.5 * float(np.sum(state.mass * np.sum(state.velocity ** 2, axis=1)))
    if len(state.bond_a) == 0:
        return e
    if ctrl is None:
        scale = np.ones(state.n_voxels)
    else:
        scale = 1.0 + state.actuation_amp * np.sin(
            2.0 * math.pi * ctrl.frequency * state.sim_time + ctrl.phase
        )
    delta = state.position[state.bond_b] - state.position[state.bond_a]
    length = np.linalg.norm(delta, axis=1)
    rest = state.bond_rest * 0.5 * (scale[state.bond_a] + scale[state.bond_b])
    e += 0.5 * float(np.sum(state.bond_k * (length - rest) ** 2))
    return e


def _blow_limit(state: LatticeState, dims: tuple[int, int, int] | None = None) -> float:
    if dims is None:
        extent = float(np.max(state.voxel_ids) + 1) * state.voxel_size
    else:
        extent = max(dims) * state.voxel_size
    return BLOWUP_FACTOR * max(extent, state.voxel_size)


_NO_TRACE = np.zeros((0, 0, 3))
_NO_ENERGY = np.zeros(0)
_NO_FACES = np.zeros(0, dtype=np.int64)


def _run(
    state: LatticeState,
    dt: float,
    n_steps: int,
    env: EnvironmentSpec,
    ctrl: ControlSchedule,
    mat: MaterialParams,
    external: np.ndarray,
    actuate: bool,
    internal_drag: bool,
    drag_every: int = 1,
    self_collision: bool = False,
    trace_every: int = 0,
    trace_offset: int = 0,
    trace_out: np.ndarray | None = None,
    energy_out: np.ndarray | None = None,
    force_out: np.ndarray | None = None,
) -> int:
    on_land = env.mode is EnvironmentMode.LAND
    amp = state.actuation_amp if actuate else np.zeros(state.n_voxels)
    drag_on = internal_drag and not on_land
    if drag_on:
        face_owner, face_dir = exposed_faces(state.neighbors)
        owner_voxels = np.unique(face_owner)
    else:
        face_owner = face_dir = owner_voxels = _NO_FACES
    collide_k = float(np.max(state.bond_k)) if len(state.bond_k) else 0.0
    return kernel.run_lattice(
        state.position,
        state.velocity,
        state.mass,
        state.bond_a,
        state.bond_b,
        state.bond_k,
        state.bond_rest,
        state.bond_damp,
        amp,
        ctrl.phase,
        ctrl.frequency,
        state.sim_time,
        dt,
        n_steps,
        env.gravity if on_land else 0.0,
        1 if on_land else 0,
        env.ground_contact_stiffness,
        env.ground_contact_damping,
        mat.friction_static,
        mat.friction_kinetic,
        1 if drag_on else 0,
        max(1, drag_every),
        0.5 * env.fluid_density * env.drag_coefficient,
        state.voxel_size,
        state.neighbors,
        face_owner,
        face_dir,
        FACE_CORNER_IDX,
        owner_voxels,
        np.ascontiguousarray(external, dtype=np.float64),
        1 if self_collision else 0,
        collide_k,
        state.voxel_ids,
        _blow_limit(state),
        trace_every,
        trace_offset,
        trace_out if trace_out is not None else _NO_TRACE,
        energy_out if energy_out is not None else _NO_ENERGY,
        force_out if force_out is not None else np.zeros((state.n_voxels, 3)),
    )


def step(
    state: LatticeState,
    dt: float,
    env: EnvironmentSpec,
    ctrl: ControlSchedule,
    external: np.ndarray | None = None,
    mat: MaterialParams | None = None,
    self_collision: bool = False,
) -> LatticeState:
    """One integration step; returns a new state, the input is untouched.

    external must align with the state's voxel order.  Drag is not
    computed here: in water, derive it from the fluid model and pass it
    in as the external force.
    """
    if mat is None:
        mat = MaterialParams()
    if external is None:
        external = np.zeros((state.n_voxels, 3))
    new = state.copy()
    status = _run(new, dt, 1, env, ctrl, mat, external, actuate=True,
                  internal_drag=False, self_collision=self_collision)
    if status != kernel.STATUS_OK:
        raise NumericalBlowup("positions left the workspace or went non-finite")
    new.sim_time = state.sim_time + dt
    return new


def forces(
    state: LatticeState,
    env: EnvironmentSpec,
    ctrl: ControlSchedule,
    external: np.ndarray | None = None,
    mat: MaterialParams | None = None,
    dt: float | None = None,
    self_collision: bool = False,
) -> np.ndarray:
    """Per-voxel force the integrator would apply right now.

    Contact forces depend on the step size; dt defaults to the stable
    timestep.  Uses the same compiled path as step(), so the two cannot
    drift apart.
    """
    if mat is None:
        mat = MaterialParams()
    if external is None:
        external = np.zeros((state.n_voxels, 3))
    if dt is None:
        dt = stable_timestep(state)
    out = np.zeros((state.n_voxels, 3))
    work = state.copy()
    _run(work, dt, 0, env, ctrl, mat, external, actuate=True, internal_drag=False,
         self_collision=self_collision, force_out=out)
    return out


def drag_refresh_stride(dt: float) -> int:
    return max(1, round(DRAG_REFRESH_TIME / dt))


def simulate(
    state: LatticeState,
    dt: float,
    n_steps: int,
    env: EnvironmentSpec,
    ctrl: ControlSchedule,
    mat: MaterialParams,
    actuate: bool = True,
    self_collision: bool = False,
    drag_every: int | None = None,
    trace_every: int = 0,
    trace_offset: int = 0,
    trace_out: np.ndarray | None = None,
    energy_out: np.ndarray | None = None,
) -> LatticeState:
    """Advance n_steps in one compiled call, with drag applied in water.

    Mutates and returns the given state.  Raises NumericalBlowup when the
    integration diverges.  drag_every defaults to the stride that keeps
    the drag refresh interval at DRAG_REFRESH_TIME.
    """
    external = np.zeros((state.n_voxels, 3))
    status = _run(
        state,
        dt,
        n_steps,
        env,
        ctrl,
        mat,
        external,
        actuate=actuate,
        internal_drag=True,
        drag_every=drag_refresh_stride(dt) if drag_every is None else drag_every,
        self_collision=self_collision,
        trace_every=trace_every,
        trace_offset=trace_offset,
        trace_out=trace_out,
        energy_out=energy_out,
    )
    if status != kernel.STATUS_OK:
        raise NumericalBlowup("positions left the workspace or went non-finite")
    state.sim_time = state.sim_time + n_steps * dt
    return state
