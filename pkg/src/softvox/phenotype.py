"""Genome expression: from networks to a concrete voxel body.

Every cell of the workspace grid is queried with its normalized
coordinates.  The morphology net's first output thresholds presence
(>= 0 means full), and, only where a cell is full, its second output
thresholds actuation (>= 0 means active).  The control net supplies one
global oscillation frequency (squashed mean of its first output over the
full cells) and a per-voxel phase offset from its second output.

Cells that end up disconnected from the main body are pruned away: loose
matter has no mechanical meaning in the lattice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cppn import Genome, query_grid


class Material(enum.IntEnum):
    EMPTY = 0
    PASSIVE = 1
    ACTIVE = 2


class InfeasiblePhenotype(Exception):
    """Expression produced no connected material at all."""


@dataclass(frozen=True, eq=False)
class VoxelBody:
    """Workspace grid of materials plus per-cell actuation phase.

    material and phase are (X, Y, Z) arrays; phase is meaningful only
    where material == ACTIVE and zero elsewhere.
    """

    material: np.ndarray
    phase: np.ndarray

    def __post_init__(self) -> None:
        if self.material.ndim != 3 or self.material.shape != self.phase.shape:
            raise ValueError("material and phase must be 3D arrays of equal shape")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.material.shape  # type: ignore[return-value]

    @property
    def full_count(self) -> int:
        return int(np.count_nonzero(self.material))

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.material == Material.ACTIVE))

    def full_cells(self) -> np.ndarray:
        """Indices (n, 3) of full cells in C order."""
        return np.argwhere(self.material != Material.EMPTY)


@dataclass(frozen=True, eq=False)
class Phenotype:
    body: VoxelBody
    frequency: float


def normalized_coordinates(dims: tuple[int, int, int]) -> np.ndarray:
    """(n_cells, 5) rows of (x, y, z, d, b) for every cell, C order.

    Each axis spans [-1, 1] inclusive (a single-cell axis sits at 0);
    d is the euclidean distance from the workspace center and b = 1.
    """
    axes = []
    for n in dims:
        if n == 1:
            axes.append(np.zeros(1))
        else:
            axes.append(np.linspace(-1.0, 1.0, n))
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    x = gx.ravel()
    y = gy.ravel()
    z = gz.ravel()
    d = np.sqrt(x * x + y * y + z * z)
    b = np.ones_like(x)
    return np.stack([x, y, z, d, b], axis=1)


def prune_to_largest_component(body: VoxelBody) -> VoxelBody:
    """Keep only the largest 6-connected component of full cells.

    Ties go to the component containing the smallest linearized cell
    index (C order over (x, y, z)).
    """
    material = body.material
    dims = material.shape
    occupied = material != Material.EMPTY
    labels = np.full(dims, -1, dtype=np.int64)
    components: list[list[tuple[int, int, int]]] = []
    for start in np.argwhere(occupied):
        start = tuple(start)
        if labels[start] >= 0:
            continue
        label = len(components)
        stack = [start]
        labels[start] = label
        cells = [start]
        while stack:
            i, j, k = stack.pop()
            for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                ni, nj, nk = i + di, j + dj, k + dk
                if 0 <= ni < dims[0] and 0 <= nj < dims[1] and 0 <= nk < dims[2]:
                    if occupied[ni, nj, nk] and labels[ni, nj, nk] < 0:
                        labels[ni, nj, nk] = label
                        stack.append((ni, nj, nk))
                        cells.append((ni, nj, nk))
        components.append(cells)
    if not components:
        return body
    # np.argwhere scans in C order, so the first-found component of the
    # winning size is the one holding the lowest linearized index
    best = max(range(len(components)), key=lambda i: (len(components[i]), -i))
    keep = labels == best
    material = np.where(keep, material, Material.EMPTY.value).astype(material.dtype)
    phase = np.where(material == Material.ACTIVE, body.phase, 0.0)
    return VoxelBody(material=material, phase=phase)


def map_control(raw_freq_mean: float, raw_phase: float, f_min: float, f_max: float) -> tuple[float, float]:
    """Squash raw control outputs into a frequency and a phase offset."""
    if raw_freq_mean >= 0:
        sig = 1.0 / (1.0 + math.exp(-raw_freq_mean))
    else:
        e = math.exp(raw_freq_mean)
        sig = e / (1.0 + e)
    frequency = f_min + sig * (f_max - f_min)
    phase = math.pi * min(1.0, max(-1.0, raw_phase))
    return frequency, phase


def express(
    genome: Genome,
    dims: tuple[int, int, int],
    f_min: float = 0.5,
    f_max: float = 10.0,
) -> Phenotype:
    """Build the phenotype a genome encodes on the given grid.

    Raises InfeasiblePhenotype when no full voxel survives pruning.
    """
    if any(n < 1 for n in dims):
        raise ValueError("grid dimensions must be >= 1")
    coords = normalized_coordinates(dims)
    morph = query_grid(genome.morphology_net, coords)
    ctrl = query_grid(genome.control_net, coords)

    presence = morph[:, 0] >= 0.0
    active = presence & (morph[:, 1] >= 0.0)
    material = np.full(coords.shape[0], Material.EMPTY.value, dtype=np.int8)
    material[presence] = Material.PASSIVE.value
    material[active] = Material.ACTIVE.value
    material = material.reshape(dims)

    phase = np.zeros(coords.shape[0])
    clipped = np.clip(ctrl[:, 1], -1.0, 1.0)
    phase[active] = math.pi * clipped[active]
    phase = phase.reshape(dims)

    if not presence.any():
        raise InfeasiblePhenotype("no full voxels")
    raw_freq_mean = float(np.mean(ctrl[presence, 0]))
    frequency, _ = map_control(raw_freq_mean, 0.0, f_min, f_max)

    body = prune_to_largest_component(VoxelBody(material=material, phase=phase))
    if body.full_count == 0:
        raise InfeasiblePhenotype("no full voxels after pruning")
    return Phenotype(body=body, frequency=frequency)
