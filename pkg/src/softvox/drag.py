"""Mesh-based quadratic drag.

Every exposed voxel face contributes two triangular facets.  A facet
moving into the fluid (positive normal speed of its owner voxel) feels a
resistive force of 0.5 * rho * C_d * area * v_n^2 against its outward
normal; receding or tangentially moving facets feel nothing, since a
purely resistive medium exerts no suction.

Facet vertices follow the deformed lattice: each corner offset is the
half-way vector to the bonded neighbor in that axis direction, or a rigid
half-voxel offset where the surface is exposed.  The same geometry is
evaluated inside the compiled simulation loop; this module is the
composable shape of it for callers that drive step() themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import EnvironmentMode, EnvironmentSpec, LatticeState
from .phenotype import VoxelBody
from .voxmesh import FACE_CORNER_SIGNS, exposed_faces, neighbor_table, voxel_index_grid


class EmptyBody(Exception):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceFacet:
    owner_voxel: int
    vertices: np.ndarray       # (3, 3)
    outward_normal: np.ndarray  # unit
    area: float


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    facets: list[SurfaceFacet]

    def __len__(self) -> int:
        return len(self.facets)


def _corner_offsets(state: LatticeState) -> tuple[np.ndarray, np.ndarray]:
    """(n, 3axis, 3comp) half-extent vectors toward -axis and +axis."""
    n = state.n_voxels
    half = 0.5 * state.voxel_size
    neg = np.zeros((n, 3, 3))
    pos = np.zeros((n, 3, 3))
    for axis in range(3):
        neg[:, axis, axis] = -half
        pos[:, axis, axis] = half
        for side, out in ((2 * axis, neg), (2 * axis + 1, pos)):
            nb = state.neighbors[:, side]
            has = nb >= 0
            if np.any(has):
                out[has, axis, :] = 0.5 * (
                    state.position[nb[has]] - state.position[has]
                )
    return neg, pos


def extract_surface_mesh(body: VoxelBody, state: LatticeState) -> SurfaceMesh:
    """Deformed triangles of all exposed faces, in (voxel, face) order.

    The state must have been built from the body, so voxel ordering
    agrees.
    """
    cells, lookup = voxel_index_grid(body)
    if len(cells) == 0:
        raise EmptyBody("empty body has no surface")
    nbr = neighbor_table(cells, lookup)
    owner, direction = exposed_faces(nbr)
    neg, pos = _corner_offsets(state)

    facets: list[SurfaceFacet] = []
    for f in range(len(owner)):
        o = int(owner[f])
        signs = FACE_CORNER_SIGNS[direction[f]]
        quad = np.empty((4, 3))
        for q in range(4):
            p = state.position[o].copy()
            for axis in range(3):
                p += pos[o, axis] if signs[q, axis] > 0 else neg[o, axis]
            quad[q] = p
        for tri in ((0, 1, 2), (0, 2, 3)):
            verts = quad[list(tri)]
            cross = np.cross(verts[1] - verts[0], verts[2] - verts[0])
            norm = float(np.linalg.norm(cross))
            if norm <= 0.0:
                continue
            facets.append(
                SurfaceFacet(
                    owner_voxel=o,
                    vertices=verts,
                    outward_normal=cross / norm,
                    area=0.5 * norm,
                )
            )
    return SurfaceMesh(facets=facets)


def facet_drag_force(
    facet: SurfaceFacet,
    voxel_velocity: np.ndarray,
    fluid_density: float,
    drag_coefficient: float,
) -> np.ndarray:
    """Resistive force on one facet given its owner voxel's velocity."""
    if fluid_density <= 0 or drag_coefficient <= 0:
        raise ValueError("fluid parameters must be positive")
    v_n = float(np.dot(voxel_velocity, facet.outward_normal))
    if v_n <= 0.0:
        return np.zeros(3)
    magnitude = 0.5 * fluid_density * drag_coefficient * facet.area * v_n * v_n
    return -magnitude * facet.outward_normal


def apply_drag(mesh: SurfaceMesh, state: LatticeState, env: EnvironmentSpec) -> np.ndarray:
    """Per-voxel drag force: each voxel sums the facets it owns."""
    if env.mode is not EnvironmentMode.WATER:
        raise ValueError("drag applies in water only")
    out = np.zeros((state.n_voxels, 3))
    for facet in mesh.facets:
        out[facet.owner_voxel] += facet_drag_force(
            facet, state.velocity[facet.owner_voxel], env.fluid_density, env.drag_coefficient
        )
    return out
