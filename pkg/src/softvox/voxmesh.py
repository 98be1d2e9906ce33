"""Surface geometry of voxel bodies.

Each full voxel face with no full neighbor is exposed and contributes two
triangles.  The same face enumeration feeds two consumers with different
vertex semantics:

  * the drag model, which needs per-facet geometry recomputed from the
    deformed lattice every step (vertices live per facet, not shared);
  * the shape descriptors, which need a watertight rest-pose mesh with
    shared vertices (lattice corner points) for volumes and curvature.

Direction indexing is 0:-x 1:+x 2:-y 3:+y 4:-z 5:+z throughout.
"""

from __future__ import annotations

import numpy as np

from .phenotype import VoxelBody

DIRECTIONS = np.array(
    [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]],
    dtype=np.int64,
)


def _corner_sign_table() -> np.ndarray:
    """(6, 4, 3) corner signs per face direction, wound outward-CCW.

    For axis a the tangent axes are taken in cyclic order (a+1, a+2) so
    that tangent1 x tangent2 = +axis; the positive face walks the quad
    counter-clockwise seen from outside, the negative face in reverse.
    """
    table = np.zeros((6, 4, 3), dtype=np.int64)
    quad_pos = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    for axis in range(3):
        t1, t2 = (axis + 1) % 3, (axis + 2) % 3
        for sign_idx, sign in ((0, -1), (1, 1)):
            quad = quad_pos if sign == 1 else list(reversed(quad_pos))
            for q, (s1, s2) in enumerate(quad):
                corner = [0, 0, 0]
                corner[axis] = sign
                corner[t1] = s1
                corner[t2] = s2
                table[2 * axis + sign_idx, q] = corner
    return table


FACE_CORNER_SIGNS = _corner_sign_table()

# the same quads with corners bit-coded as (x>0) | (y>0)<<1 | (z>0)<<2,
# for kernels that precompute all eight corners of a voxel
FACE_CORNER_IDX = (
    ((FACE_CORNER_SIGNS > 0).astype(np.int64) * np.array([1, 2, 4])).sum(axis=2)
)


def voxel_index_grid(body: VoxelBody) -> tuple[np.ndarray, np.ndarray]:
    """Full-cell coordinates (n, 3) and a dense cell -> voxel-id lookup."""
    cells = body.full_cells()
    lookup = np.full(body.dims, -1, dtype=np.int64)
    lookup[cells[:, 0], cells[:, 1], cells[:, 2]] = np.arange(len(cells))
    return cells, lookup


def neighbor_table(cells: np.ndarray, lookup: np.ndarray) -> np.ndarray:
    """(n, 6) neighbor voxel ids per direction, -1 where exposed."""
    dims = lookup.shape
    n = len(cells)
    nbr = np.full((n, 6), -1, dtype=np.int64)
    for d in range(6):
        shifted = cells + DIRECTIONS[d]
        ok = np.all((shifted >= 0) & (shifted < np.array(dims)), axis=1)
        idx = np.where(ok)[0]
        nbr[idx, d] = lookup[shifted[idx, 0], shifted[idx, 1], shifted[idx, 2]]
    return nbr


def exposed_faces(nbr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Owners and directions of all exposed faces, in (voxel, dir) order."""
    owner, direction = np.where(nbr < 0)
    return owner.astype(np.int64), direction.astype(np.int64)


def reference_mesh(body: VoxelBody, voxel_size: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Watertight rest-pose surface mesh with shared corner vertices.

    Returns (vertices (v, 3), triangles (t, 3) index triples wound
    outward, owner voxel id per triangle).  Vertices sit on the corner
    lattice, i.e. cell (i, j, k) spans corners (i..i+1, j..j+1, k..k+1)
    scaled by voxel_size.
    """
    cells, lookup = voxel_index_grid(body)
    if len(cells) == 0:
        raise ValueError("empty body has no surface")
    nbr = neighbor_table(cells, lookup)
    owner, direction = exposed_faces(nbr)

    corner_ids: dict[tuple[int, int, int], int] = {}
    vertices: list[tuple[int, int, int]] = []
    triangles: list[tuple[int, int, int]] = []
    tri_owner: list[int] = []

    def corner(key: tuple[int, int, int]) -> int:
        vid = corner_ids.get(key)
        if vid is None:
            vid = len(vertices)
            corner_ids[key] = vid
            vertices.append(key)
        return vid

    for f in range(len(owner)):
        cell = cells[owner[f]]
        signs = FACE_CORNER_SIGNS[direction[f]]
        quad = [
            corner((cell[0] + (s[0] + 1) // 2, cell[1] + (s[1] + 1) // 2, cell[2] + (s[2] + 1) // 2))
            for s in signs
        ]
        triangles.append((quad[0], quad[1], quad[2]))
        triangles.append((quad[0], quad[2], quad[3]))
        tri_owner.extend((int(owner[f]), int(owner[f])))

    verts = np.array(vertices, dtype=np.float64) * voxel_size
    return verts, np.array(triangles, dtype=np.int64), np.array(tri_owner, dtype=np.int64)


def is_closed(triangles: np.ndarray) -> bool:
    """True when every directed edge is matched by its reverse."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            counts[(int(u), int(v))] = counts.get((int(u), int(v)), 0) + 1
    return all(counts.get((v, u), 0) == n for (u, v), n in counts.items())
