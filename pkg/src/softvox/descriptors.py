"""Morphological descriptors of an undeformed voxel body.

Symmetry: every 2D slice of the robot's bounding box (taken along each
axis in turn) is scored under six transforms: four reflections (about
the vertical and horizontal center lines and the two diagonals of the
square-padded box) and two half-extent translations.  Each score is the
occupied overlap fraction |T(S) & S| / |S|, so an exactly invariant
slice scores 1.  Scores average over nonempty slices, then over the six
transforms per axis, then over the three axes into one global index.

Branching: one minus the ratio of body volume to convex-hull volume;
zero for convex solids, approaching one for sparse, spread-out shapes.

Complexity: Shannon entropy of discrete surface curvature (per-vertex
angle deficit of the rest-pose mesh), binned uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .phenotype import VoxelBody
from .voxmesh import is_closed, reference_mesh

ENTROPY_BINS = 64
ENTROPY_RANGE = (-2.0 * math.pi, 2.0 * math.pi)


class EmptySlice(Exception):
    pass


class EmptyBody(Exception):
    pass


class OpenMesh(Exception):
    pass


class DegenerateHull(Exception):
    pass


@dataclass(frozen=True)
class SliceSymmetry:
    r_v: float
    r_h: float
    r_pd: float
    r_sd: float
    t_v: float
    t_h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r_v, self.r_h, self.r_pd, self.r_sd, self.t_v, self.t_h])


@dataclass(frozen=True)
class DescriptorSet:
    s_x: float
    s_y: float
    s_z: float
    global_symmetry: float
    branching_index: float
    shape_entropy: float
    body_volume: float
    hull_volume: float


@dataclass(frozen=True, eq=False)
class IndexedMesh:
    """Shared-vertex triangle mesh (rest pose) of a voxel body surface."""

    vertices: np.ndarray   # (v, 3)
    triangles: np.ndarray  # (t, 3) outward wound


def body_mesh(body: VoxelBody, voxel_size: float) -> IndexedMesh:
    vertices, triangles, _ = reference_mesh(body, voxel_size)
    return IndexedMesh(vertices=vertices, triangles=triangles)


def _overlap(transformed: np.ndarray, original: np.ndarray) -> float:
    return float(np.logical_and(transformed, original).sum() / original.sum())


def _shift(grid: np.ndarray, rows: int, cols: int) -> np.ndarray:
    out = np.zeros_like(grid)
    h, w = grid.shape
    src = grid[max(0, -rows): h - max(0, rows), max(0, -cols): w - max(0, cols)]
    out[max(0, rows): h - max(0, -rows), max(0, cols): w - max(0, -cols)] = src
    return out


def slice_symmetry(grid: np.ndarray) -> SliceSymmetry:
    """Six overlap indices for one occupancy slice.

    The array is the slice clipped to the robot's bounding box; diagonal
    reflections act on its square padding, translations shift by half
    the extent (rounded up) and clip rather than wrap.
    """
    grid = np.asarray(grid, dtype=bool)
    if grid.ndim != 2 or not grid.any():
        raise EmptySlice("slice must be 2D with at least one occupied cell")
    h, w = grid.shape

    r_v = _overlap(grid[:, ::-1], grid)
    r_h = _overlap(grid[::-1, :], grid)

    side = max(h, w)
    padded = np.zeros((side, side), dtype=bool)
    padded[:h, :w] = grid
    r_pd = _overlap(padded.T, padded)
    r_sd = _overlap(padded[::-1, ::-1].T, padded)

    t_v = _overlap(_shift(grid, (h + 1) // 2, 0), grid)
    t_h = _overlap(_shift(grid, 0, (w + 1) // 2), grid)
    return SliceSymmetry(r_v=r_v, r_h=r_h, r_pd=r_pd, r_sd=r_sd, t_v=t_v, t_h=t_h)


def axis_and_global_symmetry(body: VoxelBody) -> tuple[float, float, float, float]:
    """(s_x, s_y, s_z, global index) averaged as described above."""
    occupied = body.material != 0
    if not occupied.any():
        raise EmptyBody("no full voxels")
    mins = np.min(np.argwhere(occupied), axis=0)
    maxs = np.max(np.argwhere(occupied), axis=0)
    box = occupied[mins[0]: maxs[0] + 1, mins[1]: maxs[1] + 1, mins[2]: maxs[2] + 1]

    per_axis = []
    for axis in range(3):
        slices = np.moveaxis(box, axis, 0)
        scores = [
            slice_symmetry(s).as_array()
            for s in slices
            if s.any()
        ]
        per_axis.append(float(np.mean(np.mean(scores, axis=0))))
    s_x, s_y, s_z = per_axis
    return s_x, s_y, s_z, float(np.mean(per_axis))


def mesh_volume(mesh: IndexedMesh) -> float:
    """Enclosed volume by the divergence theorem over triangles."""
    if not is_closed(mesh.triangles):
        raise OpenMesh("mesh has unmatched edges")
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    return abs(float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum()) / 6.0)


def convex_hull_volume(points: np.ndarray) -> float:
    """Volume of the 3D convex hull (quickhull)."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 4:
        raise DegenerateHull("need at least 4 points")
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateHull(str(exc)) from exc
    return float(hull.volume)


def _corner_points(body: VoxelBody, voxel_size: float) -> np.ndarray:
    cells = body.full_cells()
    corners = set()
    for i, j, k in cells:
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    corners.add((int(i) + di, int(j) + dj, int(k) + dk))
    return np.array(sorted(corners), dtype=np.float64) * voxel_size


def branching_index(body: VoxelBody, voxel_size: float = 0.01) -> float:
    """1 - body volume / hull volume, clamped into [0, 1)."""
    if body.full_count == 0:
        raise EmptyBody("no full voxels")
    volume = mesh_volume(body_mesh(body, voxel_size))
    hull = convex_hull_volume(_corner_points(body, voxel_size))
    bi = 1.0 - volume / hull
    return min(max(bi, 0.0), math.nextafter(1.0, 0.0))


def shape_entropy(mesh: IndexedMesh) -> float:
    """Entropy (bits) of the per-vertex angle-deficit distribution."""
    if not is_closed(mesh.triangles):
        raise OpenMesh("mesh has unmatched edges")
    angle_sum = np.zeros(len(mesh.vertices))
    v = mesh.vertices
    t = mesh.triangles
    for corner in range(3):
        p = v[t[:, corner]]
        q = v[t[:, (corner + 1) % 3]]
        r = v[t[:, (corner + 2) % 3]]
        e1 = q - p
        e2 = r - p
        cosang = np.einsum("ij,ij->i", e1, e2) / (
            np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        )
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(angle_sum, t[:, corner], ang)
    used = np.zeros(len(mesh.vertices), dtype=bool)
    used[t.ravel()] = True
    deficits = 2.0 * math.pi - angle_sum[used]
    # voxel deficits are multiples of pi/4 and land exactly on bin edges;
    # rounding far below the bin width keeps last-ulp angle noise from
    # flipping bins
    deficits = np.round(deficits, 12)

    lo, hi = ENTROPY_RANGE
    clipped = np.clip(deficits, lo, np.nextafter(hi, lo))
    edges = np.linspace(lo, hi, ENTROPY_BINS + 1)
    counts, _ = np.histogram(clipped, bins=edges)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def compute_descriptors(body: VoxelBody, voxel_size: float = 0.01) -> DescriptorSet:
    """All descriptors of one rest-pose body."""
    s_x, s_y, s_z, global_sym = axis_and_global_symmetry(body)
    mesh = body_mesh(body, voxel_size)
    volume = mesh_volume(mesh)
    hull = convex_hull_volume(_corner_points(body, voxel_size))
    bi = min(max(1.0 - volume / hull, 0.0), math.nextafter(1.0, 0.0))
    return DescriptorSet(
        s_x=s_x,
        s_y=s_y,
        s_z=s_z,
        global_symmetry=global_sym,
        branching_index=bi,
        shape_entropy=shape_entropy(mesh),
        body_volume=volume,
        hull_volume=hull,
    )
