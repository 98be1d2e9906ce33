"""softvox: an evolutionary workbench for voxel soft robots.

Walking and swimming machines are evolved as voxel lattices driven by
sinusoidal volumetric actuation, scored under a three-objective Pareto
scheme, and analyzed with morphological descriptors and rank statistics.
The package is importable as a library; the FastAPI service in
softvox.service and the thin CLI in softvox.cli wrap it for operation.
"""

__version__ = "0.1.0"
